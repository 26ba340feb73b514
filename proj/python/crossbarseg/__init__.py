"""Crossbar patch segmentation: orthogonal non-squared patches, cross-trained
sub-models, weighted-vote inference and region metrics."""

from ._core import (
    SubModel,
    basic_sample,
    centroid_distance,
    cover_resample,
    default_vote_weights,
    dice,
    extract_patch,
    generate_phantom,
    hausdorff,
    region_stats,
    ring_radii,
    segment,
    tpf,
    train_cascade,
)

__all__ = [
    "SubModel",
    "basic_sample",
    "centroid_distance",
    "cover_resample",
    "default_vote_weights",
    "dice",
    "extract_patch",
    "generate_phantom",
    "hausdorff",
    "region_stats",
    "ring_radii",
    "segment",
    "tpf",
    "train_cascade",
]

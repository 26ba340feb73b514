#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "crossbar/dense_eval.hpp"
#include "crossbar/image.hpp"
#include "crossbar/submodel.hpp"

namespace crossbar {

struct RoiRect {
    int row0 = 0, col0 = 0;  // inclusive
    int row1 = 0, col1 = 0;  // exclusive
};

struct VoteConfig {
    int stride = 1;
    std::vector<double> weights;  // empty = defaults for the ensemble size
    std::optional<RoiRect> roi;
    bool keep_largest_component = false;  // off by default: raw voted mask
    int threads = 1;
};

// Per-model weights for an ensemble laid out V^1..V^T, H^1..H^T: the final
// round of each orientation gets 1.5, everything else 1.0.
std::vector<double> default_vote_weights(size_t n_models);

// Weighted two-class majority; exact ties resolve to non-tumor (0).
int weighted_vote(const std::vector<std::uint8_t>& labels, const std::vector<double>& weights);

// Per-pixel weighted_vote across label maps.
BinaryMask combine_label_maps(const std::vector<BinaryMask>& maps,
                              const std::vector<double>& weights);

// Per-pixel sum of the weights of maps voting tumor.
Image2D weighted_score_map(const std::vector<BinaryMask>& maps, const std::vector<double>& weights);

// Center-pixel classification of every pixel on the stride grid (inside the
// roi if set); off-grid pixels copy the nearest evaluated pixel's label and
// pixels outside the roi are non-tumor.
BinaryMask segment_single(const SubModel& model, const Image2D& image, const VoteConfig& config);

struct SegmentationResult {
    BinaryMask mask;
    std::vector<BinaryMask> votes;  // one per model, post stride/roi fill
    Image2D score;                  // weighted tumor score per pixel
};

SegmentationResult segment_ensemble(const std::vector<SubModel>& models, const Image2D& image,
                                    const VoteConfig& config);

}  // namespace crossbar

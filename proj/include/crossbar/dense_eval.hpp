#pragma once

#include "crossbar/image.hpp"
#include "crossbar/submodel.hpp"

namespace crossbar {

// Per-pixel logit planes for one sub-model over a whole image.
struct ScoreMaps {
    Image2D background;
    Image2D tumor;
};

// Evaluates a sub-model at every pixel of an image in one pass instead of
// one patch forward per pixel. The image is edge-padded so each output pixel
// sees exactly the window a centered patch would, the first two convs run on
// the padded plane, and each stride-2 pool becomes a stride-1 pool followed
// by a phase split, leaving 16 small streams that carry (origin, step)
// bookkeeping back to pixel coordinates. Equivalent to the patch forward up
// to float reassociation in the matrix products.
class DenseEvaluator {
public:
    explicit DenseEvaluator(const SubModel& model, int threads = 1);

    ScoreMaps logits(const Image2D& image) const;

    // softmax(logits) tumor channel per pixel.
    Image2D tumor_probability(const Image2D& image) const;

    // Per-pixel argmax labels (1 = tumor; ties go to non-tumor).
    BinaryMask label_map(const Image2D& image) const;

private:
    const SubModel* model_;
    int threads_;
};

}  // namespace crossbar

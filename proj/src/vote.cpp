#include "crossbar/vote.hpp"

#include <algorithm>
#include <stdexcept>

#include "crossbar/geometry.hpp"
#include "crossbar/threading.hpp"

namespace crossbar {

std::vector<double> default_vote_weights(size_t n_models) {
    if (n_models == 0) throw std::invalid_argument("default_vote_weights: empty ensemble");
    if (n_models % 2 != 0)
        throw std::invalid_argument("default_vote_weights: expected an even model count (V and H rounds)");
    std::vector<double> w(n_models, 1.0);
    w[n_models / 2 - 1] = 1.5;  // last vertical round
    w[n_models - 1] = 1.5;      // last horizontal round
    return w;
}

int weighted_vote(const std::vector<std::uint8_t>& labels, const std::vector<double>& weights) {
    if (labels.empty()) throw std::invalid_argument("weighted_vote: no votes");
    if (labels.size() != weights.size())
        throw std::invalid_argument("weighted_vote: " + std::to_string(labels.size()) +
                                    " labels vs " + std::to_string(weights.size()) + " weights");
    double tumor = 0.0, other = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (!(weights[i] > 0.0)) throw std::invalid_argument("weighted_vote: weights must be positive");
        (labels[i] ? tumor : other) += weights[i];
    }
    return tumor > other ? 1 : 0;
}

namespace {

void check_maps(const std::vector<BinaryMask>& maps, const std::vector<double>& weights) {
    if (maps.empty()) throw std::invalid_argument("vote: no label maps");
    if (maps.size() != weights.size())
        throw std::invalid_argument("vote: " + std::to_string(maps.size()) + " maps vs " +
                                    std::to_string(weights.size()) + " weights");
    for (const auto& m : maps)
        if (!m.same_dims(maps.front())) throw std::invalid_argument("vote: label map dims differ");
    for (double w : weights)
        if (!(w > 0.0)) throw std::invalid_argument("vote: weights must be positive");
}

}  // namespace

BinaryMask combine_label_maps(const std::vector<BinaryMask>& maps,
                              const std::vector<double>& weights) {
    check_maps(maps, weights);
    double total = 0.0;
    for (double w : weights) total += w;
    BinaryMask out(maps.front().rows, maps.front().cols);
    for (size_t i = 0; i < out.v.size(); ++i) {
        double tumor = 0.0;
        for (size_t m = 0; m < maps.size(); ++m)
            if (maps[m].v[i]) tumor += weights[m];
        out.v[i] = tumor > total - tumor ? 1 : 0;
    }
    return out;
}

Image2D weighted_score_map(const std::vector<BinaryMask>& maps, const std::vector<double>& weights) {
    check_maps(maps, weights);
    Image2D score(maps.front().rows, maps.front().cols);
    for (size_t i = 0; i < score.pix.size(); ++i) {
        double tumor = 0.0;
        for (size_t m = 0; m < maps.size(); ++m)
            if (maps[m].v[i]) tumor += weights[m];
        score.pix[i] = static_cast<float>(tumor);
    }
    return score;
}

namespace {

// Nearest stride-grid coordinate within [0, extent); exact midpoints round
// down so the fill is deterministic.
int nearest_grid(int x, int origin, int stride, int extent) {
    const int last = origin + ((extent - 1 - origin) / stride) * stride;
    if (x <= origin) return origin;
    const int lo = origin + ((x - origin) / stride) * stride;
    const int hi = lo + stride;
    const int pick = (hi <= last && hi - x < x - lo) ? hi : lo;
    return std::min(pick, last);
}

BinaryMask apply_stride_roi(const BinaryMask& dense, const VoteConfig& config) {
    RoiRect roi{0, 0, dense.rows, dense.cols};
    if (config.roi) {
        roi = *config.roi;
        if (roi.row0 < 0 || roi.col0 < 0 || roi.row1 > dense.rows || roi.col1 > dense.cols ||
            roi.row0 >= roi.row1 || roi.col0 >= roi.col1)
            throw std::invalid_argument("segment: roi outside image");
    }
    if (config.stride == 1 && !config.roi) return dense;

    BinaryMask out(dense.rows, dense.cols);
    for (int r = roi.row0; r < roi.row1; ++r) {
        const int gr = nearest_grid(r, roi.row0, config.stride, roi.row1);
        for (int c = roi.col0; c < roi.col1; ++c)
            out.at(r, c) = dense.at(gr, nearest_grid(c, roi.col0, config.stride, roi.col1));
    }
    return out;
}

}  // namespace

BinaryMask segment_single(const SubModel& model, const Image2D& image, const VoteConfig& config) {
    if (config.stride < 1) throw std::invalid_argument("segment: stride must be >= 1");
    DenseEvaluator eval(model, config.threads);
    BinaryMask result = apply_stride_roi(eval.label_map(image), config);
    if (config.keep_largest_component) result = largest_component_mask(result);
    return result;
}

SegmentationResult segment_ensemble(const std::vector<SubModel>& models, const Image2D& image,
                                    const VoteConfig& config) {
    if (models.empty()) throw std::invalid_argument("segment: empty ensemble");
    if (config.stride < 1) throw std::invalid_argument("segment: stride must be >= 1");
    std::vector<double> weights =
        config.weights.empty() ? default_vote_weights(models.size()) : config.weights;
    if (weights.size() != models.size())
        throw std::invalid_argument("segment: " + std::to_string(weights.size()) +
                                    " weights for " + std::to_string(models.size()) + " models");

    SegmentationResult res;
    res.votes.resize(models.size());
    parallel_for(static_cast<long>(models.size()), config.threads, [&](long b, long e, int) {
        for (long m = b; m < e; ++m) {
            DenseEvaluator eval(models[m], 1);
            res.votes[m] = apply_stride_roi(eval.label_map(image), config);
        }
    });
    res.mask = combine_label_maps(res.votes, weights);
    if (config.keep_largest_component) res.mask = largest_component_mask(res.mask);
    res.score = weighted_score_map(res.votes, weights);
    return res;
}

}  // namespace crossbar

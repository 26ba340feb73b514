#include "crossbar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace crossbar {

namespace {

void check_dims(const BinaryMask& a, const BinaryMask& b, const char* what) {
    if (!a.same_dims(b))
        throw std::invalid_argument(std::string(what) + ": dimension mismatch, " +
                                    std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                                    std::to_string(b.rows) + "x" + std::to_string(b.cols));
}

std::pair<double, double> centroid(const BinaryMask& m) {
    double sr = 0.0, sc = 0.0;
    long n = 0;
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c)
            if (m.at(r, c)) {
                sr += r;
                sc += c;
                ++n;
            }
    return {sr / n, sc / n};
}

// Largest of the per-point minimum squared distances from `from` to `to`.
std::int64_t directed_sq(const std::vector<std::pair<int, int>>& from,
                         const std::vector<std::pair<int, int>>& to) {
    std::int64_t worst = 0;
    for (const auto& [pr, pc] : from) {
        std::int64_t best = std::numeric_limits<std::int64_t>::max();
        for (const auto& [qr, qc] : to) {
            const std::int64_t dr = pr - qr, dc = pc - qc;
            const std::int64_t d = dr * dr + dc * dc;
            if (d < best) best = d;
            if (best == 0) break;
        }
        if (best > worst) worst = best;
    }
    return worst;
}

}  // namespace

double dice(const BinaryMask& pred, const BinaryMask& truth) {
    check_dims(pred, truth, "dice");
    long inter = 0, np = 0, ng = 0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        np += pred.v[i] != 0;
        ng += truth.v[i] != 0;
        inter += pred.v[i] != 0 && truth.v[i] != 0;
    }
    if (np + ng == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

double tpf(const BinaryMask& pred, const BinaryMask& truth) {
    check_dims(pred, truth, "tpf");
    long inter = 0, ng = 0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        ng += truth.v[i] != 0;
        inter += pred.v[i] != 0 && truth.v[i] != 0;
    }
    if (ng == 0) throw std::invalid_argument("tpf: undefined TPF for empty truth mask");
    return static_cast<double>(inter) / static_cast<double>(ng);
}

std::vector<std::pair<int, int>> boundary_pixels(const BinaryMask& mask) {
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < mask.rows; ++r)
        for (int c = 0; c < mask.cols; ++c) {
            if (!mask.at(r, c)) continue;
            const bool edge = r == 0 || !mask.at(r - 1, c) || r == mask.rows - 1 ||
                              !mask.at(r + 1, c) || c == 0 || !mask.at(r, c - 1) ||
                              c == mask.cols - 1 || !mask.at(r, c + 1);
            if (edge) out.emplace_back(r, c);
        }
    return out;
}

double hausdorff(const BinaryMask& pred, const BinaryMask& truth) {
    check_dims(pred, truth, "hausdorff");
    const auto bp = boundary_pixels(pred);
    const auto bg = boundary_pixels(truth);
    if (bp.empty() || bg.empty())
        throw std::invalid_argument("hausdorff: undefined for an empty mask");
    return std::sqrt(static_cast<double>(std::max(directed_sq(bp, bg), directed_sq(bg, bp))));
}

double centroid_distance(const BinaryMask& pred, const BinaryMask& truth) {
    check_dims(pred, truth, "centroid_distance");
    if (pred.foreground_count() == 0 || truth.foreground_count() == 0)
        throw std::invalid_argument("centroid_distance: undefined for an empty mask");
    const auto [pr, pc] = centroid(pred);
    const auto [gr, gc] = centroid(truth);
    return std::hypot(pr - gr, pc - gc);
}

MetricSummary summarize(const std::vector<MetricRecord>& records) {
    if (records.empty()) throw std::invalid_argument("summarize: no records");
    MetricSummary s;
    s.count = records.size();
    const int bins = static_cast<int>(std::lround(1.0 / kDiceHistogramBinWidth));
    s.dice_histogram.assign(bins, 0);
    // Boundary metrics can be undefined (recorded as NaN) for images with an
    // empty prediction; their means cover the defined entries only.
    long hd_n = 0, cd_n = 0;
    for (const auto& r : records) {
        s.mean_dice += r.dice;
        s.mean_tpf += r.tpf;
        if (std::isfinite(r.hausdorff)) {
            s.mean_hausdorff += r.hausdorff;
            ++hd_n;
        }
        if (std::isfinite(r.centroid_distance)) {
            s.mean_centroid_distance += r.centroid_distance;
            ++cd_n;
        }
        s.dice_values.push_back(r.dice);
        int bin = static_cast<int>(r.dice / kDiceHistogramBinWidth);
        ++s.dice_histogram[std::clamp(bin, 0, bins - 1)];
    }
    const double n = static_cast<double>(s.count);
    s.mean_dice /= n;
    s.mean_tpf /= n;
    s.mean_hausdorff = hd_n ? s.mean_hausdorff / hd_n : 0.0;
    s.mean_centroid_distance = cd_n ? s.mean_centroid_distance / cd_n : 0.0;
    return s;
}

}  // namespace crossbar

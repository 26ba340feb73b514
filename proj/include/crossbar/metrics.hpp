#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crossbar/image.hpp"

namespace crossbar {

// Per-image segmentation scores against ground truth.
struct MetricRecord {
    std::string image_id;
    double dice = 0.0;
    double tpf = 0.0;
    double hausdorff = 0.0;
    double centroid_distance = 0.0;
};

// 2 * |P n G| / (|P| + |G|); defined as 1.0 when both masks are empty.
double dice(const BinaryMask& pred, const BinaryMask& truth);

// |P n G| / |G|; empty truth is undefined.
double tpf(const BinaryMask& pred, const BinaryMask& truth);

// Foreground pixels with a 4-neighbor outside the foreground (the image
// border counts as background).
std::vector<std::pair<int, int>> boundary_pixels(const BinaryMask& mask);

// Symmetric max-min Euclidean distance between the two boundaries.
double hausdorff(const BinaryMask& pred, const BinaryMask& truth);

// Euclidean distance between foreground centroids.
double centroid_distance(const BinaryMask& pred, const BinaryMask& truth);

constexpr double kDiceHistogramBinWidth = 0.02;

struct MetricSummary {
    size_t count = 0;
    double mean_dice = 0.0;
    double mean_tpf = 0.0;
    double mean_hausdorff = 0.0;
    double mean_centroid_distance = 0.0;
    std::vector<double> dice_values;        // raw, in record order
    std::vector<long> dice_histogram;       // fixed 0.02-wide bins over [0, 1]
};

MetricSummary summarize(const std::vector<MetricRecord>& records);

}  // namespace crossbar

#pragma once

#include <cstdint>
#include <vector>

#include "crossbar/image.hpp"

namespace crossbar {

enum class Orientation : std::uint8_t { vertical, horizontal };

enum class PatchLabel : std::uint8_t { non_tumor = 0, tumor = 1, unlabeled = 2 };

inline Orientation opposite(Orientation o) {
    return o == Orientation::vertical ? Orientation::horizontal : Orientation::vertical;
}

inline const char* to_string(Orientation o) {
    return o == Orientation::vertical ? "vertical" : "horizontal";
}

inline const char* to_string(PatchLabel l) {
    switch (l) {
        case PatchLabel::non_tumor: return "non_tumor";
        case PatchLabel::tumor: return "tumor";
        default: return "unlabeled";
    }
}

// Default crossbar patch dims: tall 100x20 vertical, wide 20x100 horizontal.
constexpr int kPatchLong = 100;
constexpr int kPatchShort = 20;

inline int default_patch_height(Orientation o) { return o == Orientation::vertical ? kPatchLong : kPatchShort; }
inline int default_patch_width(Orientation o) { return o == Orientation::vertical ? kPatchShort : kPatchLong; }

// One patch to extract: orientation, center pixel, dims, center-pixel label.
struct PatchSpec {
    Orientation orientation = Orientation::vertical;
    int row = 0;
    int col = 0;
    int height = kPatchLong;
    int width = kPatchShort;
    PatchLabel label = PatchLabel::unlabeled;
};

// Extracted intensity window; pixels shape is exactly (height, width).
struct Patch {
    PatchSpec spec;
    std::vector<float> pixels;  // row-major height x width
};

// Region summary driving the ring geometry. r is the incircle radius (max of
// the Euclidean distance transform), R bounds the negative-sampling band.
struct TumorStats {
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    double incircle_radius = 0.0;       // r
    double circumcircle_radius = 0.0;   // max centroid-to-foreground distance
    double outer_radius = 0.0;          // R = 1.5 * circumcircle_radius
    long area = 0;                      // pixels in the largest component
};

struct SamplingParams {
    double beta = 3.5;
    double tumor_fraction = 1.0 / 3.0;
    double arc_step = 3.0;      // pixels of arc length between ring centers
    int row_stride = 3;         // cover re-sampling stride along the long axis
    std::uint64_t seed = 0;
};

// Largest-component statistics of a non-empty mask. Degenerate regions clamp
// r and the circumcircle radius to >= 1 so the ring formulas stay defined.
TumorStats region_stats(const BinaryMask& mask);

// Keeps only the largest 4-connected foreground component.
BinaryMask largest_component_mask(const BinaryMask& mask);

// alpha_i = exp(-beta * i / (r/2)); strictly decreasing in i, alpha_0 = 1.
double alpha(int i, double r, double beta);

// Ring radii chi_i = (1 - alpha_i) * r + alpha_i * R for i = 0 .. floor(r/2).
// chi_0 = R; strictly decreasing with strictly shrinking gaps toward the tumor.
std::vector<double> ring_radii(const TumorStats& stats, const SamplingParams& params);

// Basic sampling strategy: tumor-labeled centers at a seeded uniform subset of
// round(tumor_fraction * area) foreground pixels, plus non-tumor centers walked
// along each ring at arc_step spacing (rounded, deduplicated, dropped when
// outside the image or on foreground).
std::vector<PatchSpec> basic_sample(int image_rows, int image_cols, const BinaryMask& mask,
                                    Orientation orientation, const SamplingParams& params);

// Cover re-sampling: blankets a mis-segmented patch with opposite-orientation
// patches centered on its outer and center columns (or rows), stepping
// row_stride pixels along the long axis. Centers are clamped to the image.
std::vector<PatchSpec> cover_resample(const PatchSpec& misregion, const BinaryMask& mask,
                                      const SamplingParams& params);

// Same cover pattern but with an explicit output orientation; the
// self-improvement mode re-samples in the model's own orientation.
std::vector<PatchSpec> cover_resample_oriented(const PatchSpec& misregion, Orientation out_orientation,
                                               const BinaryMask& mask, const SamplingParams& params);

// Window spans rows [row - h/2, row + h/2 - 1] and cols [col - w/2, col + w/2 - 1];
// out-of-image pixels replicate the nearest edge pixel.
Patch extract_patch(const Image2D& image, const PatchSpec& spec);

// extract_patch into a caller-provided buffer of spec.height * spec.width.
void extract_patch_into(const Image2D& image, const PatchSpec& spec, float* out);

}  // namespace crossbar

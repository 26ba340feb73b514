#include "crossbar/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "crossbar/rng.hpp"

namespace crossbar {

namespace {

// Largest 4-connected foreground component, flood fill.
std::vector<std::uint32_t> largest_component(const BinaryMask& mask, long& area_out) {
    const int rows = mask.rows, cols = mask.cols;
    std::vector<std::uint32_t> best, current, stack;
    std::vector<std::uint8_t> seen(mask.size(), 0);
    for (size_t start = 0; start < mask.size(); ++start) {
        if (!mask.v[start] || seen[start]) continue;
        current.clear();
        stack.clear();
        stack.push_back(static_cast<std::uint32_t>(start));
        seen[start] = 1;
        while (!stack.empty()) {
            const std::uint32_t idx = stack.back();
            stack.pop_back();
            current.push_back(idx);
            const int r = static_cast<int>(idx) / cols, c = static_cast<int>(idx) % cols;
            const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (auto& [nr, nc] : nbr) {
                if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                const size_t nidx = static_cast<size_t>(nr) * cols + nc;
                if (mask.v[nidx] && !seen[nidx]) {
                    seen[nidx] = 1;
                    stack.push_back(static_cast<std::uint32_t>(nidx));
                }
            }
        }
        if (current.size() > best.size()) best.swap(current);
    }
    area_out = static_cast<long>(best.size());
    return best;
}

// Exact squared Euclidean distance transform, Felzenszwalb-Huttenlocher
// lower-envelope scan. dist[i] = squared distance to the nearest zero pixel.
void edt_1d(const double* f, double* d, int n, int* v, double* z) {
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            s = ((f[q] + q * (double)q) - (f[v[k]] + v[k] * (double)v[k])) / (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

std::vector<double> squared_distance_transform(const BinaryMask& mask) {
    const int rows = mask.rows, cols = mask.cols;
    const double inf = 1e18;
    std::vector<double> dist(mask.size());
    for (size_t i = 0; i < mask.size(); ++i) dist[i] = mask.v[i] ? inf : 0.0;

    const int nmax = std::max(rows, cols);
    std::vector<double> f(nmax), d(nmax), z(nmax + 1);
    std::vector<int> v(nmax);

    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) f[r] = dist[static_cast<size_t>(r) * cols + c];
        edt_1d(f.data(), d.data(), rows, v.data(), z.data());
        for (int r = 0; r < rows; ++r) dist[static_cast<size_t>(r) * cols + c] = d[r];
    }
    for (int r = 0; r < rows; ++r) {
        double* row = dist.data() + static_cast<size_t>(r) * cols;
        std::copy(row, row + cols, f.data());
        edt_1d(f.data(), d.data(), cols, v.data(), z.data());
        std::copy(d.data(), d.data() + cols, row);
    }
    return dist;
}

}  // namespace

BinaryMask largest_component_mask(const BinaryMask& mask) {
    long area = 0;
    const std::vector<std::uint32_t> comp = largest_component(mask, area);
    BinaryMask out(mask.rows, mask.cols);
    for (auto idx : comp) out.v[idx] = 1;
    return out;
}

TumorStats region_stats(const BinaryMask& mask) {
    long area = 0;
    const std::vector<std::uint32_t> comp = largest_component(mask, area);
    if (comp.empty()) throw std::invalid_argument("region_stats: empty region");

    TumorStats s;
    s.area = area;
    double sr = 0.0, sc = 0.0;
    for (std::uint32_t idx : comp) {
        sr += static_cast<double>(idx / mask.cols);
        sc += static_cast<double>(idx % mask.cols);
    }
    s.centroid_row = sr / static_cast<double>(area);
    s.centroid_col = sc / static_cast<double>(area);

    const std::vector<double> dist2 = squared_distance_transform(mask);
    double rmax2 = 0.0;
    double cmax2 = 0.0;
    for (std::uint32_t idx : comp) {
        rmax2 = std::max(rmax2, dist2[idx]);
        const double dr = static_cast<double>(idx / mask.cols) - s.centroid_row;
        const double dc = static_cast<double>(idx % mask.cols) - s.centroid_col;
        cmax2 = std::max(cmax2, dr * dr + dc * dc);
    }
    // A mask with no background at all leaves the transform saturated; fall
    // back to the image extent.
    double r = std::sqrt(rmax2);
    if (r > std::max(mask.rows, mask.cols)) r = static_cast<double>(std::max(mask.rows, mask.cols));

    s.incircle_radius = std::max(1.0, r);
    s.circumcircle_radius = std::max(1.0, std::sqrt(cmax2));
    s.outer_radius = 1.5 * s.circumcircle_radius;
    return s;
}

double alpha(int i, double r, double beta) {
    if (r <= 0.0) throw std::invalid_argument("alpha: invalid radius");
    if (i < 0) throw std::invalid_argument("alpha: index must be >= 0");
    if (beta <= 0.0) throw std::invalid_argument("alpha: beta must be > 0");
    return std::exp(-beta * static_cast<double>(i) / (r / 2.0));
}

std::vector<double> ring_radii(const TumorStats& stats, const SamplingParams& params) {
    const double r = stats.incircle_radius;
    const double R = stats.outer_radius;
    const int imax = static_cast<int>(std::floor(r / 2.0));
    std::vector<double> chi;
    chi.reserve(imax + 1);
    for (int i = 0; i <= imax; ++i) {
        const double a = alpha(i, r, params.beta);
        chi.push_back((1.0 - a) * r + a * R);
    }
    return chi;
}

std::vector<PatchSpec> basic_sample(int image_rows, int image_cols, const BinaryMask& mask,
                                    Orientation orientation, const SamplingParams& params) {
    if (mask.rows != image_rows || mask.cols != image_cols)
        throw std::invalid_argument("basic_sample: mask dims do not match image dims");

    const TumorStats stats = region_stats(mask);
    const int h = default_patch_height(orientation);
    const int w = default_patch_width(orientation);

    std::vector<PatchSpec> specs;

    // Tumor centers: seeded uniform subset over all foreground pixels.
    std::vector<std::uint32_t> fg;
    fg.reserve(static_cast<size_t>(stats.area));
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask.v[i]) fg.push_back(static_cast<std::uint32_t>(i));

    const long want = std::lround(params.tumor_fraction * static_cast<double>(fg.size()));
    const size_t n_tumor = std::min<size_t>(fg.size(), static_cast<size_t>(std::max<long>(want, 0)));

    Rng rng(params.seed);
    // Partial Fisher-Yates: the first n_tumor entries are the sample.
    for (size_t i = 0; i < n_tumor; ++i) {
        const size_t j = i + static_cast<size_t>(rng.below(fg.size() - i));
        std::swap(fg[i], fg[j]);
    }
    for (size_t i = 0; i < n_tumor; ++i) {
        PatchSpec s;
        s.orientation = orientation;
        s.row = static_cast<int>(fg[i] / mask.cols);
        s.col = static_cast<int>(fg[i] % mask.cols);
        s.height = h;
        s.width = w;
        s.label = PatchLabel::tumor;
        specs.push_back(s);
    }

    // Non-tumor centers on the rings, arc_step pixels of arc length apart.
    std::set<std::pair<int, int>> taken;
    for (const double chi : ring_radii(stats, params)) {
        if (chi <= 0.0) continue;
        const double dtheta = params.arc_step / chi;
        for (double theta = 0.0; theta < 2.0 * M_PI; theta += dtheta) {
            const int pr = static_cast<int>(std::lround(stats.centroid_row + chi * std::sin(theta)));
            const int pc = static_cast<int>(std::lround(stats.centroid_col + chi * std::cos(theta)));
            if (pr < 0 || pr >= image_rows || pc < 0 || pc >= image_cols) continue;
            if (mask.at(pr, pc)) continue;
            if (!taken.insert({pr, pc}).second) continue;
            PatchSpec s;
            s.orientation = orientation;
            s.row = pr;
            s.col = pc;
            s.height = h;
            s.width = w;
            s.label = PatchLabel::non_tumor;
            specs.push_back(s);
        }
    }
    return specs;
}

std::vector<PatchSpec> cover_resample_oriented(const PatchSpec& misregion, Orientation out_orientation,
                                               const BinaryMask& mask, const SamplingParams& params) {
    if (params.row_stride < 1) throw std::invalid_argument("cover_resample: row_stride must be >= 1");

    const int h = misregion.height, w = misregion.width;
    const int cr = misregion.row, cc = misregion.col;

    // The misregion's long axis gets stride-step positions starting at its low
    // edge; the short axis gets the two outer lines plus the center line.
    const bool long_is_rows = h >= w;
    const int long_dim = long_is_rows ? h : w;
    const int short_dim = long_is_rows ? w : h;
    const int long_c = long_is_rows ? cr : cc;
    const int short_c = long_is_rows ? cc : cr;

    std::vector<int> short_pos = {short_c - short_dim / 2, short_c, short_c + short_dim / 2 - 1};
    std::sort(short_pos.begin(), short_pos.end());
    short_pos.erase(std::unique(short_pos.begin(), short_pos.end()), short_pos.end());

    const int steps = (long_dim + params.row_stride - 1) / params.row_stride;

    const int out_h = out_orientation == misregion.orientation ? h : w;
    const int out_w = out_orientation == misregion.orientation ? w : h;

    std::vector<PatchSpec> specs;
    std::set<std::pair<int, int>> taken;
    for (int sp : short_pos) {
        for (int k = 0; k < steps; ++k) {
            int lp = long_c - long_dim / 2 + k * params.row_stride;
            int pr = long_is_rows ? lp : sp;
            int pc = long_is_rows ? sp : lp;
            pr = std::clamp(pr, 0, mask.rows - 1);
            pc = std::clamp(pc, 0, mask.cols - 1);
            if (!taken.insert({pr, pc}).second) continue;
            PatchSpec s;
            s.orientation = out_orientation;
            s.row = pr;
            s.col = pc;
            s.height = out_h;
            s.width = out_w;
            s.label = mask.at(pr, pc) ? PatchLabel::tumor : PatchLabel::non_tumor;
            specs.push_back(s);
        }
    }
    return specs;
}

std::vector<PatchSpec> cover_resample(const PatchSpec& misregion, const BinaryMask& mask,
                                      const SamplingParams& params) {
    return cover_resample_oriented(misregion, opposite(misregion.orientation), mask, params);
}

void extract_patch_into(const Image2D& image, const PatchSpec& spec, float* out) {
    if (spec.row < 0 || spec.row >= image.rows || spec.col < 0 || spec.col >= image.cols)
        throw std::out_of_range("extract_patch: center out of bounds");
    const int r0 = spec.row - spec.height / 2;
    const int c0 = spec.col - spec.width / 2;
    for (int i = 0; i < spec.height; ++i) {
        const int r = std::clamp(r0 + i, 0, image.rows - 1);
        const float* src = image.pix.data() + static_cast<size_t>(r) * image.cols;
        float* dst = out + static_cast<size_t>(i) * spec.width;
        for (int j = 0; j < spec.width; ++j) {
            const int c = std::clamp(c0 + j, 0, image.cols - 1);
            dst[j] = src[c];
        }
    }
}

Patch extract_patch(const Image2D& image, const PatchSpec& spec) {
    Patch p;
    p.spec = spec;
    p.pixels.resize(static_cast<size_t>(spec.height) * spec.width);
    extract_patch_into(image, spec, p.pixels.data());
    return p;
}

}  // namespace crossbar

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace crossbar {

// 2-D scalar grid, row-major, intensities nominally in [0,1].
struct Image2D {
    int rows = 0;
    int cols = 0;
    std::vector<float> pix;

    Image2D() = default;
    Image2D(int r, int c, float fill = 0.0f) : rows(r), cols(c), pix(static_cast<size_t>(r) * c, fill) {
        if (r <= 0 || c <= 0) throw std::invalid_argument("Image2D: dims must be positive");
    }

    float& at(int r, int c) { return pix[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return pix[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return pix.size(); }
};

// Binary label grid aligned with an Image2D. Values are strictly 0 or 1.
struct BinaryMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> v;

    BinaryMask() = default;
    BinaryMask(int r, int c, std::uint8_t fill = 0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {
        if (r <= 0 || c <= 0) throw std::invalid_argument("BinaryMask: dims must be positive");
    }

    std::uint8_t& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    std::uint8_t at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return v.size(); }

    bool same_dims(const BinaryMask& o) const { return rows == o.rows && cols == o.cols; }

    long foreground_count() const {
        long n = 0;
        for (auto x : v) n += (x != 0);
        return n;
    }
};

// Min-max normalization to [0,1]; constant images map to all-zero.
inline void normalize_minmax(Image2D& img) {
    if (img.pix.empty()) return;
    float lo = img.pix[0], hi = img.pix[0];
    for (float x : img.pix) {
        if (x < lo) lo = x;
        if (x > hi) hi = x;
    }
    const float span = hi - lo;
    if (span <= 0.0f) {
        for (float& x : img.pix) x = 0.0f;
        return;
    }
    for (float& x : img.pix) x = (x - lo) / span;
}

}  // namespace crossbar

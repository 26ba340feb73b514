#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossbar {

// Dense (batch, channels, height, width) tensor, row-major.
template <class S>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<S> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_, S fill = S(0))
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {
        if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
            throw std::invalid_argument("Tensor4: dims must be positive");
    }

    size_t size() const { return v.size(); }
    size_t plane() const { return static_cast<size_t>(h) * w; }

    S* sample(int i) { return v.data() + static_cast<size_t>(i) * c * plane(); }
    const S* sample(int i) const { return v.data() + static_cast<size_t>(i) * c * plane(); }

    S& at(int i, int ci, int hi, int wi) {
        return v[((static_cast<size_t>(i) * c + ci) * h + hi) * w + wi];
    }
    S at(int i, int ci, int hi, int wi) const {
        return v[((static_cast<size_t>(i) * c + ci) * h + hi) * w + wi];
    }

    bool same_dims(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    std::string dims_str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
               std::to_string(w);
    }
};

}  // namespace crossbar

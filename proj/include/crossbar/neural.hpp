#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "crossbar/gemm.hpp"
#include "crossbar/rng.hpp"
#include "crossbar/tensor.hpp"

namespace crossbar {

// Layer library for the two crossbar sub-models: valid (0-padding) strided
// cross-correlation, max pooling, ReLU, inverted dropout, 2-way softmax
// cross-entropy and SGD. Templated on the scalar so the gradient tests can
// run in 64-bit while training stays 32-bit.

template <class S>
struct ConvLayer {
    Tensor4<S> kernel;      // (out_ch, in_ch, kh, kw)
    std::vector<S> bias;    // out_ch
    int stride_h = 1;
    int stride_w = 1;
};

template <class S>
struct ConvGrads {
    Tensor4<S> input;
    Tensor4<S> kernel;
    std::vector<S> bias;
};

inline int conv_out_dim(int in, int k, int stride) { return (in - k) / stride + 1; }

namespace detail {

// im2col for one sample and one band of output rows: writes a
// (in_ch*kh*kw) x (band_h*out_w) column matrix.
template <class S>
void im2col_band(const S* in, int in_ch, int h, int w, int kh, int kw, int sh, int sw, int out_w,
                 int oh0, int oh1, S* col) {
    const long band_cols = static_cast<long>(oh1 - oh0) * out_w;
    S* dst = col;
    for (int ci = 0; ci < in_ch; ++ci) {
        const S* plane = in + static_cast<size_t>(ci) * h * w;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                for (int oh = oh0; oh < oh1; ++oh) {
                    const S* src = plane + static_cast<size_t>(oh * sh + ki) * w + kj;
                    if (sw == 1) {
                        std::copy(src, src + out_w, dst);
                        dst += out_w;
                    } else {
                        for (int ow = 0; ow < out_w; ++ow) *dst++ = src[static_cast<size_t>(ow) * sw];
                    }
                }
            }
        }
    }
    (void)band_cols;
}

// Transposed scatter-add of a column band back into the input gradient.
template <class S>
void col2im_band(const S* col, int in_ch, int h, int w, int kh, int kw, int sh, int sw, int out_w,
                 int oh0, int oh1, S* grad_in) {
    const long band_cols = static_cast<long>(oh1 - oh0) * out_w;
    const S* src = col;
    for (int ci = 0; ci < in_ch; ++ci) {
        S* plane = grad_in + static_cast<size_t>(ci) * h * w;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                for (int oh = oh0; oh < oh1; ++oh) {
                    S* dst = plane + static_cast<size_t>(oh * sh + ki) * w + kj;
                    for (int ow = 0; ow < out_w; ++ow) dst[static_cast<size_t>(ow) * sw] += *src++;
                }
            }
        }
    }
    (void)band_cols;
}

// Output rows per band, bounded so the column buffer stays small.
inline int conv_band_rows(long k, int out_h, int out_w) {
    const long budget = 1L << 21;  // elements
    long rows = budget / std::max<long>(1, k * out_w);
    return static_cast<int>(std::clamp<long>(rows, 1, out_h));
}

}  // namespace detail

template <class S>
void conv2d_check(const Tensor4<S>& input, const ConvLayer<S>& layer) {
    const auto& k = layer.kernel;
    if (input.c != k.c)
        throw std::invalid_argument("conv2d: channel mismatch, input " + input.dims_str() +
                                    " vs kernel " + k.dims_str());
    if (input.h < k.h || input.w < k.w)
        throw std::invalid_argument("conv2d: input " + input.dims_str() + " smaller than kernel " +
                                    k.dims_str());
    if (static_cast<int>(layer.bias.size()) != k.n)
        throw std::invalid_argument("conv2d: bias size mismatch");
    if (layer.stride_h < 1 || layer.stride_w < 1) throw std::invalid_argument("conv2d: bad stride");
}

// Valid cross-correlation with bias. im2col + GEMM, banded over output rows.
template <class S>
Tensor4<S> conv2d_forward(const Tensor4<S>& input, const ConvLayer<S>& layer) {
    conv2d_check(input, layer);
    const auto& k = layer.kernel;
    const int oh = conv_out_dim(input.h, k.h, layer.stride_h);
    const int ow = conv_out_dim(input.w, k.w, layer.stride_w);
    const long kdim = static_cast<long>(k.c) * k.h * k.w;

    Tensor4<S> out(input.n, k.n, oh, ow);
    const int band = detail::conv_band_rows(kdim, oh, ow);
    std::vector<S> col(static_cast<size_t>(kdim) * band * ow);

    for (int i = 0; i < input.n; ++i) {
        for (int oh0 = 0; oh0 < oh; oh0 += band) {
            const int oh1 = std::min(oh, oh0 + band);
            const long cols = static_cast<long>(oh1 - oh0) * ow;
            detail::im2col_band(input.sample(i), input.c, input.h, input.w, k.h, k.w, layer.stride_h,
                                layer.stride_w, ow, oh0, oh1, col.data());
            S* dst = out.sample(i) + static_cast<size_t>(oh0) * ow;
            // out rows are strided by the full plane, so run one GEMM per band
            // into a packed slab then scatter; cheaper: GEMM with ldc = plane.
            gemm<S>(false, false, k.n, static_cast<int>(cols), static_cast<int>(kdim), S(1),
                    k.v.data(), static_cast<int>(kdim), col.data(), static_cast<int>(cols), S(0), dst,
                    static_cast<int>(out.plane()));
        }
        S* o = out.sample(i);
        for (int oc = 0; oc < k.n; ++oc) {
            const S b = layer.bias[oc];
            S* plane = o + static_cast<size_t>(oc) * out.plane();
            for (size_t p = 0; p < out.plane(); ++p) plane[p] += b;
        }
    }
    return out;
}

// Exact gradients of conv2d_forward. grad_out must match the forward output.
template <class S>
ConvGrads<S> conv2d_backward(const Tensor4<S>& input, const ConvLayer<S>& layer,
                             const Tensor4<S>& grad_out) {
    conv2d_check(input, layer);
    const auto& k = layer.kernel;
    const int oh = conv_out_dim(input.h, k.h, layer.stride_h);
    const int ow = conv_out_dim(input.w, k.w, layer.stride_w);
    if (grad_out.n != input.n || grad_out.c != k.n || grad_out.h != oh || grad_out.w != ow)
        throw std::invalid_argument("conv2d_backward: grad_out " + grad_out.dims_str() +
                                    " does not match forward output " + std::to_string(input.n) +
                                    "x" + std::to_string(k.n) + "x" + std::to_string(oh) + "x" +
                                    std::to_string(ow));

    ConvGrads<S> g;
    g.input = Tensor4<S>(input.n, input.c, input.h, input.w);
    g.kernel = Tensor4<S>(k.n, k.c, k.h, k.w);
    g.bias.assign(k.n, S(0));

    const long kdim = static_cast<long>(k.c) * k.h * k.w;
    const int band = detail::conv_band_rows(kdim, oh, ow);
    std::vector<S> col(static_cast<size_t>(kdim) * band * ow);
    std::vector<S> gcol(static_cast<size_t>(kdim) * band * ow);

    for (int i = 0; i < input.n; ++i) {
        const S* go = grad_out.sample(i);
        for (int oc = 0; oc < k.n; ++oc) {
            const S* plane = go + static_cast<size_t>(oc) * grad_out.plane();
            S acc = S(0);
            for (size_t p = 0; p < grad_out.plane(); ++p) acc += plane[p];
            g.bias[oc] += acc;
        }
        for (int oh0 = 0; oh0 < oh; oh0 += band) {
            const int oh1 = std::min(oh, oh0 + band);
            const long cols = static_cast<long>(oh1 - oh0) * ow;
            detail::im2col_band(input.sample(i), input.c, input.h, input.w, k.h, k.w, layer.stride_h,
                                layer.stride_w, ow, oh0, oh1, col.data());
            const S* go_band = go + static_cast<size_t>(oh0) * ow;
            // dK += dOut * col^T
            gemm<S>(false, true, k.n, static_cast<int>(kdim), static_cast<int>(cols), S(1), go_band,
                    static_cast<int>(grad_out.plane()), col.data(), static_cast<int>(cols), S(1),
                    g.kernel.v.data(), static_cast<int>(kdim));
            // dcol = K^T * dOut, then scatter back
            gemm<S>(true, false, static_cast<int>(kdim), static_cast<int>(cols), k.n, S(1),
                    k.v.data(), static_cast<int>(kdim), go_band, static_cast<int>(grad_out.plane()),
                    S(0), gcol.data(), static_cast<int>(cols));
            detail::col2im_band(gcol.data(), input.c, input.h, input.w, k.h, k.w, layer.stride_h,
                                layer.stride_w, ow, oh0, oh1, g.input.sample(i));
        }
    }
    return g;
}

template <class S>
struct PoolResult {
    Tensor4<S> output;
    std::vector<std::int32_t> argmax;  // input plane index per output element
};

// Max pooling; ties go to the first element in row-major window order.
template <class S>
PoolResult<S> maxpool_forward(const Tensor4<S>& input, int ph, int pw, int sh, int sw) {
    if (ph < 1 || pw < 1 || sh < 1 || sw < 1) throw std::invalid_argument("maxpool: bad window");
    if (input.h < ph || input.w < pw)
        throw std::invalid_argument("maxpool: window larger than input " + input.dims_str());
    const int oh = conv_out_dim(input.h, ph, sh);
    const int ow = conv_out_dim(input.w, pw, sw);

    PoolResult<S> res;
    res.output = Tensor4<S>(input.n, input.c, oh, ow);
    res.argmax.resize(res.output.size());

    size_t oi = 0;
    for (int i = 0; i < input.n; ++i) {
        for (int ci = 0; ci < input.c; ++ci) {
            const S* plane = input.sample(i) + static_cast<size_t>(ci) * input.plane();
            for (int r = 0; r < oh; ++r) {
                for (int c2 = 0; c2 < ow; ++c2) {
                    const int r0 = r * sh, c0 = c2 * sw;
                    S best = plane[static_cast<size_t>(r0) * input.w + c0];
                    int best_idx = r0 * input.w + c0;
                    for (int dr = 0; dr < ph; ++dr) {
                        for (int dc = 0; dc < pw; ++dc) {
                            const int idx = (r0 + dr) * input.w + (c0 + dc);
                            if (plane[idx] > best) {
                                best = plane[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    res.output.v[oi] = best;
                    res.argmax[oi] = best_idx;
                    ++oi;
                }
            }
        }
    }
    return res;
}

// Scatters grad_out to the recorded argmax positions.
template <class S>
Tensor4<S> maxpool_backward(int in_h, int in_w, const PoolResult<S>& fwd, const Tensor4<S>& grad_out) {
    if (!grad_out.same_dims(fwd.output))
        throw std::invalid_argument("maxpool_backward: grad dims " + grad_out.dims_str() +
                                    " vs forward " + fwd.output.dims_str());
    Tensor4<S> g(grad_out.n, grad_out.c, in_h, in_w);
    size_t oi = 0;
    const size_t in_plane = static_cast<size_t>(in_h) * in_w;
    for (int i = 0; i < grad_out.n; ++i) {
        for (int ci = 0; ci < grad_out.c; ++ci) {
            S* plane = g.sample(i) + static_cast<size_t>(ci) * in_plane;
            for (size_t p = 0; p < grad_out.plane(); ++p, ++oi)
                plane[fwd.argmax[oi]] += grad_out.v[oi];
        }
    }
    return g;
}

template <class S>
Tensor4<S> relu_forward(const Tensor4<S>& input) {
    Tensor4<S> out = input;
    for (S& x : out.v) x = x > S(0) ? x : S(0);
    return out;
}

// Gradient gated on input > 0; the kink at exactly 0 propagates nothing.
template <class S>
Tensor4<S> relu_backward(const Tensor4<S>& input, const Tensor4<S>& grad_out) {
    if (!input.same_dims(grad_out))
        throw std::invalid_argument("relu_backward: dims " + input.dims_str() + " vs " +
                                    grad_out.dims_str());
    Tensor4<S> g = grad_out;
    for (size_t i = 0; i < g.size(); ++i)
        if (!(input.v[i] > S(0))) g.v[i] = S(0);
    return g;
}

enum class DropoutMode { train, eval };

template <class S>
struct DropoutResult {
    Tensor4<S> output;
    std::vector<std::uint8_t> keep;  // empty in eval mode
};

// Inverted dropout: survivors scale by 1/(1-rate), eval mode is the identity.
template <class S>
DropoutResult<S> dropout_forward(const Tensor4<S>& input, double rate, DropoutMode mode, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
    DropoutResult<S> res;
    res.output = input;
    if (mode == DropoutMode::eval || rate == 0.0) return res;
    const S scale = S(1.0 / (1.0 - rate));
    res.keep.resize(input.size());
    for (size_t i = 0; i < input.size(); ++i) {
        const bool keep = rng.uniform() >= rate;
        res.keep[i] = keep;
        res.output.v[i] = keep ? input.v[i] * scale : S(0);
    }
    return res;
}

template <class S>
Tensor4<S> dropout_backward(const DropoutResult<S>& fwd, double rate, const Tensor4<S>& grad_out) {
    Tensor4<S> g = grad_out;
    if (fwd.keep.empty()) return g;  // eval or rate 0
    const S scale = S(1.0 / (1.0 - rate));
    for (size_t i = 0; i < g.size(); ++i) g.v[i] = fwd.keep[i] ? g.v[i] * scale : S(0);
    return g;
}

template <class S>
struct SoftmaxCE {
    S loss;
    S prob[2];
    S grad[2];
};

// Two-way softmax cross-entropy, max-subtraction stabilized.
// loss = -log softmax(logits)[target]; grad = softmax(logits) - one_hot.
template <class S>
SoftmaxCE<S> softmax_cross_entropy(const S* logits, int target) {
    if (!(std::isfinite(double(logits[0])) && std::isfinite(double(logits[1]))))
        throw std::invalid_argument("softmax_cross_entropy: non-finite logits");
    if (target != 0 && target != 1)
        throw std::invalid_argument("softmax_cross_entropy: target must be 0 or 1");
    const S m = std::max(logits[0], logits[1]);
    const S e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
    const S z = e0 + e1;
    SoftmaxCE<S> r;
    r.prob[0] = e0 / z;
    r.prob[1] = e1 / z;
    r.loss = -std::log(r.prob[target] > S(0) ? r.prob[target] : std::numeric_limits<S>::min());
    r.grad[0] = r.prob[0] - (target == 0 ? S(1) : S(0));
    r.grad[1] = r.prob[1] - (target == 1 ? S(1) : S(0));
    return r;
}

// Plain SGD with optional momentum: v <- mu*v + g; p <- p - lr*v.
template <class S>
struct OptimizerState {
    double learning_rate = 0.0005;
    double momentum = 0.0;
    std::vector<std::vector<S>> velocity;  // one buffer per parameter block

    void ensure(size_t block, size_t size) {
        if (velocity.size() <= block) velocity.resize(block + 1);
        if (velocity[block].size() != size) velocity[block].assign(size, S(0));
    }
};

template <class S>
void sgd_step(S* params, const S* grads, size_t count, OptimizerState<S>& state, size_t block) {
    if (state.learning_rate < 0.0)
        throw std::invalid_argument("sgd_step: learning rate must be >= 0");
    const S lr = S(state.learning_rate);
    if (state.momentum == 0.0) {
        for (size_t i = 0; i < count; ++i) params[i] -= lr * grads[i];
        return;
    }
    state.ensure(block, count);
    const S mu = S(state.momentum);
    S* vel = state.velocity[block].data();
    for (size_t i = 0; i < count; ++i) {
        vel[i] = mu * vel[i] + grads[i];
        params[i] -= lr * vel[i];
    }
}

template <class S>
void sgd_step(std::vector<S>& params, const std::vector<S>& grads, OptimizerState<S>& state,
              size_t block = 0) {
    if (params.size() != grads.size())
        throw std::invalid_argument("sgd_step: param/grad size mismatch");
    sgd_step(params.data(), grads.data(), params.size(), state, block);
}

}  // namespace crossbar

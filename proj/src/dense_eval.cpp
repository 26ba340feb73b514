#include "crossbar/dense_eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crossbar/neural.hpp"
#include "crossbar/threading.hpp"

namespace crossbar {

namespace {

// One phase stream: activations on a regular sub-grid of window positions.
// Element (r, c) corresponds to the patch whose center is image pixel
// (row_origin + r * row_step, col_origin + c * col_step).
struct Stream {
    Tensor4<float> data;
    int row_origin = 0, col_origin = 0;
    int row_step = 1, col_step = 1;
};

// Edge-clamp pad so that window start (r, c) in the padded plane covers the
// same pixels as a kh x kw patch centered on image pixel (r, c).
Tensor4<float> pad_for_windows(const Image2D& image, int kh, int kw) {
    const int top = kh / 2, left = kw / 2;
    Tensor4<float> out(1, 1, image.rows + kh - 1, image.cols + kw - 1);
    float* dst = out.v.data();
    for (int r = 0; r < out.h; ++r) {
        const int sr = std::clamp(r - top, 0, image.rows - 1);
        for (int c = 0; c < out.w; ++c)
            *dst++ = image.at(sr, std::clamp(c - left, 0, image.cols - 1));
    }
    return out;
}

// Stride-1 pool + phase split: one stride-(ph, pw) pool per window offset.
// A stream is dropped when its slice has no complete window.
std::vector<Stream> pool_split(Stream s, int ph, int pw) {
    std::vector<Stream> out;
    const Tensor4<float>& in = s.data;
    for (int pr = 0; pr < ph; ++pr) {
        for (int pc = 0; pc < pw; ++pc) {
            const int sh = in.h - pr, sw = in.w - pc;
            if (sh < ph || sw < pw) continue;
            Tensor4<float> slice(1, in.c, sh, sw);
            for (int ci = 0; ci < in.c; ++ci)
                for (int r = 0; r < sh; ++r) {
                    const float* src = in.v.data() + (static_cast<size_t>(ci) * in.h + r + pr) * in.w + pc;
                    std::copy(src, src + sw, slice.v.data() + (static_cast<size_t>(ci) * sh + r) * sw);
                }
            Stream ns;
            ns.data = maxpool_forward(slice, ph, pw, ph, pw).output;
            ns.row_origin = s.row_origin + pr * s.row_step;
            ns.col_origin = s.col_origin + pc * s.col_step;
            ns.row_step = s.row_step * ph;
            ns.col_step = s.col_step * pw;
            out.push_back(std::move(ns));
        }
    }
    return out;
}

}  // namespace

DenseEvaluator::DenseEvaluator(const SubModel& model, int threads)
    : model_(&model), threads_(std::max(1, threads)) {
    if (model.conv_layers().empty())
        throw std::invalid_argument("DenseEvaluator: model has no parameters");
}

ScoreMaps DenseEvaluator::logits(const Image2D& image) const {
    if (image.rows < 1 || image.cols < 1)
        throw std::invalid_argument("DenseEvaluator: empty image");

    const auto& arch = model_->architecture();
    const auto& convs = model_->conv_layers();
    const int n_convs = static_cast<int>(convs.size());

    Stream first;
    first.data = pad_for_windows(image, model_->input_height(), model_->input_width());
    std::vector<Stream> streams;
    streams.push_back(std::move(first));

    ScoreMaps maps{Image2D(image.rows, image.cols), Image2D(image.rows, image.cols)};

    int ci = 0;
    for (const auto& l : arch) {
        if (l.kind == LayerDef::Kind::pool) {
            std::vector<Stream> next;
            for (auto& s : streams) {
                auto split = pool_split(std::move(s), l.kh, l.kw);
                for (auto& ns : split) next.push_back(std::move(ns));
            }
            streams = std::move(next);
            continue;
        }
        const bool last = (ci == n_convs - 1);
        const ConvLayer<float>& conv = convs[ci];
        std::vector<Stream> kept(streams.size());
        std::vector<std::uint8_t> alive(streams.size(), 0);
        parallel_for(static_cast<long>(streams.size()), threads_, [&](long b, long e, int) {
            for (long si = b; si < e; ++si) {
                Stream& s = streams[si];
                if (s.data.h < conv.kernel.h || s.data.w < conv.kernel.w) continue;
                Tensor4<float> z = conv2d_forward(s.data, conv);
                s.data = last ? std::move(z) : relu_forward(z);
                kept[si] = std::move(s);
                alive[si] = 1;
            }
        });
        streams.clear();
        for (size_t si = 0; si < kept.size(); ++si)
            if (alive[si]) streams.push_back(std::move(kept[si]));
        ++ci;
    }

    // Stitch the phase streams back onto the pixel grid.
    size_t written = 0;
    for (const auto& s : streams) {
        if (s.data.c != 2) throw std::logic_error("DenseEvaluator: expected 2 output channels");
        for (int r = 0; r < s.data.h; ++r) {
            const int ir = s.row_origin + r * s.row_step;
            for (int c = 0; c < s.data.w; ++c) {
                const int ic = s.col_origin + c * s.col_step;
                if (ir >= image.rows || ic >= image.cols)
                    throw std::logic_error("DenseEvaluator: stream output outside image");
                maps.background.at(ir, ic) = s.data.at(0, 0, r, c);
                maps.tumor.at(ir, ic) = s.data.at(0, 1, r, c);
                ++written;
            }
        }
    }
    if (written != static_cast<size_t>(image.rows) * image.cols)
        throw std::logic_error("DenseEvaluator: streams covered " + std::to_string(written) +
                               " of " + std::to_string(static_cast<size_t>(image.rows) * image.cols) +
                               " pixels");
    return maps;
}

Image2D DenseEvaluator::tumor_probability(const Image2D& image) const {
    const ScoreMaps maps = logits(image);
    Image2D prob(image.rows, image.cols);
    for (size_t i = 0; i < prob.pix.size(); ++i) {
        const float l[2] = {maps.background.pix[i], maps.tumor.pix[i]};
        prob.pix[i] = softmax_cross_entropy<float>(l, 0).prob[1];
    }
    return prob;
}

BinaryMask DenseEvaluator::label_map(const Image2D& image) const {
    const ScoreMaps maps = logits(image);
    BinaryMask out(image.rows, image.cols);
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = maps.tumor.pix[i] > maps.background.pix[i] ? 1 : 0;
    return out;
}

}  // namespace crossbar

#include "crossbar/submodel.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "crossbar/threading.hpp"

namespace crossbar {

std::vector<LayerDef> submodel_architecture(Orientation o) {
    using K = LayerDef::Kind;
    // Vertical stack; maps, kernel, stride. Pools are 2x2 stride 2.
    std::vector<LayerDef> arch = {
        {K::conv, 16, 5, 3, 1, 1},  {K::conv, 36, 5, 3, 1, 1}, {K::pool, 0, 2, 2, 2, 2},
        {K::conv, 64, 5, 3, 1, 1},  {K::pool, 0, 2, 2, 2, 2},  {K::conv, 64, 5, 3, 1, 1},
        {K::conv, 64, 6, 1, 1, 1},  {K::conv, 64, 6, 1, 1, 1}, {K::conv, 500, 7, 1, 1, 1},
        {K::conv, 2, 1, 1, 1, 1},
    };
    if (o == Orientation::horizontal) {
        for (auto& l : arch) {
            std::swap(l.kh, l.kw);
            std::swap(l.sh, l.sw);
        }
    }
    return arch;
}

namespace {

std::string arch_string(const std::vector<LayerDef>& arch) {
    std::string s;
    for (const auto& l : arch) {
        if (!s.empty()) s += ',';
        if (l.kind == LayerDef::Kind::conv) s += 'C' + std::to_string(l.maps) + ':';
        else s += "P:";
        s += std::to_string(l.kh) + 'x' + std::to_string(l.kw) + 's' + std::to_string(l.sh) + 'x' +
             std::to_string(l.sw);
    }
    return s;
}

// Expected spatial trace per the architecture table, vertical orientation.
constexpr std::pair<int, int> kVerticalTrace[] = {{100, 20}, {96, 18}, {92, 16}, {46, 8},
                                                  {42, 6},   {21, 3},  {17, 1},  {12, 1},
                                                  {7, 1},    {1, 1},   {1, 1}};

constexpr int kDropoutAfterConv = 6;  // between the 500-map conv and the classifier

}  // namespace

// ---------------------------------------------------------------------------
// PatchDataset

PatchDataset PatchDataset::from_patches(const std::vector<Patch>& patches) {
    auto imgs = std::make_shared<std::vector<Image2D>>();
    imgs->reserve(patches.size());
    PatchDataset ds;
    for (const auto& p : patches) {
        Image2D img(p.spec.height, p.spec.width);
        img.pix = p.pixels;
        imgs->push_back(std::move(img));
        SampleRef r;
        r.image = static_cast<int>(imgs->size()) - 1;
        r.spec = p.spec;
        r.spec.row = p.spec.height / 2;
        r.spec.col = p.spec.width / 2;
        ds.refs_.push_back(r);
    }
    ds.images_ = imgs;
    return ds;
}

void PatchDataset::add(int image_index, const PatchSpec& spec) {
    if (image_index < 0 || image_index >= static_cast<int>(images_->size()))
        throw std::out_of_range("PatchDataset: image index out of range");
    refs_.push_back({image_index, spec});
}

void PatchDataset::add_all(int image_index, const std::vector<PatchSpec>& specs) {
    for (const auto& s : specs) add(image_index, s);
}

void PatchDataset::fill(size_t i, float* dst) const {
    const SampleRef& r = refs_[i];
    extract_patch_into((*images_)[r.image], r.spec, dst);
}

void PatchDataset::subsample(size_t cap, std::uint64_t seed) {
    if (refs_.size() <= cap) return;
    std::vector<std::uint32_t> idx(refs_.size());
    std::iota(idx.begin(), idx.end(), 0u);
    Rng rng(seed);
    for (size_t i = 0; i < cap; ++i) {
        const size_t j = i + static_cast<size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    std::vector<SampleRef> kept;
    kept.reserve(cap);
    for (auto k : idx) kept.push_back(refs_[k]);
    refs_.swap(kept);
}

bool PatchDataset::has_both_classes() const {
    bool pos = false, neg = false;
    for (const auto& r : refs_) {
        (r.spec.label == PatchLabel::tumor ? pos : neg) = true;
        if (pos && neg) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// SubModel

SubModel SubModel::build(Orientation o, std::uint64_t init_seed, double init_scale) {
    SubModel m;
    m.orientation_ = o;
    m.round_ = 1;
    m.arch_ = submodel_architecture(o);

    Rng rng(init_seed);
    int in_ch = 1;
    for (const auto& l : m.arch_) {
        if (l.kind != LayerDef::Kind::conv) continue;
        ConvLayer<float> conv;
        conv.kernel = Tensor4<float>(l.maps, in_ch, l.kh, l.kw);
        // Fan-in-scaled Gaussian: keeps activation variance level through the
        // deep stack, which a fixed small std cannot.
        const double fan_in = static_cast<double>(in_ch) * l.kh * l.kw;
        const double std = init_scale * std::sqrt(2.0 / fan_in);
        for (auto& wv : conv.kernel.v) wv = static_cast<float>(rng.normal(0.0, std));
        conv.bias.assign(l.maps, 0.0f);
        conv.stride_h = l.sh;
        conv.stride_w = l.sw;
        m.convs_.push_back(std::move(conv));
        in_ch = l.maps;
    }

    // The stack must reproduce the architecture table's input-size row.
    const auto trace = m.shape_trace();
    if (trace.size() != std::size(kVerticalTrace))
        throw std::logic_error("submodel: unexpected layer count");
    for (size_t i = 0; i < trace.size(); ++i) {
        auto [h, w] = kVerticalTrace[i];
        if (o == Orientation::horizontal) std::swap(h, w);
        if (trace[i] != std::make_pair(h, w))
            throw std::logic_error("submodel: shape trace mismatch at layer " + std::to_string(i));
    }
    return m;
}

std::vector<std::pair<int, int>> SubModel::shape_trace() const {
    std::vector<std::pair<int, int>> trace;
    int h = input_height(), w = input_width();
    for (const auto& l : arch_) {
        trace.emplace_back(h, w);
        h = conv_out_dim(h, l.kh, l.sh);
        w = conv_out_dim(w, l.kw, l.sw);
    }
    trace.emplace_back(h, w);  // softmax input
    return trace;
}

size_t SubModel::parameter_count() const {
    size_t n = 0;
    for (const auto& c : convs_) n += c.kernel.size() + c.bias.size();
    return n;
}

namespace {

// Activation record of one forward pass over a batch, kept for backward.
struct ForwardTrace {
    std::vector<Tensor4<float>> conv_in;   // input to conv i
    std::vector<Tensor4<float>> relu_in;   // pre-activation of conv i (i < last)
    std::vector<PoolResult<float>> pools;  // in arch order
    std::vector<std::pair<int, int>> pool_in_dims;
    DropoutResult<float> dropout;
    Tensor4<float> logits;
};

Tensor4<float> run_forward(const std::vector<LayerDef>& arch,
                           const std::vector<ConvLayer<float>>& convs, Tensor4<float> cur,
                           DropoutMode mode, double dropout_rate, Rng* rng, ForwardTrace* trace) {
    const int n_convs = static_cast<int>(convs.size());
    if (trace) {
        trace->conv_in.resize(n_convs);
        trace->relu_in.resize(n_convs);
    }
    int ci = 0;
    for (const auto& l : arch) {
        if (l.kind == LayerDef::Kind::pool) {
            if (trace) trace->pool_in_dims.emplace_back(cur.h, cur.w);
            PoolResult<float> p = maxpool_forward(cur, l.kh, l.kw, l.sh, l.sw);
            cur = p.output;
            if (trace) trace->pools.push_back(std::move(p));
            continue;
        }
        if (trace) trace->conv_in[ci] = cur;
        Tensor4<float> z = conv2d_forward(cur, convs[ci]);
        if (ci < n_convs - 1) {
            if (trace) trace->relu_in[ci] = z;
            cur = relu_forward(z);
        } else {
            cur = std::move(z);
        }
        if (ci == kDropoutAfterConv) {
            if (mode == DropoutMode::train && dropout_rate > 0.0) {
                DropoutResult<float> d = dropout_forward(cur, dropout_rate, mode, *rng);
                cur = d.output;
                if (trace) trace->dropout = std::move(d);
            }
        }
        ++ci;
    }
    return cur;
}

struct GradBuffers {
    std::vector<std::vector<float>> kernel;
    std::vector<std::vector<float>> bias;

    explicit GradBuffers(const std::vector<ConvLayer<float>>& convs) {
        for (const auto& c : convs) {
            kernel.emplace_back(c.kernel.size(), 0.0f);
            bias.emplace_back(c.bias.size(), 0.0f);
        }
    }

    void add(const GradBuffers& o) {
        for (size_t i = 0; i < kernel.size(); ++i) {
            for (size_t j = 0; j < kernel[i].size(); ++j) kernel[i][j] += o.kernel[i][j];
            for (size_t j = 0; j < bias[i].size(); ++j) bias[i][j] += o.bias[i][j];
        }
    }
};

// The arch list as a flat op sequence: conv, its relu (except on the
// classifier), pools where listed, dropout after the 500-map conv's relu.
struct Op {
    enum class Kind { conv, relu, pool, dropout } kind;
    int index = 0;  // conv index for conv/relu, pool index for pool
};

std::vector<Op> op_sequence(const std::vector<LayerDef>& arch) {
    std::vector<Op> ops;
    int ci = 0, pi = 0;
    int n_convs = 0;
    for (const auto& l : arch) n_convs += (l.kind == LayerDef::Kind::conv);
    for (const auto& l : arch) {
        if (l.kind == LayerDef::Kind::pool) {
            ops.push_back({Op::Kind::pool, pi++});
            continue;
        }
        ops.push_back({Op::Kind::conv, ci});
        if (ci < n_convs - 1) ops.push_back({Op::Kind::relu, ci});
        if (ci == kDropoutAfterConv) ops.push_back({Op::Kind::dropout, 0});
        ++ci;
    }
    return ops;
}

void run_backward(const std::vector<LayerDef>& arch, const std::vector<ConvLayer<float>>& convs,
                  double dropout_rate, ForwardTrace& trace, Tensor4<float> grad, GradBuffers& out) {
    const std::vector<Op> ops = op_sequence(arch);
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        switch (it->kind) {
            case Op::Kind::conv: {
                ConvGrads<float> g = conv2d_backward(trace.conv_in[it->index], convs[it->index], grad);
                for (size_t j = 0; j < g.kernel.size(); ++j) out.kernel[it->index][j] += g.kernel.v[j];
                for (size_t j = 0; j < g.bias.size(); ++j) out.bias[it->index][j] += g.bias[j];
                grad = std::move(g.input);
                break;
            }
            case Op::Kind::relu:
                grad = relu_backward(trace.relu_in[it->index], grad);
                break;
            case Op::Kind::pool:
                grad = maxpool_backward(trace.pool_in_dims[it->index].first,
                                        trace.pool_in_dims[it->index].second,
                                        trace.pools[it->index], grad);
                break;
            case Op::Kind::dropout:
                if (!trace.dropout.keep.empty())
                    grad = dropout_backward(trace.dropout, dropout_rate, grad);
                break;
        }
    }
}

}  // namespace

Tensor4<float> SubModel::forward_eval(const Tensor4<float>& batch) const {
    if (batch.c != 1 || batch.h != input_height() || batch.w != input_width())
        throw std::invalid_argument("submodel forward: batch " + batch.dims_str() + " does not match " +
                                    std::string(to_string(orientation_)) + " input 1x" +
                                    std::to_string(input_height()) + "x" +
                                    std::to_string(input_width()));
    return run_forward(arch_, convs_, batch, DropoutMode::eval, 0.0, nullptr, nullptr);
}

SubModel::Probs SubModel::forward(const Patch& patch) const {
    if (patch.spec.height != input_height() || patch.spec.width != input_width())
        throw std::invalid_argument(
            "submodel forward: patch " + std::to_string(patch.spec.height) + "x" +
            std::to_string(patch.spec.width) + " does not match " +
            std::string(to_string(orientation_)) + " input " + std::to_string(input_height()) + "x" +
            std::to_string(input_width()));
    Tensor4<float> in(1, 1, patch.spec.height, patch.spec.width);
    in.v = patch.pixels;
    const Tensor4<float> logits = forward_eval(in);
    const auto sm = softmax_cross_entropy<float>(logits.v.data(), 0);
    return {sm.prob[1], sm.prob[0]};
}

std::vector<std::uint8_t> SubModel::predict_labels(const PatchDataset& data, int batch_size,
                                                   int threads) const {
    std::vector<std::uint8_t> labels(data.size());
    const int h = input_height(), w = input_width();
    const long n_chunks = (static_cast<long>(data.size()) + batch_size - 1) / batch_size;
    parallel_for(n_chunks, threads, [&](long b, long e, int) {
        for (long chunk = b; chunk < e; ++chunk) {
            const size_t lo = static_cast<size_t>(chunk) * batch_size;
            const size_t hi = std::min(data.size(), lo + batch_size);
            Tensor4<float> batch(static_cast<int>(hi - lo), 1, h, w);
            for (size_t i = lo; i < hi; ++i) data.fill(i, batch.sample(static_cast<int>(i - lo)));
            const Tensor4<float> logits = run_forward(arch_, convs_, std::move(batch),
                                                      DropoutMode::eval, 0.0, nullptr, nullptr);
            for (size_t i = lo; i < hi; ++i) {
                const float* l = logits.sample(static_cast<int>(i - lo));
                labels[i] = l[1] > l[0] ? 1 : 0;
            }
        }
    });
    return labels;
}

double SubModel::error_rate(const PatchDataset& data, int batch_size, int threads) const {
    if (data.empty()) throw std::invalid_argument("error_rate: empty dataset");
    const auto pred = predict_labels(data, batch_size, threads);
    long wrong = 0;
    for (size_t i = 0; i < data.size(); ++i) wrong += (pred[i] != data.label(i));
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

std::vector<EpochStats> SubModel::train_epochs(const PatchDataset& train, const PatchDataset& val,
                                               const TrainConfig& config) {
    if (train.empty()) throw std::invalid_argument("train_epochs: empty training set");
    if (!train.has_both_classes()) throw std::invalid_argument("train_epochs: degenerate labels");
    if (config.max_epochs < 1) throw std::invalid_argument("train_epochs: max_epochs must be >= 1");
    if (config.batch_size < 1) throw std::invalid_argument("train_epochs: batch_size must be >= 1");

    const int h = input_height(), w = input_width();
    const size_t n = train.size();
    const int threads = std::max(1, config.threads);

    OptimizerState<float> opt;
    opt.learning_rate = config.learning_rate;
    opt.momentum = config.momentum;

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);

    std::vector<EpochStats> history;
    double best_val = std::numeric_limits<double>::infinity();
    int stall = 0;
    std::vector<ConvLayer<float>> best_params;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng shuffle_rng(Rng::derive(config.shuffle_seed, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        long wrong = 0;
        long batch_index = 0;

        for (size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
            const size_t stop = std::min(n, start + config.batch_size);
            const int bsz = static_cast<int>(stop - start);
            const float inv_b = 1.0f / static_cast<float>(bsz);

            std::vector<GradBuffers> grads(threads, GradBuffers(convs_));
            std::vector<double> losses(threads, 0.0);
            std::vector<long> wrongs(threads, 0);

            parallel_for(bsz, threads, [&](long b, long e, int worker) {
                Tensor4<float> batch(static_cast<int>(e - b), 1, h, w);
                for (long i = b; i < e; ++i)
                    train.fill(order[start + i], batch.sample(static_cast<int>(i - b)));
                Rng drop_rng(Rng::derive(config.shuffle_seed ^ 0x5eedd09ULL,
                                         (static_cast<std::uint64_t>(epoch) << 40) ^
                                             (static_cast<std::uint64_t>(batch_index) << 8) ^
                                             static_cast<std::uint64_t>(worker)));
                ForwardTrace trace;
                const Tensor4<float> logits =
                    run_forward(arch_, convs_, std::move(batch), DropoutMode::train,
                                config.dropout_rate, &drop_rng, &trace);
                Tensor4<float> grad_logits(logits.n, 2, 1, 1);
                for (int i = 0; i < logits.n; ++i) {
                    const int target = train.label(order[start + b + i]);
                    const float* l = logits.sample(i);
                    const auto sm = softmax_cross_entropy<float>(l, target);
                    losses[worker] += sm.loss;
                    wrongs[worker] += ((l[1] > l[0] ? 1 : 0) != target);
                    grad_logits.sample(i)[0] = sm.grad[0] * inv_b;
                    grad_logits.sample(i)[1] = sm.grad[1] * inv_b;
                }
                run_backward(arch_, convs_, config.dropout_rate, trace, std::move(grad_logits),
                             grads[worker]);
            });

            for (int t = 1; t < threads; ++t) grads[0].add(grads[t]);
            for (int t = 0; t < threads; ++t) {
                loss_sum += losses[t];
                wrong += wrongs[t];
            }

            for (size_t ciu = 0; ciu < convs_.size(); ++ciu) {
                auto& conv = convs_[ciu];
                if (config.weight_decay > 0.0) {
                    const float wd = static_cast<float>(config.weight_decay);
                    for (size_t j = 0; j < conv.kernel.size(); ++j)
                        grads[0].kernel[ciu][j] += wd * conv.kernel.v[j];
                }
                sgd_step(conv.kernel.v, grads[0].kernel[ciu], opt, 2 * ciu);
                sgd_step(conv.bias, grads[0].bias[ciu], opt, 2 * ciu + 1);
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_loss = loss_sum / static_cast<double>(n);
        stats.train_error = static_cast<double>(wrong) / static_cast<double>(n);
        stats.val_error =
            val.empty() ? stats.train_error : error_rate(val, config.batch_size, threads);
        history.push_back(stats);

        if (stats.val_error < best_val) {
            best_val = stats.val_error;
            best_params = convs_;
            stall = 0;
        } else if (config.patience > 0 && ++stall >= config.patience) {
            break;
        }
    }
    // A late epoch may have drifted past the best point; keep the best.
    if (!best_params.empty()) convs_ = std::move(best_params);
    return history;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// One text header line: "crossbar-ckpt <version> <orientation> <round> <arch>"
// followed by raw little-endian float32 blocks, kernels then biases, in layer
// order; kernels row-major (out_ch, in_ch, kh, kw).

void SubModel::save_checkpoint(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << "crossbar-ckpt 1 " << to_string(orientation_) << ' ' << round_ << ' '
        << arch_string(arch_) << '\n';
    for (const auto& c : convs_) {
        out.write(reinterpret_cast<const char*>(c.kernel.v.data()),
                  static_cast<std::streamsize>(c.kernel.size() * sizeof(float)));
        out.write(reinterpret_cast<const char*>(c.bias.data()),
                  static_cast<std::streamsize>(c.bias.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

SubModel SubModel::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("load_checkpoint: corrupt header");

    std::istringstream hs(header);
    std::string magic, orient_str, arch_str;
    int version = 0, round = 0;
    if (!(hs >> magic >> version >> orient_str >> round >> arch_str) || magic != "crossbar-ckpt")
        throw std::runtime_error("load_checkpoint: corrupt header");
    if (version != 1)
        throw std::runtime_error("load_checkpoint: corrupt header (unsupported version " +
                                 std::to_string(version) + ")");

    Orientation o;
    if (orient_str == "vertical") o = Orientation::vertical;
    else if (orient_str == "horizontal") o = Orientation::horizontal;
    else throw std::runtime_error("load_checkpoint: corrupt header (orientation '" + orient_str + "')");

    SubModel m = build(o, 0, 0.0);
    m.round_ = round;
    if (arch_str != arch_string(m.arch_))
        throw std::runtime_error("load_checkpoint: architecture mismatch, file declares '" + arch_str +
                                 "' but " + orient_str + " models require '" + arch_string(m.arch_) +
                                 "'");

    for (auto& c : m.convs_) {
        in.read(reinterpret_cast<char*>(c.kernel.v.data()),
                static_cast<std::streamsize>(c.kernel.size() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(c.kernel.size() * sizeof(float)))
            throw std::runtime_error("load_checkpoint: truncated payload in " + path);
        in.read(reinterpret_cast<char*>(c.bias.data()),
                static_cast<std::streamsize>(c.bias.size() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(c.bias.size() * sizeof(float)))
            throw std::runtime_error("load_checkpoint: truncated payload in " + path);
    }
    char extra;
    if (in.read(&extra, 1); in.gcount() != 0)
        throw std::runtime_error("load_checkpoint: trailing data in " + path);
    return m;
}

}  // namespace crossbar

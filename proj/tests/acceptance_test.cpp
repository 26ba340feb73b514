// Acceptance suite: one pass/fail line per criterion, exit 0 only if all pass.
//
// Criteria 1-6 are fast property checks against independent oracles. Criteria
// 7-10 run the full pipeline on a synthetic dataset: criterion 7 generates it
// through the command-line tool, trains a three-round cascade on two folds and
// scores the held-out fold; 8-10 reuse that state. Trained checkpoints are
// cached in the scratch directory so reruns skip the expensive stages; delete
// the directory for a cold run.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "crossbar/cascade.hpp"
#include "crossbar/data_io.hpp"
#include "crossbar/dense_eval.hpp"
#include "crossbar/gemm.hpp"
#include "crossbar/metrics.hpp"
#include "crossbar/neural.hpp"
#include "crossbar/vote.hpp"

namespace fs = std::filesystem;
using namespace crossbar;

namespace {

// ---------------------------------------------------------------------------
// Harness

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class... Args>
std::string format(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return std::string(buf);
}

void require(bool ok, const std::string& why) {
    if (!ok) throw Failure(why);
}

int run_command(const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path workspace() {
    static const fs::path dir = fs::temp_directory_path() / "crossbar_acceptance";
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Failure("cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

int bench_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n ? static_cast<int>(std::min(n, 4u)) : 1;
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

// ---------------------------------------------------------------------------
// Criterion 1: architecture trace

std::string check_architecture() {
    const std::vector<std::pair<int, int>> expected = {
        {100, 20}, {96, 18}, {92, 16}, {46, 8}, {42, 6},
        {21, 3},   {17, 1},  {12, 1},  {7, 1}, {1, 1},  {1, 1}};
    const SubModel v = SubModel::build(Orientation::vertical, 1);
    require(v.shape_trace() == expected, "vertical shape trace deviates from the reference");

    std::vector<std::pair<int, int>> transposed;
    for (auto [h, w] : expected) transposed.emplace_back(w, h);
    const SubModel h = SubModel::build(Orientation::horizontal, 1);
    require(h.shape_trace() == transposed,
            "horizontal shape trace is not the vertical transpose");
    return "both orientations match the reference 100x20...1x1 trace";
}

// ---------------------------------------------------------------------------
// Criterion 2: gradients vs central finite differences (64-bit, step 1e-5)

double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

template <class F>
double central_diff(double* param, F&& loss) {
    constexpr double h = 1e-5;
    const double orig = *param;
    *param = orig + h;
    const double lp = loss();
    *param = orig - h;
    const double lm = loss();
    *param = orig;
    return (lp - lm) / (2.0 * h);
}

void fill_uniform(std::vector<double>& v, Rng& rng, double lo, double hi) {
    for (auto& x : v) x = rng.uniform(lo, hi);
}

std::string check_gradients() {
    Rng rng(2024);
    double worst = 0.0;
    int configs = 0;
    const auto note = [&](double analytic, double numeric) {
        worst = std::max(worst, rel_err(analytic, numeric));
    };

    // 40 convolution configurations: input, kernel and bias gradients under a
    // fixed random projection loss L = sum(P * conv(x)).
    for (int t = 0; t < 40; ++t, ++configs) {
        const int n = 1 + static_cast<int>(rng.below(2));
        const int ic = 1 + static_cast<int>(rng.below(3));
        const int oc = 1 + static_cast<int>(rng.below(3));
        const int kh = 1 + static_cast<int>(rng.below(3));
        const int kw = 1 + static_cast<int>(rng.below(3));
        const int sh = 1 + static_cast<int>(rng.below(2));
        const int sw = 1 + static_cast<int>(rng.below(2));
        const int ih = kh + sh * static_cast<int>(rng.below(4));
        const int iw = kw + sw * static_cast<int>(rng.below(4));

        Tensor4<double> x(n, ic, ih, iw);
        fill_uniform(x.v, rng, -1.0, 1.0);
        ConvLayer<double> layer;
        layer.kernel = Tensor4<double>(oc, ic, kh, kw);
        fill_uniform(layer.kernel.v, rng, -1.0, 1.0);
        layer.bias.resize(oc);
        fill_uniform(layer.bias, rng, -0.5, 0.5);
        layer.stride_h = sh;
        layer.stride_w = sw;

        Tensor4<double> proj = conv2d_forward(x, layer);
        fill_uniform(proj.v, rng, -1.0, 1.0);
        const auto loss = [&] {
            const Tensor4<double> out = conv2d_forward(x, layer);
            double l = 0.0;
            for (size_t i = 0; i < out.v.size(); ++i) l += out.v[i] * proj.v[i];
            return l;
        };
        const ConvGrads<double> g = conv2d_backward(x, layer, proj);
        for (int probe = 0; probe < 5; ++probe) {
            const size_t xi = rng.below(x.v.size());
            note(g.input.v[xi], central_diff(&x.v[xi], loss));
            const size_t ki = rng.below(layer.kernel.v.size());
            note(g.kernel.v[ki], central_diff(&layer.kernel.v[ki], loss));
        }
        note(g.bias[0], central_diff(&layer.bias[0], loss));
    }

    // 25 max-pool configurations with distinct inputs (no argmax ties).
    for (int t = 0; t < 25; ++t, ++configs) {
        const int n = 1 + static_cast<int>(rng.below(2));
        const int c = 1 + static_cast<int>(rng.below(3));
        const int ph = 1 + static_cast<int>(rng.below(3));
        const int pw = 1 + static_cast<int>(rng.below(3));
        const int sh = 1 + static_cast<int>(rng.below(2));
        const int sw = 1 + static_cast<int>(rng.below(2));
        const int ih = ph + sh * static_cast<int>(rng.below(4));
        const int iw = pw + sw * static_cast<int>(rng.below(4));

        Tensor4<double> x(n, c, ih, iw);
        std::vector<std::uint32_t> ramp(x.v.size());
        std::iota(ramp.begin(), ramp.end(), 0u);
        rng.shuffle(ramp);
        for (size_t i = 0; i < x.v.size(); ++i) x.v[i] = 0.05 * ramp[i] - 1.0;

        PoolResult<double> fwd = maxpool_forward(x, ph, pw, sh, sw);
        Tensor4<double> proj = fwd.output;
        fill_uniform(proj.v, rng, -1.0, 1.0);
        const auto loss = [&] {
            const PoolResult<double> f = maxpool_forward(x, ph, pw, sh, sw);
            double l = 0.0;
            for (size_t i = 0; i < f.output.v.size(); ++i) l += f.output.v[i] * proj.v[i];
            return l;
        };
        const Tensor4<double> gin = maxpool_backward(ih, iw, fwd, proj);
        for (int probe = 0; probe < 8; ++probe) {
            const size_t xi = rng.below(x.v.size());
            note(gin.v[xi], central_diff(&x.v[xi], loss));
        }
    }

    // 15 ReLU configurations, inputs kept away from the kink at zero.
    for (int t = 0; t < 15; ++t, ++configs) {
        Tensor4<double> x(1 + static_cast<int>(rng.below(2)), 1 + static_cast<int>(rng.below(3)),
                          1 + static_cast<int>(rng.below(5)), 1 + static_cast<int>(rng.below(5)));
        for (auto& v : x.v) {
            v = rng.uniform(0.1, 1.0);
            if (rng.below(2)) v = -v;
        }
        Tensor4<double> proj = x;
        fill_uniform(proj.v, rng, -1.0, 1.0);
        const auto loss = [&] {
            const Tensor4<double> out = relu_forward(x);
            double l = 0.0;
            for (size_t i = 0; i < out.v.size(); ++i) l += out.v[i] * proj.v[i];
            return l;
        };
        const Tensor4<double> gin = relu_backward(x, proj);
        for (int probe = 0; probe < 6; ++probe) {
            const size_t xi = rng.below(x.v.size());
            note(gin.v[xi], central_diff(&x.v[xi], loss));
        }
    }

    // 20 softmax cross-entropy configurations.
    for (int t = 0; t < 20; ++t, ++configs) {
        double logits[2] = {rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        const int target = static_cast<int>(rng.below(2));
        const SoftmaxCE<double> ce = softmax_cross_entropy(logits, target);
        for (int j = 0; j < 2; ++j) {
            const auto loss = [&] { return double(softmax_cross_entropy(logits, target).loss); };
            note(ce.grad[j], central_diff(&logits[j], loss));
        }
    }

    require(configs == 100, format("expected 100 configurations, ran %d", configs));
    require(worst < 1e-4, format("max relative gradient error %.3e >= 1e-4", worst));
    return format("max relative error %.2e over 100 configurations", worst);
}

// ---------------------------------------------------------------------------
// Criterion 3: ring radii

std::string check_ring_geometry() {
    Rng rng(77);
    for (int t = 0; t < 1000; ++t) {
        const double r = rng.uniform(2.0, 60.0);
        const double R = rng.uniform(1.2 * r, 5.0 * r);
        SamplingParams params;
        if (t >= 500) params.beta = rng.uniform(0.5, 8.0);  // first half: the 3.5 default
        TumorStats stats;
        stats.incircle_radius = r;
        stats.circumcircle_radius = R / 1.5;
        stats.outer_radius = R;

        const std::vector<double> chi = ring_radii(stats, params);
        require(chi.size() == static_cast<size_t>(std::floor(r / 2.0)) + 1,
                format("trial %d: ring count %zu != floor(r/2)+1", t, chi.size()));
        require(chi[0] == R, format("trial %d: chi_0 != R", t));
        for (size_t i = 1; i < chi.size(); ++i)
            require(chi[i] < chi[i - 1], format("trial %d: radii not strictly decreasing", t));
        for (size_t i = 2; i < chi.size(); ++i)
            require(chi[i - 1] - chi[i] < chi[i - 2] - chi[i - 1],
                    format("trial %d: gaps not strictly decreasing", t));
    }
    return "1000 random (r, R, beta) configurations hold exactly";
}

// ---------------------------------------------------------------------------
// Criterion 4: cover re-sampling footprint inclusion

void paint_window(std::vector<std::uint8_t>& canvas, int rows, int cols, const PatchSpec& s) {
    const int r0 = std::max(0, s.row - s.height / 2);
    const int r1 = std::min(rows - 1, s.row - s.height / 2 + s.height - 1);
    const int c0 = std::max(0, s.col - s.width / 2);
    const int c1 = std::min(cols - 1, s.col - s.width / 2 + s.width - 1);
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) canvas[static_cast<size_t>(r) * cols + c] = 1;
}

std::string check_cover_resampling() {
    constexpr int kSize = 296;
    Rng rng(55);
    const BinaryMask blank(kSize, kSize);
    SamplingParams params;
    for (int t = 0; t < 100; ++t) {
        PatchSpec mis;
        mis.orientation = rng.below(2) ? Orientation::horizontal : Orientation::vertical;
        mis.height = default_patch_height(mis.orientation);
        mis.width = default_patch_width(mis.orientation);
        mis.row = 70 + static_cast<int>(rng.below(kSize - 140));
        mis.col = 70 + static_cast<int>(rng.below(kSize - 140));

        const std::vector<PatchSpec> cover = cover_resample(mis, blank, params);
        require(!cover.empty(), format("trial %d: empty cover pattern", t));
        std::vector<std::uint8_t> covered(static_cast<size_t>(kSize) * kSize, 0);
        for (const auto& s : cover) {
            require(s.orientation != mis.orientation,
                    format("trial %d: cover patch kept the misregion orientation", t));
            paint_window(covered, kSize, kSize, s);
        }
        std::vector<std::uint8_t> target(static_cast<size_t>(kSize) * kSize, 0);
        paint_window(target, kSize, kSize, mis);
        for (size_t i = 0; i < target.size(); ++i)
            require(!target[i] || covered[i],
                    format("trial %d: pixel %zu of the misregion is uncovered", t, i));
    }
    return "100 random interior misregions fully covered by opposite-orientation patches";
}

// ---------------------------------------------------------------------------
// Criterion 5: metric oracles

std::vector<std::pair<int, int>> boundary_of(const BinaryMask& m) {
    std::vector<std::pair<int, int>> pts;
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) {
            if (!m.at(r, c)) continue;
            const bool edge = r == 0 || r == m.rows - 1 || c == 0 || c == m.cols - 1 ||
                              !m.at(r - 1, c) || !m.at(r + 1, c) || !m.at(r, c - 1) ||
                              !m.at(r, c + 1);
            if (edge) pts.emplace_back(r, c);
        }
    return pts;
}

double brute_hausdorff(const BinaryMask& a, const BinaryMask& b) {
    const auto pa = boundary_of(a), pb = boundary_of(b);
    const auto directed = [](const std::vector<std::pair<int, int>>& from,
                             const std::vector<std::pair<int, int>>& to) {
        long worst = 0;
        for (const auto& [r, c] : from) {
            long best = std::numeric_limits<long>::max();
            for (const auto& [r2, c2] : to) {
                const long d = static_cast<long>(r - r2) * (r - r2) +
                               static_cast<long>(c - c2) * (c - c2);
                best = std::min(best, d);
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::sqrt(static_cast<double>(std::max(directed(pa, pb), directed(pb, pa))));
}

std::string check_metric_oracles() {
    // Hand formulas on the tabulated overlaps: |P&G| = 50, |P| = 60, |G| = 70.
    BinaryMask g(10, 20), p(10, 20);
    for (int i = 0; i < 70; ++i) g.v[i] = 1;
    for (int i = 20; i < 80; ++i) p.v[i] = 1;
    require(dice(p, g) == 100.0 / 130.0, "dice deviates from 2|P&G|/(|P|+|G|)");
    require(tpf(p, g) == 50.0 / 70.0, "tpf deviates from |P&G|/|G|");
    require(dice(p, p) == 1.0, "dice of identical masks != 1");

    BinaryMask a(6, 6), b(6, 6);
    a.at(0, 0) = 1;
    b.at(3, 4) = 1;
    require(hausdorff(a, b) == 5.0, "single-pixel hausdorff != 5");
    require(hausdorff(a, a) == 0.0, "hausdorff of identical masks != 0");

    BinaryMask c1(20, 20), c2(20, 20);
    c1.at(10, 10) = 1;
    c2.at(13, 14) = 1;
    require(centroid_distance(c1, c2) == 5.0, "3-4-5 centroid distance != 5");

    // Translation property: shifting a blob by (3, 4) moves its centroid by 5.
    Rng rng(99);
    BinaryMask blob(30, 30), shifted(30, 30);
    for (int r = 5; r < 15; ++r)
        for (int c = 5; c < 15; ++c)
            if (rng.below(2)) {
                blob.at(r, c) = 1;
                shifted.at(r + 3, c + 4) = 1;
            }
    blob.at(10, 10) = shifted.at(13, 14) = 1;  // guarantee non-empty
    require(std::abs(centroid_distance(blob, shifted) - 5.0) < 1e-9,
            "translated blob centroid distance != 5");

    // 200 random 20x20 pairs against the O(n^2) brute force, exact.
    for (int t = 0; t < 200; ++t) {
        BinaryMask x(20, 20), y(20, 20);
        do {
            for (auto& v : x.v) v = rng.below(10) < 3;
        } while (x.foreground_count() == 0);
        do {
            for (auto& v : y.v) v = rng.below(10) < 3;
        } while (y.foreground_count() == 0);
        require(hausdorff(x, y) == brute_hausdorff(x, y),
                format("trial %d: hausdorff deviates from brute force", t));
    }
    return "200 brute-force hausdorff pairs exact; dice/tpf/cd hand cases exact";
}

// ---------------------------------------------------------------------------
// Criterion 6: vote oracle

std::string check_vote_oracle() {
    const std::vector<double> w{1.0, 1.0, 1.5, 1.0, 1.0, 1.5};
    for (int bits = 0; bits < 64; ++bits) {
        std::vector<std::uint8_t> labels(6);
        double wt = 0.0, wb = 0.0;
        for (int i = 0; i < 6; ++i) {
            labels[i] = (bits >> i) & 1;
            (labels[i] ? wt : wb) += w[i];
        }
        const int expected = wt > wb ? 1 : 0;  // ties resolve to non-tumor
        require(weighted_vote(labels, w) == expected,
                format("vote enumeration differs at pattern %d", bits));
    }

    Rng rng(123);
    for (int t = 0; t < 100; ++t) {
        std::vector<std::uint8_t> labels(6);
        std::vector<double> weights(6), scaled(6);
        const double lambda = rng.uniform(0.1, 25.0);
        for (int i = 0; i < 6; ++i) {
            labels[i] = rng.below(2);
            weights[i] = rng.uniform(0.05, 5.0);
            scaled[i] = lambda * weights[i];
        }
        require(weighted_vote(labels, weights) == weighted_vote(labels, scaled),
                format("trial %d: vote not invariant under positive scaling", t));
    }
    return "all 64 patterns match enumeration; 100 positive rescalings invariant";
}

// ---------------------------------------------------------------------------
// Shared synthetic benchmark state (criteria 7-10)

struct Benchmark {
    fs::path dataset_dir;
    fs::path run_dir;
    DatasetManifest manifest;
    LabeledImages train;      // folds 1 and 2
    LabeledImages held_out;   // fold 0
    CascadeEnsemble ensemble;
    std::vector<double> ensemble_dice;             // per held-out image
    std::vector<std::vector<double>> model_dice;   // [model][image]
    bool loaded = false;
    bool trained = false;
    bool scored = false;
};

Benchmark& bench() {
    static Benchmark b;
    return b;
}

CascadeConfig benchmark_config() {
    CascadeConfig cfg;
    cfg.max_rounds = 3;
    cfg.convergence_epsilon = 0.0;  // always run all three rounds
    cfg.basic_cap = 3000;
    cfg.resample_cap = 3000;
    cfg.probe_cap = 4000;
    cfg.val_fraction = 0.1;
    cfg.train.learning_rate = 0.001;
    cfg.train.max_epochs = 8;
    cfg.train.batch_size = 64;
    cfg.train.dropout_rate = 0.5;
    cfg.train.momentum = 0.9;
    cfg.train.patience = 0;  // fixed epoch count every round
    cfg.train.threads = bench_threads();
    cfg.seed = 7;
    return cfg;
}

void ensure_dataset() {
    Benchmark& b = bench();
    if (b.loaded) return;
    b.dataset_dir = workspace() / "dataset";
    b.run_dir = workspace() / "benchmark_run";
    fs::create_directories(b.run_dir);
    const fs::path manifest_path = b.dataset_dir / "manifest.tsv";
    if (!fs::exists(manifest_path)) {
        std::cerr << "[benchmark] generating the synthetic dataset...\n";
        const std::string cmd = std::string(CROSSBAR_CLI_PATH) +
                                " generate --subjects 12 --images-per-subject 5 --seed 7 --out " +
                                b.dataset_dir.string();
        require(run_command(cmd) == 0, "dataset generation failed");
    }
    b.manifest = DatasetManifest::load(manifest_path.string());
    require(b.manifest.entries.size() == 60, "expected 60 generated images");
    b.train = load_images(b.manifest, {1, 2});
    b.held_out = load_images(b.manifest, {0});
    require(b.train.size() == 40 && b.held_out.size() == 20,
            "unexpected fold split in the generated dataset");
    b.loaded = true;
}

std::vector<RoundRecord> read_history(const fs::path& path) {
    std::ifstream in(path);
    std::vector<RoundRecord> out;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string round_s, orient, train_s, val_s;
        std::getline(ls, round_s, ',');
        std::getline(ls, orient, ',');
        std::getline(ls, train_s, ',');
        std::getline(ls, val_s);
        RoundRecord r;
        r.round = std::stoi(round_s);
        r.orientation = orient == "horizontal" ? Orientation::horizontal : Orientation::vertical;
        r.train_error = std::stod(train_s);
        r.val_error = std::stod(val_s);
        out.push_back(r);
    }
    return out;
}

void ensure_trained() {
    Benchmark& b = bench();
    if (b.trained) return;
    ensure_dataset();

    const auto ckpt = [&](Orientation o, int r) {
        return b.run_dir / (std::string(to_string(o)) + "_" + std::to_string(r) + ".ckpt");
    };
    bool cached = fs::exists(b.run_dir / "history.csv");
    for (int r = 1; r <= 3 && cached; ++r)
        cached = fs::exists(ckpt(Orientation::vertical, r)) &&
                 fs::exists(ckpt(Orientation::horizontal, r));

    if (cached) {
        std::cerr << "[benchmark] reusing cached checkpoints in " << b.run_dir << "\n";
        b.ensemble.models.clear();
        for (Orientation o : {Orientation::vertical, Orientation::horizontal})
            for (int r = 1; r <= 3; ++r)
                b.ensemble.models.push_back(SubModel::load_checkpoint(ckpt(o, r).string()));
        b.ensemble.weights = default_vote_weights(6);
        b.ensemble.history = read_history(b.run_dir / "history.csv");
    } else {
        std::cerr << "[benchmark] training the three-round cascade (this is the long stage)...\n";
        const auto t0 = std::chrono::steady_clock::now();
        b.ensemble = run_cascade(b.train, benchmark_config());
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << format("[benchmark] cascade finished in %.0f s\n", secs);
        require(b.ensemble.rounds() == 3, "cascade should reach round 3");
        for (Orientation o : {Orientation::vertical, Orientation::horizontal})
            for (int r = 1; r <= 3; ++r)
                b.ensemble.model(o, r).save_checkpoint(ckpt(o, r).string());
        write_history_csv((b.run_dir / "history.csv").string(), b.ensemble.history);
    }
    for (const auto& rec : b.ensemble.history)
        std::cerr << format("[benchmark] round %d %s: train_error=%.4f val_error=%.4f\n", rec.round,
                            to_string(rec.orientation), rec.train_error, rec.val_error);
    b.trained = true;
}

void ensure_scored() {
    Benchmark& b = bench();
    if (b.scored) return;
    ensure_trained();

    std::cerr << "[benchmark] segmenting the 20 held-out images...\n";
    VoteConfig vote;
    vote.threads = bench_threads();
    b.model_dice.assign(b.ensemble.models.size(), {});
    for (size_t i = 0; i < b.held_out.size(); ++i) {
        const SegmentationResult res =
            segment_ensemble(b.ensemble.models, (*b.held_out.images)[i], vote);
        b.ensemble_dice.push_back(dice(res.mask, b.held_out.masks[i]));
        for (size_t m = 0; m < res.votes.size(); ++m)
            b.model_dice[m].push_back(dice(res.votes[m], b.held_out.masks[i]));
    }
    b.scored = true;
}

// Criterion 7

std::string check_benchmark() {
    ensure_scored();
    Benchmark& b = bench();

    const double mean_dice = mean(b.ensemble_dice);
    require(mean_dice >= 0.85,
            format("held-out mean dice %.4f < 0.85", mean_dice));

    double val1[2] = {-1, -1}, val3[2] = {-1, -1};
    for (const auto& rec : b.ensemble.history) {
        const int o = rec.orientation == Orientation::horizontal;
        if (rec.round == 1) val1[o] = rec.val_error;
        if (rec.round == 3) val3[o] = rec.val_error;
    }
    for (int o = 0; o < 2; ++o) {
        require(val1[o] >= 0 && val3[o] >= 0, "missing round history");
        require(val3[o] <= val1[o],
                format("%s validation error rose: round 1 %.4f -> round 3 %.4f",
                       o ? "horizontal" : "vertical", val1[o], val3[o]));
    }
    return format("mean dice %.3f on 20 held-out images; val error v %.4f->%.4f, h %.4f->%.4f",
                  mean_dice, val1[0], val3[0], val1[1], val3[1]);
}

// Criterion 8

std::string check_round_dominance() {
    ensure_scored();
    Benchmark& b = bench();

    const double ens = mean(b.ensemble_dice);
    double best_single = 0.0;
    for (const auto& d : b.model_dice) best_single = std::max(best_single, mean(d));
    require(ens >= best_single - 0.01,
            format("ensemble dice %.4f < best single %.4f - 0.01", ens, best_single));

    // Models are laid out V1 V2 V3 H1 H2 H3.
    const double first_pair = (mean(b.model_dice[0]) + mean(b.model_dice[3])) / 2.0;
    const double last_pair = (mean(b.model_dice[2]) + mean(b.model_dice[5])) / 2.0;
    require(last_pair >= first_pair,
            format("round-3 pair dice %.4f < round-1 pair %.4f", last_pair, first_pair));
    return format("ensemble %.3f vs best single %.3f; round-3 pair %.3f >= round-1 pair %.3f",
                  ens, best_single, last_pair, first_pair);
}

// Criterion 9

std::string check_determinism() {
    ensure_dataset();
    Benchmark& b = bench();
    const fs::path a_dir = workspace() / "determinism_a";
    const fs::path b_dir = workspace() / "determinism_b";
    fs::remove_all(a_dir);
    fs::remove_all(b_dir);

    const std::string common = std::string(CROSSBAR_CLI_PATH) + " train --manifest " +
                               (b.dataset_dir / "manifest.tsv").string() +
                               " --test-fold 0 --rounds 1 --epochs 1 --basic-cap 80"
                               " --probe-cap 40 --batch-size 32 --threads 1 --seed 3 --out ";
    require(run_command(common + a_dir.string()) == 0, "first training run failed");
    require(run_command(common + b_dir.string()) == 0, "second training run failed");

    for (const char* name : {"vertical_1.ckpt", "horizontal_1.ckpt"}) {
        require(read_file(a_dir / name) == read_file(b_dir / name),
                std::string(name) + " differs between identical runs");
    }

    // Save/load round-trip must reproduce the file byte for byte.
    const SubModel reloaded = SubModel::load_checkpoint((a_dir / "vertical_1.ckpt").string());
    const fs::path resaved = a_dir / "vertical_1_resaved.ckpt";
    reloaded.save_checkpoint(resaved.string());
    require(read_file(a_dir / "vertical_1.ckpt") == read_file(resaved),
            "checkpoint changed across a save/load round-trip");
    return "repeated runs and save/load round-trips are bit-identical";
}

// Criterion 10

std::string check_self_improvement() {
    ensure_dataset();
    Benchmark& b = bench();

    LabeledImages subset;
    for (size_t i = 0; i < 8 && i < b.train.size(); ++i)
        subset.add((*b.train.images)[i], b.train.masks[i], b.train.ids[i]);

    CascadeConfig cfg = benchmark_config();
    cfg.basic_cap = 800;
    cfg.resample_cap = 600;
    cfg.probe_cap = 1500;
    cfg.train.max_epochs = 3;

    std::cerr << "[benchmark] running 10 self-improvement iterations...\n";
    const SelfImprovementResult res =
        run_self_improvement(subset, Orientation::vertical, 10, cfg);
    require(res.history.size() == 10, "expected one history row per iteration");
    for (const auto& rec : res.history)
        std::cerr << format("[benchmark] iteration %d: val_error=%.4f\n", rec.round,
                            rec.val_error);
    const double first = res.history.front().val_error;
    const double last = res.history.back().val_error;
    require(last <= first,
            format("validation error rose from %.4f to %.4f over 10 iterations", first, last));
    return format("validation error %.4f -> %.4f over 10 iterations", first, last);
}

// ---------------------------------------------------------------------------

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;  // <= 0: no in-process limit (wall time still printed)
    std::function<std::string()> run;
};

}  // namespace

int main(int argc, char** argv) {
    set_blas_threads(1);

    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--only" && i + 1 < argc) {
            std::istringstream ls(argv[++i]);
            std::string tok;
            while (std::getline(ls, tok, ',')) only.insert(std::stoi(tok));
        } else {
            std::cerr << "usage: " << argv[0] << " [--only 1,2,...]\n";
            return 2;
        }
    }

    const std::vector<Criterion> criteria = {
        {1, "architecture trace", 1.0, check_architecture},
        {2, "gradient correctness", 30.0, check_gradients},
        {3, "ring-radius geometry", 5.0, check_ring_geometry},
        {4, "cover re-sampling coverage", 5.0, check_cover_resampling},
        {5, "metric oracles", 10.0, check_metric_oracles},
        {6, "weighted-vote oracle", 1.0, check_vote_oracle},
        {7, "end-to-end synthetic benchmark", 0.0, check_benchmark},
        {8, "later-round dominance", 0.0, check_round_dominance},
        {9, "training determinism", 0.0, check_determinism},
        {10, "self-improvement trend", 0.0, check_self_improvement},
    };

    int failures = 0, ran = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = c.run();
        } catch (const std::exception& ex) {
            ok = false;
            detail = ex.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (ok && c.budget_seconds > 0 && secs > c.budget_seconds) {
            ok = false;
            detail = format("exceeded the %.0f s budget (%.1f s)", c.budget_seconds, secs);
        }
        failures += !ok;
        std::cout << format("%s %2d  %s — %s (%.1f s)\n", ok ? "PASS" : "FAIL", c.id, c.name,
                            detail.c_str(), secs);
        std::cout.flush();
    }
    std::cout << format("%d/%d criteria passed\n", ran - failures, ran);
    return failures == 0 ? 0 : 1;
}

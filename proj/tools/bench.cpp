// Quick throughput probe: patch-level training and dense whole-image
// inference, used to size patch caps and epoch budgets for a given machine.

#include <chrono>
#include <cstdlib>
#include <iostream>

#include "crossbar/cascade.hpp"
#include "crossbar/data_io.hpp"
#include "crossbar/dense_eval.hpp"
#include "crossbar/gemm.hpp"

using namespace crossbar;
using Clock = std::chrono::steady_clock;

static double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int main(int argc, char** argv) {
    const int patches = argc > 1 ? std::atoi(argv[1]) : 1024;
    const int threads = argc > 2 ? std::atoi(argv[2]) : 1;
    set_blas_threads(1);

    PhantomConfig cfg;
    Rng rng(1);
    auto [image, mask] = generate_phantom(cfg, rng);

    auto images = std::make_shared<std::vector<Image2D>>();
    images->push_back(image);
    PatchDataset data(images);
    SamplingParams sp;
    sp.seed = 9;
    const auto specs = basic_sample(image.rows, image.cols, mask, Orientation::vertical, sp);
    for (const auto& s : specs) data.add(0, s);
    data.subsample(patches, 11);
    std::cout << "patches: " << data.size() << " (from " << specs.size() << " sampled)\n";

    SubModel model = SubModel::build(Orientation::vertical, 3);

    TrainConfig tc;
    tc.max_epochs = 1;
    tc.threads = threads;
    tc.shuffle_seed = 21;

    auto t0 = Clock::now();
    const auto stats = model.train_epochs(data, PatchDataset(images), tc);
    const double train_s = seconds_since(t0);
    std::cout << "train: " << train_s << " s/epoch for " << data.size() << " patches ("
              << data.size() / train_s << " patch/s, loss " << stats.back().mean_loss << ")\n";

    t0 = Clock::now();
    const auto labels = model.predict_labels(data, 256, threads);
    const double fwd_s = seconds_since(t0);
    std::cout << "predict: " << fwd_s << " s for " << labels.size() << " patches ("
              << labels.size() / fwd_s << " patch/s)\n";

    DenseEvaluator dense(model, threads);
    t0 = Clock::now();
    const Image2D prob = dense.tumor_probability(image);
    const double dense_s = seconds_since(t0);
    std::cout << "dense: " << dense_s << " s for " << image.rows << "x" << image.cols << '\n';
    return prob.pix.empty() ? 1 : 0;
}

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "crossbar/geometry.hpp"
#include "crossbar/neural.hpp"

namespace crossbar {

// One row of the architecture table.
struct LayerDef {
    enum class Kind : std::uint8_t { conv, pool };
    Kind kind = Kind::conv;
    int maps = 0;  // conv output channels; ignored for pool
    int kh = 1, kw = 1;
    int sh = 1, sw = 1;
};

// The fixed 8-conv / 2-pool stack for one orientation; the horizontal stack
// is the vertical one with every kernel transposed.
std::vector<LayerDef> submodel_architecture(Orientation o);

struct TrainConfig {
    double learning_rate = 0.0005;
    int max_epochs = 20;
    int batch_size = 64;
    double dropout_rate = 0.5;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::uint64_t shuffle_seed = 0;
    int patience = 5;  // epochs without validation improvement before stopping; <= 0 disables
    int threads = 1;
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double train_error = 0.0;
    double val_error = 0.0;
};

// Lazily extracted training set: images stay shared, patches materialize per
// mini-batch. A sample's label is the ground-truth label of its center pixel.
class PatchDataset {
public:
    struct SampleRef {
        int image = -1;
        PatchSpec spec;
    };

    PatchDataset() : images_(std::make_shared<std::vector<Image2D>>()) {}
    explicit PatchDataset(std::shared_ptr<const std::vector<Image2D>> images)
        : images_(std::move(images)) {}

    static PatchDataset from_patches(const std::vector<Patch>& patches);

    void add(int image_index, const PatchSpec& spec);
    void add_all(int image_index, const std::vector<PatchSpec>& specs);

    size_t size() const { return refs_.size(); }
    bool empty() const { return refs_.empty(); }
    const SampleRef& ref(size_t i) const { return refs_[i]; }
    int label(size_t i) const { return refs_[i].spec.label == PatchLabel::tumor ? 1 : 0; }
    const std::vector<Image2D>& images() const { return *images_; }
    std::shared_ptr<const std::vector<Image2D>> images_ptr() const { return images_; }

    // Copies sample i's window into dst (spec.height * spec.width floats).
    void fill(size_t i, float* dst) const;

    // Seeded subsample down to at most cap entries, preserving order.
    void subsample(size_t cap, std::uint64_t seed);

    bool has_both_classes() const;

private:
    std::shared_ptr<const std::vector<Image2D>> images_;
    std::vector<SampleRef> refs_;
};

// One trained sub-model: the fixed conv stack for its orientation plus
// SGD state carried across fine-tuning rounds.
class SubModel {
public:
    struct Probs {
        float tumor = 0.0f;
        float background = 0.0f;
    };

    SubModel() = default;

    // Gaussian-initialized stack: per-layer std = init_scale * sqrt(2/fan_in),
    // biases 0. Verifies the forward shape trace against the architecture table.
    static SubModel build(Orientation o, std::uint64_t init_seed, double init_scale = 1.0);

    Orientation orientation() const { return orientation_; }
    int round_index() const { return round_; }
    void set_round_index(int r) { round_ = r; }
    int input_height() const { return default_patch_height(orientation_); }
    int input_width() const { return default_patch_width(orientation_); }

    const std::vector<LayerDef>& architecture() const { return arch_; }
    const std::vector<ConvLayer<float>>& conv_layers() const { return convs_; }

    // Spatial dims entering each layer, ending with the softmax input.
    std::vector<std::pair<int, int>> shape_trace() const;
    size_t parameter_count() const;

    // Eval-mode center-pixel probability for one patch.
    Probs forward(const Patch& patch) const;

    // Eval-mode logits for a (B,1,h,w) batch; returns (B,2,1,1).
    Tensor4<float> forward_eval(const Tensor4<float>& batch) const;

    // Predicted labels (1 = tumor) for every sample of a dataset.
    std::vector<std::uint8_t> predict_labels(const PatchDataset& data, int batch_size = 256,
                                             int threads = 1) const;
    // Fraction of samples whose prediction disagrees with the dataset label.
    double error_rate(const PatchDataset& data, int batch_size = 256, int threads = 1) const;

    // Shuffled mini-batch SGD for up to max_epochs, early-stopped on the
    // validation error; exits holding the best-validation epoch's parameters.
    // An empty validation set falls back to the training error for both.
    std::vector<EpochStats> train_epochs(const PatchDataset& train, const PatchDataset& val,
                                         const TrainConfig& config);

    void save_checkpoint(const std::string& path) const;
    static SubModel load_checkpoint(const std::string& path);

private:
    Orientation orientation_ = Orientation::vertical;
    int round_ = 1;
    std::vector<LayerDef> arch_;
    std::vector<ConvLayer<float>> convs_;

    friend class DenseEvaluator;
};

}  // namespace crossbar

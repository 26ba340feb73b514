#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crossbar/data_io.hpp"
#include "crossbar/geometry.hpp"
#include "crossbar/submodel.hpp"

namespace crossbar {

struct CascadeConfig {
    int max_rounds = 3;  // T; the ensemble ends with 2T sub-models
    // Joint convergence threshold on per-round validation-error improvement;
    // <= 0 disables the early stop.
    double convergence_epsilon = 0.002;
    SamplingParams sampling;  // per-image/per-round seeds are derived from `seed`
    TrainConfig train;
    std::size_t resample_cap = 50000;  // cover-resampled patches kept per round
    std::size_t basic_cap = 0;         // basic-sampled patches per round; 0 = uncapped
    double val_fraction = 0.1;         // early-stopping split of each round's patches
    std::size_t probe_cap = 4000;      // fixed probe set sizing for the error history
    // Detect mis-segmentation at every pixel instead of the round's sampled
    // centers (much slower; kept as an option).
    bool full_window_eval = false;
    std::uint64_t seed = 0;
};

// One mis-classified patch center under the evaluated model.
struct MisRegion {
    Orientation orientation = Orientation::vertical;
    int image = -1;  // index into the dataset the evaluation ran on
    PatchSpec spec;  // center = the offending pixel
    PatchLabel predicted = PatchLabel::unlabeled;
    PatchLabel truth = PatchLabel::unlabeled;
};

struct RoundRecord {
    int round = 0;
    Orientation orientation = Orientation::vertical;
    double train_error = 0.0;
    double val_error = 0.0;
};

// V^1..V^T followed by H^1..H^T, with the vote weights aligned to that order.
struct CascadeEnsemble {
    std::vector<SubModel> models;
    std::vector<double> weights;
    std::vector<RoundRecord> history;

    int rounds() const { return static_cast<int>(models.size() / 2); }
    const SubModel& model(Orientation o, int round) const;  // round is 1-based
};

// Pairs each disagreeing center with what the model said and what the mask says.
std::vector<MisRegion> misregions_from_predictions(const PatchDataset& centers,
                                                   const std::vector<std::uint8_t>& predicted);

std::vector<MisRegion> evaluate_missegmentation(const SubModel& model, const PatchDataset& centers,
                                                int batch_size = 256, int threads = 1);

// Full sliding-window variant: every pixel of every image is a center.
std::vector<MisRegion> misregions_full_window(const SubModel& model, const LabeledImages& data,
                                              int threads = 1);

// Fine-tunes `target` into its next round: cover re-samples every misregion
// into target-orientation patches, unions a fresh basic sample, and continues
// SGD from the round-t parameters. `misregions` must come from the opposite
// orientation's evaluation (pass the model's own when self-improving).
SubModel next_round(const SubModel& target, const std::vector<MisRegion>& misregions,
                    const LabeledImages& data, const CascadeConfig& config,
                    std::uint64_t round_key, std::vector<EpochStats>* stats_out = nullptr);

CascadeEnsemble run_cascade(const LabeledImages& data, const CascadeConfig& config);

struct SelfImprovementResult {
    std::vector<SubModel> models;  // one per iteration
    std::vector<RoundRecord> history;
};

// Single-orientation variant: the model's own misregions are re-sampled in its
// own orientation and fed back to it, `iterations` times in total.
SelfImprovementResult run_self_improvement(const LabeledImages& data, Orientation orientation,
                                           int iterations, const CascadeConfig& config);

// round,orientation,train_error,val_error with a header row.
void write_history_csv(const std::string& path, const std::vector<RoundRecord>& history);

}  // namespace crossbar

#include "crossbar/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

#include "crossbar/dense_eval.hpp"

namespace crossbar {

namespace {

// Derivation keys for the per-round random streams, all mixed with the
// cascade seed. Keyed on (round, orientation) so reruns of the same round
// reproduce the same sample exactly.
std::uint64_t basic_key(int round, Orientation o) {
    return 0x100 + static_cast<std::uint64_t>(round) * 8 + (o == Orientation::horizontal);
}
std::uint64_t split_key(int round, Orientation o) {
    return 0x400 + static_cast<std::uint64_t>(round) * 8 + (o == Orientation::horizontal);
}
std::uint64_t shuffle_key(int round, Orientation o) {
    return 0x500 + static_cast<std::uint64_t>(round) * 8 + (o == Orientation::horizontal);
}
std::uint64_t init_key(Orientation o) { return 0x600 + (o == Orientation::horizontal); }
std::uint64_t probe_key(Orientation o) { return 0x300 + (o == Orientation::horizontal); }
std::uint64_t cover_key(int round, Orientation o) {
    return 0x700 + static_cast<std::uint64_t>(round) * 8 + (o == Orientation::horizontal);
}

PatchDataset sample_basic_all(const LabeledImages& data, Orientation o, const CascadeConfig& config,
                              std::uint64_t key, std::size_t cap) {
    const std::uint64_t stream = Rng::derive(config.seed, key);
    PatchDataset ds(data.images);
    for (size_t i = 0; i < data.size(); ++i) {
        SamplingParams params = config.sampling;
        params.seed = Rng::derive(stream, i);
        const Image2D& img = (*data.images)[i];
        ds.add_all(static_cast<int>(i),
                   basic_sample(img.rows, img.cols, data.masks[i], o, params));
    }
    if (cap > 0) ds.subsample(cap, Rng::derive(stream, 0xCA11));
    return ds;
}

void split_train_val(const PatchDataset& all, double fraction, std::uint64_t seed,
                     PatchDataset& train, PatchDataset& val) {
    train = PatchDataset(all.images_ptr());
    val = PatchDataset(all.images_ptr());
    const size_t n = all.size();
    size_t n_val = 0;
    if (fraction > 0.0 && n >= 2)
        n_val = std::min(n - 1, std::max<size_t>(1, static_cast<size_t>(std::lround(
                                                        static_cast<double>(n) * fraction))));
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::uint8_t> in_val(n, 0);
    for (size_t i = 0; i < n_val; ++i) in_val[order[i]] = 1;
    for (size_t i = 0; i < n; ++i) {
        const auto& r = all.ref(i);
        (in_val[i] ? val : train).add(r.image, r.spec);
    }
}

// Trains in place; returns the final epoch's stats.
EpochStats fit(SubModel& model, const PatchDataset& all, const CascadeConfig& config, int round,
               std::vector<EpochStats>* stats_out) {
    PatchDataset train, val;
    split_train_val(all, config.val_fraction,
                    Rng::derive(config.seed, split_key(round, model.orientation())), train, val);
    TrainConfig tc = config.train;
    tc.shuffle_seed = Rng::derive(config.seed, shuffle_key(round, model.orientation()));
    const auto stats = model.train_epochs(train, val, tc);
    if (stats_out) *stats_out = stats;
    return stats.back();
}

}  // namespace

const SubModel& CascadeEnsemble::model(Orientation o, int round) const {
    const int T = rounds();
    if (round < 1 || round > T)
        throw std::out_of_range("CascadeEnsemble: round " + std::to_string(round) + " of " +
                                std::to_string(T));
    return models[(o == Orientation::horizontal ? T : 0) + round - 1];
}

std::vector<MisRegion> misregions_from_predictions(const PatchDataset& centers,
                                                   const std::vector<std::uint8_t>& predicted) {
    if (predicted.size() != centers.size())
        throw std::invalid_argument("misregions: " + std::to_string(predicted.size()) +
                                    " predictions for " + std::to_string(centers.size()) +
                                    " centers");
    std::vector<MisRegion> out;
    for (size_t i = 0; i < centers.size(); ++i) {
        const int truth = centers.label(i);
        if ((predicted[i] != 0) == (truth != 0)) continue;
        MisRegion m;
        m.orientation = centers.ref(i).spec.orientation;
        m.image = centers.ref(i).image;
        m.spec = centers.ref(i).spec;
        m.predicted = predicted[i] ? PatchLabel::tumor : PatchLabel::non_tumor;
        m.truth = truth ? PatchLabel::tumor : PatchLabel::non_tumor;
        out.push_back(m);
    }
    return out;
}

std::vector<MisRegion> evaluate_missegmentation(const SubModel& model, const PatchDataset& centers,
                                                int batch_size, int threads) {
    return misregions_from_predictions(centers, model.predict_labels(centers, batch_size, threads));
}

std::vector<MisRegion> misregions_full_window(const SubModel& model, const LabeledImages& data,
                                              int threads) {
    DenseEvaluator eval(model, threads);
    std::vector<MisRegion> out;
    for (size_t i = 0; i < data.size(); ++i) {
        const BinaryMask pred = eval.label_map((*data.images)[i]);
        const BinaryMask& truth = data.masks[i];
        for (int r = 0; r < pred.rows; ++r)
            for (int c = 0; c < pred.cols; ++c) {
                if ((pred.at(r, c) != 0) == (truth.at(r, c) != 0)) continue;
                MisRegion m;
                m.orientation = model.orientation();
                m.image = static_cast<int>(i);
                m.spec = {model.orientation(), r, c, model.input_height(), model.input_width(),
                          truth.at(r, c) ? PatchLabel::tumor : PatchLabel::non_tumor};
                m.predicted = pred.at(r, c) ? PatchLabel::tumor : PatchLabel::non_tumor;
                m.truth = truth.at(r, c) ? PatchLabel::tumor : PatchLabel::non_tumor;
                out.push_back(m);
            }
    }
    return out;
}

SubModel next_round(const SubModel& target, const std::vector<MisRegion>& misregions,
                    const LabeledImages& data, const CascadeConfig& config,
                    std::uint64_t round_key, std::vector<EpochStats>* stats_out) {
    const Orientation o = target.orientation();
    const int round = static_cast<int>(round_key);

    // Cover re-sampling of every misregion, in the target's orientation.
    PatchDataset combined(data.images);
    std::set<std::tuple<int, int, int>> seen;  // (image, row, col)
    for (const auto& m : misregions) {
        if (m.image < 0 || m.image >= static_cast<int>(data.size()))
            throw std::invalid_argument("next_round: misregion image index out of range");
        for (const auto& spec : cover_resample_oriented(m.spec, o, data.masks[m.image],
                                                        config.sampling))
            if (seen.emplace(m.image, spec.row, spec.col).second) combined.add(m.image, spec);
    }
    if (config.resample_cap > 0)
        combined.subsample(config.resample_cap,
                           Rng::derive(config.seed, cover_key(round, o)));

    // Union with a fresh basic sample (duplicated centers kept once).
    if (config.resample_cap > 0 && combined.size() == config.resample_cap) {
        seen.clear();
        for (size_t i = 0; i < combined.size(); ++i) {
            const auto& r = combined.ref(i);
            seen.emplace(r.image, r.spec.row, r.spec.col);
        }
    }
    const PatchDataset basic =
        sample_basic_all(data, o, config, basic_key(round, o), config.basic_cap);
    for (size_t i = 0; i < basic.size(); ++i) {
        const auto& r = basic.ref(i);
        if (seen.emplace(r.image, r.spec.row, r.spec.col).second) combined.add(r.image, r.spec);
    }
    if (combined.empty()) throw std::runtime_error("next_round: empty combined training set");

    SubModel next = target;  // fine-tune: continue from the round-t parameters
    next.set_round_index(target.round_index() + 1);
    fit(next, combined, config, round, stats_out);
    return next;
}

CascadeEnsemble run_cascade(const LabeledImages& data, const CascadeConfig& config) {
    if (data.size() == 0) throw std::invalid_argument("run_cascade: empty dataset");
    if (config.max_rounds < 1) throw std::invalid_argument("run_cascade: max_rounds must be >= 1");
    const int threads = std::max(1, config.train.threads);

    // Fixed probe sets make the per-round validation errors comparable.
    const PatchDataset probe_v =
        sample_basic_all(data, Orientation::vertical, config, probe_key(Orientation::vertical),
                         config.probe_cap);
    const PatchDataset probe_h =
        sample_basic_all(data, Orientation::horizontal, config, probe_key(Orientation::horizontal),
                         config.probe_cap);

    CascadeEnsemble ens;
    std::vector<SubModel> vs, hs;
    double prev_val_v = 0.0, prev_val_h = 0.0;

    for (int round = 1; round <= config.max_rounds; ++round) {
        EpochStats last_v, last_h;
        if (round == 1) {
            SubModel v = SubModel::build(Orientation::vertical,
                                         Rng::derive(config.seed, init_key(Orientation::vertical)));
            SubModel h = SubModel::build(Orientation::horizontal,
                                         Rng::derive(config.seed, init_key(Orientation::horizontal)));
            last_v = fit(v, sample_basic_all(data, v.orientation(), config,
                                             basic_key(1, v.orientation()), config.basic_cap),
                         config, 1, nullptr);
            last_h = fit(h, sample_basic_all(data, h.orientation(), config,
                                             basic_key(1, h.orientation()), config.basic_cap),
                         config, 1, nullptr);
            vs.push_back(std::move(v));
            hs.push_back(std::move(h));
        } else {
            // Cross-feed: each orientation's misregions, found at the previous
            // round's sampled centers, drive the other orientation's update.
            const SubModel& v_prev = vs.back();
            const SubModel& h_prev = hs.back();
            std::vector<MisRegion> mis_v, mis_h;
            if (config.full_window_eval) {
                mis_v = misregions_full_window(v_prev, data, threads);
                mis_h = misregions_full_window(h_prev, data, threads);
            } else {
                const PatchDataset centers_v =
                    sample_basic_all(data, v_prev.orientation(), config,
                                     basic_key(round - 1, v_prev.orientation()), config.basic_cap);
                const PatchDataset centers_h =
                    sample_basic_all(data, h_prev.orientation(), config,
                                     basic_key(round - 1, h_prev.orientation()), config.basic_cap);
                mis_v = evaluate_missegmentation(v_prev, centers_v, config.train.batch_size, threads);
                mis_h = evaluate_missegmentation(h_prev, centers_h, config.train.batch_size, threads);
            }
            std::vector<EpochStats> stats_v, stats_h;
            SubModel v = next_round(v_prev, mis_h, data, config, round, &stats_v);
            SubModel h = next_round(h_prev, mis_v, data, config, round, &stats_h);
            last_v = stats_v.back();
            last_h = stats_h.back();
            vs.push_back(std::move(v));
            hs.push_back(std::move(h));
        }

        const double val_v = vs.back().error_rate(probe_v, config.train.batch_size, threads);
        const double val_h = hs.back().error_rate(probe_h, config.train.batch_size, threads);
        ens.history.push_back({round, Orientation::vertical, last_v.train_error, val_v});
        ens.history.push_back({round, Orientation::horizontal, last_h.train_error, val_h});

        if (round > 1 && config.convergence_epsilon > 0.0 &&
            prev_val_v - val_v < config.convergence_epsilon &&
            prev_val_h - val_h < config.convergence_epsilon)
            break;
        prev_val_v = val_v;
        prev_val_h = val_h;
    }

    ens.models.reserve(vs.size() + hs.size());
    for (auto& m : vs) ens.models.push_back(std::move(m));
    for (auto& m : hs) ens.models.push_back(std::move(m));
    ens.weights = std::vector<double>(ens.models.size(), 1.0);
    ens.weights[vs.size() - 1] = 1.5;
    ens.weights.back() = 1.5;
    return ens;
}

SelfImprovementResult run_self_improvement(const LabeledImages& data, Orientation orientation,
                                           int iterations, const CascadeConfig& config) {
    if (data.size() == 0) throw std::invalid_argument("run_self_improvement: empty dataset");
    if (iterations < 1)
        throw std::invalid_argument("run_self_improvement: iterations must be >= 1");
    const int threads = std::max(1, config.train.threads);

    const PatchDataset probe =
        sample_basic_all(data, orientation, config, probe_key(orientation) + 0x10, config.probe_cap);

    SelfImprovementResult res;
    SubModel model = SubModel::build(orientation, Rng::derive(config.seed, init_key(orientation)));
    EpochStats last = fit(model, sample_basic_all(data, orientation, config,
                                                  basic_key(1, orientation), config.basic_cap),
                          config, 1, nullptr);
    res.history.push_back({1, orientation, last.train_error,
                           model.error_rate(probe, config.train.batch_size, threads)});
    res.models.push_back(model);

    for (int it = 2; it <= iterations; ++it) {
        std::vector<MisRegion> mis;
        if (config.full_window_eval) {
            mis = misregions_full_window(model, data, threads);
        } else {
            const PatchDataset centers = sample_basic_all(
                data, orientation, config, basic_key(it - 1, orientation), config.basic_cap);
            mis = evaluate_missegmentation(model, centers, config.train.batch_size, threads);
        }
        std::vector<EpochStats> stats;
        model = next_round(model, mis, data, config, it, &stats);
        res.history.push_back({it, orientation, stats.back().train_error,
                               model.error_rate(probe, config.train.batch_size, threads)});
        res.models.push_back(model);
    }
    return res;
}

void write_history_csv(const std::string& path, const std::vector<RoundRecord>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_history_csv: cannot open " + path);
    out << "round,orientation,train_error,val_error\n";
    out << std::fixed << std::setprecision(6);
    for (const auto& r : history)
        out << r.round << ',' << to_string(r.orientation) << ',' << r.train_error << ','
            << r.val_error << '\n';
    if (!out) throw std::runtime_error("write_history_csv: write failed for " + path);
}

}  // namespace crossbar

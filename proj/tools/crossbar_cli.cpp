// Command-line front end for the crossbar segmentation pipeline: phantom
// dataset generation, cascaded training, ensemble segmentation, metric
// evaluation and sampling inspection. Diagnostics go to stderr; every command
// writes an effective-config record next to its outputs.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "crossbar/cascade.hpp"
#include "crossbar/data_io.hpp"
#include "crossbar/dense_eval.hpp"
#include "crossbar/gemm.hpp"
#include "crossbar/metrics.hpp"
#include "crossbar/vote.hpp"

namespace fs = std::filesystem;
using namespace crossbar;

namespace {

int default_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n ? static_cast<int>(n) : 1;
}

using ConfigRecord = std::vector<std::pair<std::string, std::string>>;

void write_effective_config(const fs::path& out_dir, const std::string& command,
                            const ConfigRecord& entries) {
    std::ofstream out(out_dir / "effective_config.txt", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write effective config in " + out_dir.string());
    out << "command = " << command << '\n';
    for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// Shared naming between segment and evaluate.
std::string prediction_stem(const ManifestEntry& e) {
    return e.subject_id + "__" + fs::path(e.image_path).stem().string();
}

Orientation parse_orientation(const std::string& s) {
    if (s == "vertical") return Orientation::vertical;
    if (s == "horizontal") return Orientation::horizontal;
    throw CLI::ValidationError("orientation must be 'vertical' or 'horizontal', got '" + s + "'");
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
    int subjects = 12;
    int images_per_subject = 5;
    int folds = 3;
    std::uint64_t seed = 0;
    std::string out = "dataset";
    PhantomConfig phantom;
};

int run_generate(const GenerateArgs& a) {
    fs::create_directories(a.out);
    DatasetManifest manifest;
    manifest.base_dir = a.out;

    std::vector<std::string> subject_ids;
    for (int s = 0; s < a.subjects; ++s) {
        std::ostringstream id;
        id << 's' << std::setw(3) << std::setfill('0') << s + 1;
        subject_ids.push_back(id.str());
    }
    const std::vector<int> folds = make_folds(subject_ids, a.folds, Rng::derive(a.seed, 0xF01D));

    for (int s = 0; s < a.subjects; ++s) {
        const fs::path subject_dir = fs::path(a.out) / subject_ids[s];
        fs::create_directories(subject_dir);
        for (int i = 0; i < a.images_per_subject; ++i) {
            Rng rng(Rng::derive(a.seed, static_cast<std::uint64_t>(s) * 10007 + i));
            auto [image, mask] = generate_phantom(a.phantom, rng);
            std::ostringstream img_name, msk_name;
            img_name << "img" << std::setw(3) << std::setfill('0') << i << ".pgm";
            msk_name << "msk" << std::setw(3) << std::setfill('0') << i << ".pgm";
            write_image((subject_dir / img_name.str()).string(), image);
            write_mask((subject_dir / msk_name.str()).string(), mask);
            ManifestEntry e;
            e.subject_id = subject_ids[s];
            e.image_path = subject_ids[s] + "/" + img_name.str();
            e.mask_path = subject_ids[s] + "/" + msk_name.str();
            e.fold = folds[s];
            manifest.entries.push_back(std::move(e));
        }
        std::cerr << "generated subject " << subject_ids[s] << " (fold " << folds[s] << ")\n";
    }
    manifest.save((fs::path(a.out) / "manifest.tsv").string());

    write_effective_config(a.out, "generate",
                           {{"subjects", std::to_string(a.subjects)},
                            {"images_per_subject", std::to_string(a.images_per_subject)},
                            {"folds", std::to_string(a.folds)},
                            {"seed", std::to_string(a.seed)},
                            {"out", a.out},
                            {"image_size", std::to_string(a.phantom.rows)},
                            {"min_diameter", fmt(a.phantom.min_diameter)},
                            {"max_diameter", fmt(a.phantom.max_diameter)},
                            {"background", fmt(a.phantom.background_intensity)},
                            {"contrast_min", fmt(a.phantom.contrast_min)},
                            {"contrast_max", fmt(a.phantom.contrast_max)},
                            {"noise_sigma", fmt(a.phantom.noise_sigma)},
                            {"axis_ratio_min", fmt(a.phantom.axis_ratio_min)},
                            {"boundary_amplitude", fmt(a.phantom.boundary_amplitude)},
                            {"distractors", std::to_string(a.phantom.distractor_count)}});
    std::cerr << "wrote " << manifest.entries.size() << " image/mask pairs under " << a.out << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string manifest;
    int test_fold = 0;
    std::uint64_t seed = 0;
    int threads = default_threads();
    std::string out = "run";
    CascadeConfig cascade;
    std::string self_improve;  // orientation; empty = full cascade
    int iterations = 10;
};

ConfigRecord train_config_record(const TrainArgs& a) {
    return {{"manifest", a.manifest},
            {"test_fold", std::to_string(a.test_fold)},
            {"seed", std::to_string(a.seed)},
            {"threads", std::to_string(a.threads)},
            {"out", a.out},
            {"rounds", std::to_string(a.cascade.max_rounds)},
            {"epsilon", fmt(a.cascade.convergence_epsilon)},
            {"learning_rate", fmt(a.cascade.train.learning_rate)},
            {"epochs", std::to_string(a.cascade.train.max_epochs)},
            {"batch_size", std::to_string(a.cascade.train.batch_size)},
            {"dropout", fmt(a.cascade.train.dropout_rate)},
            {"momentum", fmt(a.cascade.train.momentum)},
            {"weight_decay", fmt(a.cascade.train.weight_decay)},
            {"patience", std::to_string(a.cascade.train.patience)},
            {"beta", fmt(a.cascade.sampling.beta)},
            {"tumor_fraction", fmt(a.cascade.sampling.tumor_fraction)},
            {"arc_step", fmt(a.cascade.sampling.arc_step)},
            {"row_stride", std::to_string(a.cascade.sampling.row_stride)},
            {"resample_cap", std::to_string(a.cascade.resample_cap)},
            {"basic_cap", std::to_string(a.cascade.basic_cap)},
            {"probe_cap", std::to_string(a.cascade.probe_cap)},
            {"val_fraction", fmt(a.cascade.val_fraction)},
            {"full_window_eval", a.cascade.full_window_eval ? "true" : "false"},
            {"self_improve", a.self_improve.empty() ? "off" : a.self_improve},
            {"iterations", std::to_string(a.iterations)}};
}

int run_train(TrainArgs a) {
    a.cascade.seed = a.seed;
    a.cascade.train.threads = a.threads;

    const DatasetManifest manifest = DatasetManifest::load(a.manifest);
    std::vector<int> train_folds;
    for (int f : manifest.folds())
        if (f != a.test_fold) train_folds.push_back(f);
    if (train_folds.empty())
        throw std::runtime_error("train: no folds left after holding out fold " +
                                 std::to_string(a.test_fold));
    std::cerr << "loading training folds:";
    for (int f : train_folds) std::cerr << ' ' << f;
    std::cerr << " (holding out " << a.test_fold << ")\n";
    const LabeledImages data = load_images(manifest, train_folds);
    if (data.size() == 0) throw std::runtime_error("train: no training images");
    std::cerr << "loaded " << data.size() << " training images\n";

    fs::create_directories(a.out);

    std::vector<RoundRecord> history;
    if (a.self_improve.empty()) {
        const CascadeEnsemble ens = run_cascade(data, a.cascade);
        for (int r = 1; r <= ens.rounds(); ++r)
            for (Orientation o : {Orientation::vertical, Orientation::horizontal}) {
                const fs::path path =
                    fs::path(a.out) / (std::string(to_string(o)) + "_" + std::to_string(r) + ".ckpt");
                ens.model(o, r).save_checkpoint(path.string());
            }
        history = ens.history;
        std::cerr << "cascade finished with " << ens.models.size() << " sub-models\n";
    } else {
        const Orientation o = parse_orientation(a.self_improve);
        const SelfImprovementResult res = run_self_improvement(data, o, a.iterations, a.cascade);
        for (size_t i = 0; i < res.models.size(); ++i) {
            const fs::path path = fs::path(a.out) / (std::string(to_string(o)) + "_" +
                                                     std::to_string(i + 1) + ".ckpt");
            res.models[i].save_checkpoint(path.string());
        }
        history = res.history;
        std::cerr << "self-improvement finished after " << res.models.size() << " iterations\n";
    }

    write_history_csv((fs::path(a.out) / "history.csv").string(), history);
    for (const auto& r : history)
        std::cerr << "round " << r.round << ' ' << to_string(r.orientation)
                  << ": train_error=" << r.train_error << " val_error=" << r.val_error << '\n';
    write_effective_config(a.out, "train", train_config_record(a));
    return 0;
}

// ---------------------------------------------------------------------------
// segment

struct SegmentArgs {
    std::string manifest;
    std::string checkpoints;
    int fold = -1;  // -1 = all entries
    int rounds = 0;  // 0 = autodetect
    std::vector<double> weights;
    int stride = 1;
    int threads = default_threads();
    bool score_maps = false;
    bool per_model = false;
    bool keep_largest = false;
    std::string out = "predictions";
};

std::vector<SubModel> load_ensemble(const std::string& dir, int rounds) {
    auto path_for = [&](Orientation o, int r) {
        return fs::path(dir) / (std::string(to_string(o)) + "_" + std::to_string(r) + ".ckpt");
    };
    if (rounds == 0) {
        while (fs::exists(path_for(Orientation::vertical, rounds + 1)) &&
               fs::exists(path_for(Orientation::horizontal, rounds + 1)))
            ++rounds;
        if (rounds == 0)
            throw std::runtime_error("segment: no checkpoint pairs found in " + dir +
                                     " (expected vertical_1.ckpt / horizontal_1.ckpt)");
    }
    std::vector<SubModel> models;
    for (Orientation o : {Orientation::vertical, Orientation::horizontal})
        for (int r = 1; r <= rounds; ++r) {
            const fs::path p = path_for(o, r);
            if (!fs::exists(p))
                throw std::runtime_error("segment: missing checkpoint file " + p.string());
            models.push_back(SubModel::load_checkpoint(p.string()));
        }
    return models;
}

void write_score_map(const std::string& path, const Image2D& score) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "crossbar-score 1 " << score.rows << ' ' << score.cols << '\n';
    out.write(reinterpret_cast<const char*>(score.pix.data()),
              static_cast<std::streamsize>(score.pix.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed for " + path);
}

int run_segment(const SegmentArgs& a) {
    const DatasetManifest manifest = DatasetManifest::load(a.manifest);
    const std::vector<SubModel> models = load_ensemble(a.checkpoints, a.rounds);
    std::cerr << "loaded " << models.size() << " sub-models from " << a.checkpoints << '\n';

    VoteConfig vote;
    vote.stride = a.stride;
    vote.threads = a.threads;
    vote.keep_largest_component = a.keep_largest;
    if (!a.weights.empty()) vote.weights = a.weights;

    fs::create_directories(a.out);
    size_t done = 0;
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        if (a.fold >= 0 && e.fold != a.fold) continue;
        Image2D image = read_image(manifest.image_file(i));
        normalize_minmax(image);
        const SegmentationResult res = segment_ensemble(models, image, vote);
        const std::string stem = prediction_stem(e);
        write_mask((fs::path(a.out) / (stem + ".pgm")).string(), res.mask);
        if (a.score_maps)
            write_score_map((fs::path(a.out) / (stem + ".score")).string(), res.score);
        if (a.per_model)
            for (size_t m = 0; m < models.size(); ++m) {
                const std::string key = std::string(to_string(models[m].orientation())) + "_" +
                                        std::to_string(models[m].round_index());
                write_mask((fs::path(a.out) / (stem + "__" + key + ".pgm")).string(),
                           res.votes[m]);
            }
        ++done;
        std::cerr << "segmented " << stem << " (" << done << ")\n";
    }
    if (done == 0) throw std::runtime_error("segment: no manifest entries matched fold filter");

    ConfigRecord rec{{"manifest", a.manifest},
                     {"checkpoints", a.checkpoints},
                     {"fold", std::to_string(a.fold)},
                     {"rounds", std::to_string(a.rounds)},
                     {"stride", std::to_string(a.stride)},
                     {"threads", std::to_string(a.threads)},
                     {"score_maps", a.score_maps ? "true" : "false"},
                     {"per_model", a.per_model ? "true" : "false"},
                     {"keep_largest", a.keep_largest ? "true" : "false"},
                     {"out", a.out}};
    std::string wstr;
    for (double w : a.weights) wstr += (wstr.empty() ? "" : ",") + fmt(w);
    rec.emplace_back("weights", wstr.empty() ? "default" : wstr);
    write_effective_config(a.out, "segment", rec);
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::string manifest;
    std::string pred;
    int fold = -1;
    std::string out;
};

std::optional<MetricRecord> score_pair(const std::string& id, const BinaryMask& pred,
                                       const BinaryMask& truth) {
    if (!pred.same_dims(truth)) {
        std::cerr << "error: " << id << ": prediction " << pred.rows << "x" << pred.cols
                  << " does not match truth " << truth.rows << "x" << truth.cols << '\n';
        return std::nullopt;
    }
    MetricRecord r;
    r.image_id = id;
    r.dice = dice(pred, truth);
    r.tpf = tpf(pred, truth);
    try {
        r.hausdorff = hausdorff(pred, truth);
        r.centroid_distance = centroid_distance(pred, truth);
    } catch (const std::exception&) {
        // Empty prediction: boundary distances are undefined for the image.
        r.hausdorff = std::numeric_limits<double>::quiet_NaN();
        r.centroid_distance = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

void write_records_csv(const fs::path& path, const std::vector<MetricRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "image_id,dr,tpf,hd,cd\n" << std::setprecision(9);
    for (const auto& r : records)
        out << r.image_id << ',' << r.dice << ',' << r.tpf << ',' << r.hausdorff << ','
            << r.centroid_distance << '\n';
}

int run_evaluate(const EvaluateArgs& a) {
    const DatasetManifest manifest = DatasetManifest::load(a.manifest);
    const fs::path out_dir = a.out.empty() ? fs::path(a.pred) : fs::path(a.out);
    fs::create_directories(out_dir);

    bool had_errors = false;
    std::vector<MetricRecord> records;
    std::map<std::string, std::vector<MetricRecord>> per_model;

    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        if (a.fold >= 0 && e.fold != a.fold) continue;
        const std::string stem = prediction_stem(e);
        const fs::path pred_path = fs::path(a.pred) / (stem + ".pgm");
        if (!fs::exists(pred_path)) {
            std::cerr << "error: missing prediction " << pred_path.string() << '\n';
            had_errors = true;
            continue;
        }
        const BinaryMask truth = read_mask(manifest.mask_file(i));
        const BinaryMask pred = read_mask(pred_path.string());
        if (auto rec = score_pair(stem, pred, truth)) records.push_back(*rec);
        else had_errors = true;

        // Optional per-sub-model masks written by `segment --per-model`.
        for (Orientation o : {Orientation::vertical, Orientation::horizontal})
            for (int r = 1;; ++r) {
                const std::string key = std::string(to_string(o)) + "_" + std::to_string(r);
                const fs::path mp = fs::path(a.pred) / (stem + "__" + key + ".pgm");
                if (!fs::exists(mp)) break;
                if (auto rec = score_pair(stem + "#" + key, read_mask(mp.string()), truth))
                    per_model[key].push_back(*rec);
                else had_errors = true;
            }
    }
    if (records.empty()) throw std::runtime_error("evaluate: no prediction/truth pairs scored");

    write_records_csv(out_dir / "per_image.csv", records);
    const MetricSummary summary = summarize(records);
    {
        std::ofstream out(out_dir / "summary.csv", std::ios::trunc);
        out << "metric,mean\n" << std::setprecision(9);
        out << "dice," << summary.mean_dice << '\n';
        out << "tpf," << summary.mean_tpf << '\n';
        out << "hausdorff," << summary.mean_hausdorff << '\n';
        out << "centroid_distance," << summary.mean_centroid_distance << '\n';
    }
    {
        std::ofstream out(out_dir / "dice_histogram.csv", std::ios::trunc);
        out << "bin_low,bin_high,count\n" << std::setprecision(9);
        for (size_t b = 0; b < summary.dice_histogram.size(); ++b)
            out << b * kDiceHistogramBinWidth << ',' << (b + 1) * kDiceHistogramBinWidth << ','
                << summary.dice_histogram[b] << '\n';
    }
    if (!per_model.empty()) {
        std::ofstream out(out_dir / "per_model.csv", std::ios::trunc);
        out << "model,images,mean_dice,mean_tpf,mean_hausdorff,mean_centroid_distance\n"
            << std::setprecision(9);
        for (const auto& [key, recs] : per_model) {
            const MetricSummary s = summarize(recs);
            out << key << ',' << s.count << ',' << s.mean_dice << ',' << s.mean_tpf << ','
                << s.mean_hausdorff << ',' << s.mean_centroid_distance << '\n';
        }
    }
    std::cout << "images=" << summary.count << " mean_dice=" << summary.mean_dice
              << " mean_tpf=" << summary.mean_tpf << " mean_hausdorff=" << summary.mean_hausdorff
              << " mean_centroid_distance=" << summary.mean_centroid_distance << '\n';

    write_effective_config(out_dir, "evaluate",
                           {{"manifest", a.manifest},
                            {"pred", a.pred},
                            {"fold", std::to_string(a.fold)},
                            {"out", out_dir.string()}});
    return had_errors ? 1 : 0;
}

// ---------------------------------------------------------------------------
// inspect-sampling

struct InspectArgs {
    std::string image;
    std::string mask;
    std::string orientation = "vertical";
    std::uint64_t seed = 0;
    std::string out = "sampling";
    SamplingParams sampling;
};

void write_specs_csv(const fs::path& path, const std::vector<PatchSpec>& specs) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "orientation,row,col,height,width,label\n";
    for (const auto& s : specs)
        out << to_string(s.orientation) << ',' << s.row << ',' << s.col << ',' << s.height << ','
            << s.width << ',' << to_string(s.label) << '\n';
}

int run_inspect(InspectArgs a) {
    a.sampling.seed = a.seed;
    const Orientation o = parse_orientation(a.orientation);
    Image2D image = read_image(a.image);
    normalize_minmax(image);
    const BinaryMask mask = read_mask(a.mask);
    if (mask.rows != image.rows || mask.cols != image.cols)
        throw std::runtime_error("inspect-sampling: image/mask dimensions differ");

    fs::create_directories(a.out);
    const TumorStats stats = region_stats(mask);
    std::cerr << "region: centroid (" << stats.centroid_row << ", " << stats.centroid_col
              << ") incircle r=" << stats.incircle_radius
              << " circumcircle=" << stats.circumcircle_radius << " R=" << stats.outer_radius
              << " area=" << stats.area << '\n';

    write_specs_csv(fs::path(a.out) / "basic_sample.csv",
                    basic_sample(image.rows, image.cols, mask, o, a.sampling));

    {
        std::ofstream out(fs::path(a.out) / "ring_radii.csv", std::ios::trunc);
        out << "i,chi\n" << std::setprecision(9);
        const auto radii = ring_radii(stats, a.sampling);
        for (size_t i = 0; i < radii.size(); ++i) out << i << ',' << radii[i] << '\n';
    }

    // Cover pattern for a misregion planted at the tumor centroid.
    PatchSpec mis;
    mis.orientation = o;
    mis.row = static_cast<int>(std::lround(stats.centroid_row));
    mis.col = static_cast<int>(std::lround(stats.centroid_col));
    mis.height = default_patch_height(o);
    mis.width = default_patch_width(o);
    mis.label = PatchLabel::tumor;
    write_specs_csv(fs::path(a.out) / "cover_resample.csv",
                    cover_resample(mis, mask, a.sampling));

    write_effective_config(a.out, "inspect-sampling",
                           {{"image", a.image},
                            {"mask", a.mask},
                            {"orientation", a.orientation},
                            {"seed", std::to_string(a.seed)},
                            {"beta", fmt(a.sampling.beta)},
                            {"tumor_fraction", fmt(a.sampling.tumor_fraction)},
                            {"arc_step", fmt(a.sampling.arc_step)},
                            {"row_stride", std::to_string(a.sampling.row_stride)},
                            {"out", a.out}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crossbar patch segmentation pipeline"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "Config file with key = value lines; flags take precedence");

    // Global defaults; a subcommand's own flag takes precedence.
    std::uint64_t global_seed = 0;
    int global_threads = default_threads();
    std::string global_out;
    auto* opt_seed = app.add_option("--seed", global_seed, "Default master seed");
    auto* opt_threads = app.add_option("--threads", global_threads, "Default worker thread cap");
    auto* opt_out = app.add_option("--out", global_out, "Default output directory");

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Generate a synthetic phantom dataset");
    g->add_option("--subjects", gen.subjects, "Subject count")->capture_default_str();
    g->add_option("--images-per-subject", gen.images_per_subject, "Images per subject")
        ->capture_default_str();
    g->add_option("--folds", gen.folds, "Cross-validation fold count")->capture_default_str();
    g->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
    g->add_option("--out", gen.out, "Output directory")->capture_default_str();
    g->add_option("--image-size", gen.phantom.rows, "Square image side in pixels")
        ->capture_default_str();
    g->add_option("--min-diameter", gen.phantom.min_diameter, "Smallest tumor diameter")
        ->capture_default_str();
    g->add_option("--max-diameter", gen.phantom.max_diameter, "Largest tumor diameter")
        ->capture_default_str();
    g->add_option("--background", gen.phantom.background_intensity, "Background intensity")
        ->capture_default_str();
    g->add_option("--contrast-min", gen.phantom.contrast_min, "Minimum tumor contrast")
        ->capture_default_str();
    g->add_option("--contrast-max", gen.phantom.contrast_max, "Maximum tumor contrast")
        ->capture_default_str();
    g->add_option("--noise-sigma", gen.phantom.noise_sigma, "Additive Gaussian noise sigma")
        ->capture_default_str();
    g->add_option("--axis-ratio-min", gen.phantom.axis_ratio_min, "Ellipse minor/major lower bound")
        ->capture_default_str();
    g->add_option("--boundary-amplitude", gen.phantom.boundary_amplitude,
                  "Boundary perturbation amplitude")
        ->capture_default_str();
    g->add_option("--distractors", gen.phantom.distractor_count, "Distractor blob count")
        ->capture_default_str();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train the cascaded sub-model ensemble");
    t->add_option("--manifest", tr.manifest, "Dataset manifest")->required();
    t->add_option("--test-fold", tr.test_fold, "Fold held out from training")->capture_default_str();
    t->add_option("--rounds", tr.cascade.max_rounds, "Cascade rounds T")->capture_default_str();
    t->add_option("--epsilon", tr.cascade.convergence_epsilon,
                  "Convergence threshold on validation-error improvement; <= 0 disables")
        ->capture_default_str();
    t->add_option("--seed", tr.seed, "Master seed")->capture_default_str();
    t->add_option("--threads", tr.threads, "Worker thread cap")->capture_default_str();
    t->add_option("--out", tr.out, "Output directory for checkpoints and history")
        ->capture_default_str();
    t->add_option("--learning-rate", tr.cascade.train.learning_rate, "SGD learning rate")
        ->capture_default_str();
    t->add_option("--epochs", tr.cascade.train.max_epochs, "Max epochs per round")
        ->capture_default_str();
    t->add_option("--batch-size", tr.cascade.train.batch_size, "Mini-batch size")
        ->capture_default_str();
    t->add_option("--dropout", tr.cascade.train.dropout_rate, "Dropout rate before the classifier")
        ->capture_default_str();
    t->add_option("--momentum", tr.cascade.train.momentum, "SGD momentum")->capture_default_str();
    t->add_option("--weight-decay", tr.cascade.train.weight_decay, "L2 weight decay")
        ->capture_default_str();
    t->add_option("--patience", tr.cascade.train.patience,
                  "Early-stop patience in epochs; <= 0 disables")
        ->capture_default_str();
    t->add_option("--beta", tr.cascade.sampling.beta, "Ring decay constant")->capture_default_str();
    t->add_option("--tumor-fraction", tr.cascade.sampling.tumor_fraction,
                  "Fraction of foreground pixels used as tumor centers")
        ->capture_default_str();
    t->add_option("--arc-step", tr.cascade.sampling.arc_step, "Arc spacing along rings in pixels")
        ->capture_default_str();
    t->add_option("--row-stride", tr.cascade.sampling.row_stride,
                  "Cover re-sampling stride along the long axis")
        ->capture_default_str();
    t->add_option("--resample-cap", tr.cascade.resample_cap,
                  "Cover-resampled patches kept per round")
        ->capture_default_str();
    t->add_option("--basic-cap", tr.cascade.basic_cap,
                  "Basic-sampled patches kept per round; 0 = uncapped")
        ->capture_default_str();
    t->add_option("--probe-cap", tr.cascade.probe_cap, "Probe-set size for the error history")
        ->capture_default_str();
    t->add_option("--val-fraction", tr.cascade.val_fraction, "Early-stopping validation split")
        ->capture_default_str();
    t->add_flag("--full-window-eval", tr.cascade.full_window_eval,
                "Find misregions at every pixel instead of sampled centers");
    t->add_option("--self-improve", tr.self_improve,
                  "Run single-orientation self-improvement (vertical|horizontal)");
    t->add_option("--iterations", tr.iterations, "Self-improvement iterations")
        ->capture_default_str();

    SegmentArgs seg;
    auto* s = app.add_subcommand("segment", "Segment images with a trained ensemble");
    s->add_option("--manifest", seg.manifest, "Dataset manifest")->required();
    s->add_option("--checkpoints", seg.checkpoints, "Directory with {orientation}_{round}.ckpt")
        ->required();
    s->add_option("--fold", seg.fold, "Only segment entries of this fold; -1 = all")
        ->capture_default_str();
    s->add_option("--rounds", seg.rounds, "Rounds to load; 0 = autodetect")->capture_default_str();
    s->add_option("--weights", seg.weights, "Per-model vote weights, V rounds then H rounds")
        ->delimiter(',');
    s->add_option("--stride", seg.stride, "Evaluation grid stride")->capture_default_str();
    s->add_option("--threads", seg.threads, "Worker thread cap")->capture_default_str();
    s->add_flag("--score-maps", seg.score_maps, "Also write weighted tumor-score maps");
    s->add_flag("--per-model", seg.per_model, "Also write each sub-model's vote mask");
    s->add_flag("--keep-largest", seg.keep_largest, "Keep only the largest predicted component");
    s->add_option("--out", seg.out, "Output directory")->capture_default_str();

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Score predicted masks against ground truth");
    e->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
    e->add_option("--pred", ev.pred, "Directory with predicted masks")->required();
    e->add_option("--fold", ev.fold, "Only evaluate entries of this fold; -1 = all")
        ->capture_default_str();
    e->add_option("--out", ev.out, "Output directory; defaults to --pred")->capture_default_str();

    InspectArgs ins;
    auto* i = app.add_subcommand("inspect-sampling", "Dump sampling geometry for one image");
    i->add_option("--image", ins.image, "Image file (P5)")->required();
    i->add_option("--mask", ins.mask, "Mask file (P5)")->required();
    i->add_option("--orientation", ins.orientation, "Patch orientation")->capture_default_str();
    i->add_option("--seed", ins.seed, "Sampling seed")->capture_default_str();
    i->add_option("--beta", ins.sampling.beta, "Ring decay constant")->capture_default_str();
    i->add_option("--tumor-fraction", ins.sampling.tumor_fraction,
                  "Fraction of foreground pixels used as tumor centers")
        ->capture_default_str();
    i->add_option("--arc-step", ins.sampling.arc_step, "Arc spacing along rings in pixels")
        ->capture_default_str();
    i->add_option("--row-stride", ins.sampling.row_stride,
                  "Cover re-sampling stride along the long axis")
        ->capture_default_str();
    i->add_option("--out", ins.out, "Output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    const auto apply_global = [&](CLI::App* sub, std::uint64_t* seed, int* threads,
                                  std::string* out) {
        if (seed && opt_seed->count() && !sub->count("--seed")) *seed = global_seed;
        if (threads && opt_threads->count() && !sub->count("--threads")) *threads = global_threads;
        if (out && opt_out->count() && !sub->count("--out")) *out = global_out;
    };

    // All BLAS calls stay single-threaded; parallelism is explicit per module.
    set_blas_threads(1);

    try {
        if (*g) {
            apply_global(g, &gen.seed, nullptr, &gen.out);
            gen.phantom.cols = gen.phantom.rows;
            return run_generate(gen);
        }
        if (*t) {
            apply_global(t, &tr.seed, &tr.threads, &tr.out);
            return run_train(tr);
        }
        if (*s) {
            apply_global(s, nullptr, &seg.threads, &seg.out);
            return run_segment(seg);
        }
        if (*e) {
            apply_global(e, nullptr, nullptr, &ev.out);
            return run_evaluate(ev);
        }
        if (*i) {
            apply_global(i, &ins.seed, nullptr, &ins.out);
            return run_inspect(ins);
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}

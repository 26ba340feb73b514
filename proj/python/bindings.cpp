// Python bindings for the core pipeline: phantom generation, crossbar
// sampling, training, dense inference, voting and metrics. Images cross the
// boundary as 2-D float32 arrays, masks as 2-D uint8 arrays of {0, 1}.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <memory>
#include <stdexcept>

#include "crossbar/cascade.hpp"
#include "crossbar/data_io.hpp"
#include "crossbar/dense_eval.hpp"
#include "crossbar/gemm.hpp"
#include "crossbar/metrics.hpp"
#include "crossbar/vote.hpp"

namespace py = pybind11;
using namespace crossbar;

namespace {

Image2D to_image(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    Image2D img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(img.pix.data(), a.data(), sizeof(float) * img.pix.size());
    return img;
}

BinaryMask to_mask(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    BinaryMask mask(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    const std::uint8_t* src = a.data();
    for (size_t i = 0; i < mask.v.size(); ++i) mask.v[i] = src[i] ? 1 : 0;
    return mask;
}

py::array_t<float> from_image(const Image2D& img) {
    py::array_t<float> out({img.rows, img.cols});
    std::memcpy(out.mutable_data(), img.pix.data(), sizeof(float) * img.pix.size());
    return out;
}

py::array_t<std::uint8_t> from_mask(const BinaryMask& mask) {
    py::array_t<std::uint8_t> out({mask.rows, mask.cols});
    std::memcpy(out.mutable_data(), mask.v.data(), mask.v.size());
    return out;
}

Orientation orientation_from(const std::string& s) {
    if (s == "vertical") return Orientation::vertical;
    if (s == "horizontal") return Orientation::horizontal;
    throw std::invalid_argument("orientation must be 'vertical' or 'horizontal'");
}

py::dict spec_to_dict(const PatchSpec& s) {
    py::dict d;
    d["orientation"] = std::string(to_string(s.orientation));
    d["row"] = s.row;
    d["col"] = s.col;
    d["height"] = s.height;
    d["width"] = s.width;
    d["label"] = std::string(to_string(s.label));
    return d;
}

PatchSpec spec_from_dict(const py::dict& d) {
    PatchSpec s;
    s.orientation = orientation_from(py::cast<std::string>(d["orientation"]));
    s.row = py::cast<int>(d["row"]);
    s.col = py::cast<int>(d["col"]);
    if (d.contains("height")) s.height = py::cast<int>(d["height"]);
    else s.height = default_patch_height(s.orientation);
    if (d.contains("width")) s.width = py::cast<int>(d["width"]);
    else s.width = default_patch_width(s.orientation);
    if (d.contains("label")) {
        const auto l = py::cast<std::string>(d["label"]);
        s.label = l == "tumor" ? PatchLabel::tumor
                               : (l == "non_tumor" ? PatchLabel::non_tumor : PatchLabel::unlabeled);
    }
    return s;
}

SamplingParams sampling_from(double beta, double tumor_fraction, double arc_step, int row_stride,
                             std::uint64_t seed) {
    SamplingParams p;
    p.beta = beta;
    p.tumor_fraction = tumor_fraction;
    p.arc_step = arc_step;
    p.row_stride = row_stride;
    p.seed = seed;
    return p;
}

LabeledImages labeled_from(const py::list& images, const py::list& masks) {
    if (py::len(images) != py::len(masks))
        throw std::invalid_argument("images and masks must have equal length");
    LabeledImages data;
    for (size_t i = 0; i < py::len(images); ++i) {
        data.add(to_image(py::cast<py::array_t<float, py::array::c_style | py::array::forcecast>>(
                     images[i])),
                 to_mask(py::cast<
                         py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>>(
                     masks[i])),
                 "image" + std::to_string(i));
    }
    return data;
}

py::list history_to_list(const std::vector<RoundRecord>& history) {
    py::list out;
    for (const auto& r : history) {
        py::dict d;
        d["round"] = r.round;
        d["orientation"] = std::string(to_string(r.orientation));
        d["train_error"] = r.train_error;
        d["val_error"] = r.val_error;
        out.append(std::move(d));
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Crossbar patch segmentation core";
    set_blas_threads(1);

    m.def(
        "generate_phantom",
        [](std::uint64_t seed, int size, double min_diameter, double max_diameter,
           double noise_sigma, int distractors) {
            PhantomConfig cfg;
            cfg.rows = cfg.cols = size;
            cfg.min_diameter = min_diameter;
            cfg.max_diameter = max_diameter;
            cfg.noise_sigma = noise_sigma;
            cfg.distractor_count = distractors;
            Rng rng(seed);
            auto [image, mask] = generate_phantom(cfg, rng);
            return py::make_tuple(from_image(image), from_mask(mask));
        },
        py::arg("seed"), py::arg("size") = 296, py::arg("min_diameter") = 10.0,
        py::arg("max_diameter") = 90.0, py::arg("noise_sigma") = 0.03, py::arg("distractors") = 2,
        "Generate one synthetic image/mask pair");

    m.def(
        "region_stats",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask) {
            const TumorStats s = region_stats(to_mask(mask));
            py::dict d;
            d["centroid_row"] = s.centroid_row;
            d["centroid_col"] = s.centroid_col;
            d["incircle_radius"] = s.incircle_radius;
            d["circumcircle_radius"] = s.circumcircle_radius;
            d["outer_radius"] = s.outer_radius;
            d["area"] = s.area;
            return d;
        },
        py::arg("mask"), "Largest-component geometry of a mask");

    m.def(
        "ring_radii",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask,
           double beta) {
            SamplingParams p;
            p.beta = beta;
            return ring_radii(region_stats(to_mask(mask)), p);
        },
        py::arg("mask"), py::arg("beta") = 3.5, "Ring radii chi_i for the mask's largest region");

    m.def(
        "basic_sample",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask,
           const std::string& orientation, double beta, double tumor_fraction, double arc_step,
           int row_stride, std::uint64_t seed) {
            const BinaryMask bm = to_mask(mask);
            const auto specs =
                basic_sample(bm.rows, bm.cols, bm, orientation_from(orientation),
                             sampling_from(beta, tumor_fraction, arc_step, row_stride, seed));
            py::list out;
            for (const auto& s : specs) out.append(spec_to_dict(s));
            return out;
        },
        py::arg("mask"), py::arg("orientation"), py::arg("beta") = 3.5,
        py::arg("tumor_fraction") = 1.0 / 3.0, py::arg("arc_step") = 3.0,
        py::arg("row_stride") = 3, py::arg("seed") = 0,
        "Tumor and ring patch centers for one orientation");

    m.def(
        "cover_resample",
        [](const py::dict& misregion,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask,
           int row_stride) {
            SamplingParams p;
            p.row_stride = row_stride;
            const auto specs = cover_resample(spec_from_dict(misregion), to_mask(mask), p);
            py::list out;
            for (const auto& s : specs) out.append(spec_to_dict(s));
            return out;
        },
        py::arg("misregion"), py::arg("mask"), py::arg("row_stride") = 3,
        "Crossbar cover pattern for one mis-segmented patch");

    m.def(
        "extract_patch",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
           const py::dict& spec) {
            const Patch p = extract_patch(to_image(image), spec_from_dict(spec));
            py::array_t<float> out({p.spec.height, p.spec.width});
            std::memcpy(out.mutable_data(), p.pixels.data(), sizeof(float) * p.pixels.size());
            return out;
        },
        py::arg("image"), py::arg("spec"), "Edge-clamped patch window around a center");

    m.def(
        "dice",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& truth) {
            return dice(to_mask(pred), to_mask(truth));
        },
        py::arg("pred"), py::arg("truth"));
    m.def(
        "tpf",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& truth) {
            return tpf(to_mask(pred), to_mask(truth));
        },
        py::arg("pred"), py::arg("truth"));
    m.def(
        "hausdorff",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& truth) {
            return hausdorff(to_mask(pred), to_mask(truth));
        },
        py::arg("pred"), py::arg("truth"));
    m.def(
        "centroid_distance",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& truth) {
            return centroid_distance(to_mask(pred), to_mask(truth));
        },
        py::arg("pred"), py::arg("truth"));

    py::class_<SubModel>(m, "SubModel")
        .def_static("load", &SubModel::load_checkpoint, py::arg("path"))
        .def("save", &SubModel::save_checkpoint, py::arg("path"))
        .def_property_readonly(
            "orientation", [](const SubModel& s) { return std::string(to_string(s.orientation())); })
        .def_property_readonly("round", &SubModel::round_index)
        .def(
            "tumor_probability",
            [](const SubModel& s,
               const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
               int threads) {
                return from_image(DenseEvaluator(s, threads).tumor_probability(to_image(image)));
            },
            py::arg("image"), py::arg("threads") = 1,
            "Dense per-pixel tumor probability over the whole image")
        .def(
            "label_map",
            [](const SubModel& s,
               const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
               int threads) {
                return from_mask(DenseEvaluator(s, threads).label_map(to_image(image)));
            },
            py::arg("image"), py::arg("threads") = 1, "Dense per-pixel label map");

    m.def(
        "segment",
        [](const std::vector<SubModel>& models,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
           const std::vector<double>& weights, int stride, bool keep_largest, int threads) {
            VoteConfig cfg;
            cfg.stride = stride;
            cfg.keep_largest_component = keep_largest;
            cfg.threads = threads;
            if (!weights.empty()) cfg.weights = weights;
            const SegmentationResult res = segment_ensemble(models, to_image(image), cfg);
            return py::make_tuple(from_mask(res.mask), from_image(res.score));
        },
        py::arg("models"), py::arg("image"), py::arg("weights") = std::vector<double>{},
        py::arg("stride") = 1, py::arg("keep_largest") = false, py::arg("threads") = 1,
        "Weighted-vote segmentation; returns (mask, score map)");

    m.def(
        "train_cascade",
        [](const py::list& images, const py::list& masks, int rounds, int epochs, int batch_size,
           double learning_rate, double dropout, std::uint64_t seed, int basic_cap,
           int resample_cap, int probe_cap, double epsilon, int threads) {
            CascadeConfig cfg;
            cfg.max_rounds = rounds;
            cfg.train.max_epochs = epochs;
            cfg.train.batch_size = batch_size;
            cfg.train.learning_rate = learning_rate;
            cfg.train.dropout_rate = dropout;
            cfg.train.threads = threads;
            cfg.seed = seed;
            cfg.basic_cap = basic_cap;
            cfg.resample_cap = resample_cap;
            cfg.probe_cap = probe_cap;
            cfg.convergence_epsilon = epsilon;
            const CascadeEnsemble ens = run_cascade(labeled_from(images, masks), cfg);
            py::dict out;
            out["models"] = ens.models;
            out["weights"] = ens.weights;
            out["history"] = history_to_list(ens.history);
            return out;
        },
        py::arg("images"), py::arg("masks"), py::arg("rounds") = 3, py::arg("epochs") = 20,
        py::arg("batch_size") = 64, py::arg("learning_rate") = 0.0005, py::arg("dropout") = 0.5,
        py::arg("seed") = 0, py::arg("basic_cap") = 0, py::arg("resample_cap") = 50000,
        py::arg("probe_cap") = 4000, py::arg("epsilon") = 0.002, py::arg("threads") = 1,
        "Cross-trained cascade over in-memory images; returns models, weights and history");

    m.def("default_vote_weights", &default_vote_weights, py::arg("model_count"));
}

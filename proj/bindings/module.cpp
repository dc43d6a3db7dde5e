#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ssfer/augment.hpp"
#include "ssfer/config.hpp"
#include "ssfer/evalkit.hpp"
#include "ssfer/experiments.hpp"
#include "ssfer/hpo.hpp"
#include "ssfer/model.hpp"
#include "ssfer/pipeline.hpp"

namespace py = pybind11;
using namespace ssfer;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image image_from_array(const FloatArray& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 3) throw py::value_error("expected an array of shape (H, W, C)");
    Image img(static_cast<int>(buf.shape[0]), static_cast<int>(buf.shape[1]),
              static_cast<int>(buf.shape[2]));
    const float* src = static_cast<const float*>(buf.ptr);
    std::copy(src, src + img.data.size(), img.data.begin());
    return img;
}

py::array_t<float> array_from_image(const Image& img) {
    py::array_t<float> arr({img.height, img.width, img.channels});
    std::copy(img.data.begin(), img.data.end(), arr.mutable_data());
    return arr;
}

FaceBox box_from_seq(const std::vector<double>& v) {
    if (v.size() != 4) throw py::value_error("a box is (x0, y0, x1, y1)");
    return FaceBox{v[0], v[1], v[2], v[3]};
}

nn::ModelConfig preset(const std::string& name) {
    if (name == "tiny") return nn::ModelConfig::tiny();
    if (name == "base224") return nn::ModelConfig::base224();
    throw py::value_error("unknown preset '" + name + "' (tiny, base224)");
}

py::dict manifest_dict(const pipeline::RunManifest& man) {
    py::dict d;
    d["seed"] = man.seed;
    d["code_version"] = man.code_version;
    d["final_metrics"] = man.final_metrics;
    d["seconds"] = man.seconds;
    py::list stages;
    for (const auto& s : man.stages) {
        py::dict sd;
        sd["name"] = s.name;
        sd["checkpoint"] = s.checkpoint;
        sd["metrics"] = s.metrics;
        sd["seconds"] = s.seconds;
        stages.append(sd);
    }
    d["stages"] = stages;
    d["artifacts"] = man.artifacts;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "masked-pretraining / FaceMix / EMA-teacher training pipeline";
    m.attr("__version__") = kVersion;

    m.def(
        "synth",
        [](int count, int classes, int size, double jitter, uint64_t seed) {
            data::SynthSpec spec;
            spec.n_samples = count;
            spec.class_count = classes;
            spec.image_size = size;
            spec.jitter = jitter;
            spec.seed = seed;
            const auto samples = data::synth_generate(spec);
            const int n = static_cast<int>(samples.size());
            py::array_t<float> images({n, size, size, 3});
            py::array_t<int32_t> labels(n);
            py::array_t<double> boxes({n, 4});
            float* ip = images.mutable_data();
            int32_t* lp = labels.mutable_data();
            double* bp = boxes.mutable_data();
            for (int i = 0; i < n; ++i) {
                const auto& s = samples[i];
                std::copy(s.pixels.data.begin(), s.pixels.data.end(),
                          ip + static_cast<size_t>(i) * s.pixels.data.size());
                lp[i] = s.label.value_or(-1);
                const FaceBox b = s.face_box.value_or(FaceBox{});
                bp[i * 4 + 0] = b.x0;
                bp[i * 4 + 1] = b.y0;
                bp[i * 4 + 2] = b.x1;
                bp[i * 4 + 3] = b.y1;
            }
            return py::make_tuple(images, labels, boxes);
        },
        py::arg("count"), py::arg("classes") = 3, py::arg("size") = 32,
        py::arg("jitter") = 0.3, py::arg("seed") = 0,
        "generate synthetic faces; returns (images, labels, boxes)");

    m.def(
        "iou",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return aug::iou(box_from_seq(a), box_from_seq(b));
        },
        py::arg("a"), py::arg("b"));

    m.def("sample_lambda", &aug::sample_lambda, py::arg("alpha"), py::arg("seed"));

    m.def(
        "mix_images",
        [](const FloatArray& xi, const FloatArray& xj, double lam) {
            const Image a = image_from_array(xi);
            const Image b = image_from_array(xj);
            const Vec ya = Vec::Zero(1), yb = Vec::Zero(1);
            const auto [mixed, y] = aug::mix_images(a, ya, b, yb, lam);
            return array_from_image(mixed);
        },
        py::arg("xi"), py::arg("xj"), py::arg("lam"));

    m.def(
        "image_similarity",
        [](const std::string& metric, const FloatArray& a, const FloatArray& b) {
            aug::SimilarityMetric sm;
            if (metric == "psnr") sm = aug::SimilarityMetric::psnr;
            else if (metric == "ssim") sm = aug::SimilarityMetric::ssim;
            else if (metric == "fsim") sm = aug::SimilarityMetric::fsim;
            else throw py::value_error("metric must be psnr, ssim or fsim");
            return aug::image_similarity(sm, image_from_array(a), image_from_array(b));
        },
        py::arg("metric"), py::arg("a"), py::arg("b"));

    m.def(
        "patchify",
        [](const FloatArray& img, int patch_size) {
            const Mat p = nn::patchify(image_from_array(img), patch_size);
            py::array_t<double> arr({static_cast<int>(p.rows()), static_cast<int>(p.cols())});
            double* out = arr.mutable_data();
            for (int r = 0; r < p.rows(); ++r)
                for (int c = 0; c < p.cols(); ++c) out[r * p.cols() + c] = p(r, c);
            return arr;
        },
        py::arg("image"), py::arg("patch_size"));

    m.def(
        "sample_mask",
        [](int n_patches, double ratio, uint64_t seed) {
            const auto mask = nn::sample_mask(n_patches, ratio, seed);
            return py::make_tuple(mask.masked, mask.visible);
        },
        py::arg("n_patches"), py::arg("mask_ratio"), py::arg("seed"),
        "returns (masked_indices, visible_indices)");

    m.def(
        "count_params_flops",
        [](const std::string& name) {
            const auto r = nn::count_params_flops(preset(name));
            py::dict d;
            d["params"] = r.params;
            d["flops"] = r.flops;
            return d;
        },
        py::arg("preset"));

    m.def(
        "gwo",
        [](const std::function<double(const std::vector<double>&)>& objective,
           const std::vector<double>& lower, const std::vector<double>& upper, int wolves,
           int iterations, uint64_t seed, const std::vector<std::vector<double>>& seeds) {
            hpo::GwoConfig cfg;
            cfg.wolves = wolves;
            cfg.iterations = iterations;
            cfg.lower = lower;
            cfg.upper = upper;
            cfg.seeds = seeds;
            const auto r = hpo::gwo_optimize(cfg, objective, seed);
            py::dict d;
            d["best"] = r.best;
            d["best_fitness"] = r.best_fitness;
            d["history"] = r.history;
            d["evaluations"] = r.evaluations;
            return d;
        },
        py::arg("objective"), py::arg("lower"), py::arg("upper"), py::arg("wolves") = 8,
        py::arg("iterations") = 10, py::arg("seed") = 0,
        py::arg("seeds") = std::vector<std::vector<double>>{});

    m.def("default_config_json",
          [] { return config::config_to_json(config::default_config()).dump(2); });

    m.def(
        "run_pipeline",
        [](const std::string& config_path, bool skip_a, bool skip_b, bool skip_c,
           bool overwrite) {
            const auto cfg = config::load_config(config_path);
            pipeline::StageFlags flags{!skip_a, !skip_b, !skip_c};
            pipeline::RunManifest man;
            {
                py::gil_scoped_release release;
                man = pipeline::run_pipeline(cfg, flags, overwrite);
            }
            return manifest_dict(man);
        },
        py::arg("config_path"), py::arg("skip_a") = false, py::arg("skip_b") = false,
        py::arg("skip_c") = false, py::arg("overwrite") = false);

    m.def(
        "run_experiment",
        [](const std::string& name, const std::string& config_path, bool overwrite) {
            const auto cfg = config::load_config(config_path);
            py::gil_scoped_release release;
            experiments::run_experiment(name, cfg, overwrite);
        },
        py::arg("name"), py::arg("config_path"), py::arg("overwrite") = false);

    m.def("experiment_names", &experiments::experiment_names);

    py::register_exception<Error>(m, "SsferError");
}

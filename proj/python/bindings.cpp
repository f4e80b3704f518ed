#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <optional>

#include "stpp/datagen.hpp"
#include "stpp/error.hpp"
#include "stpp/experiment.hpp"
#include "stpp/model.hpp"
#include "stpp/pipeline.hpp"
#include "stpp/pseudolabel.hpp"
#include "stpp/segcore.hpp"
#include "stpp/select.hpp"

namespace py = pybind11;
using namespace stpp;

namespace {

using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using ImageArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

SegMask to_mask(const MaskArray& a) {
  if (a.ndim() != 2) throw py::value_error("mask must be a 2-D uint8 array");
  SegMask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::memcpy(m.labels.data(), a.data(), m.labels.size());
  return m;
}

MaskArray from_mask(const SegMask& m) {
  MaskArray a({m.height, m.width});
  std::memcpy(a.mutable_data(), m.labels.data(), m.labels.size());
  return a;
}

Image to_image(const ImageArray& a) {
  if (a.ndim() != 3) throw py::value_error("image must be an H x W x C float array");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
  std::memcpy(img.data.data(), a.data(), img.data.size() * sizeof(float));
  return img;
}

ImageArray from_image(const Image& img) {
  ImageArray a({img.height, img.width, img.channels});
  std::memcpy(a.mutable_data(), img.data.data(), img.data.size() * sizeof(float));
  return a;
}

py::array_t<double> from_scores(const model::PixelScores& s) {
  py::array_t<double> a({s.height, s.width, s.classes});
  std::memcpy(a.mutable_data(), s.values.data(), s.values.size() * sizeof(double));
  return a;
}

py::dict stage_dict(const pipeline::StageReport& s) {
  py::dict d;
  if (s.validation) {
    d["val_miou"] = s.validation->miou;
    d["val_iou"] = s.validation->class_iou;
  }
  for (const auto& [k, v] : s.metrics) d[py::str(k)] = v;
  return d;
}

py::dict report_dict(const pipeline::RunReport& r) {
  py::dict stages;
  py::list order;
  for (const auto& s : r.stages) {
    stages[py::str(s.name)] = stage_dict(s);
    order.append(s.name);
  }
  py::dict d;
  d["pipeline"] = r.pipeline;
  d["seed"] = r.seed;
  d["config_hash"] = exp::hash_hex(r.config_hash);
  d["stage_order"] = order;
  d["stages"] = stages;
  d["body"] = r.body();
  d["wall_clock_seconds"] = r.wall_clock_seconds;
  return d;
}

py::dict data_dict(const datagen::GeneratedData& g) {
  py::list li, lm, lid, ui, um, uid, vi, vm;
  for (const auto& s : g.train.labeled) {
    li.append(from_image(s.image));
    lm.append(from_mask(s.mask));
    lid.append(s.id);
  }
  for (const auto& s : g.train.unlabeled) {
    ui.append(from_image(s.image));
    um.append(s.reference ? py::object(from_mask(*s.reference)) : py::none());
    uid.append(s.id);
  }
  for (const auto& s : g.validation) {
    vi.append(from_image(s.image));
    vm.append(from_mask(s.mask));
  }
  py::dict d;
  d["num_classes"] = g.train.num_classes;
  d["labeled_ids"] = lid;
  d["labeled_images"] = li;
  d["labeled_masks"] = lm;
  d["unlabeled_ids"] = uid;
  d["unlabeled_images"] = ui;
  d["unlabeled_masks"] = um;
  d["validation_images"] = vi;
  d["validation_masks"] = vm;
  d["difficulty"] = g.difficulty;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Self-training (ST / ST++) for semi-supervised segmentation on generated data.";

  static py::handle error_type = py::exception<Error>(m, "Error", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(e.what());
      inst.attr("kind") = to_string(e.kind());
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  m.attr("IGNORE") = static_cast<int>(kIgnore);
  m.attr("NUM_FEATURES") = model::kNumFeatures;

  m.def(
      "confusion_matrix",
      [](const MaskArray& pred, const MaskArray& ref, int num_classes) {
        const auto cm = confusion_matrix(to_mask(pred), to_mask(ref), num_classes);
        py::array_t<std::int64_t> a({num_classes, num_classes});
        const auto v = cm.matrix();
        std::memcpy(a.mutable_data(), v.data(), v.size() * sizeof(std::int64_t));
        return a;
      },
      py::arg("pred"), py::arg("ref"), py::arg("num_classes"), "Rows are reference classes, columns predictions.");
  m.def(
      "mean_iou",
      [](const MaskArray& pred, const MaskArray& ref, int num_classes) {
        return mean_iou(to_mask(pred), to_mask(ref), num_classes);
      },
      py::arg("pred"), py::arg("ref"), py::arg("num_classes"));
  m.def(
      "per_class_iou",
      [](const MaskArray& pred, const MaskArray& ref, int num_classes) {
        std::vector<std::optional<double>> out;
        for (const auto& [c, v] : per_class_iou(to_mask(pred), to_mask(ref), num_classes)) out.push_back(v);
        return out;
      },
      py::arg("pred"), py::arg("ref"), py::arg("num_classes"), "None for classes absent from both masks.");
  m.def(
      "stability_score",
      [](const std::vector<MaskArray>& masks, int num_classes) {
        std::vector<SegMask> ms;
        for (const auto& a : masks) ms.push_back(to_mask(a));
        return select::stability_score(ms, num_classes);
      },
      py::arg("masks"), py::arg("num_classes"));
  m.def(
      "rank_and_split",
      [](const std::vector<std::pair<SampleId, double>>& scores, double proportion) {
        std::vector<select::StabilityRecord> recs;
        for (const auto& [id, s] : scores) recs.push_back({id, s});
        const auto plan = select::rank_and_split(recs, proportion);
        return std::make_pair(plan.reliable, plan.unreliable);
      },
      py::arg("scores"), py::arg("proportion") = 0.5, "(id, score) pairs to (reliable, unreliable) id lists.");
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return select::spearman(x, y); });
  m.def("poly_lr", &model::poly_lr, py::arg("base_lr"), py::arg("iter"), py::arg("total_iter"),
        py::arg("power") = 0.9);
  m.def(
      "oversample_labeled",
      [](const std::vector<SampleId>& labeled, std::size_t target) {
        return pipeline::oversample_labeled(labeled, target);
      },
      py::arg("labeled"), py::arg("target_count"));

  py::class_<model::ModelParams>(m, "Model")
      .def(py::init([](int num_classes, std::uint64_t seed) { return model::ModelParams::init(num_classes, seed); }),
           py::arg("num_classes"), py::arg("seed") = 1)
      .def_readonly("num_classes", &model::ModelParams::num_classes)
      .def_readonly("step", &model::ModelParams::step)
      .def_property(
          "weights",
          [](const model::ModelParams& p) {
            py::array_t<double> a({p.num_classes, p.num_features});
            std::memcpy(a.mutable_data(), p.weights.data(), p.weights.size() * sizeof(double));
            return a;
          },
          [](model::ModelParams& p, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
            if (a.size() != static_cast<py::ssize_t>(p.weights.size())) throw py::value_error("weights shape mismatch");
            std::memcpy(p.weights.data(), a.data(), p.weights.size() * sizeof(double));
          })
      .def_readwrite("bias", &model::ModelParams::bias)
      .def("logits", [](const model::ModelParams& p, const ImageArray& img) { return from_scores(model::forward(p, to_image(img))); })
      .def("predict", [](const model::ModelParams& p, const ImageArray& img) {
        return from_mask(model::argmax(model::forward(p, to_image(img))));
      })
      .def(
          "predict_proba_tta",
          [](const model::ModelParams& p, const ImageArray& img, std::vector<double> scales, bool flip) {
            return from_scores(pl::predict_proba_tta(p, to_image(img), {std::move(scales), flip}));
          },
          py::arg("image"), py::arg("scales") = pl::TtaConfig{}.scales, py::arg("flip") = true)
      .def(
          "pseudo_label",
          [](const model::ModelParams& p, const ImageArray& img, std::vector<double> scales, bool flip) {
            return from_mask(pl::pseudo_label(p, to_image(img), {std::move(scales), flip}));
          },
          py::arg("image"), py::arg("scales") = pl::TtaConfig{}.scales, py::arg("flip") = true)
      .def("save", [](const model::ModelParams& p, const std::filesystem::path& path) {
        write_file(path, model::save_checkpoint(p));
      })
      .def_static("load", [](const std::filesystem::path& path) { return model::load_checkpoint(read_file(path)).params; })
      .def("__eq__", [](const model::ModelParams& a, const model::ModelParams& b) { return a == b; });

  m.def(
      "default_config", [] { return exp::dump_config(exp::ExperimentConfig{}); },
      "Fully populated default experiment config as JSON.");
  m.def(
      "normalize_config", [](const std::string& json) { return exp::dump_config(exp::parse_config(json)); },
      py::arg("json"));
  m.def(
      "generate_data",
      [](const std::string& json, std::uint64_t seed) {
        const auto cfg = exp::parse_config(json);
        return data_dict(datagen::generate(exp::data_for_seed(cfg, seed)));
      },
      py::arg("config") = "{}", py::arg("seed") = 1, "Generated pool and validation set as numpy arrays.");
  m.def(
      "run",
      [](const std::string& json, const std::string& pipeline, const std::string& ablation, std::uint64_t seed,
         std::optional<std::filesystem::path> output_dir) {
        auto cfg = exp::parse_config(json);
        cfg.pipeline_name = pipeline;
        cfg.ablation = ablation;
        exp::validate_experiment(cfg);
        pipeline::RunResult res;
        std::optional<std::filesystem::path> run_dir;
        {
          py::gil_scoped_release release;
          if (output_dir) {
            auto out = exp::run_experiment(cfg, seed, pipeline, ablation, *output_dir);
            res = std::move(out.result);
            run_dir = out.dir;
          } else {
            const auto data = datagen::generate(exp::data_for_seed(cfg, seed));
            res = pipeline::run_pipeline(data.train, data.validation, exp::pipeline_for_seed(cfg, seed), pipeline,
                                         ablation);
          }
        }
        auto d = report_dict(res.report);
        if (run_dir) d["run_dir"] = *run_dir;
        return std::make_pair(res.params, d);
      },
      py::arg("config"), py::arg("pipeline") = "stpp", py::arg("ablation") = "", py::arg("seed") = 1,
      py::arg("output_dir") = py::none(), "Runs one pipeline; returns (final model, report dict).");
}

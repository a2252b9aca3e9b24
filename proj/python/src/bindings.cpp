// SPDX-License-Identifier: Apache-2.0
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sunet/analysis.hpp"
#include "sunet/channel.hpp"
#include "sunet/errors.hpp"
#include "sunet/model.hpp"
#include "sunet/run_config.hpp"
#include "sunet/synthdata.hpp"
#include "sunet/trainer.hpp"

namespace py = pybind11;
using namespace sunet;

namespace {

using ImageArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

template <typename T, typename A>
Grid<T> to_grid(const A& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  Grid<T> g(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), g.data.begin());
  return g;
}

template <typename T>
py::array_t<T> to_array(const Grid<T>& g) {
  py::array_t<T> a({g.height, g.width});
  std::copy(g.data.begin(), g.data.end(), a.mutable_data());
  return a;
}

py::dict stats_dict(const RegionStats& s) {
  py::dict d;
  d["present"] = s.present;
  d["area"] = s.area;
  d["eccentricity"] = s.eccentricity;
  d["laterality"] = to_string(s.laterality);
  d["location"] = to_string(s.location);
  for (const auto& [k, v] : s.extra) d[py::str(k)] = v;
  return d;
}

py::dict sample_dict(const SegmentationSample& s) {
  py::dict d;
  d["sample_id"] = s.sample_id;
  d["slice"] = s.slice_index;
  d["image"] = to_array(s.image);
  d["mask"] = to_array(s.mask);
  d["stats"] = stats_dict(s.stats);
  return d;
}

// A model plus the dataset it was last trained on, so Python never holds raw
// sample pointers.
class PyModel {
 public:
  PyModel(const std::string& config_json, std::uint64_t seed, bool ablate) {
    RunConfig cfg = parse_run_config(config_json.empty() ? "{}" : config_json);
    cfg.model.ablate_channel = cfg.model.ablate_channel || ablate;
    train_ = cfg.train;
    train_.seed = cfg.seed.value_or(seed);
    model_ = std::make_unique<SunetModel>(cfg.model, seed);
  }
  explicit PyModel(std::unique_ptr<SunetModel> m) : model_(std::move(m)) {}

  std::vector<EpochReport> fit(const std::filesystem::path& dataset_dir, std::optional<std::size_t> epochs) {
    samples_ = load_dataset(dataset_dir);
    TrainConfig cfg = train_;
    if (epochs) cfg.epochs = *epochs;
    const DatasetSplit split = split_dataset(samples_, cfg.val_fraction);
    return train(*model_, split, cfg).reports;
  }

  py::list predict(const ImageArray& images) const {
    if (images.ndim() != 3) throw ShapeError("predict expects an (N, H, W) array");
    std::vector<Image> owned;
    const auto n = static_cast<std::size_t>(images.shape(0));
    const auto h = static_cast<std::size_t>(images.shape(1)), w = static_cast<std::size_t>(images.shape(2));
    for (std::size_t i = 0; i < n; ++i) {
      Image im(h, w);
      std::copy(images.data() + i * h * w, images.data() + (i + 1) * h * w, im.data.begin());
      owned.push_back(std::move(im));
    }
    std::vector<const Image*> ptrs;
    for (const auto& im : owned) ptrs.push_back(&im);
    py::list out;
    for (const Prediction& p : sunet::predict(*model_, ptrs)) {
      py::dict d;
      d["mask"] = to_array(p.mask);
      d["prob"] = to_array(p.prob);
      d["sentence"] = p.sentence ? py::cast(p.sentence->ids) : py::none();
      out.append(d);
    }
    return out;
  }

  void save(const std::filesystem::path& p) const { save_model(*model_, p); }
  bool ablated() const { return model_->config().ablate_channel; }
  std::size_t num_parameters() const {
    std::size_t n = 0;
    model_->params().for_each([&](const Parameter& p) { n += p.trainable ? p.value.size() : 0; });
    return n;
  }
  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    model_->params().for_each([&](const Parameter& p) { names.push_back(p.name); });
    return names;
  }

 private:
  std::unique_ptr<SunetModel> model_;
  TrainConfig train_;
  std::vector<SegmentationSample> samples_;
};

}  // namespace

PYBIND11_MODULE(_sunet, m) {
  m.doc() = "Segmentation with an emergent-language channel: C++ core bindings";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DegenerateOutcome>(m, "DegenerateOutcome", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_IOError);

  // synthdata
  m.def(
      "generate",
      [](std::size_t n, std::uint64_t seed, double p_present, std::size_t image_size, bool emit_grade) {
        GeneratorSpec spec;
        spec.p_present = p_present;
        spec.image_size = image_size;
        spec.emit_grade = emit_grade;
        py::list out;
        for (const auto& s : generate(n, spec, seed)) out.append(sample_dict(s));
        return out;
      },
      py::arg("n"), py::arg("seed"), py::arg("p_present") = 0.7, py::arg("image_size") = 32,
      py::arg("emit_grade") = false, "Synthetic phantoms as a list of dicts");
  m.def(
      "write_dataset",
      [](const std::filesystem::path& dir, std::size_t n, std::uint64_t seed, const std::string& config_json) {
        RunConfig cfg = parse_run_config(config_json.empty() ? "{}" : config_json);
        save_dataset(dir, generate(n, cfg.data, seed));
      },
      py::arg("dir"), py::arg("n"), py::arg("seed"), py::arg("config_json") = "");
  m.def("region_stats", [](const MaskArray& mask) { return stats_dict(region_stats(to_grid<std::uint8_t>(mask))); });

  // channel
  m.def("gumbel_softmax", [](const std::vector<double>& p, double tau, const std::vector<double>& g) {
    return gumbel_softmax(p, tau, g);
  });

  // post-processing
  m.def("dsc", [](const MaskArray& a, const MaskArray& b) {
    return dsc(to_grid<std::uint8_t>(a), to_grid<std::uint8_t>(b));
  });
  m.def("largest_component",
        [](const MaskArray& a) { return to_array(largest_component(to_grid<std::uint8_t>(a))); });

  // analysis
  m.def(
      "fit_linear",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
        const LinearFit f = fit_linear(X, y);
        return py::dict(py::arg("coef") = f.coef, py::arg("r2") = f.r2);
      },
      py::arg("X"), py::arg("y"));
  m.def(
      "fit_logistic",
      [](const Eigen::MatrixXd& X, const std::vector<int>& y, double l2) {
        const LogisticFit f = fit_logistic(X, y, l2);
        return py::dict(py::arg("coef") = f.coef, py::arg("log_likelihood") = f.log_likelihood,
                        py::arg("null_log_likelihood") = f.null_log_likelihood, py::arg("pseudo_r2") = f.pseudo_r2,
                        py::arg("iterations") = f.iterations);
      },
      py::arg("X"), py::arg("y"), py::arg("l2") = 1e-4);
  m.def(
      "fit_multinomial",
      [](const Eigen::MatrixXd& X, const std::vector<std::string>& y, double l2) {
        const MultinomialFit f = fit_multinomial(X, y, l2);
        return py::dict(py::arg("classes") = f.classes, py::arg("coef") = f.coef,
                        py::arg("log_likelihood") = f.log_likelihood,
                        py::arg("null_log_likelihood") = f.null_log_likelihood, py::arg("pseudo_r2") = f.pseudo_r2);
      },
      py::arg("X"), py::arg("y"), py::arg("l2") = 1e-4);
  m.def(
      "encode_position",
      [](const std::vector<std::vector<int>>& sentences, std::size_t k, std::size_t min_count) {
        PositionDesign d = encode_position(sentences, k, min_count);
        return py::make_tuple(d.X, d.columns, d.reference);
      },
      py::arg("sentences"), py::arg("k"), py::arg("min_count") = 5);
  m.def(
      "mine_prefixes",
      [](const std::vector<std::vector<int>>& sentences, const std::vector<std::string>& labels, std::size_t max_k,
         double min_coverage) {
        py::dict out;
        for (const auto& cp : mine_prefixes(sentences, labels, max_k, min_coverage)) {
          py::list pats;
          for (const auto& p : cp.patterns) {
            pats.append(py::dict(py::arg("pattern") = format_prefix(p.prefix), py::arg("prefix") = p.prefix,
                                 py::arg("coverage") = p.coverage, py::arg("purity") = p.purity));
          }
          out[py::str(cp.label)] = pats;
        }
        return out;
      },
      py::arg("sentences"), py::arg("labels"), py::arg("max_k") = 2, py::arg("min_coverage") = 0.2);
  m.def(
      "analyze",
      [](const std::filesystem::path& sentences, const std::filesystem::path& stats, std::size_t min_count,
         double l2) {
        AnalysisOptions opt;
        opt.min_count = min_count;
        opt.l2 = l2;
        py::list out;
        for (const auto& r : table2_report(join_records(read_sentences_jsonl(sentences), read_stats_csv(stats)), opt)) {
          py::list stats_by_pos;
          for (const auto& ps : r.positions) stats_by_pos.append(ps.statistic);
          out.append(py::dict(py::arg("outcome") = r.outcome, py::arg("kind") = to_string(r.kind),
                              py::arg("best_position") = r.best_position, py::arg("statistics") = stats_by_pos,
                              py::arg("skip_reason") = r.skip_reason));
        }
        return out;
      },
      py::arg("sentences"), py::arg("stats"), py::arg("min_count") = 5, py::arg("l2") = 1e-4,
      "table2_report over a sentence log joined with stats.csv");

  m.def("parse_run_config", [](const std::string& text) { return dump_run_config(parse_run_config(text)); },
        "Validate a JSON run config and return it with all defaults filled in");

  py::class_<EpochReport>(m, "EpochReport")
      .def_readonly("epoch", &EpochReport::epoch)
      .def_readonly("train_loss", &EpochReport::train_loss)
      .def_readonly("val_dsc", &EpochReport::val_dsc)
      .def_readonly("tau", &EpochReport::tau);

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&, std::uint64_t, bool>(), py::arg("config_json") = "", py::arg("seed") = 0,
           py::arg("ablate_channel") = false)
      .def_static("load", [](const std::filesystem::path& p) { return PyModel(load_model(p)); })
      .def("fit", &PyModel::fit, py::arg("dataset_dir"), py::arg("epochs") = std::nullopt)
      .def("predict", &PyModel::predict, py::arg("images"))
      .def("save", &PyModel::save)
      .def_property_readonly("ablated", &PyModel::ablated)
      .def_property_readonly("num_parameters", &PyModel::num_parameters)
      .def("parameter_names", &PyModel::parameter_names);
}

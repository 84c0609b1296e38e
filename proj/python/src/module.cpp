// Copyright 2026 The blockmetric Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "blockmetric/apps.hpp"
#include "blockmetric/errors.hpp"
#include "blockmetric/eval.hpp"
#include "blockmetric/gradcheck.hpp"
#include "blockmetric/io.hpp"
#include "blockmetric/losses.hpp"
#include "blockmetric/metric.hpp"
#include "blockmetric/synth.hpp"
#include "blockmetric/trainer.hpp"

namespace py = pybind11;
using namespace blockmetric;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <class Real>
Matrix<Real> to_matrix(const py::array_t<Real, py::array::c_style | py::array::forcecast>& a,
                       const char* what) {
  if (a.ndim() != 2) throw ConfigError(std::string(what) + " must be a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix<Real>(rows, cols, std::vector<Real>(a.data(), a.data() + rows * cols));
}

FeatureMatrix to_features(const FloatArray& a, bool normalize, const char* what) {
  auto m = to_matrix(a, what);
  if (normalize) return normalize_rows(m);
  return {std::move(m), false};
}

FloatArray to_array(const Matrix<float>& m) {
  FloatArray out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

FloatArray to_array(const std::vector<float>& v) {
  FloatArray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict report_dict(const RetrievalReport& r) {
  py::dict d;
  d["x2y_r1"] = r.x2y.r1;
  d["x2y_r5"] = r.x2y.r5;
  d["x2y_r10"] = r.x2y.r10;
  d["x2y_map"] = r.x2y.map;
  d["y2x_r1"] = r.y2x.r1;
  d["y2x_r5"] = r.y2x.r5;
  d["y2x_r10"] = r.y2x.r10;
  d["y2x_map"] = r.y2x.map;
  d["rsum"] = r.rsum;
  return d;
}

LossSpec make_loss(const std::string& kind, double margin, double temperature, int poly_order,
                   double poly_scale) {
  LossSpec spec;
  spec.kind = parse_loss(kind);
  spec.margin = margin;
  spec.temperature = temperature;
  spec.poly_order = poly_order;
  spec.poly_scale = poly_scale;
  spec.validate();
  return spec;
}

GroundTruth truth_or_identity(const std::optional<std::vector<std::vector<std::size_t>>>& truth,
                              std::size_t queries) {
  if (!truth) return GroundTruth::identity(queries);
  return GroundTruth{*truth};
}

}  // namespace

PYBIND11_MODULE(_blockmetric, m) {
  m.doc() = "Structured sparse bilinear similarity metrics";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const NumericError& e) {
      PyErr_SetString(PyExc_ArithmeticError, e.what());
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    }
  });

  py::class_<MetricConfig>(m, "MetricConfig")
      .def_static("cosine", &MetricConfig::cosine, py::arg("dim"))
      .def_static("diag", &MetricConfig::diag, py::arg("dim"))
      .def_static("block_diag", &MetricConfig::block_diag, py::arg("dim"), py::arg("block_size"))
      .def_static("dense", &MetricConfig::dense, py::arg("dim"))
      .def_static(
          "make",
          [](const std::string& variant, std::size_t dim, std::size_t block_size) {
            return MetricConfig::make(parse_variant(variant), dim, block_size);
          },
          py::arg("variant"), py::arg("dim"), py::arg("block_size") = 0)
      .def_property_readonly("variant",
                             [](const MetricConfig& c) { return std::string(to_string(c.variant())); })
      .def_property_readonly("dim", &MetricConfig::dim)
      .def_property_readonly("block_size", &MetricConfig::block_size)
      .def("__eq__", [](const MetricConfig& a, const MetricConfig& b) { return a == b; })
      .def("__repr__", [](const MetricConfig& c) {
        return "MetricConfig(" + std::string(to_string(c.variant())) + ", dim=" +
               std::to_string(c.dim()) + ", block_size=" + std::to_string(c.block_size()) + ")";
      });

  m.def("param_count", &param_count, py::arg("config"));

  py::class_<MetricParams>(m, "MetricParams")
      .def(py::init([](const MetricConfig& config, const FloatArray& weights) {
             return MetricParams{config, std::vector<float>(weights.data(),
                                                            weights.data() + weights.size())};
           }),
           py::arg("config"), py::arg("weights"))
      .def_readonly("config", &MetricParams::config)
      .def_property_readonly("weights", [](const MetricParams& p) { return to_array(p.weights); })
      .def("dense", [](const MetricParams& p) { return to_array(materialize_dense(p)); },
           "The full D x D matrix W o U.")
      .def("diagonal_mass_fraction",
           [](const MetricParams& p) { return diagonal_mass_fraction(p); })
      .def("__eq__", [](const MetricParams& a, const MetricParams& b) { return a == b; });

  m.def("init_identity", &init_identity<float>, py::arg("config"));
  m.def(
      "init_random",
      [](const MetricConfig& config, std::uint64_t seed) {
        Pcg32 rng(seed);
        return init_random<float>(config, rng);
      },
      py::arg("config"), py::arg("seed"));

  m.def(
      "score_matrix",
      [](const FloatArray& x, const FloatArray& y, const MetricParams& params, bool normalize) {
        return to_array(score_matrix(to_features(x, normalize, "x"),
                                     to_features(y, normalize, "y"), params));
      },
      py::arg("x"), py::arg("y"), py::arg("params"), py::arg("normalize") = true,
      "Q x G scores; rows are L2-normalized first unless normalize=False.");

  m.def(
      "pre_project",
      [](const FloatArray& features, const MetricParams& params, const std::string& side,
         bool normalize) {
        if (side != "left" && side != "right") throw ConfigError("side must be left or right");
        return to_array(pre_project(to_features(features, normalize, "features"), params,
                                    side == "left" ? ProjectionSide::kLeft
                                                   : ProjectionSide::kRight)
                            .values);
      },
      py::arg("features"), py::arg("params"), py::arg("side"), py::arg("normalize") = true);

  m.def(
      "evaluate",
      [](const FloatArray& scores,
         const std::optional<std::vector<std::vector<std::size_t>>>& truth) {
        const auto s = to_matrix(scores, "scores");
        const auto gt = truth_or_identity(truth, s.rows());
        gt.validate(s.cols());
        return report_dict(evaluate_retrieval(s, gt));
      },
      py::arg("scores"), py::arg("truth") = py::none(),
      "Recall@{1,5,10}, mAP and rSum in both directions.");

  m.def(
      "loss_and_grad",
      [](const DoubleArray& scores, const std::string& kind, double margin, double temperature,
         int poly_order, double poly_scale) {
        const auto s = to_matrix(scores, "scores");
        const auto lg = loss_and_grad(s, make_loss(kind, margin, temperature, poly_order,
                                                   poly_scale));
        py::array_t<double> d({lg.d_scores.rows(), lg.d_scores.cols()});
        std::copy(lg.d_scores.data().begin(), lg.d_scores.data().end(), d.mutable_data());
        return py::make_tuple(lg.value, d);
      },
      py::arg("scores"), py::arg("kind") = "triplet", py::arg("margin") = 0.2,
      py::arg("temperature") = 0.05, py::arg("poly_order") = 2, py::arg("poly_scale") = 1.0,
      "Loss value and dL/dS, computed in double.");

  m.def(
      "gradcheck",
      [](const std::string& variant, std::size_t dim, std::size_t block_size,
         const std::string& loss, std::size_t trials, std::uint64_t seed) {
        GradcheckOptions opt;
        opt.variant = parse_variant(variant);
        opt.dim = dim;
        opt.block_size = block_size;
        opt.loss.kind = parse_loss(loss);
        opt.trials = trials;
        opt.seed = seed;
        const auto r = run_gradcheck(opt);
        py::dict d;
        d["max_relative_error"] = r.max_relative_error;
        d["trials"] = r.trials;
        d["redraws"] = r.redraws;
        d["parameters"] = r.parameters;
        return d;
      },
      py::arg("variant") = "bdiag", py::arg("dim") = 16, py::arg("block_size") = 4,
      py::arg("loss") = "triplet", py::arg("trials") = 100, py::arg("seed") = 7);

  m.def(
      "synth",
      [](std::size_t pairs, std::size_t dim, const std::string& structure, std::size_t block,
         double mix_scale, double noise, std::uint64_t seed) {
        SynthSpec spec;
        spec.pairs = pairs;
        spec.dim = dim;
        if (structure == "block_mix") {
          spec.structure = SynthStructure::kBlockMix;
        } else if (structure == "diag_reweight") {
          spec.structure = SynthStructure::kDiagReweight;
        } else {
          throw ConfigError("structure must be block_mix or diag_reweight");
        }
        spec.block = block;
        spec.mix_scale = mix_scale;
        spec.noise = noise;
        spec.seed = seed;
        const auto data = synth_gen(spec);
        return py::make_tuple(to_array(data.pairs.x.values), to_array(data.pairs.y.values));
      },
      py::arg("pairs") = 1000, py::arg("dim") = 64, py::arg("structure") = "block_mix",
      py::arg("block") = 8, py::arg("mix_scale") = 4.0, py::arg("noise") = 0.1,
      py::arg("seed") = 42, "Paired unit-norm features (x, y); row i of x matches row i of y.");

  m.def(
      "train",
      [](const FloatArray& x, const FloatArray& y, const MetricConfig& config,
         const std::string& loss, std::size_t epochs, std::size_t batch_size,
         double learning_rate, const std::string& optimizer, double weight_decay,
         double weight_dropout, std::uint64_t seed, const std::string& init, double margin,
         double temperature) {
        TrainConfig tc;
        tc.loss = make_loss(loss, margin, temperature, 2, 1.0);
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.learning_rate = learning_rate;
        tc.optimizer = parse_optimizer(optimizer);
        tc.weight_decay = weight_decay;
        tc.weight_dropout = weight_dropout;
        tc.seed = seed;
        tc.init = parse_init(init);
        const PairedDataset data{to_features(x, true, "x"), to_features(y, true, "y")};
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(data, config, tc);
        }
        return py::make_tuple(result.params, result.loss_history);
      },
      py::arg("x"), py::arg("y"), py::arg("config"), py::arg("loss") = "triplet",
      py::arg("epochs") = 30, py::arg("batch_size") = 128, py::arg("learning_rate") = 5e-4,
      py::arg("optimizer") = "adam", py::arg("weight_decay") = 0.0,
      py::arg("weight_dropout") = 0.0, py::arg("seed") = 0, py::arg("init") = "identity",
      py::arg("margin") = 0.2, py::arg("temperature") = 0.05,
      "Returns (params, per-epoch mean loss).");

  m.def(
      "token_alignment",
      [](const FloatArray& a, const FloatArray& b, const MetricParams& params,
         const std::string& strategy, double temperature) {
        return token_alignment_score(to_features(a, true, "a"), to_features(b, true, "b"),
                                     params, {parse_alignment(strategy), temperature});
      },
      py::arg("a"), py::arg("b"), py::arg("params"), py::arg("strategy") = "maxave",
      py::arg("temperature") = 0.1);

  m.def(
      "metric_attention",
      [](const FloatArray& q, const FloatArray& k, const FloatArray& v,
         const MetricParams& params, std::optional<float> temperature) {
        const auto fq = to_features(q, false, "queries");
        const auto fk = to_features(k, false, "keys");
        const auto mv = to_matrix(v, "values");
        return to_array(temperature ? metric_attention(fq, fk, mv, params, *temperature)
                                    : metric_attention(fq, fk, mv, params));
      },
      py::arg("queries"), py::arg("keys"), py::arg("values"), py::arg("params"),
      py::arg("temperature") = py::none(), "Temperature defaults to sqrt(D).");

  m.def(
      "distill_kl",
      [](const DoubleArray& teacher, const DoubleArray& student, double temperature) {
        return distill_kl(to_matrix(teacher, "teacher"), to_matrix(student, "student"),
                          temperature);
      },
      py::arg("teacher"), py::arg("student"), py::arg("temperature") = 1.0);

  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("params"));
  m.def("load_checkpoint", py::overload_cast<const std::string&>(&load_checkpoint),
        py::arg("path"));
  m.def(
      "write_features",
      [](const std::string& path, const FloatArray& features) {
        write_features(path, FeatureMatrix{to_matrix(features, "features"), false});
      },
      py::arg("path"), py::arg("features"));
  m.def(
      "read_features",
      [](const std::string& path) { return to_array(read_features(path).features.values); },
      py::arg("path"));
}

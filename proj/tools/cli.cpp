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

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
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

namespace blockmetric::cli {
namespace {

const char* kBlockRatioHelp =
    "Block ratio N = D/d, used when --block-size is not given. "
    "Guidance: N = 1024 for holistic (global) embeddings, N = 4 for "
    "token-interaction (local) features";

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

// Options shared by every subcommand that scores with a metric.
struct MetricOptions {
  std::string metric = "cosine";
  std::size_t block_size = 0;
  std::size_t block_ratio = 0;
  std::string ckpt;

  void add(CLI::App* app, const char* default_metric) {
    metric = default_metric;
    app->add_option("--metric", metric, "Metric variant: cosine, diag, bdiag, dense")
        ->check(CLI::IsMember({"cosine", "diag", "bdiag", "dense"}));
    app->add_option("--block-size", block_size, "Block size d for bdiag");
    app->add_option("--block-ratio", block_ratio, kBlockRatioHelp);
  }

  void add_ckpt(CLI::App* app) {
    app->add_option("--ckpt", ckpt, "Checkpoint to score with (overrides --metric)");
  }

  MetricConfig config(std::size_t dim) const {
    const Variant v = parse_variant(metric);
    if (v != Variant::kBlockDiag) return MetricConfig::make(v, dim);
    std::size_t d = block_size;
    if (d == 0 && block_ratio > 0) {
      if (dim % block_ratio != 0) {
        throw ConfigError("block ratio " + std::to_string(block_ratio) + " does not divide " +
                          std::to_string(dim));
      }
      d = dim / block_ratio;
    }
    if (d == 0) throw ConfigError("bdiag needs --block-size or --block-ratio");
    return MetricConfig::block_diag(dim, d);
  }

  // Checkpoint when given, otherwise identity weights for --metric.
  MetricParams params(std::size_t dim) const {
    if (!ckpt.empty()) {
      auto p = load_checkpoint(ckpt);
      if (p.dim() != dim) {
        throw ConfigError(ckpt + ": checkpoint dimension " + std::to_string(p.dim()) +
                          " does not match features of dimension " + std::to_string(dim));
      }
      return p;
    }
    return init_identity<float>(config(dim));
  }
};

struct LossOptions {
  std::string loss = "triplet";
  LossSpec spec;

  void add(CLI::App* app) {
    app->add_option("--loss", loss, "Objective: triplet, infonce, cmpm, poly")
        ->check(CLI::IsMember({"triplet", "infonce", "cmpm", "poly"}));
    app->add_option("--margin", spec.margin, "Hinge margin (triplet, poly)");
    app->add_option("--temp", spec.temperature, "InfoNCE temperature");
    app->add_option("--poly-order", spec.poly_order, "Poly weight order k");
  }

  LossSpec resolve() const {
    LossSpec s = spec;
    s.kind = parse_loss(loss);
    s.validate();
    return s;
  }
};

FeatureMatrix load_unit_features(const std::string& path, std::ostream& err) {
  auto file = read_features(path);
  if (file.features.normalized) return std::move(file.features);
  err << "note: " << path << " rows are not unit norm; normalizing\n";
  return normalize_rows(file.features.values);
}

FeatureMatrix load_raw_features(const std::string& path) {
  return read_features(path).features;
}

GroundTruth load_truth(const std::string& path, std::size_t queries) {
  if (path.empty()) return GroundTruth::identity(queries);
  return read_ground_truth(path);
}

// The value is consumed by expand_config() before parsing; the option only
// exists so that help lists it and the parser accepts it.
void add_config(CLI::App* app) {
  app->add_option("--config", "key=value configuration file; flags take precedence");
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

// Appends `--key value` for every config entry not already given as a flag.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty()) return args;
  const auto entries = parse_key_values(read_text(path));
  for (const auto& [key, value] : entries) {
    if (key == "config") continue;
    const std::string flag = "--" + key;
    if (has_flag(args, flag)) continue;
    args.push_back(flag);
    args.push_back(value);
  }
  return args;
}

struct TrainCmd {
  std::string x, y, out, optimizer = "adam", init = "identity";
  MetricOptions metric;
  LossOptions loss;
  TrainConfig config;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("train", "Train a structured metric on paired features");
    add_config(app);
    app->add_option("--features-x", x, "Query-side feature file")->required();
    app->add_option("--features-y", y, "Gallery-side feature file")->required();
    app->add_option("--out", out, "Checkpoint to write")->required();
    metric.add(app, "bdiag");
    loss.add(app);
    app->add_option("--epochs", config.epochs, "Training epochs");
    app->add_option("--batch", config.batch_size, "Mini-batch size");
    app->add_option("--lr", config.learning_rate, "Learning rate");
    app->add_option("--optimizer", optimizer, "sgd or adam")
        ->check(CLI::IsMember({"sgd", "adam"}));
    app->add_option("--weight-decay", config.weight_decay, "L2 penalty on stored weights");
    app->add_option("--dropout", config.weight_dropout, "Dropout rate on stored weights");
    app->add_option("--init", init, "identity or random")
        ->check(CLI::IsMember({"identity", "random"}));
    app->add_option("--seed", config.seed, "Random seed");
    app->add_option("--grad-clip", config.grad_clip, "Global gradient L2 clip (<= 0 disables)");
  }

  int run(std::ostream& out_stream, std::ostream& err) {
    PairedDataset data{load_unit_features(x, err), load_unit_features(y, err)};
    if (data.x.rows() != data.y.rows()) {
      throw ConfigError("feature files hold " + std::to_string(data.x.rows()) + " and " +
                        std::to_string(data.y.rows()) + " rows");
    }
    config.loss = loss.resolve();
    config.optimizer = parse_optimizer(optimizer);
    config.init = parse_init(init);
    const auto cfg = metric.config(data.x.dim());
    const auto result = train(data, cfg, config, nullptr, [&](std::size_t epoch, double l) {
      out_stream << "epoch=" << epoch << " loss=" << format_double("%.6f", l) << "\n";
    });
    save_checkpoint(out, result.params);
    out_stream << "checkpoint=" << out << "\n";
    return kOk;
  }
};

struct EvalCmd {
  std::string x, y, gt, table, project = "none";
  MetricOptions metric;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("eval", "Retrieval report (R@K, mAP, rSum) in both directions");
    add_config(app);
    app->add_option("--features-x", x, "Query-side feature file")->required();
    app->add_option("--features-y", y, "Gallery-side feature file")->required();
    app->add_option("--gt", gt, "Ground-truth file (default: row i matches row i)");
    app->add_option("--table", table, "Also write the report as a tab-separated table");
    app->add_option("--pre-project", project,
                    "Fold the metric into one side and rank by dot product: none, left, right")
        ->check(CLI::IsMember({"none", "left", "right"}));
    metric.add(app, "cosine");
    metric.add_ckpt(app);
  }

  int run(std::ostream& out, std::ostream& err) {
    const auto fx = load_unit_features(x, err);
    const auto fy = load_unit_features(y, err);
    const auto params = metric.params(fx.dim());
    SimilarityMatrix scores;
    if (project == "left") {
      scores = dot_matrix(pre_project(fx, params, ProjectionSide::kLeft), fy);
    } else if (project == "right") {
      scores = dot_matrix(fx, pre_project(fy, params, ProjectionSide::kRight));
    } else {
      scores = score_matrix(fx, fy, params);
    }
    const auto report = evaluate_retrieval(scores, load_truth(gt, fx.rows()));
    out << format_report(report);
    if (!table.empty()) write_text(table, format_report_table(report));
    return kOk;
  }
};

struct GradcheckCmd {
  GradcheckOptions options;
  MetricOptions metric;
  LossOptions loss;
  double tolerance = 1e-4;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("gradcheck", "Analytic vs finite-difference gradient check");
    add_config(app);
    metric.add(app, "bdiag");
    loss.add(app);
    app->add_option("--dim", options.dim, "Embedding dimension");
    app->add_option("--batch", options.batch, "Batch size");
    app->add_option("--trials", options.trials, "Random batches to check");
    app->add_option("--seed", options.seed, "Random seed");
    app->add_option("--step", options.step, "Central-difference step");
    app->add_option("--tolerance", tolerance, "Maximum allowed relative error");
  }

  int run(std::ostream& out, std::ostream&) {
    const auto cfg = metric.config(options.dim);
    options.variant = cfg.variant();
    options.block_size = cfg.block_size();
    options.loss = loss.resolve();
    const auto result = run_gradcheck(options);
    out << "metric=" << to_string(cfg.variant()) << " loss=" << to_string(options.loss.kind)
        << "\n"
        << "trials=" << result.trials << " redraws=" << result.redraws
        << " parameters=" << result.parameters << "\n"
        << "max_relative_error=" << format_double("%.3e", result.max_relative_error) << "\n";
    if (!result.passed(tolerance)) {
      out << "status=FAIL\n";
      return kNumericError;
    }
    out << "status=PASS\n";
    return kOk;
  }
};

struct SynthCmd {
  std::string spec_file, out_x, out_y, out_gt;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("synth", "Generate a synthetic paired dataset");
    app->add_option("--spec-file", spec_file, "key=value synthetic data spec")->required();
    app->add_option("--out-x", out_x, "Output feature file for the x side")->required();
    app->add_option("--out-y", out_y, "Output feature file for the y side")->required();
    app->add_option("--out-gt", out_gt, "Optional ground-truth file");
    app->add_option("--seed", seed, "Override the spec seed");
  }

  int run(std::ostream& out, std::ostream&) {
    auto spec = SynthSpec::parse(read_text(spec_file));
    if (seed) spec.seed = *seed;
    const auto data = synth_gen(spec);
    write_features(out_x, data.pairs.x);
    write_features(out_y, data.pairs.y);
    if (!out_gt.empty()) {
      std::string text;
      for (const auto& set : data.truth.relevant) text += std::to_string(set.front()) + "\n";
      write_text(out_gt, text);
    }
    out << "pairs=" << spec.pairs << " dim=" << spec.dim << "\n";
    return kOk;
  }
};

struct AlignCmd {
  std::string a, b, strategy = "maxave";
  double temperature = 0.1;
  MetricOptions metric;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("align", "Token-wise alignment score of two token sets");
    add_config(app);
    app->add_option("--a", a, "First token-set feature file")->required();
    app->add_option("--b", b, "Second token-set feature file")->required();
    app->add_option("--strategy", strategy, "maxave, maxsum or maxsoft")
        ->check(CLI::IsMember({"maxave", "maxsum", "maxsoft"}));
    app->add_option("--temp", temperature, "MaxSoft temperature");
    metric.add(app, "cosine");
    metric.add_ckpt(app);
  }

  int run(std::ostream& out, std::ostream& err) {
    const auto ta = load_unit_features(a, err);
    const auto tb = load_unit_features(b, err);
    const auto params = metric.params(ta.dim());
    const auto s = token_alignment(ta, tb, params, {parse_alignment(strategy), temperature});
    out << "column_pass=" << format_double("%.6f", s.column_pass) << "\n"
        << "row_pass=" << format_double("%.6f", s.row_pass) << "\n"
        << "score=" << format_double("%.6f", s.combined) << "\n";
    return kOk;
  }
};

struct AttentionCmd {
  std::string q, k, v, out_path;
  double temperature = 0.0;
  MetricOptions metric;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("attention", "Attention with metric query-key scores");
    add_config(app);
    app->add_option("--q", q, "Query token features")->required();
    app->add_option("--k", k, "Key token features")->required();
    app->add_option("--v", v, "Value rows (one per key)")->required();
    app->add_option("--out", out_path, "Output feature file")->required();
    app->add_option("--temperature", temperature, "Softmax temperature (default sqrt(D))");
    metric.add(app, "cosine");
    metric.add_ckpt(app);
  }

  int run(std::ostream& out, std::ostream& err) {
    const auto fq = load_unit_features(q, err);
    const auto fk = load_unit_features(k, err);
    const auto values = load_raw_features(v);
    const auto params = metric.params(fq.dim());
    const auto result = temperature > 0.0
                            ? metric_attention(fq, fk, values.values, params,
                                               static_cast<float>(temperature))
                            : metric_attention(fq, fk, values.values, params);
    write_features(out_path, FeatureMatrix{result, false});
    out << "rows=" << result.rows() << " cols=" << result.cols() << "\n";
    return kOk;
  }
};

struct DistillCmd {
  std::string tx, ty, sx, sy;
  double temperature = 0.05;
  double task_loss = 0.0;
  MetricOptions teacher;
  std::string student_ckpt;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("distill", "Similarity-distribution distillation loss");
    add_config(app);
    app->add_option("--teacher-x", tx, "Teacher x features")->required();
    app->add_option("--teacher-y", ty, "Teacher y features")->required();
    app->add_option("--student-x", sx, "Student x features")->required();
    app->add_option("--student-y", sy, "Student y features")->required();
    app->add_option("--temp", temperature, "Softmax temperature");
    app->add_option("--task-loss", task_loss, "Task loss value added 1:1");
    teacher.add(app, "cosine");
    app->add_option("--teacher-ckpt", teacher.ckpt, "Teacher metric checkpoint");
    app->add_option("--student-ckpt", student_ckpt, "Student metric checkpoint (default cosine)");
  }

  int run(std::ostream& out, std::ostream& err) {
    const auto ftx = load_unit_features(tx, err), fty = load_unit_features(ty, err);
    const auto fsx = load_unit_features(sx, err), fsy = load_unit_features(sy, err);
    const auto tparams = teacher.params(ftx.dim());
    MetricOptions student;
    student.ckpt = student_ckpt;
    const auto sparams = student.params(fsx.dim());
    const auto st = score_matrix(ftx, fty, tparams);
    const auto ss = score_matrix(fsx, fsy, sparams);
    const auto tau = static_cast<float>(temperature);
    const float kl = distill_kl(st, ss, tau);
    out << "kl=" << format_double("%.9f", kl) << "\n"
        << "total=" << format_double("%.9f", distill_loss(st, ss, tau, static_cast<float>(task_loss)))
        << "\n";
    return kOk;
  }
};

struct StatsCmd {
  std::string x, y, gt, out_pos, out_neg;
  std::size_t bins = 50;
  MetricOptions metric;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("stats", "Positive/negative similarity histograms");
    add_config(app);
    app->add_option("--features-x", x, "Query-side feature file")->required();
    app->add_option("--features-y", y, "Gallery-side feature file")->required();
    app->add_option("--gt", gt, "Ground-truth file (default: row i matches row i)");
    app->add_option("--bins", bins, "Number of equal-width bins");
    app->add_option("--out-pos", out_pos, "Positive-pair histogram file");
    app->add_option("--out-neg", out_neg, "Negative-pair histogram file");
    metric.add(app, "cosine");
    metric.add_ckpt(app);
  }

  int run(std::ostream& out, std::ostream& err) {
    const auto fx = load_unit_features(x, err);
    const auto fy = load_unit_features(y, err);
    const auto params = metric.params(fx.dim());
    const auto hist = similarity_histogram(score_matrix(fx, fy, params), load_truth(gt, fx.rows()),
                                           bins);
    if (!out_pos.empty()) write_text(out_pos, format_histogram(hist, true));
    if (!out_neg.empty()) write_text(out_neg, format_histogram(hist, false));
    if (out_pos.empty()) out << "# positive\n" << format_histogram(hist, true);
    if (out_neg.empty()) out << "# negative\n" << format_histogram(hist, false);
    return kOk;
  }
};

struct InspectCmd {
  std::string ckpt;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("inspect", "Summarize a checkpoint");
    app->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  }

  int run(std::ostream& out, std::ostream&) {
    const auto p = load_checkpoint(ckpt);
    out << "variant=" << to_string(p.config.variant()) << "\n"
        << "dim=" << p.config.dim() << "\n"
        << "block_size=" << p.config.block_size() << "\n"
        << "params=" << param_count(p.config) << "\n";
    if (!p.weights.empty()) {
      const auto [mn, mx] = std::minmax_element(p.weights.begin(), p.weights.end());
      double sum = 0.0;
      for (float w : p.weights) sum += w;
      out << "min=" << format_double("%.6f", *mn) << "\n"
          << "max=" << format_double("%.6f", *mx) << "\n"
          << "mean=" << format_double("%.6f", sum / static_cast<double>(p.weights.size())) << "\n";
    }
    out << "diag_mass=" << format_double("%.6f", diagonal_mass_fraction(p)) << "\n";
    return kOk;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structured sparse bilinear metric learning"};
  app.name("blockmetric");
  app.require_subcommand(1);
  TrainCmd train_cmd;
  EvalCmd eval_cmd;
  GradcheckCmd gradcheck_cmd;
  SynthCmd synth_cmd;
  AlignCmd align_cmd;
  AttentionCmd attention_cmd;
  DistillCmd distill_cmd;
  StatsCmd stats_cmd;
  InspectCmd inspect_cmd;
  train_cmd.add(app);
  eval_cmd.add(app);
  gradcheck_cmd.add(app);
  synth_cmd.add(app);
  align_cmd.add(app);
  attention_cmd.add(app);
  distill_cmd.add(app);
  stats_cmd.add(app);
  inspect_cmd.add(app);

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_config(std::move(args));
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kFormatError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kFormatError;
  }

  try {
    // CLI11 consumes the vector form back to front.
    std::reverse(args.begin() + 1, args.end());
    args.erase(args.begin());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "train") return train_cmd.run(out, err);
    if (name == "eval") return eval_cmd.run(out, err);
    if (name == "gradcheck") return gradcheck_cmd.run(out, err);
    if (name == "synth") return synth_cmd.run(out, err);
    if (name == "align") return align_cmd.run(out, err);
    if (name == "attention") return attention_cmd.run(out, err);
    if (name == "distill") return distill_cmd.run(out, err);
    if (name == "stats") return stats_cmd.run(out, err);
    if (name == "inspect") return inspect_cmd.run(out, err);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kFormatError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kFormatError;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace blockmetric::cli

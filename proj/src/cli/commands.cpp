#include "relnov/cli/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "relnov/cli/experiments.hpp"
#include "relnov/cli/run_config.hpp"
#include "relnov/data/embedding_io.hpp"
#include "relnov/data/synthetic.hpp"
#include "relnov/errors.hpp"
#include "relnov/evaluation/evaluate.hpp"
#include "relnov/evaluation/scores.hpp"
#include "relnov/model/checkpoint.hpp"
#include "relnov/training/trainer.hpp"

namespace fs = std::filesystem;

namespace relnov {
namespace {

// Options shared by every command.
struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "config file (key = value with [sections])")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", common.overrides, "override a config key, e.g. --set train.iterations=500");
  cmd->add_option("--seed", common.seed, "seed for data, model and training");
  cmd->add_option("--threads", common.threads, "worker threads (fallback: RELNOV_THREADS)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", common.out_dir, "output directory")->capture_default_str();
}

std::size_t env_threads(std::size_t fallback) {
  const char* value = std::getenv("RELNOV_THREADS");
  if (value == nullptr || *value == '\0') return fallback;
  try {
    std::size_t pos = 0;
    const unsigned long n = std::stoul(value, &pos);
    if (pos != std::string(value).size() || n == 0) throw std::invalid_argument(value);
    return n;
  } catch (const std::exception&) {
    throw ConfigError(std::string("RELNOV_THREADS must be a positive integer, got '") + value + "'");
  }
}

RunConfig resolve(const CommonOptions& common) {
  RunConfig cfg = common.config_path.empty() ? RunConfig{} : load_run_config(common.config_path);
  for (const auto& o : common.overrides) cfg.apply_override(o);
  if (common.seed) cfg.set_seed(*common.seed);
  cfg.threads = common.threads ? *common.threads : env_threads(cfg.threads);
  return cfg;
}

fs::path prepare_output(const CommonOptions& common, const RunConfig& cfg) {
  const fs::path dir(common.out_dir);
  fs::create_directories(dir);
  std::ofstream(dir / "resolved_config.ini") << to_config_text(cfg);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw DataError(std::string(what) + " file not found: " + path);
}

int cmd_gen_data(const CommonOptions& common, const std::string& format, std::ostream& out) {
  RunConfig cfg = resolve(common);
  cfg.data.validate();
  const fs::path dir = prepare_output(common, cfg);
  const SyntheticBenchmark data = generate_synthetic(cfg.data);
  const std::string ext = format == "csv" ? ".csv" : ".rsnd";
  for (const auto& [name, ds] : {std::pair{"support", &data.support}, std::pair{"test", &data.test}}) {
    const fs::path path = dir / (std::string(name) + ext);
    write_embeddings(*ds, path);
    out << fmt::format("{}: {} ({} samples, {} classes, dim {})\n", name, path.string(), ds->size(),
                       ds->num_classes(), ds->dim());
  }
  return kExitOk;
}

int cmd_train(const CommonOptions& common, const std::string& support_path,
              const std::optional<std::string>& loss, const std::optional<std::string>& aggregation,
              const std::optional<std::size_t>& iterations, std::ostream& out) {
  RunConfig cfg = resolve(common);
  if (loss) cfg.train.loss = parse_loss(*loss);
  if (aggregation) cfg.model.aggregation = parse_aggregation(*aggregation);
  if (iterations) cfg.train.iterations = *iterations;
  require_file(support_path, "support");
  const LabeledDataset support = read_embeddings(fs::path(support_path));
  const ModelConfig model_cfg = cfg.resolved_model(support.dim());
  model_cfg.validate();
  cfg.train.validate();
  const fs::path dir = prepare_output(common, cfg);

  RelationalModel<float> model(model_cfg);
  out << fmt::format("model: {} aggregation, {} head, {} parameters\n", to_string(model_cfg.aggregation),
                     to_string(model_cfg.head_mode), model.parameter_count());
  const TrainResult result = train(model, support, cfg.train, [&](const LossRecord& r) {
    out << fmt::format("iter {} loss {:.6f} lr {:.6g}\n", r.iter, r.loss, r.lr);
  });
  save_checkpoint(model, dir / "model.ckpt");
  auto loss_csv = open_out(dir / "loss.csv");
  write_loss_csv(result, loss_csv);
  out << fmt::format("checkpoint: {}\n", (dir / "model.ckpt").string());
  return kExitOk;
}

int cmd_eval(const CommonOptions& common, const std::string& checkpoint, const std::string& support_path,
             const std::string& test_path, const std::string& metric, std::ostream& out) {
  const RunConfig cfg = resolve(common);
  const ScoringMethod method = parse_scoring_method(metric);
  if (method == ScoringMethod::relational && checkpoint.empty()) {
    throw ConfigError("eval: --metric relational needs --checkpoint");
  }
  require_file(support_path, "support");
  require_file(test_path, "test");
  std::optional<RelationalModel<float>> model;
  if (!checkpoint.empty()) {
    require_file(checkpoint, "checkpoint");
    model.emplace(load_checkpoint(fs::path(checkpoint)));
  }
  const LabeledDataset support = read_embeddings(fs::path(support_path));
  const LabeledDataset test = read_embeddings(fs::path(test_path));
  const fs::path dir = prepare_output(common, cfg);

  EvaluateOptions opts;
  opts.method = method;
  opts.model = model ? &*model : nullptr;
  opts.threads = cfg.threads;
  opts.seed = model ? model->config().seed : cfg.model.seed;
  opts.config_digest = config_digest(to_config_text(cfg));
  const Evaluation result = evaluate(support, test, opts);

  write_metrics_json(result.report, dir / "metrics.json");
  write_scores_csv(result.scores, dir / "scores.csv");
  auto roc = open_out(dir / "roc.csv");
  write_roc_csv(result.report, roc);
  out << to_json(result.report);
  return kExitOk;
}

int cmd_bench(const CommonOptions& common, std::ostream& out) {
  const RunConfig cfg = resolve(common);
  cfg.validate();
  const fs::path dir = prepare_output(common, cfg);
  const BenchTable table = run_bench(cfg, cfg.data.seed, &out);
  auto runs = open_out(dir / "bench_runs.csv");
  write_bench_csv(table.runs, runs);
  auto means = open_out(dir / "bench.csv");
  write_bench_csv(table.means, means);
  auto md = open_out(dir / "bench.md");
  write_bench_markdown(table, md);
  write_bench_markdown(table, out);
  return kExitOk;
}

int cmd_ablate(const CommonOptions& common, std::ostream& out) {
  const RunConfig cfg = resolve(common);
  cfg.validate();
  const fs::path dir = prepare_output(common, cfg);
  const std::vector<AblationRow> rows = run_ablation(cfg, &out);
  auto csv = open_out(dir / "ablation.csv");
  write_ablation_csv(rows, csv);
  auto md = open_out(dir / "ablation.md");
  write_ablation_markdown(rows, md);
  write_ablation_markdown(rows, out);
  return kExitOk;
}

int cmd_ensemble(const CommonOptions& common, const std::string& a_path, const std::string& b_path,
                 bool normalize, const std::string& predictions, const std::string& labels_path,
                 std::ostream& out) {
  const RunConfig cfg = resolve(common);
  require_file(a_path, "scores");
  require_file(b_path, "scores");
  const ScoreSet a = read_scores_csv(fs::path(a_path));
  const ScoreSet b = read_scores_csv(fs::path(b_path));
  EnsemblePredictions which = EnsemblePredictions::symmetric;
  if (predictions == "a") which = EnsemblePredictions::first;
  else if (predictions == "b") which = EnsemblePredictions::second;
  ScoreSet merged = ensemble_average(a, b, normalize, which);
  if (!labels_path.empty()) {
    require_file(labels_path, "labels");
    const LabeledDataset labeled = read_embeddings(fs::path(labels_path));
    if (!labeled.has_labels() || labeled.size() != merged.size()) {
      throw DataError(fmt::format("ensemble: labels file has {} labeled rows, scores have {}",
                                  labeled.has_labels() ? labeled.size() : 0, merged.size()));
    }
    merged.true_class.resize(merged.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
      const auto id = merged.sample_ids[i];
      if (id < 0 || static_cast<std::size_t>(id) >= labeled.size()) {
        throw DataError(fmt::format("ensemble: sample id {} outside the labels file", id));
      }
      merged.true_class[i] = labeled.labels[static_cast<std::size_t>(id)];
    }
  }
  const fs::path dir = prepare_output(common, cfg);
  const MetricsReport report = compute_metrics(merged, cfg.model.seed, config_digest(to_config_text(cfg)));
  write_scores_csv(merged, dir / "scores.csv");
  write_metrics_json(report, dir / "metrics.json");
  auto roc = open_out(dir / "roc.csv");
  write_roc_csv(report, roc);
  out << to_json(report);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Relational semantic novelty detection: training, scoring and benchmarks", "relnov");
  app.require_subcommand(1);

  CommonOptions common;
  std::string format = "rsnd";
  std::string support, test, checkpoint, metric = "relational";
  std::optional<std::string> loss, aggregation;
  std::optional<std::size_t> iterations;
  std::string a_path, b_path, predictions = "symmetric", labels_path;
  bool normalize = false;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic support/test benchmark");
  add_common(gen, common);
  gen->add_option("--format", format, "rsnd or csv")->check(CLI::IsMember({"rsnd", "csv"}))->capture_default_str();

  auto* trn = app.add_subcommand("train", "train a relational model on a support set");
  add_common(trn, common);
  trn->add_option("--support", support, "support embedding file")->required();
  trn->add_option("--loss", loss, "mse or binary_ce (binary_ce selects the 2-way head)");
  trn->add_option("--aggregation", aggregation, "transformer, max, sum or concat");
  trn->add_option("--iterations", iterations, "training iterations");

  auto* ev = app.add_subcommand("eval", "score a test set against support prototypes");
  add_common(ev, common);
  ev->add_option("--checkpoint", checkpoint, "trained model (required for relational scoring)");
  ev->add_option("--support", support, "support embedding file")->required();
  ev->add_option("--test", test, "test embedding file")->required();
  ev->add_option("--metric", metric, "relational, inv_euclidean or cosine")
      ->check(CLI::IsMember({"relational", "inv_euclidean", "cosine"}))
      ->capture_default_str();

  auto* bench = app.add_subcommand("bench", "relational vs baselines on intra/single/multi-source data");
  add_common(bench, common);

  auto* ablate = app.add_subcommand("ablate", "aggregation x loss ablation");
  add_common(ablate, common);

  auto* ens = app.add_subcommand("ensemble", "average two score files");
  add_common(ens, common);
  ens->add_option("--a", a_path, "first score CSV")->required();
  ens->add_option("--b", b_path, "second score CSV")->required();
  ens->add_flag("--normalize", normalize, "min-max scale each input first");
  ens->add_option("--predictions", predictions, "class predictions from a, b or symmetric")
      ->check(CLI::IsMember({"symmetric", "a", "b"}))
      ->capture_default_str();
  ens->add_option("--labels", labels_path, "labeled test embedding file for acc and h_score");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(common, format, out);
    if (*trn) return cmd_train(common, support, loss, aggregation, iterations, out);
    if (*ev) return cmd_eval(common, checkpoint, support, test, metric, out);
    if (*bench) return cmd_bench(common, out);
    if (*ablate) return cmd_ablate(common, out);
    if (*ens) return cmd_ensemble(common, a_path, b_path, normalize, predictions, labels_path, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace relnov

#include "relnov/cli/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "relnov/data/synthetic.hpp"
#include "relnov/errors.hpp"

namespace relnov {

template <typename T>
SwapStats swap_statistics(const RelationalModel<T>& model, std::size_t pairs, std::uint64_t seed) {
  const std::size_t d = model.config().feature_dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> a_vals(pairs * d), b_vals(pairs * d);
  for (auto& v : a_vals) v = static_cast<T>(normal(rng));
  for (auto& v : b_vals) v = static_cast<T>(normal(rng));
  const Tensor<T> a({pairs, d}, std::move(a_vals));
  const Tensor<T> b({pairs, d}, std::move(b_vals));
  const Tensor<T> ab = pair_logits(model, a, b);
  const Tensor<T> ba = pair_logits(model, b, a);

  SwapStats stats;
  stats.pairs = pairs;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double s1 = sigmoid_scalar(static_cast<double>(ab[i]));
    const double s2 = sigmoid_scalar(static_cast<double>(ba[i]));
    const double diff = std::abs(s1 - s2);
    const double rel = diff / std::max({std::abs(s1), std::abs(s2), 1e-300});
    stats.max_abs_diff = std::max(stats.max_abs_diff, diff);
    stats.max_rel_diff = std::max(stats.max_rel_diff, rel);
    if (rel > 1e-3) ++stats.above_1e3;
  }
  return stats;
}

template SwapStats swap_statistics(const RelationalModel<float>&, std::size_t, std::uint64_t);
template SwapStats swap_statistics(const RelationalModel<double>&, std::size_t, std::uint64_t);

TrialResult run_trial(const RunConfig& cfg, const SyntheticBenchmark& data, RelationalModel<float>& model) {
  TrialResult out;
  out.training = train(model, data.support, cfg.train);
  EvaluateOptions opts;
  opts.model = &model;
  opts.threads = cfg.threads;
  opts.seed = cfg.model.seed;
  opts.config_digest = config_digest(to_config_text(cfg));
  out.evaluation = evaluate(data.support, data.test, opts);
  return out;
}

std::string_view to_string(BenchSetting setting) {
  switch (setting) {
    case BenchSetting::intra: return "intra";
    case BenchSetting::single_source: return "single_source";
    case BenchSetting::multi_source: return "multi_source";
  }
  return "?";
}

SyntheticSpec bench_spec(const SyntheticSpec& base, BenchSetting setting) {
  SyntheticSpec spec = base;
  auto domain = [&](double rotation, double shift) {
    DomainTransform t;
    t.rotation_deg = rotation;
    if (shift != 0.0) t.translation = uniform_translation(spec.dims, shift);
    return t;
  };
  spec.partial_overlap.clear();
  switch (setting) {
    case BenchSetting::intra:
      spec.domains = {domain(0, 0)};
      spec.source_domains = {0};
      spec.target_domain = 0;
      break;
    case BenchSetting::single_source:
      spec.domains = {domain(0, 0), domain(20, 0.5)};
      spec.source_domains = {0};
      spec.target_domain = 1;
      break;
    case BenchSetting::multi_source:
      spec.domains = {domain(0, 0), domain(-10, 0.25), domain(10, -0.25), domain(20, 0.5)};
      spec.source_domains = {0, 1, 2};
      spec.target_domain = 3;
      break;
  }
  return spec;
}

namespace {

constexpr BenchSetting kSettings[] = {BenchSetting::intra, BenchSetting::single_source,
                                      BenchSetting::multi_source};
constexpr ScoringMethod kMethods[] = {ScoringMethod::relational, ScoringMethod::inv_euclidean,
                                      ScoringMethod::cosine};

}  // namespace

BenchTable run_bench(const RunConfig& cfg, std::uint64_t master_seed, std::ostream* progress) {
  BenchTable table;
  for (std::size_t k = 0; k < cfg.bench_seeds; ++k) {
    RunConfig run = cfg;
    run.set_seed(master_seed + k);
    // Settings that share a support set (intra and single-source) share one
    // trained model.
    std::vector<std::pair<LabeledDataset, RelationalModel<float>>> trained;
    for (BenchSetting setting : kSettings) {
      const SyntheticBenchmark data = generate_synthetic(bench_spec(run.data, setting));
      auto cached = std::find_if(trained.begin(), trained.end(),
                                 [&](const auto& entry) { return entry.first == data.support; });
      if (cached == trained.end()) {
        RelationalModel<float> model(run.resolved_model(data.support.dim()));
        train(model, data.support, run.train);
        trained.emplace_back(data.support, std::move(model));
        cached = std::prev(trained.end());
      }
      for (ScoringMethod method : kMethods) {
        EvaluateOptions opts;
        opts.method = method;
        opts.model = method == ScoringMethod::relational ? &cached->second : nullptr;
        opts.threads = run.threads;
        opts.seed = run.model.seed;
        const MetricsReport report = evaluate(data.support, data.test, opts).report;
        table.runs.push_back({setting, method, run.model.seed, report.auroc, report.fpr95});
        if (progress) {
          *progress << fmt::format("seed {} {} {}: auroc {:.4f} fpr95 {:.4f}\n", run.model.seed,
                                   to_string(setting), to_string(method), report.auroc, report.fpr95);
        }
      }
    }
  }
  for (BenchSetting setting : kSettings) {
    for (ScoringMethod method : kMethods) {
      double auroc = 0, fpr = 0;
      std::size_t n = 0;
      for (const auto& e : table.runs) {
        if (e.setting != setting || e.method != method) continue;
        auroc += e.auroc;
        fpr += e.fpr95;
        ++n;
      }
      table.means.push_back({setting, method, master_seed, auroc / static_cast<double>(n),
                             fpr / static_cast<double>(n)});
    }
  }
  return table;
}

void write_bench_csv(const std::vector<BenchEntry>& entries, std::ostream& out) {
  out << "setting,method,seed,auroc,fpr95\n";
  for (const auto& e : entries) {
    out << fmt::format("{},{},{},{},{}\n", to_string(e.setting), to_string(e.method), e.seed, e.auroc,
                       e.fpr95);
  }
}

void write_bench_markdown(const BenchTable& table, std::ostream& out) {
  out << "| method |";
  for (BenchSetting s : kSettings) out << " " << to_string(s) << " AUROC | " << to_string(s) << " FPR95 |";
  out << "\n|---|";
  for (std::size_t i = 0; i < std::size(kSettings); ++i) out << "---|---|";
  out << "\n";
  for (ScoringMethod m : kMethods) {
    out << "| " << to_string(m) << " |";
    for (BenchSetting s : kSettings) {
      for (const auto& e : table.means) {
        if (e.setting == s && e.method == m) out << fmt::format(" {:.4f} | {:.4f} |", e.auroc, e.fpr95);
      }
    }
    out << "\n";
  }
}

AblationRow run_ablation_variant(const RunConfig& cfg, const SyntheticBenchmark& data,
                                 Aggregation aggregation, LossKind loss) {
  RunConfig run = cfg;
  run.model.aggregation = aggregation;
  run.train.loss = loss;
  run.head_mode.reset();
  RelationalModel<float> model(run.resolved_model(data.support.dim()));
  const TrialResult trial = run_trial(run, data, model);
  const auto& losses = trial.training.losses;
  if (losses.empty()) throw ConfigError("ablate: needs at least one training iteration");
  const std::size_t tail = std::min<std::size_t>(10, losses.size());
  AblationRow row;
  row.aggregation = aggregation;
  row.loss = loss;
  row.initial_loss = losses.front();
  row.final_loss = std::accumulate(losses.end() - static_cast<std::ptrdiff_t>(tail), losses.end(), 0.0) /
                   static_cast<double>(tail);
  row.auroc = trial.evaluation.report.auroc;
  row.fpr95 = trial.evaluation.report.fpr95;
  row.swap = swap_statistics(model, 100, run.model.seed);
  return row;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::ostream* progress) {
  const SyntheticBenchmark data = generate_synthetic(cfg.data);
  std::vector<AblationRow> rows;
  for (Aggregation agg : {Aggregation::transformer, Aggregation::max, Aggregation::sum, Aggregation::concat}) {
    for (LossKind loss : {LossKind::mse, LossKind::binary_ce}) {
      rows.push_back(run_ablation_variant(cfg, data, agg, loss));
      if (progress) {
        const auto& r = rows.back();
        *progress << fmt::format("{} {}: loss {:.4f} -> {:.4f}, auroc {:.4f}, swap max rel {:.3g}\n",
                                 to_string(agg), to_string(loss), r.initial_loss, r.final_loss, r.auroc,
                                 r.swap.max_rel_diff);
      }
    }
  }
  return rows;
}

namespace {

std::string_view order_label(const SwapStats& s) {
  if (s.invariant()) return "invariant";
  if (s.order_sensitive()) return "order_sensitive";
  return "mixed";
}

}  // namespace

void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out) {
  out << "aggregation,loss,initial_loss,final_loss,auroc,fpr95,swap_max_rel_diff,swap_pairs_above_1e-3,order\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{}/{},{}\n", to_string(r.aggregation), to_string(r.loss),
                       r.initial_loss, r.final_loss, r.auroc, r.fpr95, r.swap.max_rel_diff, r.swap.above_1e3,
                       r.swap.pairs, order_label(r.swap));
  }
}

void write_ablation_markdown(const std::vector<AblationRow>& rows, std::ostream& out) {
  out << "| aggregation | loss | initial loss | final loss | AUROC | FPR95 | swap max rel diff | order |\n";
  out << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out << fmt::format("| {} | {} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.3g} | {} |\n", to_string(r.aggregation),
                       to_string(r.loss), r.initial_loss, r.final_loss, r.auroc, r.fpr95, r.swap.max_rel_diff,
                       order_label(r.swap));
  }
}

}  // namespace relnov

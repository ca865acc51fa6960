#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "relnov/cli/run_config.hpp"
#include "relnov/evaluation/evaluate.hpp"
#include "relnov/model/relational_model.hpp"
#include "relnov/training/trainer.hpp"

namespace relnov {

// Statistics of |sigma(a,b) - sigma(b,a)| over random feature pairs.
struct SwapStats {
  std::size_t pairs = 0;
  double max_abs_diff = 0;
  double max_rel_diff = 0;     // diff / max(|sigma(a,b)|, |sigma(b,a)|)
  std::size_t above_1e3 = 0;   // pairs whose relative difference exceeds 1e-3

  bool invariant() const { return max_rel_diff <= 1e-5; }
  bool order_sensitive() const { return above_1e3 * 100 >= pairs * 99; }
};

// Feature rows are drawn from N(0, 1) in feature_dim dimensions.
template <typename T>
SwapStats swap_statistics(const RelationalModel<T>& model, std::size_t pairs, std::uint64_t seed);

// Train on the benchmark support set, then score its test set.
struct TrialResult {
  TrainResult training;
  Evaluation evaluation;
};

TrialResult run_trial(const RunConfig& cfg, const SyntheticBenchmark& data, RelationalModel<float>& model);

// ---- cmd_bench ----

enum class BenchSetting : std::uint8_t { intra, single_source, multi_source };
std::string_view to_string(BenchSetting setting);

// Domain layout for a setting. The shifted target turns every coordinate
// plane by 20 degrees and translates by 0.5 along the all-ones direction.
// Multi-source adds two milder source domains.
SyntheticSpec bench_spec(const SyntheticSpec& base, BenchSetting setting);

struct BenchEntry {
  BenchSetting setting;
  ScoringMethod method;
  std::uint64_t seed;
  double auroc;
  double fpr95;
};

struct BenchTable {
  std::vector<BenchEntry> runs;   // one per setting, method and seed
  std::vector<BenchEntry> means;  // seed averages; seed is the master seed
};

// Seeds master_seed, master_seed + 1, ... (cfg.bench_seeds of them).
BenchTable run_bench(const RunConfig& cfg, std::uint64_t master_seed, std::ostream* progress = nullptr);

void write_bench_csv(const std::vector<BenchEntry>& entries, std::ostream& out);
void write_bench_markdown(const BenchTable& table, std::ostream& out);

// ---- cmd_ablate ----

struct AblationRow {
  Aggregation aggregation;
  LossKind loss;
  double initial_loss;  // first training batch
  double final_loss;    // mean of the last ten batches
  double auroc;
  double fpr95;
  SwapStats swap;
};

AblationRow run_ablation_variant(const RunConfig& cfg, const SyntheticBenchmark& data,
                                 Aggregation aggregation, LossKind loss);
std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::ostream* progress = nullptr);

void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out);
void write_ablation_markdown(const std::vector<AblationRow>& rows, std::ostream& out);

}  // namespace relnov

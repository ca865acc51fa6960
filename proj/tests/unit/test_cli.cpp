#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "relnov/cli/commands.hpp"
#include "relnov/cli/experiments.hpp"
#include "relnov/cli/run_config.hpp"
#include "relnov/data/embedding_io.hpp"
#include "relnov/evaluation/scores.hpp"
#include "relnov/data/synthetic.hpp"
#include "relnov/model/checkpoint.hpp"
#include "relnov/training/trainer.hpp"

namespace fs = std::filesystem;
using namespace relnov;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("relnov_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  // Small model and short training so each command runs in well under a second.
  std::string tiny_config() {
    const std::string p = path("tiny.ini");
    std::ofstream(p) << "[model]\nfeature_dim = 8\nmodel_dim = 8\nnum_blocks = 1\nnum_heads = 2\nmlp_ratio = 2\n"
                        "[train]\niterations = 20\nbatch_size = 32\nwarmup_iters = 5\nlog_every = 10\n"
                        "[data]\nsamples_per_class = 20\n";
    return p;
  }

  void gen_data(const std::string& out) {
    ASSERT_EQ(run({"gen-data", "--config", tiny_config(), "--seed", "3", "--out", out}), 0) << err_.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST(RunConfig, TextRoundTrip) {
  RunConfig cfg;
  cfg.apply_override("train.iterations=123");
  cfg.apply_override("data.domains=0,0,1; 20,0.5,1.5");
  cfg.apply_override("data.source_domains=0");
  cfg.apply_override("data.target_domain=1");
  cfg.apply_override("model.head_mode=classification");
  std::istringstream in(to_config_text(cfg));
  const RunConfig back = parse_run_config(in);
  EXPECT_EQ(to_config_text(back), to_config_text(cfg));
  EXPECT_EQ(back.train.iterations, 123u);
  ASSERT_EQ(back.data.domains.size(), 2u);
  EXPECT_EQ(back.data.domains[1].rotation_deg, 20.0);
  EXPECT_EQ(back.data.domains[1].scale, 1.5);
}

TEST(RunConfig, RejectsUnknownKeysAndSections) {
  std::istringstream unknown_key("[train]\nlearning_rate = 0.1\n");
  EXPECT_THROW(parse_run_config(unknown_key), ConfigError);
  std::istringstream unknown_section("[optim]\nlr = 0.1\n");
  EXPECT_THROW(parse_run_config(unknown_section), ConfigError);
  std::istringstream no_section("iterations = 3\n");
  EXPECT_THROW(parse_run_config(no_section), ConfigError);
  std::istringstream bad_value("[train]\niterations = many\n");
  EXPECT_THROW(parse_run_config(bad_value), ConfigError);
}

TEST(RunConfig, HeadModeFollowsLoss) {
  RunConfig cfg;
  EXPECT_EQ(cfg.resolved_head_mode(), HeadMode::regression_sigmoid);
  cfg.train.loss = LossKind::binary_ce;
  EXPECT_EQ(cfg.resolved_head_mode(), HeadMode::classification_2way);
  cfg.head_mode = HeadMode::regression_sigmoid;
  EXPECT_EQ(cfg.resolved_head_mode(), HeadMode::regression_sigmoid);
}

TEST(RunConfig, LargeScaleValues) {
  const RunConfig cfg = paper_scale_config();
  EXPECT_EQ(cfg.train.optimizer, OptimizerKind::lars);
  EXPECT_EQ(cfg.train.base_lr, 0.008);
  EXPECT_EQ(cfg.train.warmup_iters, 500u);
  EXPECT_EQ(cfg.train.batch_size, 4096u);
  EXPECT_EQ(cfg.train.iterations, 13000u);
}

TEST(RunConfig, ShippedConfigFiles) {
  const fs::path dir = RELNOV_CONFIG_DIR;
  EXPECT_EQ(to_config_text(load_run_config(dir / "paper_scale.ini")), to_config_text(paper_scale_config()));
  const RunConfig desk = load_run_config(dir / "desk.ini");
  EXPECT_LE(desk.train.iterations, 2000u);
  EXPECT_EQ(desk.data.dims, 16u);
  EXPECT_EQ(desk.data.known_classes, 5u);
  EXPECT_EQ(desk.data.unknown_classes, 5u);
  EXPECT_EQ(desk.data.samples_per_class, 100u);
  EXPECT_EQ(desk.data.class_sep, 6.0);
}

TEST(DeskTraining, ConvergesWithDecreasingWindowedLoss) {
  RunConfig cfg = load_run_config(fs::path(RELNOV_CONFIG_DIR) / "desk.ini");
  const auto data = generate_synthetic(cfg.data);
  RelationalModel<float> model(cfg.resolved_model(data.support.dim()));
  const auto losses = train(model, data.support, cfg.train).losses;
  ASSERT_GE(losses.size(), 200u);

  std::vector<double> windows;
  for (std::size_t start = 0; start + 100 <= losses.size(); start += 100) {
    double mean = 0;
    for (std::size_t i = start; i < start + 100; ++i) mean += losses[i] / 100;
    windows.push_back(mean);
  }
  EXPECT_LT(windows.back(), 0.05);
  // Below ~1e-3 the windowed mean is dominated by minibatch noise, so only the
  // descent phase is checked.
  std::size_t compared = 0, decreasing = 0;
  for (std::size_t w = 1; w < windows.size() && windows[w - 1] > 1e-3; ++w) {
    ++compared;
    if (windows[w] < windows[w - 1]) ++decreasing;
  }
  ASSERT_GT(compared, 0u);
  EXPECT_GE(10 * decreasing, 9 * compared) << decreasing << "/" << compared;
}

TEST_F(CliTest, GenDataWritesReadableFiles) {
  gen_data(path("d"));
  const auto support = read_embeddings(fs::path(path("d/support.rsnd")));
  const auto test = read_embeddings(fs::path(path("d/test.rsnd")));
  EXPECT_EQ(support.size(), 100u);
  EXPECT_EQ(test.size(), 200u);
  EXPECT_NE(out_.str().find("support.rsnd"), std::string::npos);
  EXPECT_NE(out_.str().find("100 samples"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("d/resolved_config.ini")));
}

TEST_F(CliTest, GenDataSameSeedSameBytes) {
  gen_data(path("a"));
  gen_data(path("b"));
  EXPECT_EQ(slurp(path("a/support.rsnd")), slurp(path("b/support.rsnd")));
  EXPECT_EQ(slurp(path("a/test.rsnd")), slurp(path("b/test.rsnd")));
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"gen-data", "--bogus"}), 2);
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"gen-data", "--set", "data.class_sep=0", "--out", path("x")}), 2);
  EXPECT_NE(err_.str().find("class_sep"), std::string::npos) << err_.str();
  EXPECT_EQ(run({"gen-data", "--set", "data.nope=1", "--out", path("x")}), 2);
  EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(CliTest, TrainWritesCheckpointAndLoss) {
  gen_data(path("d"));
  ASSERT_EQ(run({"train", "--config", tiny_config(), "--support", path("d/support.rsnd"), "--out", path("t")}), 0)
      << err_.str();
  const auto model = load_checkpoint(fs::path(path("t/model.ckpt")));
  std::ostringstream resaved;
  save_checkpoint(model, resaved);
  EXPECT_EQ(resaved.str(), slurp(path("t/model.ckpt")));
  EXPECT_TRUE(slurp(path("t/loss.csv")).starts_with("iter,loss,lr\n"));
  EXPECT_TRUE(fs::exists(path("t/resolved_config.ini")));
  EXPECT_EQ(model.config().head_mode, HeadMode::regression_sigmoid);
}

TEST_F(CliTest, TrainLossAndAggregationFlags) {
  gen_data(path("d"));
  ASSERT_EQ(run({"train", "--config", tiny_config(), "--support", path("d/support.rsnd"), "--loss", "binary_ce",
                 "--aggregation", "concat", "--out", path("t")}),
            0)
      << err_.str();
  const auto model = load_checkpoint(fs::path(path("t/model.ckpt")));
  EXPECT_EQ(model.config().head_mode, HeadMode::classification_2way);
  EXPECT_EQ(model.config().aggregation, Aggregation::concat);
}

TEST_F(CliTest, TrainNumericFailureExitsThree) {
  gen_data(path("d"));
  EXPECT_EQ(run({"train", "--config", tiny_config(), "--support", path("d/support.rsnd"), "--set",
                 "train.base_lr=1e30", "--set", "train.warmup_iters=1", "--out", path("t")}),
            3)
      << err_.str();
}

TEST_F(CliTest, EvalRelationalAndBaselines) {
  gen_data(path("d"));
  ASSERT_EQ(run({"train", "--config", tiny_config(), "--support", path("d/support.rsnd"), "--out", path("t")}), 0);
  ASSERT_EQ(run({"eval", "--checkpoint", path("t/model.ckpt"), "--support", path("d/support.rsnd"), "--test",
                 path("d/test.rsnd"), "--out", path("e")}),
            0)
      << err_.str();
  const auto j = nlohmann::json::parse(slurp(path("e/metrics.json")));
  ASSERT_TRUE(j.contains("auroc"));
  EXPECT_GE(j["auroc"].get<double>(), 0.0);
  EXPECT_LE(j["auroc"].get<double>(), 1.0);
  EXPECT_TRUE(slurp(path("e/roc.csv")).starts_with("fpr,tpr\n"));
  EXPECT_EQ(read_scores_csv(fs::path(path("e/scores.csv"))).size(), 200u);

  EXPECT_EQ(run({"eval", "--metric", "cosine", "--support", path("d/support.rsnd"), "--test", path("d/test.rsnd"),
                 "--out", path("c")}),
            0)
      << err_.str();
  EXPECT_EQ(run({"eval", "--support", path("d/support.rsnd"), "--test", path("d/test.rsnd"), "--out", path("r")}), 2);
}

TEST_F(CliTest, EvalErrorsExitTwo) {
  gen_data(path("d"));
  EXPECT_EQ(run({"eval", "--metric", "cosine", "--support", path("d/support.rsnd"), "--test", path("missing.rsnd"),
                 "--out", path("e")}),
            2);
  // A checkpoint built for a different input width.
  RelationalModel<float> wrong(ModelConfig{.input_dim = 5, .feature_dim = 8, .model_dim = 8, .num_blocks = 1,
                                           .num_heads = 2, .mlp_ratio = 2});
  save_checkpoint(wrong, fs::path(path("wrong.ckpt")));
  EXPECT_EQ(run({"eval", "--checkpoint", path("wrong.ckpt"), "--support", path("d/support.rsnd"), "--test",
                 path("d/test.rsnd"), "--out", path("e")}),
            2);
  std::ofstream(path("garbage.rsnd")) << "not an embedding file";
  EXPECT_EQ(run({"eval", "--metric", "cosine", "--support", path("d/support.rsnd"), "--test", path("garbage.rsnd"),
                 "--out", path("e")}),
            2);
  EXPECT_NE(err_.str().find("offset"), std::string::npos) << err_.str();
}

TEST_F(CliTest, EnsembleContract) {
  gen_data(path("d"));
  for (const char* metric : {"cosine", "inv_euclidean"}) {
    ASSERT_EQ(run({"eval", "--metric", metric, "--support", path("d/support.rsnd"), "--test", path("d/test.rsnd"),
                   "--out", path(metric)}),
              0);
  }
  const std::string a = path("cosine/scores.csv"), b = path("inv_euclidean/scores.csv");
  ASSERT_EQ(run({"ensemble", "--a", a, "--b", b, "--out", path("ab")}), 0) << err_.str();
  ASSERT_EQ(run({"ensemble", "--a", b, "--b", a, "--out", path("ba")}), 0);
  EXPECT_EQ(slurp(path("ab/scores.csv")), slurp(path("ba/scores.csv")));
  EXPECT_EQ(slurp(path("ab/metrics.json")), slurp(path("ba/metrics.json")));

  ASSERT_EQ(run({"ensemble", "--a", a, "--b", a, "--out", path("aa")}), 0);
  const auto self = nlohmann::json::parse(slurp(path("aa/metrics.json")));
  const auto base = nlohmann::json::parse(slurp(path("cosine/metrics.json")));
  EXPECT_EQ(self["auroc"], base["auroc"]);
  EXPECT_EQ(self["fpr95"], base["fpr95"]);
  EXPECT_TRUE(self["acc"].is_null());

  ASSERT_EQ(run({"ensemble", "--a", a, "--b", a, "--labels", path("d/test.rsnd"), "--out", path("al")}), 0)
      << err_.str();
  const auto labeled = nlohmann::json::parse(slurp(path("al/metrics.json")));
  EXPECT_EQ(labeled["acc"], base["acc"]);

  auto shorter = read_scores_csv(fs::path(a));
  for (auto* col : {&shorter.sample_ids, &shorter.pred_class}) col->pop_back();
  shorter.scores.pop_back();
  shorter.is_known.pop_back();
  write_scores_csv(shorter, fs::path(path("short.csv")));
  EXPECT_EQ(run({"ensemble", "--a", a, "--b", path("short.csv"), "--out", path("bad")}), 2);
}

TEST_F(CliTest, ThreadsFromEnvironment) {
  gen_data(path("d"));
  setenv("RELNOV_THREADS", "3", 1);
  ASSERT_EQ(run({"eval", "--metric", "cosine", "--support", path("d/support.rsnd"), "--test", path("d/test.rsnd"),
                 "--out", path("e")}),
            0);
  EXPECT_NE(slurp(path("e/resolved_config.ini")).find("threads = 3"), std::string::npos);
  setenv("RELNOV_THREADS", "zero", 1);
  EXPECT_EQ(run({"eval", "--metric", "cosine", "--support", path("d/support.rsnd"), "--test", path("d/test.rsnd"),
                 "--out", path("e")}),
            2);
  unsetenv("RELNOV_THREADS");
}

TEST_F(CliTest, BenchTableShapeAndAveraging) {
  const std::string cfg = tiny_config();
  ASSERT_EQ(run({"bench", "--config", cfg, "--set", "train.iterations=5", "--set", "data.samples_per_class=10",
                 "--out", path("b1")}),
            0)
      << err_.str();
  ASSERT_EQ(run({"bench", "--config", cfg, "--set", "train.iterations=5", "--set", "data.samples_per_class=10",
                 "--out", path("b2")}),
            0);
  EXPECT_EQ(slurp(path("b1/bench.csv")), slurp(path("b2/bench.csv")));
  const std::string md = slurp(path("b1/bench.md"));
  for (const char* s : {"relational", "inv_euclidean", "cosine", "intra", "single_source", "multi_source"}) {
    EXPECT_NE(md.find(s), std::string::npos) << s;
  }

  // Every mean row equals the mean of its three per-seed rows.
  std::ifstream runs(path("b1/bench_runs.csv")), means(path("b1/bench.csv"));
  std::string line;
  std::map<std::string, std::vector<double>> per_seed;
  std::getline(runs, line);
  while (std::getline(runs, line)) {
    std::stringstream ss(line);
    std::string setting, method, seed, auroc;
    std::getline(ss, setting, ',');
    std::getline(ss, method, ',');
    std::getline(ss, seed, ',');
    std::getline(ss, auroc, ',');
    per_seed[setting + "/" + method].push_back(std::stod(auroc));
  }
  std::getline(means, line);
  int rows = 0;
  while (std::getline(means, line)) {
    std::stringstream ss(line);
    std::string setting, method, seed, auroc;
    std::getline(ss, setting, ',');
    std::getline(ss, method, ',');
    std::getline(ss, seed, ',');
    std::getline(ss, auroc, ',');
    const auto& values = per_seed[setting + "/" + method];
    ASSERT_EQ(values.size(), 3u);
    EXPECT_NEAR(std::stod(auroc), (values[0] + values[1] + values[2]) / 3.0, 1e-12);
    ++rows;
  }
  EXPECT_EQ(rows, 9);
}

TEST_F(CliTest, AblateRowsAndOrderFlags) {
  ASSERT_EQ(run({"ablate", "--config", tiny_config(), "--set", "train.iterations=5", "--out", path("a")}), 0)
      << err_.str();
  const std::string csv = slurp(path("a/ablation.csv"));
  for (const char* agg : {"transformer", "max", "sum", "concat"}) {
    for (const char* loss : {"mse", "binary_ce"}) {
      EXPECT_NE(csv.find(std::string("\n") + agg + "," + loss + ","), std::string::npos) << agg << " " << loss;
    }
  }
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    const bool concat = line.starts_with("concat,");
    // A 5-iteration concat model need not clear the 99/100 bar, but it is never invariant.
    if (concat) {
      EXPECT_FALSE(line.ends_with(",invariant")) << line;
    } else {
      EXPECT_TRUE(line.ends_with(",invariant")) << line;
    }
  }
}

#include "relnov/cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "relnov/errors.hpp"

namespace relnov {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  const std::string t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("config: bad value '" + text + "' for " + key);
  }
  return value;
}

std::vector<std::size_t> parse_index_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : split(text, ',')) {
    if (!item.empty()) out.push_back(parse_value<std::size_t>(key, item));
  }
  return out;
}

// "rotation_deg,shift,scale; ..." with shift the length of a translation along
// the normalized all-ones direction.
std::vector<DomainTransform> parse_domains(const std::string& text, std::size_t dims) {
  std::vector<DomainTransform> out;
  for (const auto& entry : split(text, ';')) {
    if (entry.empty()) continue;
    const auto parts = split(entry, ',');
    if (parts.size() != 3) throw ConfigError("config: domain '" + entry + "' needs rotation,shift,scale");
    DomainTransform t;
    t.rotation_deg = parse_value<double>("data.domains", parts[0]);
    const double shift = parse_value<double>("data.domains", parts[1]);
    if (shift != 0.0) t.translation = uniform_translation(dims, shift);
    t.scale = parse_value<double>("data.domains", parts[2]);
    out.push_back(std::move(t));
  }
  return out;
}

double translation_length(const DomainTransform& t) {
  double sq = 0;
  for (double v : t.translation) sq += v * v;
  return std::sqrt(sq);
}

std::string format_domains(const std::vector<DomainTransform>& domains) {
  std::string out;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (i) out += "; ";
    out += fmt::format("{},{},{}", domains[i].rotation_deg, translation_length(domains[i]), domains[i].scale);
  }
  return out;
}

template <typename Seq>
std::string join(const Seq& values, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += fmt::format("{}", values[i]);
  }
  return out;
}

}  // namespace

HeadMode RunConfig::resolved_head_mode() const {
  if (head_mode) return *head_mode;
  return train.loss == LossKind::binary_ce ? HeadMode::classification_2way : HeadMode::regression_sigmoid;
}

ModelConfig RunConfig::resolved_model(std::size_t input_dim) const {
  ModelConfig out = model;
  out.input_dim = input_dim;
  out.head_mode = resolved_head_mode();
  return out;
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  const std::string full = section + "." + key;
  if (section == "model") {
    if (key == "feature_dim") model.feature_dim = parse_value<std::size_t>(full, value);
    else if (key == "model_dim") model.model_dim = parse_value<std::size_t>(full, value);
    else if (key == "num_blocks") model.num_blocks = parse_value<std::size_t>(full, value);
    else if (key == "num_heads") model.num_heads = parse_value<std::size_t>(full, value);
    else if (key == "mlp_ratio") model.mlp_ratio = parse_value<std::size_t>(full, value);
    else if (key == "head_mode") {
      const std::string v = trim(value);
      if (v == "auto") head_mode.reset();
      else head_mode = parse_head_mode(v);
    } else if (key == "aggregation") model.aggregation = parse_aggregation(trim(value));
    else if (key == "seed") model.seed = parse_value<std::uint64_t>(full, value);
    else throw ConfigError("config: unknown key " + full);
  } else if (section == "train") {
    if (key == "iterations") train.iterations = parse_value<std::size_t>(full, value);
    else if (key == "batch_size") train.batch_size = parse_value<std::size_t>(full, value);
    else if (key == "base_lr") train.base_lr = parse_value<double>(full, value);
    else if (key == "warmup_iters") train.warmup_iters = parse_value<std::size_t>(full, value);
    else if (key == "optimizer") train.optimizer = parse_optimizer(trim(value));
    else if (key == "momentum") train.momentum = parse_value<double>(full, value);
    else if (key == "weight_decay") train.weight_decay = parse_value<double>(full, value);
    else if (key == "trust_coefficient") train.trust_coefficient = parse_value<double>(full, value);
    else if (key == "loss") train.loss = parse_loss(trim(value));
    else if (key == "seed") train.seed = parse_value<std::uint64_t>(full, value);
    else if (key == "log_every") train.log_every = parse_value<std::size_t>(full, value);
    else throw ConfigError("config: unknown key " + full);
  } else if (section == "data") {
    if (key == "dims") {
      const std::size_t dims = parse_value<std::size_t>(full, value);
      // Re-derive uniform translations for the new dimensionality.
      for (auto& t : data.domains) {
        if (!t.translation.empty()) t.translation = uniform_translation(dims, translation_length(t));
      }
      data.dims = dims;
    } else if (key == "known_classes") data.known_classes = parse_value<std::size_t>(full, value);
    else if (key == "unknown_classes") data.unknown_classes = parse_value<std::size_t>(full, value);
    else if (key == "samples_per_class") data.samples_per_class = parse_value<std::size_t>(full, value);
    else if (key == "class_sep") data.class_sep = parse_value<double>(full, value);
    else if (key == "domains") data.domains = parse_domains(value, data.dims);
    else if (key == "source_domains") data.source_domains = parse_index_list(full, value);
    else if (key == "target_domain") data.target_domain = parse_value<std::size_t>(full, value);
    else if (key == "partial_overlap") {
      data.partial_overlap.clear();
      for (const auto& group : split(value, ';')) {
        if (group.empty()) continue;
        std::vector<std::int64_t> ids;
        for (std::size_t id : parse_index_list(full, group)) ids.push_back(static_cast<std::int64_t>(id));
        data.partial_overlap.push_back(std::move(ids));
      }
    } else if (key == "seed") data.seed = parse_value<std::uint64_t>(full, value);
    else throw ConfigError("config: unknown key " + full);
  } else if (section == "run") {
    if (key == "threads") threads = parse_value<std::size_t>(full, value);
    else if (key == "bench_seeds") bench_seeds = parse_value<std::size_t>(full, value);
    else throw ConfigError("config: unknown key " + full);
  } else {
    throw ConfigError("config: unknown section [" + section + "]");
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  set(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
      assignment.substr(eq + 1));
}

void RunConfig::set_seed(std::uint64_t seed) {
  model.seed = seed;
  train.seed = seed;
  data.seed = seed;
}

void RunConfig::validate() const {
  resolved_model(std::max<std::size_t>(data.dims, 1)).validate();
  train.validate();
  data.validate();
  if (threads < 1) throw ConfigError("run.threads must be at least 1");
  if (bench_seeds < 1) throw ConfigError("run.bench_seeds must be at least 1");
}

RunConfig parse_run_config(std::istream& in) {
  RunConfig cfg;
  std::string section;
  std::string line;
  std::optional<std::string> domains;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    if (section.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": key outside a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section == "data" && key == "domains") {
      domains = value;
      continue;
    }
    cfg.set(section, key, value);
  }
  if (domains) cfg.set("data", "domains", *domains);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse_run_config(in);
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  out += "[model]\n";
  out += fmt::format("feature_dim = {}\n", cfg.model.feature_dim);
  out += fmt::format("model_dim = {}\n", cfg.model.model_dim);
  out += fmt::format("num_blocks = {}\n", cfg.model.num_blocks);
  out += fmt::format("num_heads = {}\n", cfg.model.num_heads);
  out += fmt::format("mlp_ratio = {}\n", cfg.model.mlp_ratio);
  out += fmt::format("head_mode = {}\n", cfg.head_mode ? to_string(*cfg.head_mode) : "auto");
  out += fmt::format("aggregation = {}\n", to_string(cfg.model.aggregation));
  out += fmt::format("seed = {}\n", cfg.model.seed);
  out += "\n[train]\n";
  out += fmt::format("iterations = {}\n", cfg.train.iterations);
  out += fmt::format("batch_size = {}\n", cfg.train.batch_size);
  out += fmt::format("base_lr = {}\n", cfg.train.base_lr);
  out += fmt::format("warmup_iters = {}\n", cfg.train.warmup_iters);
  out += fmt::format("optimizer = {}\n", to_string(cfg.train.optimizer));
  out += fmt::format("momentum = {}\n", cfg.train.momentum);
  out += fmt::format("weight_decay = {}\n", cfg.train.weight_decay);
  out += fmt::format("trust_coefficient = {}\n", cfg.train.trust_coefficient);
  out += fmt::format("loss = {}\n", to_string(cfg.train.loss));
  out += fmt::format("seed = {}\n", cfg.train.seed);
  out += fmt::format("log_every = {}\n", cfg.train.log_every);
  out += "\n[data]\n";
  out += fmt::format("dims = {}\n", cfg.data.dims);
  out += fmt::format("known_classes = {}\n", cfg.data.known_classes);
  out += fmt::format("unknown_classes = {}\n", cfg.data.unknown_classes);
  out += fmt::format("samples_per_class = {}\n", cfg.data.samples_per_class);
  out += fmt::format("class_sep = {}\n", cfg.data.class_sep);
  out += fmt::format("domains = {}\n", format_domains(cfg.data.domains));
  out += fmt::format("source_domains = {}\n", join(cfg.data.source_domains, ","));
  out += fmt::format("target_domain = {}\n", cfg.data.target_domain);
  std::vector<std::string> groups;
  for (const auto& g : cfg.data.partial_overlap) groups.push_back(join(g, ","));
  out += fmt::format("partial_overlap = {}\n", join(groups, "; "));
  out += fmt::format("seed = {}\n", cfg.data.seed);
  out += "\n[run]\n";
  out += fmt::format("threads = {}\n", cfg.threads);
  out += fmt::format("bench_seeds = {}\n", cfg.bench_seeds);
  return out;
}

RunConfig paper_scale_config() {
  RunConfig cfg;
  cfg.train.iterations = 13000;
  cfg.train.batch_size = 4096;
  cfg.train.base_lr = 0.008;
  cfg.train.warmup_iters = 500;
  cfg.train.optimizer = OptimizerKind::lars;
  cfg.train.momentum = 0.9;
  cfg.train.weight_decay = 5e-5;
  return cfg;
}

}  // namespace relnov

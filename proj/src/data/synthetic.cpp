#include "relnov/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <string>

namespace relnov {
namespace {

std::vector<std::vector<double>> means_from_rng(const SyntheticSpec& spec, std::mt19937_64& rng) {
  const std::size_t classes = spec.known_classes + spec.unknown_classes;
  const std::size_t d = spec.dims;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> dirs(classes, std::vector<double>(d));
  for (auto& v : dirs) {
    for (auto& x : v) x = gauss(rng);
  }

  if (classes <= d) {
    // Gram-Schmidt; mutually orthonormal e_c at distance sqrt(2) apart.
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t p = 0; p < c; ++p) {
        double dot = 0;
        for (std::size_t k = 0; k < d; ++k) dot += dirs[c][k] * dirs[p][k];
        for (std::size_t k = 0; k < d; ++k) dirs[c][k] -= dot * dirs[p][k];
      }
      double norm = 0;
      for (double x : dirs[c]) norm += x * x;
      norm = std::sqrt(norm);
      for (auto& x : dirs[c]) x /= norm;
    }
    const double radius = spec.class_sep / std::numbers::sqrt2;
    for (auto& v : dirs) {
      for (auto& x : v) x *= radius;
    }
    return dirs;
  }

  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < classes; ++a) {
    for (std::size_t b = a + 1; b < classes; ++b) {
      double dist = 0;
      for (std::size_t k = 0; k < d; ++k) dist += (dirs[a][k] - dirs[b][k]) * (dirs[a][k] - dirs[b][k]);
      min_gap = std::min(min_gap, std::sqrt(dist));
    }
  }
  if (!(min_gap > 0)) throw DataError("synthetic: degenerate class directions");
  const double factor = spec.class_sep / min_gap;
  for (auto& v : dirs) {
    for (auto& x : v) x *= factor;
  }
  return dirs;
}

void apply_transform(const DomainTransform& t, std::vector<double>& x) {
  if (t.rotation_deg != 0.0) {
    const double rad = t.rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    for (std::size_t k = 0; k + 1 < x.size(); k += 2) {
      const double a = x[k], b = x[k + 1];
      x[k] = c * a - s * b;
      x[k + 1] = s * a + c * b;
    }
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] *= t.scale;
    if (!t.translation.empty()) x[k] += t.translation[k];
  }
}

void append_samples(LabeledDataset& ds, const std::vector<double>& mean, std::int64_t label,
                    std::size_t domain, const DomainTransform& transform, std::size_t count,
                    std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(mean.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = mean[k] + gauss(rng);
    apply_transform(transform, x);
    for (double v : x) ds.features.storage().push_back(static_cast<float>(v));
    ds.labels.push_back(label);
    ds.domain_ids.push_back(static_cast<std::int64_t>(domain));
  }
}

LabeledDataset empty_dataset(std::string name) {
  LabeledDataset ds;
  ds.name = std::move(name);
  return ds;
}

void finalize(LabeledDataset& ds, std::size_t dims) {
  std::vector<float> data = std::move(ds.features.storage());
  const std::size_t rows = data.size() / dims;
  ds.features = Tensor<float>({rows, dims}, std::move(data));
}

}  // namespace

bool DomainTransform::is_identity() const {
  const bool no_shift = std::all_of(translation.begin(), translation.end(), [](double v) { return v == 0.0; });
  return rotation_deg == 0.0 && scale == 1.0 && no_shift;
}

std::vector<double> uniform_translation(std::size_t dims, double magnitude) {
  if (dims == 0) return {};
  return std::vector<double>(dims, magnitude / std::sqrt(static_cast<double>(dims)));
}

void SyntheticSpec::validate() const {
  if (dims == 0) throw ConfigError("synthetic: dims must be positive");
  if (!(class_sep > 0.0)) throw ConfigError("synthetic: class_sep must be positive");
  if (known_classes < 1) throw ConfigError("synthetic: need at least one known class");
  if (samples_per_class < 1) throw ConfigError("synthetic: samples_per_class must be positive");
  if (domains.empty()) throw ConfigError("synthetic: at least one domain is required");
  if (source_domains.empty()) throw ConfigError("synthetic: at least one source domain is required");
  for (std::size_t s : source_domains) {
    if (s >= domains.size()) throw ConfigError("synthetic: source domain index out of range");
  }
  if (target_domain >= domains.size()) throw ConfigError("synthetic: target domain index out of range");
  for (const auto& t : domains) {
    if (!t.translation.empty() && t.translation.size() != dims) {
      throw ConfigError("synthetic: translation length must equal dims");
    }
    if (!(t.scale > 0.0)) throw ConfigError("synthetic: domain scale must be positive");
  }
  if (!partial_overlap.empty()) {
    if (partial_overlap.size() != source_domains.size()) {
      throw ConfigError("synthetic: partial_overlap needs one class subset per source domain");
    }
    std::set<std::int64_t> covered;
    for (const auto& subset : partial_overlap) {
      for (std::int64_t c : subset) {
        if (c < 0 || static_cast<std::size_t>(c) >= known_classes) {
          throw ConfigError("synthetic: partial_overlap names a class that is not known");
        }
        covered.insert(c);
      }
    }
    if (covered.size() != known_classes) {
      throw ConfigError("synthetic: every known class must appear in at least one source");
    }
  }
}

std::vector<std::vector<double>> class_means(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  return means_from_rng(spec, rng);
}

SyntheticBenchmark generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const auto means = means_from_rng(spec, rng);

  SyntheticBenchmark out{empty_dataset("support"), empty_dataset("test")};
  for (std::size_t s = 0; s < spec.source_domains.size(); ++s) {
    const std::size_t domain = spec.source_domains[s];
    for (std::size_t c = 0; c < spec.known_classes; ++c) {
      if (!spec.partial_overlap.empty()) {
        const auto& subset = spec.partial_overlap[s];
        if (std::find(subset.begin(), subset.end(), static_cast<std::int64_t>(c)) == subset.end()) continue;
      }
      append_samples(out.support, means[c], static_cast<std::int64_t>(c), domain,
                     spec.domains[domain], spec.samples_per_class, rng);
    }
  }
  const std::size_t total = spec.known_classes + spec.unknown_classes;
  for (std::size_t c = 0; c < total; ++c) {
    append_samples(out.test, means[c], static_cast<std::int64_t>(c), spec.target_domain,
                   spec.domains[spec.target_domain], spec.samples_per_class, rng);
  }
  finalize(out.support, spec.dims);
  finalize(out.test, spec.dims);
  return out;
}

}  // namespace relnov

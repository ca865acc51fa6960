#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "relnov/data/dataset.hpp"

namespace relnov {

// x -> scale * R(rotation) * x + translation. The rotation turns every
// coordinate plane (0,1), (2,3), ... by the same angle; an odd trailing
// coordinate is left in place.
struct DomainTransform {
  double rotation_deg = 0.0;
  std::vector<double> translation;  // empty means zero
  double scale = 1.0;

  bool is_identity() const;
};

// Translation of length `magnitude` along the normalized all-ones direction.
std::vector<double> uniform_translation(std::size_t dims, double magnitude);

struct SyntheticSpec {
  std::size_t dims = 16;
  std::size_t known_classes = 5;
  std::size_t unknown_classes = 5;
  std::size_t samples_per_class = 100;
  double class_sep = 6.0;  // in units of the unit cluster std
  std::vector<DomainTransform> domains{DomainTransform{}};
  std::vector<std::size_t> source_domains{0};
  std::size_t target_domain = 0;
  // Optional per-source subsets of known class ids; empty means every source
  // holds every known class.
  std::vector<std::vector<std::int64_t>> partial_overlap;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticBenchmark {
  LabeledDataset support;  // known classes, source domains
  LabeledDataset test;     // known + unknown classes, target domain
};

// Class means, known classes first: an orthogonal frame scaled so every pair
// of means is exactly class_sep apart when there are no more classes than
// dimensions, otherwise random directions rescaled to the same minimum gap.
std::vector<std::vector<double>> class_means(const SyntheticSpec& spec);

SyntheticBenchmark generate_synthetic(const SyntheticSpec& spec);

}  // namespace relnov

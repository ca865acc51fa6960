#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace relnov {

// Per-test-sample normality scores with ground truth. `true_class` is empty
// when class labels are unavailable (e.g. scores loaded from a CSV file).
struct ScoreSet {
  std::vector<std::int64_t> sample_ids;
  std::vector<double> scores;
  std::vector<std::uint8_t> is_known;
  std::vector<std::int64_t> pred_class;
  std::vector<std::int64_t> true_class;

  std::size_t size() const { return scores.size(); }
  std::size_t n_known() const;
  std::size_t n_unknown() const { return size() - n_known(); }

  // Throws DataError on ragged columns or scores outside [0, 1].
  void validate() const;
};

// CSV with header sample_id,score,is_known,pred_class.
void write_scores_csv(const ScoreSet& scores, std::ostream& out);
void write_scores_csv(const ScoreSet& scores, const std::filesystem::path& path);
ScoreSet read_scores_csv(std::istream& in);
ScoreSet read_scores_csv(const std::filesystem::path& path);

}  // namespace relnov

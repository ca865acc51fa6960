#include "relnov/evaluation/scores.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "relnov/errors.hpp"

namespace relnov {
namespace {

template <typename T>
T parse_cell(const std::string& text, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("scores csv line " + std::to_string(line_no) + ": cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace

std::size_t ScoreSet::n_known() const {
  std::size_t count = 0;
  for (auto k : is_known) count += k ? 1 : 0;
  return count;
}

void ScoreSet::validate() const {
  const std::size_t n = scores.size();
  if (is_known.size() != n || pred_class.size() != n || sample_ids.size() != n ||
      (!true_class.empty() && true_class.size() != n)) {
    throw DataError("score set: column lengths disagree");
  }
  for (double s : scores) {
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
      throw DataError("score set: score " + fmt::format("{}", s) + " outside [0, 1]");
    }
  }
}

void write_scores_csv(const ScoreSet& scores, std::ostream& out) {
  scores.validate();
  out << "sample_id,score,is_known,pred_class\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << fmt::format("{},{},{},{}\n", scores.sample_ids[i], scores.scores[i],
                       static_cast<int>(scores.is_known[i]), scores.pred_class[i]);
  }
}

void write_scores_csv(const ScoreSet& scores, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("scores: cannot open " + path.string() + " for writing");
  write_scores_csv(scores, out);
}

ScoreSet read_scores_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "sample_id,score,is_known,pred_class") {
    throw DataError("scores csv: expected header sample_id,score,is_known,pred_class");
  }
  ScoreSet out;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, score, known, pred;
    if (!std::getline(row, id, ',') || !std::getline(row, score, ',') ||
        !std::getline(row, known, ',') || !std::getline(row, pred) ) {
      throw DataError("scores csv line " + std::to_string(line_no) + ": expected 4 cells");
    }
    out.sample_ids.push_back(parse_cell<std::int64_t>(id, line_no));
    out.scores.push_back(parse_cell<double>(score, line_no));
    const int flag = parse_cell<int>(known, line_no);
    if (flag != 0 && flag != 1) throw DataError("scores csv line " + std::to_string(line_no) + ": is_known must be 0 or 1");
    out.is_known.push_back(static_cast<std::uint8_t>(flag));
    out.pred_class.push_back(parse_cell<std::int64_t>(pred, line_no));
  }
  out.validate();
  return out;
}

ScoreSet read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("scores: cannot open " + path.string());
  return read_scores_csv(in);
}

}  // namespace relnov

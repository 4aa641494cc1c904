#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace leitnerq {

/// Grade scale of a log file.
enum class Dialect {
  kMnemosyne,       // grades 0-5, recall iff grade >= 2
  kSelfAssessment,  // grades 1-4, pass iff grade >= 3
};

enum class TimeUnit { kDays, kSeconds };

Dialect parse_dialect(std::string_view name);
TimeUnit parse_time_unit(std::string_view name);
std::string_view to_string(Dialect d);
std::string_view to_string(TimeUnit u);

/// Seconds in one `unit`.
double seconds_per(TimeUnit unit);

/// Raised for malformed input; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ReviewLog {
  std::string user_id;
  std::string item_id;
  double timestamp = 0.0;  // seconds since epoch
  int grade = 0;
  bool outcome = false;
};

struct LogSet {
  std::vector<ReviewLog> logs;
  Dialect dialect = Dialect::kMnemosyne;
  TimeUnit time_unit = TimeUnit::kDays;
};

/// One review of a user-item pair. `delay` is in the LogSet's time unit and
/// is empty for the first exposure. `q` is the Leitner deck the item sat in
/// when reviewed, before this outcome was applied.
struct Interaction {
  double timestamp = 0.0;
  bool outcome = false;
  std::optional<double> delay;
  int n = 1;
  int q = 1;
};

struct InteractionHistory {
  std::string user_id;
  std::string item_id;
  std::vector<Interaction> interactions;
};

/// Maps a grade to a binary recall outcome. Throws std::out_of_range for a
/// grade outside the dialect's scale.
bool binarize_grade(int grade, Dialect dialect);

/// Parses `user_id,item_id,timestamp,grade` CSV. LF and CRLF line endings
/// are accepted; rows keep file order.
LogSet parse_logs(std::istream& in, Dialect dialect, TimeUnit unit);

/// Drops users and items with fewer than `k` interactions, repeating until
/// no further row is removed.
LogSet filter_min_interactions(const LogSet& set, int k);

/// Groups logs into per-(user, item) histories ordered by timestamp, and
/// annotates each interaction with its delay, review count and deck.
/// Histories are sorted by (user_id, item_id).
std::vector<InteractionHistory> build_histories(const LogSet& set);

struct LogSummary {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double recall_rate = 0.0;
};

LogSummary summarize(const LogSet& set);

nlohmann::json histories_to_json(std::span<const InteractionHistory> histories,
                                 TimeUnit unit);

struct HistorySet {
  std::vector<InteractionHistory> histories;
  TimeUnit time_unit = TimeUnit::kDays;
};

HistorySet histories_from_json(const nlohmann::json& j);

}  // namespace leitnerq

#include "leitnerq/log_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>
#include <utility>

#include <nlohmann/json.hpp>

namespace leitnerq {

namespace {

constexpr std::string_view kHeader = "user_id,item_id,timestamp,grade";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

}  // namespace

ParseError::ParseError(const std::string& what, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

Dialect parse_dialect(std::string_view name) {
  if (name == "mnemosyne") return Dialect::kMnemosyne;
  if (name == "self" || name == "self_assessment") return Dialect::kSelfAssessment;
  throw std::invalid_argument("unknown dialect '" + std::string(name) +
                              "' (expected mnemosyne or self)");
}

TimeUnit parse_time_unit(std::string_view name) {
  if (name == "days") return TimeUnit::kDays;
  if (name == "seconds") return TimeUnit::kSeconds;
  throw std::invalid_argument("unknown time unit '" + std::string(name) +
                              "' (expected days or seconds)");
}

std::string_view to_string(Dialect d) {
  return d == Dialect::kMnemosyne ? "mnemosyne" : "self";
}

std::string_view to_string(TimeUnit u) {
  return u == TimeUnit::kDays ? "days" : "seconds";
}

double seconds_per(TimeUnit unit) {
  return unit == TimeUnit::kDays ? 86400.0 : 1.0;
}

bool binarize_grade(int grade, Dialect dialect) {
  switch (dialect) {
    case Dialect::kMnemosyne:
      if (grade < 0 || grade > 5) throw std::out_of_range("grade out of range");
      return grade >= 2;
    case Dialect::kSelfAssessment:
      if (grade < 1 || grade > 4) throw std::out_of_range("grade out of range");
      return grade >= 3;
  }
  throw std::invalid_argument("unknown dialect");
}

LogSet parse_logs(std::istream& in, Dialect dialect, TimeUnit unit) {
  LogSet set;
  set.dialect = dialect;
  set.time_unit = unit;

  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  std::set<std::tuple<std::string, std::string, double>> seen;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      // Tolerate a UTF-8 byte-order mark.
      std::string_view header = line;
      if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
      if (header != kHeader) {
        throw ParseError("expected header '" + std::string(kHeader) + "'", line_no);
      }
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;

    const auto fields = split_fields(line);
    if (fields.size() != 4) {
      throw ParseError("expected 4 fields, got " + std::to_string(fields.size()), line_no);
    }
    ReviewLog log;
    log.user_id = std::string(fields[0]);
    log.item_id = std::string(fields[1]);
    if (log.user_id.empty() || log.item_id.empty()) {
      throw ParseError("empty user_id or item_id", line_no);
    }
    if (!parse_number(fields[2], log.timestamp) || !std::isfinite(log.timestamp) ||
        log.timestamp < 0.0) {
      throw ParseError("invalid timestamp '" + std::string(fields[2]) + "'", line_no);
    }
    if (!parse_number(fields[3], log.grade)) {
      throw ParseError("invalid grade '" + std::string(fields[3]) + "'", line_no);
    }
    try {
      log.outcome = binarize_grade(log.grade, dialect);
    } catch (const std::out_of_range& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!seen.emplace(log.user_id, log.item_id, log.timestamp).second) {
      throw ParseError("duplicate timestamp for user '" + log.user_id + "' item '" +
                           log.item_id + "'",
                       line_no);
    }
    set.logs.push_back(std::move(log));
  }
  if (!saw_header) throw ParseError("missing header", 0);
  return set;
}

LogSet filter_min_interactions(const LogSet& set, int k) {
  if (k < 0) throw std::invalid_argument("k must be non-negative");
  LogSet out{{}, set.dialect, set.time_unit};
  std::vector<bool> alive(set.logs.size(), true);
  const auto threshold = static_cast<std::size_t>(k);

  for (bool changed = true; changed;) {
    changed = false;
    std::unordered_map<std::string, std::size_t> user_count;
    std::unordered_map<std::string, std::size_t> item_count;
    for (std::size_t i = 0; i < set.logs.size(); ++i) {
      if (!alive[i]) continue;
      ++user_count[set.logs[i].user_id];
      ++item_count[set.logs[i].item_id];
    }
    for (std::size_t i = 0; i < set.logs.size(); ++i) {
      if (!alive[i]) continue;
      if (user_count[set.logs[i].user_id] < threshold ||
          item_count[set.logs[i].item_id] < threshold) {
        alive[i] = false;
        changed = true;
      }
    }
  }
  for (std::size_t i = 0; i < set.logs.size(); ++i) {
    if (alive[i]) out.logs.push_back(set.logs[i]);
  }
  return out;
}

std::vector<InteractionHistory> build_histories(const LogSet& set) {
  std::map<std::pair<std::string, std::string>, std::vector<const ReviewLog*>> groups;
  for (const auto& log : set.logs) groups[{log.user_id, log.item_id}].push_back(&log);

  const double scale = seconds_per(set.time_unit);
  std::vector<InteractionHistory> out;
  out.reserve(groups.size());
  for (auto& [key, logs] : groups) {
    std::stable_sort(logs.begin(), logs.end(), [](const ReviewLog* a, const ReviewLog* b) {
      return a->timestamp < b->timestamp;
    });
    InteractionHistory h{key.first, key.second, {}};
    h.interactions.reserve(logs.size());
    int q = 1;
    for (std::size_t i = 0; i < logs.size(); ++i) {
      Interaction x;
      x.timestamp = logs[i]->timestamp;
      x.outcome = logs[i]->outcome;
      x.n = static_cast<int>(i) + 1;
      x.q = q;
      if (i > 0) {
        const double dt = logs[i]->timestamp - logs[i - 1]->timestamp;
        if (!(dt > 0.0)) {
          throw std::invalid_argument("duplicate timestamp for user '" + key.first +
                                      "' item '" + key.second + "'");
        }
        x.delay = dt / scale;
      }
      q = x.outcome ? q + 1 : std::max(q - 1, 1);
      h.interactions.push_back(x);
    }
    out.push_back(std::move(h));
  }
  return out;
}

LogSummary summarize(const LogSet& set) {
  std::set<std::string_view> users;
  std::set<std::string_view> items;
  std::size_t recalled = 0;
  for (const auto& log : set.logs) {
    users.insert(log.user_id);
    items.insert(log.item_id);
    recalled += log.outcome ? 1 : 0;
  }
  LogSummary s;
  s.users = users.size();
  s.items = items.size();
  s.interactions = set.logs.size();
  s.recall_rate = set.logs.empty() ? 0.0
                                   : static_cast<double>(recalled) /
                                         static_cast<double>(set.logs.size());
  return s;
}

nlohmann::json histories_to_json(std::span<const InteractionHistory> histories,
                                 TimeUnit unit) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& h : histories) {
    nlohmann::json xs = nlohmann::json::array();
    for (const auto& x : h.interactions) {
      xs.push_back({{"timestamp", x.timestamp},
                    {"outcome", x.outcome},
                    {"d", x.delay ? nlohmann::json(*x.delay) : nlohmann::json(nullptr)},
                    {"n", x.n},
                    {"q", x.q}});
    }
    arr.push_back({{"user_id", h.user_id}, {"item_id", h.item_id}, {"interactions", xs}});
  }
  return {{"time_unit", to_string(unit)}, {"histories", arr}};
}

HistorySet histories_from_json(const nlohmann::json& j) {
  HistorySet out;
  out.time_unit = parse_time_unit(j.at("time_unit").get<std::string>());
  for (const auto& hj : j.at("histories")) {
    InteractionHistory h;
    h.user_id = hj.at("user_id").get<std::string>();
    h.item_id = hj.at("item_id").get<std::string>();
    for (const auto& xj : hj.at("interactions")) {
      Interaction x;
      x.timestamp = xj.at("timestamp").get<double>();
      x.outcome = xj.at("outcome").get<bool>();
      if (!xj.at("d").is_null()) x.delay = xj.at("d").get<double>();
      x.n = xj.at("n").get<int>();
      x.q = xj.at("q").get<int>();
      h.interactions.push_back(x);
    }
    out.histories.push_back(std::move(h));
  }
  return out;
}

}  // namespace leitnerq

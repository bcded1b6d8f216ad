#pragma once

// Electoral semantics: parties, rules, seat allocation, the value of one
// mandate, the shortfall to the next mandate and the resulting strike.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coalition/errors.hpp"

namespace coalition {

/// Configuration percentages carry at most four decimals.
inline constexpr double kDecimalScale = 1e4;

inline bool is_decimal4(double x) noexcept {
  const double scaled = x * kDecimalScale;
  return std::isfinite(scaled) && std::abs(scaled - std::round(scaled)) <= 1e-6;
}

/// Rounds to the nearest 1e-4 when `x` is within floating noise of that grid,
/// otherwise returns `x` unchanged.
inline double snap_decimal(double x) noexcept {
  return is_decimal4(x) ? std::round(x * kDecimalScale) / kDecimalScale : x;
}

struct PartyState {
  std::string name;
  double support0 = 0.0;    // percent of the electorate at signing
  double drift = 0.0;       // percentage points per unit time
  double volatility = 0.0;  // percentage points per sqrt(unit time)
};

struct ElectionRules {
  double threshold = 3.0;
  int seats = 81;
  double major_cap = 40.0;
};

struct PollEntry {
  std::string name;
  double support = 0.0;
};

/// Discretization settings as they appear in a scenario file. Unset fields
/// are derived by the solver (see `make_grid`).
struct GridSettings {
  std::optional<double> h1;
  double h2 = 0.05;
  std::optional<double> dt;
  std::string stencil = "aligned";  // "aligned" | "central"
};

struct HorizonSettings {
  double t_max_scan_limit = 1.0;
  int scan_points = 16;
};

struct CoalitionScenario {
  PartyState major;
  PartyState minor;
  ElectionRules rules;
  std::vector<PollEntry> full_poll;
  GridSettings grid;
  HorizonSettings horizon;

  // E, Y and the optional strike override as read from configuration.
  std::optional<double> expected_support_input;
  std::optional<double> mandate_value_input;
  std::optional<double> strike_override;

  // Derived by `finalize`.
  double expected_support = 0.0;
  double mandate_value = 0.0;
  double votes_needed = 0.0;
  double strike = 0.0;
};

struct SeatAllocation {
  std::vector<std::string> names;
  std::vector<int> seats;
  int total = 0;
};

/// Highest-averages allocation restricted to lists at or above the threshold.
/// `divisor(k)` is the divisor applied to a list that has already won `k`
/// seats. Ties go to the lower list index.
template <class Divisor>
SeatAllocation highest_averages(std::span<const double> supports, const ElectionRules& rules,
                                Divisor divisor) {
  if (rules.seats < 1) throw ConfigError("election_model", "rules.seats", "must be at least 1");
  SeatAllocation out;
  out.seats.assign(supports.size(), 0);
  out.names.resize(supports.size());
  for (std::size_t i = 0; i < supports.size(); ++i) {
    if (!(supports[i] >= 0.0)) throw ConfigError("election_model", "supports", "must be non-negative");
    out.names[i] = "list" + std::to_string(i + 1);
  }
  std::vector<std::size_t> qualifying;
  for (std::size_t i = 0; i < supports.size(); ++i)
    if (supports[i] >= rules.threshold && supports[i] > 0.0) qualifying.push_back(i);
  if (qualifying.empty()) throw ConfigError("election_model", "supports", "no qualifying list");

  for (int seat = 0; seat < rules.seats; ++seat) {
    std::size_t best = qualifying.front();
    for (std::size_t i : qualifying) {
      // supports[i]/d_i > supports[best]/d_best without dividing
      const double lhs = supports[i] * divisor(out.seats[best]);
      const double rhs = supports[best] * divisor(out.seats[i]);
      if (lhs > rhs) best = i;
    }
    ++out.seats[best];
  }
  out.total = rules.seats;
  return out;
}

inline SeatAllocation dhondt_allocate(std::span<const double> supports, const ElectionRules& rules) {
  return highest_averages(supports, rules, [](int won) { return static_cast<double>(won + 1); });
}

inline SeatAllocation dhondt_allocate(std::span<const PollEntry> poll, const ElectionRules& rules) {
  std::vector<double> supports;
  supports.reserve(poll.size());
  for (const auto& p : poll) supports.push_back(p.support);
  auto out = dhondt_allocate(std::span<const double>(supports), rules);
  for (std::size_t i = 0; i < poll.size(); ++i)
    if (!poll[i].name.empty()) out.names[i] = poll[i].name;
  return out;
}

/// Y: qualifying vote pool divided by the number of seats.
inline double mandate_value(std::span<const double> poll, const ElectionRules& rules) {
  if (rules.seats < 1) throw ConfigError("election_model", "rules.seats", "must be at least 1");
  double pool = 0.0;
  bool any = false;
  for (double s : poll) {
    if (s >= rules.threshold && s > 0.0) {
      pool += s;
      any = true;
    }
  }
  if (!any) throw ConfigError("election_model", "full_poll", "empty qualifying pool");
  return pool / rules.seats;
}

inline double mandate_value(std::span<const PollEntry> poll, const ElectionRules& rules) {
  std::vector<double> s;
  for (const auto& p : poll) s.push_back(p.support);
  return mandate_value(std::span<const double>(s), rules);
}

/// Multiplier k of the next whole mandate: the largest integer with
/// (k-1)*Y - S2 < 0.
inline long long next_mandate_index(double minor_support0, double mandate) {
  if (!(mandate > 0.0)) throw ConfigError("election_model", "mandate_value", "must be positive");
  if (!(minor_support0 >= 0.0))
    throw ConfigError("election_model", "minor.support", "must be non-negative");
  const double ratio = minor_support0 / mandate;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) return static_cast<long long>(nearest);
  return static_cast<long long>(std::ceil(ratio));
}

/// Y' = kY - S2(0). Exact on the 1e-4 decimal grid when both inputs are.
inline double votes_needed(double minor_support0, double mandate) {
  const long long k = next_mandate_index(minor_support0, mandate);
  const double shortfall = std::max(0.0, static_cast<double>(k) * mandate - minor_support0);
  if (is_decimal4(minor_support0) && is_decimal4(mandate)) return snap_decimal(shortfall);
  return shortfall;
}

namespace detail {

inline void require_decimal(double v, const std::string& field) {
  if (!std::isfinite(v)) throw ConfigError("election_model", field, "must be finite");
  if (!is_decimal4(v)) throw ConfigError("election_model", field, "at most 4 decimal places allowed");
}

inline void check_keys(const nlohmann::json& obj, const std::string& where,
                       std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError("election_model", where, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("election_model", where.empty() ? key : where + "." + key, "unknown field");
  }
}

inline double number(const nlohmann::json& obj, const std::string& key, const std::string& field) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("election_model", field, "missing required field");
  if (!it->is_number()) throw ConfigError("election_model", field, "expected a number");
  return it->get<double>();
}

inline std::optional<double> opt_number(const nlohmann::json& obj, const std::string& key,
                                        const std::string& field) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ConfigError("election_model", field, "expected a number");
  return it->get<double>();
}

inline PartyState parse_party(const nlohmann::json& doc, const std::string& key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ConfigError("election_model", key, "missing required field");
  check_keys(*it, key, {"name", "support", "mu", "sigma"});
  PartyState p;
  if (auto n = it->find("name"); n != it->end()) {
    if (!n->is_string()) throw ConfigError("election_model", key + ".name", "expected a string");
    p.name = n->get<std::string>();
  }
  p.support0 = number(*it, "support", key + ".support");
  require_decimal(p.support0, key + ".support");
  p.drift = opt_number(*it, "mu", key + ".mu").value_or(0.0);
  p.volatility = opt_number(*it, "sigma", key + ".sigma").value_or(0.0);
  if (p.support0 < 0.0 || p.support0 > 100.0)
    throw ConfigError("election_model", key + ".support", "must lie in [0, 100]");
  if (!(p.volatility >= 0.0)) throw ConfigError("election_model", key + ".sigma", "must be non-negative");
  return p;
}

}  // namespace detail

/// Checks every invariant and fills E, Y, Y' and the strike.
inline void finalize(CoalitionScenario& sc) {
  const auto& r = sc.rules;
  if (!(r.threshold > 0.0 && r.threshold < r.major_cap && r.major_cap <= 100.0))
    throw ConfigError("election_model", "rules.threshold", "require 0 < threshold < major_cap <= 100");
  if (r.seats < 1) throw ConfigError("election_model", "rules.seats", "must be at least 1");
  if (!(sc.major.support0 > r.threshold))
    throw ConfigError("election_model", "major.support", "major must exceed the threshold");
  if (!(sc.minor.support0 < r.threshold))
    throw ConfigError("election_model", "minor.support", "minor must be below the threshold");
  if (sc.major.support0 >= r.major_cap)
    throw ConfigError("election_model", "major.support", "major must stay below major_cap");

  sc.expected_support = sc.expected_support_input.value_or(snap_decimal(sc.major.support0 + sc.minor.support0));
  if (sc.mandate_value_input) {
    sc.mandate_value = *sc.mandate_value_input;
  } else if (!sc.full_poll.empty()) {
    sc.mandate_value = mandate_value(std::span<const PollEntry>(sc.full_poll), r);
  } else {
    throw ConfigError("election_model", "mandate_value", "provide mandate_value or full_poll");
  }
  if (!(sc.mandate_value > 0.0)) throw ConfigError("election_model", "mandate_value", "must be positive");
  sc.votes_needed = votes_needed(sc.minor.support0, sc.mandate_value);
  if (sc.strike_override) {
    sc.strike = *sc.strike_override;
  } else {
    const double raw = sc.expected_support + sc.votes_needed;
    sc.strike = (is_decimal4(sc.expected_support) && is_decimal4(sc.votes_needed)) ? snap_decimal(raw) : raw;
  }
}

inline CoalitionScenario scenario_from_json(const nlohmann::json& doc) {
  using detail::check_keys;
  using detail::number;
  using detail::opt_number;
  using detail::require_decimal;
  check_keys(doc, "",
             {"major", "minor", "rules", "expected_support", "mandate_value", "strike_override",
              "full_poll", "grid", "horizon"});
  CoalitionScenario sc;
  sc.major = detail::parse_party(doc, "major");
  sc.minor = detail::parse_party(doc, "minor");

  auto rules = doc.find("rules");
  if (rules == doc.end()) throw ConfigError("election_model", "rules", "missing required field");
  check_keys(*rules, "rules", {"threshold", "seats", "major_cap"});
  sc.rules.threshold = number(*rules, "threshold", "rules.threshold");
  require_decimal(sc.rules.threshold, "rules.threshold");
  const double seats = number(*rules, "seats", "rules.seats");
  if (seats != std::floor(seats) || seats < 1 || seats > 1e6)
    throw ConfigError("election_model", "rules.seats", "must be a positive integer");
  sc.rules.seats = static_cast<int>(seats);
  sc.rules.major_cap = opt_number(*rules, "major_cap", "rules.major_cap").value_or(40.0);

  for (auto [key, slot] : {std::pair{"expected_support", &sc.expected_support_input},
                           std::pair{"mandate_value", &sc.mandate_value_input},
                           std::pair{"strike_override", &sc.strike_override}}) {
    *slot = opt_number(doc, key, key);
    // Y may come from the poll estimator, so it is exempt from the 4-decimal rule.
    if (*slot && slot != &sc.mandate_value_input) require_decimal(**slot, key);
  }

  if (auto poll = doc.find("full_poll"); poll != doc.end() && !poll->is_null()) {
    if (!poll->is_array()) throw ConfigError("election_model", "full_poll", "expected an array");
    for (std::size_t i = 0; i < poll->size(); ++i) {
      const auto& e = (*poll)[i];
      const std::string field = "full_poll[" + std::to_string(i) + "]";
      check_keys(e, field, {"name", "support"});
      PollEntry p;
      if (auto n = e.find("name"); n != e.end()) p.name = n->get<std::string>();
      p.support = number(e, "support", field + ".support");
      require_decimal(p.support, field + ".support");
      if (p.support < 0.0 || p.support > 100.0)
        throw ConfigError("election_model", field + ".support", "must lie in [0, 100]");
      sc.full_poll.push_back(std::move(p));
    }
  }

  if (auto g = doc.find("grid"); g != doc.end() && !g->is_null()) {
    check_keys(*g, "grid", {"h1", "h2", "dt", "stencil"});
    sc.grid.h1 = opt_number(*g, "h1", "grid.h1");
    sc.grid.h2 = opt_number(*g, "h2", "grid.h2").value_or(sc.grid.h2);
    sc.grid.dt = opt_number(*g, "dt", "grid.dt");
    if (auto s = g->find("stencil"); s != g->end()) {
      if (!s->is_string()) throw ConfigError("election_model", "grid.stencil", "expected a string");
      sc.grid.stencil = s->get<std::string>();
    }
    if (sc.grid.stencil != "aligned" && sc.grid.stencil != "central")
      throw ConfigError("election_model", "grid.stencil", "expected \"aligned\" or \"central\"");
    if ((sc.grid.h1 && !(*sc.grid.h1 > 0.0)) || !(sc.grid.h2 > 0.0) || (sc.grid.dt && !(*sc.grid.dt > 0.0)))
      throw ConfigError("election_model", "grid", "steps must be positive");
  }

  if (auto h = doc.find("horizon"); h != doc.end() && !h->is_null()) {
    check_keys(*h, "horizon", {"t_max_scan_limit", "scan_points"});
    sc.horizon.t_max_scan_limit =
        opt_number(*h, "t_max_scan_limit", "horizon.t_max_scan_limit").value_or(sc.horizon.t_max_scan_limit);
    const double pts = opt_number(*h, "scan_points", "horizon.scan_points").value_or(sc.horizon.scan_points);
    if (!(sc.horizon.t_max_scan_limit > 0.0))
      throw ConfigError("election_model", "horizon.t_max_scan_limit", "must be positive");
    if (pts != std::floor(pts) || pts < 1 || pts > 1e5)
      throw ConfigError("election_model", "horizon.scan_points", "must be a positive integer");
    sc.horizon.scan_points = static_cast<int>(pts);
  }

  finalize(sc);
  return sc;
}

/// Parses and validates a scenario document (JSON object text).
inline CoalitionScenario load_scenario(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("election_model", "", std::string("malformed scenario: ") + e.what());
  }
  try {
    return scenario_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("election_model", "", std::string("schema violation: ") + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("election_model", "scenario", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Inputs only; derived fields are recomputed on load.
inline nlohmann::json to_json(const CoalitionScenario& sc) {
  auto party = [](const PartyState& p) {
    return nlohmann::json{{"name", p.name}, {"support", p.support0}, {"mu", p.drift}, {"sigma", p.volatility}};
  };
  nlohmann::json doc{
      {"major", party(sc.major)},
      {"minor", party(sc.minor)},
      {"rules", {{"threshold", sc.rules.threshold}, {"seats", sc.rules.seats}, {"major_cap", sc.rules.major_cap}}},
      {"expected_support", sc.expected_support},
      {"mandate_value", sc.mandate_value},
  };
  if (sc.strike_override) doc["strike_override"] = *sc.strike_override;
  if (!sc.full_poll.empty()) {
    auto& poll = doc["full_poll"] = nlohmann::json::array();
    for (const auto& p : sc.full_poll) poll.push_back({{"name", p.name}, {"support", p.support}});
  }
  nlohmann::json grid{{"h2", sc.grid.h2}, {"stencil", sc.grid.stencil}};
  if (sc.grid.h1) grid["h1"] = *sc.grid.h1;
  if (sc.grid.dt) grid["dt"] = *sc.grid.dt;
  doc["grid"] = grid;
  doc["horizon"] = {{"t_max_scan_limit", sc.horizon.t_max_scan_limit}, {"scan_points", sc.horizon.scan_points}};
  return doc;
}

}  // namespace coalition

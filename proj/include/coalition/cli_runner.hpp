#pragma once

// Batch front end: loads a scenario, applies overrides, runs one command and
// writes CSV / JSON artifacts plus a replayable run summary.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coalition/characteristic_oracle.hpp"
#include "coalition/election_model.hpp"
#include "coalition/errors.hpp"
#include "coalition/fairness_optimizer.hpp"
#include "coalition/io.hpp"
#include "coalition/monte_carlo.hpp"
#include "coalition/pde_solver.hpp"

namespace coalition {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericFailure = 3, kValidationMismatch = 4 };

struct RunManifest {
  std::string command;
  std::string scenario_path;
  std::string output_dir = ".";
  std::vector<std::string> overrides;  // "dotted.key=value"
  std::optional<std::uint64_t> seed;
  std::string scheme = "explicit";
  std::vector<double> horizons;
  std::optional<std::size_t> paths;
  std::optional<double> result;    // decide: S1(T) + S2(T)
  std::optional<double> transfer;  // decide: transfer to use instead of a T_max scan
};

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> names{"price", "surface", "tmax", "decide", "allocate", "simulate", "validate"};
  return names;
}

/// Sets `doc[a][b]...` from "a.b...=value". The value is read as JSON when it
/// parses, otherwise as a string.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("cli_runner", "--set", "expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("cli_runner", key, "empty path component");
    if (!node->is_object()) throw ConfigError("cli_runner", key, "cannot descend into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

/// Rebuilds the manifest recorded in a run summary.
inline RunManifest manifest_from_summary(const nlohmann::json& summary) {
  RunManifest m;
  const auto& r = summary.at("manifest");
  m.command = r.at("command").get<std::string>();
  m.scenario_path = r.at("scenario_path").get<std::string>();
  m.output_dir = r.at("output_dir").get<std::string>();
  m.overrides = r.at("overrides").get<std::vector<std::string>>();
  m.seed = r.at("seed").get<std::uint64_t>();
  m.scheme = r.at("scheme").get<std::string>();
  m.horizons = r.at("horizons").get<std::vector<double>>();
  if (!r.at("paths").is_null()) m.paths = r.at("paths").get<std::size_t>();
  if (!r.at("result").is_null()) m.result = r.at("result").get<double>();
  if (!r.at("transfer").is_null()) m.transfer = r.at("transfer").get<double>();
  return m;
}

namespace detail {

struct RunContext {
  const RunManifest& manifest;
  CoalitionScenario scenario;
  PdeProblem problem;
  std::filesystem::path out;
  std::uint64_t seed = 1;
  nlohmann::json results = nlohmann::json::object();
  std::vector<double> horizons;
};

inline std::vector<double> horizons_or(const RunContext& ctx, std::vector<double> fallback) {
  return ctx.manifest.horizons.empty() ? fallback : ctx.manifest.horizons;
}

inline GridSpec grid_for(const RunContext& ctx) {
  return make_grid(ctx.problem, ctx.scenario.grid, parse_scheme(ctx.manifest.scheme));
}

inline void run_price(RunContext& ctx) {
  ctx.horizons = horizons_or(ctx, {ctx.scenario.horizon.t_max_scan_limit});
  const auto grid = grid_for(ctx);
  const auto curve =
      scan_tmax(ctx.scenario, ctx.problem, grid, ctx.horizons, parse_scheme(ctx.manifest.scheme));
  write_atomically(ctx.out / "price.csv", curve_csv(curve));
  auto& v = ctx.results["values"] = nlohmann::json::array();
  for (const auto& s : curve.samples) v.push_back({{"t", s.t}, {"v", s.v}});
  ctx.results["grid"] = {{"h1", grid.h1}, {"h2", grid.h2}, {"dt", grid.dt}};
}

inline void run_surface(RunContext& ctx) {
  ctx.horizons = horizons_or(ctx, {ctx.scenario.horizon.t_max_scan_limit});
  std::vector<double> sorted = ctx.horizons;
  std::sort(sorted.begin(), sorted.end());
  const auto grid = grid_for(ctx);
  const auto res = solve_backward(ctx.problem, grid, parse_scheme(ctx.manifest.scheme), sorted);
  auto& files = ctx.results["files"] = nlohmann::json::array();
  for (const auto& s : res.surfaces) {
    const std::string name = "surface_" + std::to_string(s.steps) + ".csv";
    write_atomically(ctx.out / name, surface_csv(s));
    files.push_back({{"file", name}, {"tau", s.tau}, {"steps", s.steps}});
  }
  ctx.results["min_value"] = res.stats.min_value;
  ctx.results["max_value"] = res.stats.max_value;
}

inline RefinedMax tmax_for(RunContext& ctx, PricingCurve& curve) {
  ctx.horizons =
      horizons_or(ctx, default_horizons(ctx.scenario.horizon.t_max_scan_limit, ctx.scenario.horizon.scan_points));
  const auto grid = grid_for(ctx);
  const auto scheme = parse_scheme(ctx.manifest.scheme);
  curve = scan_tmax(ctx.scenario, ctx.problem, grid, ctx.horizons, scheme);
  return refine_tmax(curve, ctx.scenario, ctx.problem, grid, 1e-3, scheme);
}

inline void run_tmax(RunContext& ctx) {
  PricingCurve curve;
  const auto refined = tmax_for(ctx, curve);
  write_atomically(ctx.out / "tmax.csv", curve_csv(curve));
  ctx.results["t_max"] = refined.t_max;
  ctx.results["v_max"] = refined.v_max;
  ctx.results["boundary_maximum"] = refined.boundary;
  ctx.results["dense_fallback"] = refined.dense_fallback;
  std::cout << "t_max=" << format_number(refined.t_max, 10) << " v_max=" << format_number(refined.v_max, 10)
            << (refined.boundary ? " (boundary maximum)" : "") << "\n";
}

inline void run_decide(RunContext& ctx) {
  if (!ctx.manifest.result) throw ConfigError("cli_runner", "--result", "decide needs the election result");
  double transfer = 0.0;
  if (ctx.manifest.transfer) {
    transfer = *ctx.manifest.transfer;
  } else {
    PricingCurve curve;
    const auto refined = tmax_for(ctx, curve);
    transfer = refined.v_max;
    ctx.results["t_max"] = refined.t_max;
  }
  const auto d = evaluate_agreement(ctx.scenario, *ctx.manifest.result, transfer);
  const nlohmann::json doc{{"election_result", d.election_result},
                           {"threshold_value", d.threshold_value},
                           {"transfer", d.transfer},
                           {"granted", d.granted}};
  write_atomically(ctx.out / "decision.json", doc.dump(2) + "\n");
  ctx.results["decision"] = doc;
  std::cout << (d.granted ? "granted" : "not granted") << ": " << format_number(d.election_result, 10) << " + "
            << format_number(d.transfer, 10) << " vs " << format_number(d.threshold_value, 10) << "\n";
}

inline void run_allocate(RunContext& ctx) {
  if (ctx.scenario.full_poll.empty())
    throw ConfigError("cli_runner", "full_poll", "allocate needs full_poll in the scenario");
  const auto alloc = dhondt_allocate(std::span<const PollEntry>(ctx.scenario.full_poll), ctx.scenario.rules);
  std::string csv = "name,support,seats\n";
  for (std::size_t i = 0; i < alloc.seats.size(); ++i)
    csv += alloc.names[i] + "," + format_number(ctx.scenario.full_poll[i].support, 10) + "," +
           std::to_string(alloc.seats[i]) + "\n";
  write_atomically(ctx.out / "allocation.csv", csv);
  ctx.results["total_seats"] = alloc.total;
  ctx.results["mandate_value"] = mandate_value(std::span<const PollEntry>(ctx.scenario.full_poll), ctx.scenario.rules);
}

inline void run_simulate(RunContext& ctx) {
  ctx.horizons = horizons_or(ctx, {ctx.scenario.horizon.t_max_scan_limit});
  PathConfig cfg;
  cfg.n_paths = ctx.manifest.paths.value_or(10000);
  cfg.horizon = ctx.horizons.front();
  cfg.seed = ctx.seed;
  cfg.mode = DriftMode::real_world;
  const auto ens = simulate_paths(ctx.scenario, cfg);
  const double qs[] = {0.05, 0.5, 0.95};
  const auto q = ensemble_quantiles(ens, qs);
  std::string csv = "t,q05,q50,q95\n";
  for (std::size_t k = 0; k < q.size(); ++k)
    csv += format_number(ens.times[k], 10) + "," + format_number(q[k][0], 10) + "," + format_number(q[k][1], 10) +
           "," + format_number(q[k][2], 10) + "\n";
  write_atomically(ctx.out / "paths.csv", csv);
  std::size_t absorbed = 0;
  for (int a : ens.absorbed_step) absorbed += a >= 0;
  ctx.results["absorbed_fraction"] = static_cast<double>(absorbed) / static_cast<double>(cfg.n_paths);
}

inline void run_validate(RunContext& ctx) {
  const double limit = ctx.scenario.horizon.t_max_scan_limit;
  ctx.horizons = horizons_or(ctx, {limit / 4, limit / 2, limit});
  const auto scheme = parse_scheme(ctx.manifest.scheme);
  const auto grid = grid_for(ctx);
  GridSettings fine_settings = ctx.scenario.grid;
  fine_settings.h1 = grid.h1 / 2;
  fine_settings.h2 = grid.h2 / 2;
  fine_settings.dt.reset();
  const auto fine = make_grid(ctx.problem, fine_settings, scheme);
  const double s1 = ctx.scenario.major.support0, s2 = ctx.scenario.minor.support0;
  const std::string point = format_number(s1, 10) + ";" + format_number(s2, 10);

  std::vector<double> sorted = ctx.horizons;
  std::sort(sorted.begin(), sorted.end());
  const auto coarse_res = solve_backward(ctx.problem, grid, scheme, sorted);
  const auto fine_res = solve_backward(ctx.problem, fine, scheme, sorted);

  std::string csv = "method,point,tau,value,error_bound\n";
  std::string agree = "tau,fd_vs_series,fd_vs_mc\n";
  bool all_ok = true;
  auto& rows = ctx.results["comparisons"] = nlohmann::json::array();
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double tau = coarse_res.surfaces[k].tau;
    const double fd = coarse_res.surfaces[k].value_at(s1, s2);
    const double fd_err = std::abs(fine_res.surfaces[k].value_at(s1, s2) - fd);
    const auto series = oracle_price(ctx.problem, s1, s2, tau, 400);
    PathConfig cfg;
    cfg.n_paths = ctx.manifest.paths.value_or(100000);
    cfg.n_steps = 100;
    cfg.horizon = tau;
    cfg.seed = ctx.seed;
    const auto mc = mc_price(ctx.scenario, ctx.problem, cfg);
    const bool ok_series = std::abs(fd - series.value) <= 5e-3;
    const bool ok_mc = std::abs(fd - mc.mean) <= 3.0 * mc.std_error + fd_err;
    all_ok = all_ok && ok_series && ok_mc;
    const std::string t = format_number(tau, 10);
    csv += "fd," + point + "," + t + "," + format_number(fd, 10) + "," + format_number(fd_err, 6) + "\n";
    csv += "series," + point + "," + t + "," + format_number(series.value, 10) + "," +
           format_number(series.tail_bound, 6) + "\n";
    csv += "mc," + point + "," + t + "," + format_number(mc.mean, 10) + "," + format_number(3.0 * mc.std_error, 6) +
           "\n";
    agree += t + "," + (ok_series ? "agree" : "MISMATCH") + "," + (ok_mc ? "agree" : "MISMATCH") + "\n";
    rows.push_back({{"tau", tau}, {"fd", fd}, {"series", series.value}, {"mc", mc.mean},
                    {"mc_std_error", mc.std_error}, {"fd_vs_series", ok_series}, {"fd_vs_mc", ok_mc}});
  }
  write_atomically(ctx.out / "validate.csv", csv);
  write_atomically(ctx.out / "validate_agreement.csv", agree);
  ctx.results["all_agree"] = all_ok;
  if (!all_ok) throw ValidationError("cli_runner", "methods disagree; see validate_agreement.csv");
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_summary(const RunContext& ctx, const std::string& scenario_text, const std::string& status) {
  const auto& m = ctx.manifest;
  nlohmann::json manifest{{"command", m.command},
                          {"scenario_path", m.scenario_path},
                          {"output_dir", m.output_dir},
                          {"overrides", m.overrides},
                          {"seed", ctx.seed},
                          {"scheme", m.scheme},
                          {"horizons", ctx.horizons.empty() ? m.horizons : ctx.horizons},
                          {"paths", m.paths ? nlohmann::json(*m.paths) : nlohmann::json()},
                          {"result", m.result ? nlohmann::json(*m.result) : nlohmann::json()},
                          {"transfer", m.transfer ? nlohmann::json(*m.transfer) : nlohmann::json()}};
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(scenario_text)));
  // Compact values keep the timestamp on a line of its own.
  std::ostringstream out;
  out << "{\n";
  out << "  \"version\": " << nlohmann::json(kVersion).dump() << ",\n";
  out << "  \"status\": " << nlohmann::json(status).dump() << ",\n";
  out << "  \"scenario_hash\": \"" << hash << "\",\n";
  out << "  \"manifest\": " << manifest.dump() << ",\n";
  out << "  \"scenario\": " << to_json(ctx.scenario).dump() << ",\n";
  out << "  \"derived\": "
      << nlohmann::json{{"expected_support", ctx.scenario.expected_support},
                        {"mandate_value", ctx.scenario.mandate_value},
                        {"votes_needed", ctx.scenario.votes_needed},
                        {"strike", ctx.scenario.strike}}
             .dump()
      << ",\n";
  out << "  \"results\": " << ctx.results.dump() << ",\n";
  out << "  \"timestamp\": \"" << utc_timestamp() << "\"\n";
  out << "}\n";
  write_atomically(ctx.out / "summary.json", out.str());
}

}  // namespace detail

/// Runs one command. Errors are reported on `err` and mapped to exit codes
/// 2 (configuration), 3 (numeric failure) and 4 (validation mismatch).
inline int run(const RunManifest& manifest, std::ostream& err = std::cerr) {
  std::string scenario_text;
  std::optional<detail::RunContext> ctx;
  try {
    if (std::find(known_commands().begin(), known_commands().end(), manifest.command) == known_commands().end())
      throw ConfigError("cli_runner", "command", "unknown command '" + manifest.command + "'");
    scenario_text = read_text_file(manifest.scenario_path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(scenario_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("election_model", "", std::string("malformed scenario: ") + e.what());
    }
    for (const auto& o : manifest.overrides) apply_override(doc, o);
    CoalitionScenario sc;
    try {
      sc = scenario_from_json(doc);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("election_model", "", std::string("schema violation: ") + e.what());
    }
    parse_scheme(manifest.scheme);
    ctx.emplace(detail::RunContext{manifest, sc, PdeProblem::from(sc), manifest.output_dir, manifest.seed.value_or(1)});

    const auto& c = manifest.command;
    if (c == "price") detail::run_price(*ctx);
    else if (c == "surface") detail::run_surface(*ctx);
    else if (c == "tmax") detail::run_tmax(*ctx);
    else if (c == "decide") detail::run_decide(*ctx);
    else if (c == "allocate") detail::run_allocate(*ctx);
    else if (c == "simulate") detail::run_simulate(*ctx);
    else detail::run_validate(*ctx);
    detail::write_summary(*ctx, scenario_text, "ok");
    return kOk;
  } catch (const ValidationError& e) {
    err << "validation mismatch [" << e.origin() << "]: " << e.what() << "\n";
    if (ctx) detail::write_summary(*ctx, scenario_text, "validation_mismatch");
    return kValidationMismatch;
  } catch (const ConfigError& e) {
    err << "config error [" << e.origin() << "]: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericError& e) {
    err << "numeric failure [" << e.origin() << "]: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error [cli_runner]: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  }
}

}  // namespace coalition

// coalition: command-line front end for the coalition-agreement pricer.
//
//   coalition <command> --scenario <file> [--out <dir>] [--set key=value]...
//             [--seed <u64>] [--scheme explicit|implicit] [--horizons a,b,c]
//             [--paths <n>] [--result <pct>] [--transfer <pct>]
//
// Commands: price, surface, tmax, decide, allocate, simulate, validate.

#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "coalition/cli_runner.hpp"

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw CLI::ValidationError("--horizons", "not a number: " + item);
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coalition-agreement pricing: transfers, fair-treatment horizons and grant decisions"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(coalition::kVersion));

  coalition::RunManifest manifest;
  std::string horizons;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double result = 0.0, transfer = 0.0;

  const std::map<std::string, std::string> help{
      {"price", "transfer V at the scenario point for each horizon"},
      {"surface", "dump value surfaces as CSV"},
      {"tmax", "scan horizons and locate the fair-treatment maximum"},
      {"decide", "grant decision for an election result"},
      {"allocate", "d'Hondt seat allocation of full_poll"},
      {"simulate", "simulate support paths and emit quantiles"},
      {"validate", "compare finite differences, series oracle and Monte Carlo"}};

  for (const auto& name : coalition::known_commands()) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--scenario", manifest.scenario_path, "scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", manifest.output_dir, "output directory")->capture_default_str();
    sub->add_option("--set", manifest.overrides, "override a scenario field, e.g. grid.dt=0.0005");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--scheme", manifest.scheme, "time stepping")
        ->check(CLI::IsMember({"explicit", "implicit"}))
        ->capture_default_str();
    sub->add_option("--horizons", horizons, "comma-separated horizons (time to election)");
    sub->add_option("--paths", paths, "Monte Carlo paths");
    if (name == "decide") {
      sub->add_option("--result", result, "coalition election result S1(T)+S2(T) in percent")->required();
      sub->add_option("--transfer", transfer, "transfer to use instead of the T_max scan");
    }
    sub->callback([&, sub, name] {
      manifest.command = name;
      if (sub->count("--seed")) manifest.seed = seed;
      if (sub->count("--paths")) manifest.paths = paths;
      if (sub->count("--horizons")) manifest.horizons = parse_list(horizons);
      if (name == "decide") {
        manifest.result = result;
        if (sub->count("--transfer")) manifest.transfer = transfer;
      }
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : coalition::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return coalition::kConfigError;
  }
  return coalition::run(manifest);
}

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

#include "coalition/errors.hpp"
#include "coalition/fairness_optimizer.hpp"
#include "coalition/pde_solver.hpp"

namespace coalition {

inline std::string format_number(double v, int significant = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant, v);
  return buf;
}

/// Writes `content` to a sibling temporary file, then renames it over `path`.
inline void write_atomically(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cli_runner", "out", "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("cli_runner", "out", "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// S1,S2,V over every node including the boundary, S1 outer.
inline std::string surface_csv(const Surface& s) {
  std::string out = "S1,S2,V\n";
  for (int i = 0; i < s.grid.nodes1(); ++i) {
    for (int j = 0; j < s.grid.nodes2(); ++j) {
      out += format_number(s.grid.s1(i));
      out += ',';
      out += format_number(s.grid.s2(j));
      out += ',';
      out += format_number(s.values(i, j));
      out += '\n';
    }
  }
  return out;
}

inline std::string curve_csv(const PricingCurve& c) {
  std::string out = "t,V\n";
  for (const auto& s : c.samples) out += format_number(s.t, 10) + "," + format_number(s.v, 10) + "\n";
  return out;
}

/// 64-bit FNV-1a, used to fingerprint scenario files in run summaries.
inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace coalition

#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Any (key,
// counter) pair maps to four independent 32-bit words, so path i of a
// simulation can be generated without touching paths 0..i-1.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace coalition {

class Philox4x32 {
public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Substream of one simulated path: draw `d` of path `p` under `seed` is
/// the Philox block at counter (d, p), key seed.
class PathStream {
public:
  PathStream(std::uint64_t seed, std::uint64_t path) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, path_(path) {}

  /// Two uniforms in the open interval (0, 1) from draw index `d`.
  std::array<double, 2> uniforms(std::uint64_t d) const noexcept {
    const auto w = Philox4x32::block({static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32),
                                      static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32)},
                                     key_);
    return {to_unit((std::uint64_t{w[0]} << 32) | w[1]), to_unit((std::uint64_t{w[2]} << 32) | w[3])};
  }

  /// Standard normal from draw index `d` (Box-Muller, cosine branch).
  double normal(std::uint64_t d) const noexcept {
    const auto u = uniforms(d);
    return std::sqrt(-2.0 * std::log(u[0])) * std::cos(2.0 * std::numbers::pi * u[1]);
  }

private:
  static double to_unit(std::uint64_t x) noexcept {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
  }

  Philox4x32::Key key_;
  std::uint64_t path_;
};

}  // namespace coalition

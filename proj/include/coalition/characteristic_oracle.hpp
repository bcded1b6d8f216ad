#pragma once

// Semi-analytic reference solver. The diffusion matrix [[s1^2, s1 s2],
// [s1 s2, s2^2]] has rank one, so the equation only diffuses along the
// direction (s1, s2). Each chord of D in that direction carries an
// independent 1D heat equation with zero end values, solved here by a
// truncated sine series.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "coalition/errors.hpp"
#include "coalition/pde_solver.hpp"

namespace coalition {

/// Which change of variables builds the 1D problems.
///   corrected: chords along (s1, s2), indexed by c = s2*S1 - s1*S2.
///   verbatim:  chords at fixed S1 across S2 in (0, X) with diffusion s2^2/2,
///              i.e. the literal substitution with the d/dy1 part dropped.
enum class Transform { corrected, verbatim };

struct CharacteristicLine {
  double offset = 0.0;  // invariant coordinate c (corrected) or S1 (verbatim)
  double start1 = 0.0, start2 = 0.0;  // segment endpoint at arc length 0
  double dir1 = 0.0, dir2 = 0.0;      // unit direction
  double length = 0.0;                // arc length L
  double diffusion = 0.0;             // V_tau = diffusion * V_ll along the chord
  double strike = 0.0;
  double payoff_scale = 1.0;

  double point1(double l) const noexcept { return start1 + l * dir1; }
  double point2(double l) const noexcept { return start2 + l * dir2; }
  double payoff_trace(double l) const noexcept {
    return payoff_scale * payoff(point1(l), point2(l), strike);
  }
  /// Arc length at which the payoff trace has its kink, if inside (0, L).
  std::optional<double> kink() const noexcept {
    const double slope = dir1 + dir2;
    if (slope == 0.0) return std::nullopt;
    const double l = (strike - start1 - start2) / slope;
    if (l > 0.0 && l < length) return l;
    return std::nullopt;
  }
  /// Arc-length coordinate of a point on the line.
  double coordinate_of(double s1, double s2) const noexcept {
    return (s1 - start1) * dir1 + (s2 - start2) * dir2;
  }
};

namespace detail {

/// Chord of the closed rectangle along `dir` through `base`. Returns false
/// when the line misses the rectangle.
inline bool clip_to_domain(const PdeProblem& p, double base1, double base2, double dir1, double dir2, double& lo,
                           double& hi) {
  lo = -std::numeric_limits<double>::infinity();
  hi = std::numeric_limits<double>::infinity();
  auto slab = [&](double x, double d, double a, double b) {
    if (d == 0.0) return x >= a && x <= b;
    double t0 = (a - x) / d, t1 = (b - x) / d;
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    return true;
  };
  if (!slab(base1, dir1, p.s1_lo(), p.s1_hi())) return false;
  if (!slab(base2, dir2, p.s2_lo(), p.s2_hi())) return false;
  return hi >= lo;
}

inline CharacteristicLine make_line(const PdeProblem& p, double base1, double base2, double dir1, double dir2,
                                    double diffusion, double offset) {
  double lo = 0.0, hi = 0.0;
  const bool hit = clip_to_domain(p, base1, base2, dir1, dir2, lo, hi);
  const double scale = std::max({1.0, std::abs(p.s1_hi()), std::abs(p.s2_hi())});
  if (!hit || hi - lo <= 1e-12 * scale)
    throw ConfigError("characteristic_oracle", "offset",
                      "line with offset " + std::to_string(offset) + " has a zero-length chord in D");
  CharacteristicLine line;
  line.offset = offset;
  line.start1 = base1 + lo * dir1;
  line.start2 = base2 + lo * dir2;
  line.dir1 = dir1;
  line.dir2 = dir2;
  line.length = hi - lo;
  line.diffusion = diffusion;
  line.strike = p.strike;
  line.payoff_scale = p.payoff_scale;
  return line;
}

inline void require_volatility(const PdeProblem& p) {
  if (!(p.sigma1 >= 0.0 && p.sigma2 >= 0.0) || (p.sigma1 == 0.0 && p.sigma2 == 0.0))
    throw ConfigError("characteristic_oracle", "sigma", "degenerate volatilities: need (s1, s2) != (0, 0)");
}

}  // namespace detail

/// Invariant coordinate of (s1, s2): constant along the diffusion direction.
inline double characteristic_offset(const PdeProblem& p, double s1, double s2) {
  return p.sigma2 * s1 - p.sigma1 * s2;
}

/// The corrected-transform line with invariant coordinate `offset`.
inline CharacteristicLine line_for_offset(const PdeProblem& p, double offset) {
  detail::require_volatility(p);
  const double norm2 = p.sigma1 * p.sigma1 + p.sigma2 * p.sigma2;
  const double norm = std::sqrt(norm2);
  // Foot of the perpendicular from the origin onto the line.
  const double base1 = offset * p.sigma2 / norm2;
  const double base2 = -offset * p.sigma1 / norm2;
  return detail::make_line(p, base1, base2, p.sigma1 / norm, p.sigma2 / norm, 0.5 * norm2, offset);
}

/// The line through (s1, s2) under the chosen transform.
inline CharacteristicLine line_through(const PdeProblem& p, double s1, double s2,
                                       Transform transform = Transform::corrected) {
  detail::require_volatility(p);
  if (transform == Transform::verbatim) {
    if (!(p.sigma2 > 0.0))
      throw ConfigError("characteristic_oracle", "sigma2", "verbatim transform needs sigma2 > 0");
    return detail::make_line(p, s1, s2, 0.0, 1.0, 0.5 * p.sigma2 * p.sigma2, s1);
  }
  const double norm2 = p.sigma1 * p.sigma1 + p.sigma2 * p.sigma2;
  const double norm = std::sqrt(norm2);
  return detail::make_line(p, s1, s2, p.sigma1 / norm, p.sigma2 / norm, 0.5 * norm2,
                           characteristic_offset(p, s1, s2));
}

/// One line per requested offset. Offsets whose chord degenerates to a point
/// (lines through a corner only) are rejected.
inline std::vector<CharacteristicLine> decompose(const PdeProblem& p, std::span<const double> offsets) {
  std::vector<CharacteristicLine> out;
  out.reserve(offsets.size());
  for (double c : offsets) out.push_back(line_for_offset(p, c));
  return out;
}

/// Range of the invariant coordinate over the closed domain.
inline std::pair<double, double> offset_range(const PdeProblem& p) {
  const double c[4] = {characteristic_offset(p, p.s1_lo(), p.s2_lo()), characteristic_offset(p, p.s1_lo(), p.s2_hi()),
                       characteristic_offset(p, p.s1_hi(), p.s2_lo()), characteristic_offset(p, p.s1_hi(), p.s2_hi())};
  return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
}

/// `count` offsets at the midpoints of a uniform partition of the offset range.
inline std::vector<double> uniform_offsets(const PdeProblem& p, int count) {
  const auto [lo, hi] = offset_range(p);
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(lo + (hi - lo) * (k + 0.5) / count);
  return out;
}

struct SeriesValue {
  double value = 0.0;
  double tail_bound = 0.0;  // bound on the truncated modes
};

class SineSeries {
public:
  /// Coefficients A_n = (2/L) \int_0^L f(s) sin(n pi s / L) ds for n = 1..modes,
  /// by composite Simpson with about 4*modes intervals, split at `breaks`.
  static SineSeries from_trace(const std::function<double(double)>& trace, double length, double diffusion,
                               int modes, std::span<const double> breaks = {}) {
    if (!(length > 0.0)) throw ConfigError("characteristic_oracle", "length", "segment length must be positive");
    if (modes < 1) throw ConfigError("characteristic_oracle", "modes", "need at least one mode");
    SineSeries s;
    s.length_ = length;
    s.diffusion_ = diffusion;
    s.coeffs_.assign(static_cast<std::size_t>(modes), 0.0);

    std::vector<double> knots{0.0};
    for (double b : breaks)
      if (b > 0.0 && b < length) knots.push_back(b);
    knots.push_back(length);
    std::sort(knots.begin(), knots.end());

    const int total = 4 * modes;
    const double k = std::numbers::pi / length;
    for (std::size_t p = 0; p + 1 < knots.size(); ++p) {
      const double a = knots[p], b = knots[p + 1];
      if (b - a <= 0.0) continue;
      int m = static_cast<int>(std::ceil(total * (b - a) / length));
      m = std::max(2, m + (m % 2));
      const double h = (b - a) / m;
      for (int q = 0; q <= m; ++q) {
        // interior knots: evaluate the trace from inside the piece
        const double x = (q == m) ? b : a + q * h;
        const double xi = (q == 0) ? a + 1e-14 * h : (q == m ? b - 1e-14 * h : x);
        const double w = (q == 0 || q == m) ? 1.0 : (q % 2 ? 4.0 : 2.0);
        const double fw = trace(xi) * w * h / 3.0;
        s.trace_l1_ += std::abs(fw);
        if (fw == 0.0) continue;
        for (int n = 1; n <= modes; ++n) s.coeffs_[n - 1] += fw * std::sin(n * k * x);
      }
    }
    for (double& c : s.coeffs_) c *= 2.0 / length;
    s.trace_l1_ *= 2.0 / length;
    return s;
  }

  static SineSeries from_line(const CharacteristicLine& line, int modes) {
    std::vector<double> breaks;
    if (auto kk = line.kink()) breaks.push_back(*kk);
    return from_trace([&line](double l) { return line.payoff_trace(l); }, line.length, line.diffusion, modes,
                      breaks);
  }

  double length() const noexcept { return length_; }
  double diffusion() const noexcept { return diffusion_; }
  int modes() const noexcept { return static_cast<int>(coeffs_.size()); }
  std::span<const double> coefficients() const noexcept { return coeffs_; }

  SeriesValue evaluate(double s, double tau) const {
    if (!(tau >= 0.0)) throw ConfigError("characteristic_oracle", "tau", "must be non-negative");
    SeriesValue out;
    if (s <= 0.0 || s >= length_) return out;
    const double k = std::numbers::pi / length_;
    const double kappa = diffusion_ * k * k * tau;
    for (int n = 1; n <= modes(); ++n) {
      const double decay = std::exp(-kappa * n * n);
      if (decay == 0.0) break;
      out.value += coeffs_[n - 1] * std::sin(n * k * s) * decay;
    }
    // |A_n| <= (2/L) \int |f|, and sum_{n>N} e^{-kappa n^2} <= \int_N^inf e^{-kappa x^2} dx.
    if (kappa <= 0.0) {
      out.tail_bound = std::numeric_limits<double>::infinity();
    } else {
      const double r = std::sqrt(kappa);
      out.tail_bound = trace_l1_ * 0.5 * std::sqrt(std::numbers::pi) / r * std::erfc(modes() * r);
    }
    return out;
  }

private:
  double length_ = 0.0;
  double diffusion_ = 0.0;
  double trace_l1_ = 0.0;
  std::vector<double> coeffs_;
};

/// Truncated series value at arc coordinate `s` of `line` after time `tau`.
inline SeriesValue series_value(const CharacteristicLine& line, int modes, double tau, double s) {
  return SineSeries::from_line(line, modes).evaluate(s, tau);
}

/// Reference price at (s1, s2) after time `tau`.
inline SeriesValue oracle_price(const PdeProblem& p, double s1, double s2, double tau, int modes = 400,
                                Transform transform = Transform::corrected) {
  if (!p.contains_closed(s1, s2))
    throw ConfigError("characteristic_oracle", "point", "(" + std::to_string(s1) + ", " + std::to_string(s2) +
                                                            ") lies outside the domain");
  if (!p.contains_open(s1, s2)) return {};
  if (p.payoff_bound() <= 0.0) return {};
  const auto line = line_through(p, s1, s2, transform);
  return series_value(line, modes, tau, line.coordinate_of(s1, s2));
}

}  // namespace coalition

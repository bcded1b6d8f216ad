#pragma once

// Fair-treatment horizon: the horizon T_max that maximizes the transfer
// V(-t, S1(0), S2(0)) at signing, and the resulting grant decision.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "coalition/election_model.hpp"
#include "coalition/errors.hpp"
#include "coalition/golden_section.hpp"
#include "coalition/pde_solver.hpp"

namespace coalition {

struct CurveSample {
  double t = 0.0;
  double v = 0.0;
};

struct PricingCurve {
  std::vector<CurveSample> samples;  // ascending t
  double t_max = 0.0;
  double v_max = 0.0;
};

/// Sorts by t and picks the smallest argmax.
inline PricingCurve make_curve(std::vector<CurveSample> samples) {
  if (samples.empty()) throw ConfigError("fairness_optimizer", "horizons", "need at least one horizon");
  std::stable_sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  PricingCurve c;
  c.samples = std::move(samples);
  c.t_max = c.samples.front().t;
  c.v_max = c.samples.front().v;
  for (const auto& s : c.samples) {
    if (s.v > c.v_max) {
      c.v_max = s.v;
      c.t_max = s.t;
    }
  }
  return c;
}

/// `count` log-spaced horizons from limit/100 to limit.
inline std::vector<double> default_horizons(double limit, int count) {
  if (!(limit > 0.0) || count < 1) throw ConfigError("fairness_optimizer", "horizon", "invalid scan settings");
  std::vector<double> out;
  if (count == 1) return {limit};
  for (int k = 0; k < count; ++k) out.push_back(limit * std::pow(10.0, -2.0 * (1.0 - double(k) / (count - 1))));
  return out;
}

enum class ScanMode { single_solve, independent_solves };

/// Transfer curve at the scenario point. One solve with intermediate probes
/// is equivalent to independent solves because the equation is autonomous
/// and horizons are whole numbers of steps.
inline PricingCurve scan_tmax(const CoalitionScenario& scenario, const PdeProblem& problem, const GridSpec& grid,
                              std::span<const double> horizons, Scheme scheme = Scheme::explicit_euler,
                              ScanMode mode = ScanMode::single_solve) {
  if (horizons.empty()) throw ConfigError("fairness_optimizer", "horizons", "need at least one horizon");
  for (double h : horizons)
    if (!(h > 0.0)) throw ConfigError("fairness_optimizer", "horizons", "horizons must be positive");
  const double s1 = scenario.major.support0, s2 = scenario.minor.support0;
  std::vector<CurveSample> samples;
  if (mode == ScanMode::single_solve) {
    std::vector<double> sorted(horizons.begin(), horizons.end());
    std::sort(sorted.begin(), sorted.end());
    const auto res = solve_backward(problem, grid, scheme, sorted);
    for (const auto& s : res.surfaces) samples.push_back({s.tau, s.value_at(s1, s2)});
  } else {
    for (double h : horizons) {
      const double one[] = {h};
      const auto res = solve_backward(problem, grid, scheme, one);
      samples.push_back({res.surfaces.front().tau, res.surfaces.front().value_at(s1, s2)});
    }
  }
  return make_curve(std::move(samples));
}

struct RefinedMax {
  double t_max = 0.0;
  double v_max = 0.0;
  bool boundary = false;        // maximum at an end of the scanned range
  bool dense_fallback = false;  // bracket was not unimodal
  int evaluations = 0;
};

/// Golden-section refinement around an interior maximum of `curve`, using
/// `value_at(t)` for new evaluations. Monotone or flat curves are reported
/// as boundary maxima unchanged.
template <class ValueAt>
RefinedMax refine_tmax(const PricingCurve& curve, ValueAt&& value_at, double tolerance, int dense_points = 24) {
  RefinedMax out{curve.t_max, curve.v_max, false, false, 0};
  const auto& s = curve.samples;
  std::size_t i = 0;
  while (i < s.size() && s[i].t != curve.t_max) ++i;
  if (i == 0 || i + 1 >= s.size()) {
    out.boundary = true;
    return out;
  }
  const double a = s[i - 1].t, b = s[i + 1].t;
  int evals = 0;
  auto f = [&](double t) {
    ++evals;
    return value_at(t);
  };
  auto best = golden_section_maximize(f, a, b, tolerance);
  if (best.fx >= out.v_max) {
    out.t_max = best.x;
    out.v_max = best.fx;
  }
  // Unimodality check: a dense pass must not beat the golden-section result.
  double dense_t = out.t_max, dense_v = out.v_max;
  for (int k = 1; k < dense_points; ++k) {
    const double t = a + (b - a) * k / dense_points;
    const double v = f(t);
    if (v > dense_v + 1e-12 * std::max(1.0, std::abs(dense_v))) {
      dense_v = v;
      dense_t = t;
    }
  }
  if (dense_v > out.v_max) {
    out.dense_fallback = true;
    out.t_max = dense_t;
    out.v_max = dense_v;
  }
  out.evaluations = evals;
  return out;
}

/// Refinement where each evaluation is a fresh solve to horizon t.
inline RefinedMax refine_tmax(const PricingCurve& curve, const CoalitionScenario& scenario, const PdeProblem& problem,
                              const GridSpec& grid, double tolerance, Scheme scheme = Scheme::explicit_euler) {
  const double s1 = scenario.major.support0, s2 = scenario.minor.support0;
  auto value_at = [&](double t) {
    const double one[] = {t};
    return solve_backward(problem, grid, scheme, one).surfaces.front().value_at(s1, s2);
  };
  auto r = refine_tmax(curve, value_at, std::max(tolerance, grid.dt));
  // report the horizon actually solved
  r.t_max = steps_for(r.t_max, grid) * grid.dt;
  return r;
}

struct AgreementDecision {
  double election_result = 0.0;  // S1(T) + S2(T)
  double threshold_value = 0.0;  // E + Y'
  double transfer = 0.0;         // V at the scenario point
  bool granted = false;
};

/// The minor party gets the extra mandate when result + transfer meets or
/// exceeds the strike.
inline AgreementDecision evaluate_agreement(const CoalitionScenario& scenario, double election_result,
                                            double transfer) {
  AgreementDecision d;
  d.election_result = election_result;
  d.threshold_value = scenario.strike;
  d.transfer = transfer;
  d.granted = snap_decimal(election_result + transfer) >= scenario.strike;
  return d;
}

}  // namespace coalition

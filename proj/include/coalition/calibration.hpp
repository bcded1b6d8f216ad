#pragma once

// Fits one time-scale factor (tau per reported iteration) shared by several
// scenarios so that probed transfers match reference values.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "coalition/golden_section.hpp"
#include "coalition/pde_solver.hpp"

namespace coalition {

struct CalibrationTarget {
  std::string name;
  PdeProblem problem;
  GridSpec grid;
  double s1 = 0.0, s2 = 0.0;
  std::vector<int> iterations;
  std::vector<double> reference;  // expected value per iteration count
};

struct CalibrationPoint {
  std::string name;
  int iterations = 0;
  double tau = 0.0;
  double reference = 0.0;
  double model = 0.0;
  double rel_error = 0.0;
};

struct CalibrationReport {
  double factor = 0.0;
  double max_rel_error = 0.0;
  std::vector<CalibrationPoint> points;
};

inline CalibrationReport evaluate_time_scale(std::span<const CalibrationTarget> targets, double factor) {
  CalibrationReport rep;
  rep.factor = factor;
  for (const auto& t : targets) {
    std::vector<double> taus;
    for (int it : t.iterations) taus.push_back(factor * it);
    std::vector<double> sorted = taus;
    std::sort(sorted.begin(), sorted.end());
    const auto res = solve_backward(t.problem, t.grid, Scheme::explicit_euler, sorted);
    for (std::size_t k = 0; k < t.iterations.size(); ++k) {
      const auto pos = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), taus[k]) - sorted.begin());
      const auto& surf = res.surfaces[pos];
      CalibrationPoint p{t.name, t.iterations[k], surf.tau, t.reference[k], surf.value_at(t.s1, t.s2), 0.0};
      p.rel_error = std::abs(p.model - p.reference) / std::abs(p.reference);
      rep.max_rel_error = std::max(rep.max_rel_error, p.rel_error);
      rep.points.push_back(p);
    }
  }
  return rep;
}

/// Minimizes the worst relative error over factors in [lo, hi]: a log-spaced
/// scan of `coarse` points, then golden section around the best one.
inline CalibrationReport calibrate_time_scale(std::span<const CalibrationTarget> targets, double lo, double hi,
                                              int coarse = 60) {
  const double ratio = std::pow(hi / lo, 1.0 / (coarse - 1));
  double best_f = lo, best_err = INFINITY;
  for (int k = 0; k < coarse; ++k) {
    const double f = lo * std::pow(ratio, k);
    const double err = evaluate_time_scale(targets, f).max_rel_error;
    if (err < best_err) {
      best_err = err;
      best_f = f;
    }
  }
  auto objective = [&](double f) { return evaluate_time_scale(targets, f).max_rel_error; };
  const auto refined = golden_section_minimize(objective, best_f / ratio, best_f * ratio, best_f * 1e-4);
  if (refined.fx < best_err) best_f = refined.x;
  return evaluate_time_scale(targets, best_f);
}

}  // namespace coalition

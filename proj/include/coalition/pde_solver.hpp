#pragma once

// Backward degenerate parabolic pricing equation
//
//   V_t + (s1^2/2) V_{S1S1} + s1 s2 V_{S1S2} + (s2^2/2) V_{S2S2} = 0
//
// on D = (X, cap) x (0, X), final data max(S1 + S2 - strike, 0), zero on the
// boundary. Marched forward in tau = T - t from the payoff.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "coalition/election_model.hpp"
#include "coalition/errors.hpp"

namespace coalition {

enum class Scheme { explicit_euler, implicit_euler };

/// Discretization of the mixed derivative.
///   aligned: 7-point stencil using only the (+,+)/(-,-) diagonal. Monotone
///            when h1/h2 = s1/s2, where it collapses to a second difference
///            along the diffusion direction.
///   central: 4-corner stencil (V++ - V+- - V-+ + V--)/(4 h1 h2). Consistent
///            but never monotone.
enum class CrossStencil { aligned, central };

inline CrossStencil parse_stencil(const std::string& name) {
  if (name == "aligned") return CrossStencil::aligned;
  if (name == "central") return CrossStencil::central;
  throw ConfigError("pde_solver", "grid.stencil", "unknown stencil '" + name + "'");
}

inline Scheme parse_scheme(const std::string& name) {
  if (name == "explicit") return Scheme::explicit_euler;
  if (name == "implicit") return Scheme::implicit_euler;
  throw ConfigError("pde_solver", "scheme", "expected explicit or implicit, got '" + name + "'");
}

struct PdeProblem {
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double strike = 0.0;
  double threshold = 3.0;  // X
  double major_cap = 40.0;
  double payoff_scale = 1.0;

  double s1_lo() const noexcept { return threshold; }
  double s1_hi() const noexcept { return major_cap; }
  double s2_lo() const noexcept { return 0.0; }
  double s2_hi() const noexcept { return threshold; }

  bool contains_closed(double s1, double s2) const noexcept {
    return s1 >= s1_lo() && s1 <= s1_hi() && s2 >= s2_lo() && s2 <= s2_hi();
  }
  bool contains_open(double s1, double s2) const noexcept {
    return s1 > s1_lo() && s1 < s1_hi() && s2 > s2_lo() && s2 < s2_hi();
  }
  /// Largest payoff on the closed domain.
  double payoff_bound() const noexcept {
    return payoff_scale * std::max(0.0, s1_hi() + s2_hi() - strike);
  }

  static PdeProblem from(const CoalitionScenario& sc) {
    PdeProblem p;
    p.sigma1 = sc.major.volatility;
    p.sigma2 = sc.minor.volatility;
    p.strike = sc.strike;
    p.threshold = sc.rules.threshold;
    p.major_cap = sc.rules.major_cap;
    return p;
  }
};

inline double payoff(double s1, double s2, double strike) { return std::max(s1 + s2 - strike, 0.0); }

/// Sufficient explicit stability bound 1 / (s1^2/h1^2 + 2 s1 s2/(h1 h2) + s2^2/h2^2).
inline double explicit_stability_bound(double sigma1, double sigma2, double h1, double h2) {
  const double denom = sigma1 * sigma1 / (h1 * h1) + 2.0 * sigma1 * sigma2 / (h1 * h2) + sigma2 * sigma2 / (h2 * h2);
  return denom > 0.0 ? 1.0 / denom : std::numeric_limits<double>::infinity();
}

struct GridSpec {
  double h1 = 0.05;
  double h2 = 0.05;
  double dt = 1e-3;
  int n1 = 0;  // interior nodes in S1; nodes are 0..n1+1
  int n2 = 0;
  double s1_lo = 3.0;
  double s2_lo = 0.0;
  CrossStencil stencil = CrossStencil::aligned;

  double s1(int i) const noexcept { return s1_lo + h1 * i; }
  double s2(int j) const noexcept { return s2_lo + h2 * j; }
  int nodes1() const noexcept { return n1 + 2; }
  int nodes2() const noexcept { return n2 + 2; }
};

/// Builds a grid for `problem`. Steps are snapped so they divide the domain
/// exactly. Without an explicit h1 the aligned stencil picks h1 = h2 s1/s2.
/// Without an explicit dt, dt is 90% of the explicit stability bound.
inline GridSpec make_grid(const PdeProblem& problem, std::optional<double> h1, double h2,
                          std::optional<double> dt, CrossStencil stencil = CrossStencil::aligned,
                          Scheme scheme = Scheme::explicit_euler) {
  if (!(h2 > 0.0) || (h1 && !(*h1 > 0.0)) || (dt && !(*dt > 0.0)))
    throw ConfigError("pde_solver", "grid", "steps must be positive");
  if (!(problem.sigma1 >= 0.0 && problem.sigma2 >= 0.0))
    throw ConfigError("pde_solver", "sigma", "volatilities must be non-negative");
  const double ext1 = problem.s1_hi() - problem.s1_lo();
  const double ext2 = problem.s2_hi() - problem.s2_lo();
  if (!(ext1 > 0.0 && ext2 > 0.0)) throw ConfigError("pde_solver", "domain", "empty domain");

  double want_h1 = 0.25;
  if (h1) {
    want_h1 = *h1;
  } else if (stencil == CrossStencil::aligned && problem.sigma1 > 0.0 && problem.sigma2 > 0.0) {
    want_h1 = h2 * problem.sigma1 / problem.sigma2;
  }
  const int cells1 = std::max(2, static_cast<int>(std::lround(ext1 / want_h1)));
  const int cells2 = std::max(2, static_cast<int>(std::lround(ext2 / h2)));

  GridSpec g;
  g.h1 = ext1 / cells1;
  g.h2 = ext2 / cells2;
  g.n1 = cells1 - 1;
  g.n2 = cells2 - 1;
  g.s1_lo = problem.s1_lo();
  g.s2_lo = problem.s2_lo();
  g.stencil = stencil;
  const double bound = explicit_stability_bound(problem.sigma1, problem.sigma2, g.h1, g.h2);
  if (dt) {
    g.dt = *dt;
    if (scheme == Scheme::explicit_euler && g.dt > bound * (1.0 + 1e-12))
      throw NumericError("pde_solver", "explicit stability violated: dt = " + std::to_string(g.dt) +
                                           " exceeds bound " + std::to_string(bound));
  } else {
    g.dt = std::isfinite(bound) ? 0.9 * bound : 1e-3;
  }
  return g;
}

inline GridSpec make_grid(const PdeProblem& problem, const GridSettings& settings,
                          Scheme scheme = Scheme::explicit_euler) {
  return make_grid(problem, settings.h1, settings.h2, settings.dt, parse_stencil(settings.stencil), scheme);
}

/// Surface interpolation.
///   bilinear: exact at nodes, gradient jumps across cell edges.
///   cubic:    Catmull-Rom in each direction, C1 across cells. Ghost nodes
///             outside the grid are linear extrapolations.
enum class Interpolation { bilinear, cubic };

struct Surface {
  double tau = 0.0;  // time remaining to the election, T - t
  long steps = 0;    // solver iterations taken to reach tau
  Eigen::MatrixXd values;  // nodes1 x nodes2, boundary included
  GridSpec grid;

  double at(int i, int j) const { return values(i, j); }

  /// Exact at nodes for both interpolations.
  double value_at(double s1, double s2, Interpolation how = Interpolation::bilinear) const {
    const double x = (s1 - grid.s1_lo) / grid.h1;
    const double y = (s2 - grid.s2_lo) / grid.h2;
    const double last1 = grid.n1 + 1;
    const double last2 = grid.n2 + 1;
    constexpr double snap = 1e-9;
    if (x < -snap || y < -snap || x > last1 + snap || y > last2 + snap)
      throw ConfigError("pde_solver", "point", "(" + std::to_string(s1) + ", " + std::to_string(s2) +
                                                   ") lies outside the closed domain");
    auto split = [](double u, double last, int& cell, double& w) {
      const double r = std::round(u);
      if (std::abs(u - r) <= snap) u = r;
      u = std::clamp(u, 0.0, last);
      cell = std::min(static_cast<int>(std::floor(u)), static_cast<int>(last) - 1);
      w = u - cell;
    };
    int i = 0, j = 0;
    double wx = 0.0, wy = 0.0;
    split(x, last1, i, wx);
    split(y, last2, j, wy);
    if (wx == 0.0 && wy == 0.0) return values(i, j);
    if (how == Interpolation::cubic) {
      const auto ax = catmull_rom(wx), ay = catmull_rom(wy);
      double v = 0.0;
      for (int a = 0; a < 4; ++a) {
        if (ax[a] == 0.0) continue;
        double col = 0.0;
        for (int b = 0; b < 4; ++b)
          if (ay[b] != 0.0) col += ay[b] * ghost(i - 1 + a, j - 1 + b);
        v += ax[a] * col;
      }
      return v;
    }
    const double v00 = values(i, j), v10 = values(i + 1, j), v01 = values(i, j + 1), v11 = values(i + 1, j + 1);
    return (1.0 - wx) * ((1.0 - wy) * v00 + wy * v01) + wx * ((1.0 - wy) * v10 + wy * v11);
  }

private:
  static std::array<double, 4> catmull_rom(double t) noexcept {
    const double t2 = t * t, t3 = t2 * t;
    return {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0), 0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2)};
  }

  double ghost(int i, int j) const {
    const int l1 = static_cast<int>(values.rows()) - 1, l2 = static_cast<int>(values.cols()) - 1;
    if (i < 0) return 2.0 * ghost(0, j) - ghost(1, j);
    if (i > l1) return 2.0 * ghost(l1, j) - ghost(l1 - 1, j);
    if (j < 0) return 2.0 * values(i, 0) - values(i, 1);
    if (j > l2) return 2.0 * values(i, l2) - values(i, l2 - 1);
    return values(i, j);
  }
};

/// Payoff sampled on the grid nodes with the boundary zeroed.
inline Surface payoff_surface(const PdeProblem& problem, const GridSpec& grid) {
  Surface s;
  s.grid = grid;
  s.values = Eigen::MatrixXd::Zero(grid.nodes1(), grid.nodes2());
  for (int j = 1; j <= grid.n2; ++j)
    for (int i = 1; i <= grid.n1; ++i)
      s.values(i, j) = problem.payoff_scale * payoff(grid.s1(i), grid.s2(j), problem.strike);
  return s;
}

struct SolveOptions {
  /// Called with the surface after every step (full-history mode).
  std::function<void(const Surface&)> on_step;
  /// Throw NumericError as soon as a step leaves [0, payoff_bound].
  bool enforce_maximum_principle = false;
  double implicit_tolerance = 1e-12;
  int implicit_max_iterations = 5000;
};

struct SolveStats {
  long steps = 0;
  double min_value = 0.0;  // over every surface visited, boundary included
  double max_value = 0.0;
  int max_linear_iterations = 0;
};

struct SolveResult {
  std::vector<Surface> surfaces;  // one per requested horizon, ascending tau
  SolveStats stats;
};

/// Number of solver steps used for horizon `tau` on `grid`.
inline long steps_for(double tau, const GridSpec& grid) {
  if (!(tau >= 0.0)) throw ConfigError("pde_solver", "horizon", "horizons must be non-negative");
  return std::lround(tau / grid.dt);
}

namespace detail {

struct StencilWeights {
  double center = 0.0;
  double e1 = 0.0;    // (i +- 1, j)
  double e2 = 0.0;    // (i, j +- 1)
  double diag = 0.0;  // (i+1, j+1) and (i-1, j-1)
  double anti = 0.0;  // (i+1, j-1) and (i-1, j+1)
};

inline StencilWeights operator_weights(const PdeProblem& p, const GridSpec& g) {
  const double a1 = 0.5 * p.sigma1 * p.sigma1 / (g.h1 * g.h1);
  const double a2 = 0.5 * p.sigma2 * p.sigma2 / (g.h2 * g.h2);
  const double c = p.sigma1 * p.sigma2 / (g.h1 * g.h2);
  StencilWeights w;
  if (g.stencil == CrossStencil::central) {
    w.center = -2.0 * a1 - 2.0 * a2;
    w.e1 = a1;
    w.e2 = a2;
    w.diag = 0.25 * c;
    w.anti = -0.25 * c;
  } else {
    w.center = -2.0 * a1 - 2.0 * a2 + c;
    w.e1 = a1 - 0.5 * c;
    w.e2 = a2 - 0.5 * c;
    w.diag = 0.5 * c;
    w.anti = 0.0;
  }
  return w;
}

inline void apply_operator(const StencilWeights& w, const Eigen::MatrixXd& v, Eigen::MatrixXd& out, double dt,
                           int n1, int n2) {
  for (int j = 1; j <= n2; ++j) {
    const double* cm = v.col(j - 1).data();
    const double* c0 = v.col(j).data();
    const double* cp = v.col(j + 1).data();
    double* o = out.col(j).data();
    for (int i = 1; i <= n1; ++i) {
      double lv = w.center * c0[i] + w.e1 * (c0[i + 1] + c0[i - 1]) + w.e2 * (cp[i] + cm[i]) +
                  w.diag * (cp[i + 1] + cm[i - 1]);
      if (w.anti != 0.0) lv += w.anti * (cm[i + 1] + cp[i - 1]);
      o[i] = c0[i] + dt * lv;
    }
  }
}

class ImplicitStepper {
public:
  ImplicitStepper(const StencilWeights& w, const GridSpec& g, const SolveOptions& opt) : n1_(g.n1), n2_(g.n2) {
    const int n = n1_ * n2_;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) * 9);
    auto idx = [&](int i, int j) { return (j - 1) * n1_ + (i - 1); };
    auto add = [&](int row, int i, int j, double val) {
      if (val == 0.0 || i < 1 || j < 1 || i > n1_ || j > n2_) return;
      trips.emplace_back(row, idx(i, j), -g.dt * val);
    };
    for (int j = 1; j <= n2_; ++j) {
      for (int i = 1; i <= n1_; ++i) {
        const int r = idx(i, j);
        trips.emplace_back(r, r, 1.0 - g.dt * w.center);
        add(r, i + 1, j, w.e1);
        add(r, i - 1, j, w.e1);
        add(r, i, j + 1, w.e2);
        add(r, i, j - 1, w.e2);
        add(r, i + 1, j + 1, w.diag);
        add(r, i - 1, j - 1, w.diag);
        add(r, i + 1, j - 1, w.anti);
        add(r, i - 1, j + 1, w.anti);
      }
    }
    matrix_.resize(n, n);
    matrix_.setFromTriplets(trips.begin(), trips.end());
    solver_.setTolerance(opt.implicit_tolerance);
    solver_.setMaxIterations(opt.implicit_max_iterations);
    solver_.compute(matrix_);
    rhs_.resize(n);
  }

  int step(Eigen::MatrixXd& v) {
    for (int j = 1; j <= n2_; ++j) rhs_.segment((j - 1) * n1_, n1_) = v.col(j).segment(1, n1_);
    Eigen::VectorXd x = solver_.solveWithGuess(rhs_, rhs_);
    if (solver_.info() != Eigen::Success)
      throw NumericError("pde_solver", "implicit solve did not converge: iterations = " +
                                           std::to_string(solver_.iterations()) +
                                           ", estimated error = " + std::to_string(solver_.error()));
    for (int j = 1; j <= n2_; ++j) v.col(j).segment(1, n1_) = x.segment((j - 1) * n1_, n1_);
    return static_cast<int>(solver_.iterations());
  }

private:
  int n1_, n2_;
  Eigen::SparseMatrix<double> matrix_;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::DiagonalPreconditioner<double>> solver_;
  Eigen::VectorXd rhs_;
};

}  // namespace detail

/// Solves from the payoff (tau = 0) and returns surfaces at `output_taus`,
/// each snapped to a whole number of steps of `grid.dt`.
inline SolveResult solve_backward(const PdeProblem& problem, const GridSpec& grid, Scheme scheme,
                                  std::span<const double> output_taus, const SolveOptions& opt = {}) {
  if (!std::isfinite(problem.strike)) throw ConfigError("pde_solver", "strike", "must be finite");
  if (scheme == Scheme::explicit_euler) {
    const double bound = explicit_stability_bound(problem.sigma1, problem.sigma2, grid.h1, grid.h2);
    if (grid.dt > bound * (1.0 + 1e-12))
      throw NumericError("pde_solver", "explicit stability violated: dt = " + std::to_string(grid.dt) +
                                           " exceeds bound " + std::to_string(bound));
  }
  std::vector<long> targets;
  for (double t : output_taus) targets.push_back(steps_for(t, grid));
  if (!std::is_sorted(targets.begin(), targets.end()))
    throw ConfigError("pde_solver", "horizon", "output horizons must be ascending");

  SolveResult result;
  Surface cur = payoff_surface(problem, grid);
  result.stats.min_value = cur.values.minCoeff();
  result.stats.max_value = cur.values.maxCoeff();
  const double upper = problem.payoff_bound();
  const bool frozen = problem.sigma1 == 0.0 && problem.sigma2 == 0.0;

  const auto w = detail::operator_weights(problem, grid);
  std::optional<detail::ImplicitStepper> implicit;
  if (scheme == Scheme::implicit_euler && !frozen && !targets.empty() && targets.back() > 0)
    implicit.emplace(w, grid, opt);
  Eigen::MatrixXd next = cur.values;

  long step = 0;
  for (long target : targets) {
    while (step < target) {
      if (!frozen) {
        if (implicit) {
          result.stats.max_linear_iterations = std::max(result.stats.max_linear_iterations, implicit->step(cur.values));
        } else {
          detail::apply_operator(w, cur.values, next, grid.dt, grid.n1, grid.n2);
          cur.values.swap(next);
        }
      }
      ++step;
      cur.steps = step;
      cur.tau = step * grid.dt;
      const double lo = cur.values.minCoeff();
      const double hi = cur.values.maxCoeff();
      result.stats.min_value = std::min(result.stats.min_value, lo);
      result.stats.max_value = std::max(result.stats.max_value, hi);
      if (opt.enforce_maximum_principle && (lo < 0.0 || hi > upper))
        throw NumericError("pde_solver", "maximum principle violated at step " + std::to_string(step) +
                                             ": range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      if (opt.on_step) opt.on_step(cur);
    }
    cur.steps = step;
    cur.tau = step * grid.dt;
    result.surfaces.push_back(cur);
  }
  result.stats.steps = step;
  return result;
}

/// Bilinear probe of each surface at (s1, s2): pairs of (tau, value).
inline std::vector<std::pair<double, double>> probe(std::span<const Surface> surfaces, double s1, double s2) {
  std::vector<std::pair<double, double>> out;
  out.reserve(surfaces.size());
  for (const auto& s : surfaces) out.emplace_back(s.tau, s.value_at(s1, s2));
  return out;
}

/// Central-difference estimate of dV/dS1 + (s2/s1) dV/dS2. Difference steps
/// are `rel_step` grid spacings, shortened to stay inside the closed domain.
inline double delta_hedge_ratio(const Surface& surface, double s1, double s2, double sigma1, double sigma2,
                                double rel_step = 1.0, Interpolation how = Interpolation::bilinear) {
  if (!(sigma1 > 0.0)) throw NumericError("pde_solver", "hedge ratio undefined for sigma1 = 0");
  const auto& g = surface.grid;
  const double lo1 = g.s1_lo, hi1 = g.s1(g.n1 + 1), lo2 = g.s2_lo, hi2 = g.s2(g.n2 + 1);
  if (!(s1 >= lo1 && s1 <= hi1 && s2 >= lo2 && s2 <= hi2))
    throw ConfigError("pde_solver", "point", "hedge ratio requested outside the domain");
  auto partial = [&](double x, double lo, double hi, double h, auto&& eval) {
    const double a = std::max(lo, x - h), b = std::min(hi, x + h);
    return (eval(b) - eval(a)) / (b - a);
  };
  const double d1 = partial(s1, lo1, hi1, rel_step * g.h1, [&](double x) { return surface.value_at(x, s2, how); });
  const double d2 = partial(s2, lo2, hi2, rel_step * g.h2, [&](double y) { return surface.value_at(s1, y, how); });
  return d1 + (sigma2 / sigma1) * d2;
}

}  // namespace coalition

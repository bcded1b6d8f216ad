#pragma once

// Path simulation of the support dynamics dS_i = mu_i dt + sigma_i dW with a
// single Brownian driver shared by both parties, Feynman-Kac pricing with an
// absorbing boundary, and the delta-hedge noise cancellation check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "coalition/election_model.hpp"
#include "coalition/errors.hpp"
#include "coalition/pde_solver.hpp"
#include "coalition/philox.hpp"

namespace coalition {

enum class DriftMode { real_world, pricing };

/// How exits from D between two time steps are detected.
///   discrete: only the sampled positions are checked.
///   bridge:   additionally kills a surviving step with the Brownian-bridge
///             probability of having touched a side in between.
enum class Monitoring { discrete, bridge };

struct PathConfig {
  std::size_t n_paths = 10000;
  int n_steps = 100;
  double horizon = 0.2;  // tau at signing
  std::uint64_t seed = 1;
  DriftMode mode = DriftMode::pricing;
  Monitoring monitoring = Monitoring::bridge;
  bool absorbing = true;
  unsigned workers = 1;

  void validate() const {
    if (n_paths < 1) throw ConfigError("monte_carlo", "n_paths", "must be at least 1");
    if (n_steps < 1) throw ConfigError("monte_carlo", "n_steps", "must be at least 1");
    if (!(horizon >= 0.0)) throw ConfigError("monte_carlo", "horizon", "must be non-negative");
    if (workers < 1) throw ConfigError("monte_carlo", "workers", "must be at least 1");
  }
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double killed_fraction = 0.0;
  std::size_t n_paths = 0;
};

struct HedgeReport {
  double variance_hedged = 0.0;
  double variance_unhedged = 0.0;
  double ratio = 0.0;
  double dt_used = 0.0;
};

struct PathEnsemble {
  std::vector<double> times;  // calendar time from signing, 0..horizon
  Eigen::MatrixXd s1;         // n_paths x (n_steps + 1)
  Eigen::MatrixXd s2;
  std::vector<int> absorbed_step;  // first step outside D, -1 if never
};

namespace detail {

/// Draw layout per step k: index 2k gives the Gaussian, 2k+1 the bridge uniform.
struct StepDraws {
  static std::uint64_t gaussian(int step) noexcept { return 2 * static_cast<std::uint64_t>(step); }
  static std::uint64_t uniform(int step) noexcept { return 2 * static_cast<std::uint64_t>(step) + 1; }
};

inline double bridge_hit_probability(double before, double after, double barrier, double sigma, double dt) {
  if (sigma <= 0.0) return 0.0;
  const double expo = 2.0 * (before - barrier) * (after - barrier) / (sigma * sigma * dt);
  return expo > 50.0 ? 0.0 : std::exp(-expo);
}

/// Probability the shared-noise path crossed a side of D during a step whose
/// endpoints both lie inside D.
inline double crossing_probability(const PdeProblem& p, double a1, double a2, double b1, double b2, double dt) {
  double survive = 1.0;
  survive *= 1.0 - bridge_hit_probability(a1, b1, p.s1_lo(), p.sigma1, dt);
  survive *= 1.0 - bridge_hit_probability(a1, b1, p.s1_hi(), p.sigma1, dt);
  survive *= 1.0 - bridge_hit_probability(a2, b2, p.s2_lo(), p.sigma2, dt);
  survive *= 1.0 - bridge_hit_probability(a2, b2, p.s2_hi(), p.sigma2, dt);
  return 1.0 - survive;
}

/// Runs `body(first, last)` over fixed blocks of paths. Block boundaries do
/// not depend on the worker count.
template <class Body>
void for_each_block(std::size_t n_paths, std::size_t block, unsigned workers, Body&& body) {
  const std::size_t n_blocks = (n_paths + block - 1) / block;
  auto run = [&](unsigned w) {
    for (std::size_t b = w; b < n_blocks; b += workers) body(b, b * block, std::min(n_paths, (b + 1) * block));
  };
  if (workers <= 1) {
    run(0);
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
}

inline constexpr std::size_t kBlock = 1024;

}  // namespace detail

/// Euler-Maruyama ensemble. Positions keep evolving after absorption; the
/// absorbed step records when the path first left D.
inline PathEnsemble simulate_paths(const CoalitionScenario& scenario, const PathConfig& config) {
  config.validate();
  const PdeProblem problem = PdeProblem::from(scenario);
  const int n = config.n_steps;
  const double dt = config.horizon / n;
  const double sq = std::sqrt(dt);
  const bool drift = config.mode == DriftMode::real_world;
  const double m1 = drift ? scenario.major.drift : 0.0;
  const double m2 = drift ? scenario.minor.drift : 0.0;
  const double sg1 = scenario.major.volatility, sg2 = scenario.minor.volatility;

  PathEnsemble e;
  e.times.resize(n + 1);
  for (int k = 0; k <= n; ++k) e.times[k] = k * dt;
  e.s1.resize(static_cast<Eigen::Index>(config.n_paths), n + 1);
  e.s2.resize(static_cast<Eigen::Index>(config.n_paths), n + 1);
  e.absorbed_step.assign(config.n_paths, -1);

  detail::for_each_block(config.n_paths, detail::kBlock, config.workers, [&](std::size_t, std::size_t lo,
                                                                             std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const PathStream rng(config.seed, i);
      const auto r = static_cast<Eigen::Index>(i);
      double x1 = scenario.major.support0, x2 = scenario.minor.support0;
      e.s1(r, 0) = x1;
      e.s2(r, 0) = x2;
      if (!problem.contains_open(x1, x2)) e.absorbed_step[i] = 0;
      for (int k = 0; k < n; ++k) {
        const double dw = sq * rng.normal(detail::StepDraws::gaussian(k));
        const double y1 = x1 + m1 * dt + sg1 * dw;
        const double y2 = x2 + m2 * dt + sg2 * dw;
        if (e.absorbed_step[i] < 0) {
          bool out = !problem.contains_open(y1, y2);
          if (!out && config.monitoring == Monitoring::bridge) {
            const double u = rng.uniforms(detail::StepDraws::uniform(k))[0];
            out = u < detail::crossing_probability(problem, x1, x2, y1, y2, dt);
          }
          if (out) e.absorbed_step[i] = k + 1;
        }
        x1 = y1;
        x2 = y2;
        e.s1(r, k + 1) = x1;
        e.s2(r, k + 1) = x2;
      }
    }
  });
  return e;
}

/// Feynman-Kac estimate of V at the scenario point for time-to-election
/// `config.horizon`: mean of the payoff over paths that stay in D, zero
/// otherwise. Always driftless, since the pricing equation carries no drift.
inline McEstimate mc_price(const CoalitionScenario& scenario, const PdeProblem& problem, const PathConfig& config) {
  config.validate();
  const double x10 = scenario.major.support0, x20 = scenario.minor.support0;
  if (!problem.contains_closed(x10, x20))
    throw ConfigError("monte_carlo", "start", "start point lies outside the domain");
  const int n = config.n_steps;
  const double dt = config.horizon / n;
  const double sq = std::sqrt(dt);
  const double sg1 = problem.sigma1, sg2 = problem.sigma2;
  const bool start_inside = problem.contains_open(x10, x20);

  const std::size_t n_blocks = (config.n_paths + detail::kBlock - 1) / detail::kBlock;
  struct Partial {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t killed = 0;
  };
  std::vector<Partial> partials(n_blocks);

  detail::for_each_block(config.n_paths, detail::kBlock, config.workers, [&](std::size_t b, std::size_t lo,
                                                                             std::size_t hi) {
    Partial acc;
    for (std::size_t i = lo; i < hi; ++i) {
      bool alive = start_inside || !config.absorbing;
      double x1 = x10, x2 = x20;
      if (alive) {
        const PathStream rng(config.seed, i);
        for (int k = 0; k < n; ++k) {
          const double dw = sq * rng.normal(detail::StepDraws::gaussian(k));
          const double y1 = x1 + sg1 * dw, y2 = x2 + sg2 * dw;
          if (config.absorbing) {
            if (!problem.contains_open(y1, y2)) {
              alive = false;
              break;
            }
            if (config.monitoring == Monitoring::bridge) {
              const double pk = detail::crossing_probability(problem, x1, x2, y1, y2, dt);
              if (pk > 0.0 && rng.uniforms(detail::StepDraws::uniform(k))[0] < pk) {
                alive = false;
                break;
              }
            }
          }
          x1 = y1;
          x2 = y2;
        }
      }
      if (!alive) {
        ++acc.killed;
        continue;
      }
      const double v = problem.payoff_scale * payoff(x1, x2, problem.strike);
      acc.sum += v;
      acc.sum_sq += v * v;
    }
    partials[b] = acc;
  });

  Partial total;
  for (const auto& p : partials) {
    total.sum += p.sum;
    total.sum_sq += p.sum_sq;
    total.killed += p.killed;
  }
  const double np = static_cast<double>(config.n_paths);
  McEstimate est;
  est.n_paths = config.n_paths;
  est.mean = total.sum / np;
  const double var = config.n_paths > 1 ? std::max(0.0, (total.sum_sq - np * est.mean * est.mean) / (np - 1.0)) : 0.0;
  est.std_error = std::sqrt(var / np);
  est.killed_fraction = static_cast<double>(total.killed) / np;
  return est;
}

/// Per-step increments of V and of the hedged portfolio V - Delta*S1 along
/// driftless paths, with V and Delta read through cubic interpolation so the
/// gradient has no jumps at cell edges. `surfaces` must hold tau = k * horizon / n_steps for
/// k = 0..n_steps in ascending order (as returned by solve_backward).
inline HedgeReport verify_hedge(const CoalitionScenario& scenario, const PdeProblem& problem,
                                std::span<const Surface> surfaces, const PathConfig& config) {
  config.validate();
  if (!(problem.sigma1 > 0.0)) throw NumericError("monte_carlo", "hedge undefined for sigma1 = 0");
  const int n = config.n_steps;
  const double dt = config.horizon / n;
  if (surfaces.size() != static_cast<std::size_t>(n) + 1)
    throw ConfigError("monte_carlo", "surfaces", "need one surface per time level");
  for (int k = 0; k <= n; ++k)
    if (std::abs(surfaces[k].tau - k * dt) > 1e-9 * std::max(1.0, config.horizon))
      throw ConfigError("monte_carlo", "surfaces", "surface " + std::to_string(k) + " is not at tau = k*dt");

  const double sq = std::sqrt(dt);
  struct Moments {
    double n = 0, v = 0, vv = 0, h = 0, hh = 0;
  };
  const std::size_t n_blocks = (config.n_paths + detail::kBlock - 1) / detail::kBlock;
  std::vector<std::vector<Moments>> partial(n_blocks, std::vector<Moments>(n));

  detail::for_each_block(config.n_paths, detail::kBlock, config.workers, [&](std::size_t b, std::size_t lo,
                                                                             std::size_t hi) {
    auto& acc = partial[b];
    for (std::size_t i = lo; i < hi; ++i) {
      const PathStream rng(config.seed, i);
      double x1 = scenario.major.support0, x2 = scenario.minor.support0;
      if (!problem.contains_open(x1, x2)) continue;
      for (int k = 0; k < n; ++k) {
        const double dw = sq * rng.normal(detail::StepDraws::gaussian(k));
        const double y1 = x1 + problem.sigma1 * dw, y2 = x2 + problem.sigma2 * dw;
        if (!problem.contains_open(y1, y2)) break;
        if (config.monitoring == Monitoring::bridge) {
          const double pk = detail::crossing_probability(problem, x1, x2, y1, y2, dt);
          if (pk > 0.0 && rng.uniforms(detail::StepDraws::uniform(k))[0] < pk) break;
        }
        const Surface& now = surfaces[n - k];
        const Surface& later = surfaces[n - k - 1];
        const double dv = later.value_at(y1, y2, Interpolation::cubic) - now.value_at(x1, x2, Interpolation::cubic);
        const double delta =
            delta_hedge_ratio(now, x1, x2, problem.sigma1, problem.sigma2, 1e-3, Interpolation::cubic);
        const double dpi = dv - delta * (y1 - x1);
        auto& m = acc[k];
        m.n += 1;
        m.v += dv;
        m.vv += dv * dv;
        m.h += dpi;
        m.hh += dpi * dpi;
        x1 = y1;
        x2 = y2;
      }
    }
  });

  HedgeReport rep;
  rep.dt_used = dt;
  for (int k = 0; k < n; ++k) {
    Moments m;
    for (const auto& p : partial) {
      m.n += p[k].n;
      m.v += p[k].v;
      m.vv += p[k].vv;
      m.h += p[k].h;
      m.hh += p[k].hh;
    }
    if (m.n < 2) continue;
    rep.variance_unhedged += std::max(0.0, m.vv / m.n - (m.v / m.n) * (m.v / m.n));
    rep.variance_hedged += std::max(0.0, m.hh / m.n - (m.h / m.n) * (m.h / m.n));
  }
  rep.ratio = rep.variance_unhedged > 0.0 ? rep.variance_hedged / rep.variance_unhedged : 0.0;
  return rep;
}

/// Hedge reports for `levels` step counts base_steps * 2^m. Each level gets
/// its own explicit solve whose step divides the simulation step, so every
/// simulation time level has an exact surface.
inline std::vector<HedgeReport> hedge_convergence(const CoalitionScenario& scenario, const PdeProblem& problem,
                                                  const GridSettings& grid_settings, PathConfig config,
                                                  int base_steps, int levels) {
  std::vector<HedgeReport> out;
  const GridSpec probe_grid = make_grid(problem, grid_settings.h1, grid_settings.h2, std::nullopt,
                                        parse_stencil(grid_settings.stencil));
  const double bound = explicit_stability_bound(problem.sigma1, problem.sigma2, probe_grid.h1, probe_grid.h2);
  for (int m = 0; m < levels; ++m) {
    config.n_steps = base_steps << m;
    const double mc_dt = config.horizon / config.n_steps;
    const double sub = std::ceil(mc_dt / (0.9 * bound));
    GridSpec grid = probe_grid;
    grid.dt = mc_dt / sub;
    std::vector<double> taus;
    for (int k = 0; k <= config.n_steps; ++k) taus.push_back(k * mc_dt);
    const auto solved = solve_backward(problem, grid, Scheme::explicit_euler, taus);
    out.push_back(verify_hedge(scenario, problem, solved.surfaces, config));
  }
  return out;
}

/// Per-time quantiles of the coalition total S1 + S2.
inline std::vector<std::vector<double>> ensemble_quantiles(const PathEnsemble& e, std::span<const double> qs) {
  std::vector<std::vector<double>> out;
  std::vector<double> col(static_cast<std::size_t>(e.s1.rows()));
  for (Eigen::Index k = 0; k < e.s1.cols(); ++k) {
    for (Eigen::Index i = 0; i < e.s1.rows(); ++i) col[static_cast<std::size_t>(i)] = e.s1(i, k) + e.s2(i, k);
    std::sort(col.begin(), col.end());
    std::vector<double> row;
    for (double q : qs) {
      // linear interpolation between order statistics
      const double pos = q * (col.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, col.size() - 1);
      row.push_back(col[lo] + (pos - lo) * (col[hi] - col[lo]));
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace coalition

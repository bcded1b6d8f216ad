#include <random>

#include <gtest/gtest.h>

#include "coalition/characteristic_oracle.hpp"
#include "oracles.hpp"

using namespace coalition;

namespace {

PdeProblem problem(double strike, double sigma1 = 1.0, double sigma2 = 1.0) {
  PdeProblem p;
  p.sigma1 = sigma1;
  p.sigma2 = sigma2;
  p.strike = strike;
  return p;
}

const double kRoot2 = std::sqrt(2.0);

}  // namespace

TEST(Lines, FfmLineGeometry) {
  const auto p = problem(15.65);
  EXPECT_DOUBLE_EQ(characteristic_offset(p, 13.5, 1.0), 12.5);
  const auto line = line_through(p, 13.5, 1.0);
  EXPECT_NEAR(line.start1, 12.5, 1e-12);
  EXPECT_NEAR(line.start2, 0.0, 1e-12);
  EXPECT_NEAR(line.length, 3.0 * kRoot2, 1e-12);
  EXPECT_DOUBLE_EQ(line.diffusion, 1.0);
  EXPECT_NEAR(line.coordinate_of(13.5, 1.0), kRoot2, 1e-12);
  ASSERT_TRUE(line.kink().has_value());
  EXPECT_NEAR(*line.kink(), 3.15 / kRoot2, 1e-12);
  EXPECT_NEAR(line.payoff_trace(3.0 * kRoot2), 2.85, 1e-12);

  const auto same = line_for_offset(p, 12.5);
  EXPECT_NEAR(same.start1, line.start1, 1e-12);
  EXPECT_NEAR(same.length, line.length, 1e-12);
}

TEST(Lines, CornerOffsetsAreRejected) {
  const auto p = problem(15.65);
  EXPECT_THROW(line_for_offset(p, 40.0), ConfigError);
  EXPECT_THROW(line_for_offset(p, 0.0), ConfigError);
  EXPECT_THROW(line_for_offset(p, 50.0), ConfigError);
  const auto [lo, hi] = offset_range(p);
  EXPECT_DOUBLE_EQ(lo, 0.0);
  EXPECT_DOUBLE_EQ(hi, 40.0);
  EXPECT_THROW(line_for_offset(problem(15.65, 0.0, 0.0), 1.0), ConfigError);
}

TEST(Lines, DecompositionCoversTheDomain) {
  for (auto [s1v, s2v] : {std::pair{1.0, 1.0}, {2.0, 0.5}, {0.3, 1.7}}) {
    const auto p = problem(20.0, s1v, s2v);
    const auto offsets = uniform_offsets(p, 64);
    const auto lines = decompose(p, offsets);
    ASSERT_EQ(lines.size(), 64u);
    for (const auto& l : lines) {
      EXPECT_GT(l.length, 0.0);
      EXPECT_NEAR(characteristic_offset(p, l.point1(0.0), l.point2(0.0)), l.offset, 1e-9);
      EXPECT_NEAR(characteristic_offset(p, l.point1(l.length), l.point2(l.length)), l.offset, 1e-9);
      EXPECT_TRUE(p.contains_closed(l.point1(0.5 * l.length), l.point2(0.5 * l.length)));
    }
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u1(3.0, 40.0), u2(0.0, 3.0);
    for (int k = 0; k < 500; ++k) {
      const double a = u1(rng), b = u2(rng);
      const auto l = line_through(p, a, b);
      const double s = l.coordinate_of(a, b);
      EXPECT_GE(s, -1e-9);
      EXPECT_LE(s, l.length + 1e-9);
      EXPECT_NEAR(l.point1(s), a, 1e-9);
      EXPECT_NEAR(l.point2(s), b, 1e-9);
      const auto [lo, hi] = offset_range(p);
      EXPECT_GE(l.offset, lo);
      EXPECT_LE(l.offset, hi);
    }
  }
}

TEST(SineSeries, EigenfunctionEvolvesExactly) {
  const double L = 3.0, D = 0.7;
  auto f = [&](double s) { return std::sin(3.0 * std::numbers::pi * s / L); };
  const auto series = SineSeries::from_trace(f, L, D, 20);
  const auto c = series.coefficients();
  for (int n = 1; n <= 20; ++n) EXPECT_NEAR(c[n - 1], n == 3 ? 1.0 : 0.0, 1e-10) << n;
  for (double tau : {0.0, 0.05, 0.3}) {
    const double want = std::sin(3.0 * std::numbers::pi * 1.1 / L) *
                        std::exp(-D * std::pow(3.0 * std::numbers::pi / L, 2) * tau);
    EXPECT_NEAR(series.evaluate(1.1, tau).value, want, 1e-10);
  }
}

TEST(SineSeries, CoefficientsMatchClosedForm) {
  const auto line = line_through(problem(15.65), 13.5, 1.0);
  const auto series = SineSeries::from_line(line, 400);
  const auto c = series.coefficients();
  for (int n = 1; n <= 100; ++n)
    EXPECT_NEAR(c[n - 1], oracle::ramp_coefficient(n, kRoot2, 3.15, line.length), 1e-6) << n;
}

TEST(SineSeries, TruncationErrorShrinksWithModes) {
  const auto line = line_through(problem(15.65), 13.5, 1.0);
  const int samples = 2000;
  double previous = INFINITY;
  for (int modes : {10, 40, 160}) {
    const auto series = SineSeries::from_line(line, modes);
    double sq = 0.0;
    for (int k = 1; k < samples; ++k) {
      const double s = line.length * k / samples;
      const double d = series.evaluate(s, 0.0).value - line.payoff_trace(s);
      sq += d * d;
    }
    const double l2 = std::sqrt(sq * line.length / samples);
    EXPECT_LT(l2, previous) << modes;
    previous = l2;
  }
}

TEST(SineSeries, TailBoundCoversTruncation) {
  const auto line = line_through(problem(26.4), 24.1, 2.2);
  const double s = line.coordinate_of(24.1, 2.2);
  const auto full = SineSeries::from_line(line, 400).evaluate(s, 0.05);
  const auto few = SineSeries::from_line(line, 8).evaluate(s, 0.05);
  EXPECT_LE(std::abs(full.value - few.value), few.tail_bound + 1e-9);
  EXPECT_LT(full.tail_bound, 1e-12);
  EXPECT_TRUE(std::isinf(SineSeries::from_line(line, 8).evaluate(s, 0.0).tail_bound));
}

TEST(SineSeries, AgreesWithIndependentHeatSolver) {
  const auto line = line_through(problem(15.65), 13.5, 1.0);
  const int nodes = 2001;
  const auto series = SineSeries::from_line(line, 400);
  for (double tau : {0.1, 0.4}) {
    const auto u = oracle::heat_1d([&](double s) { return line.payoff_trace(s); }, line.length, line.diffusion, tau,
                                    nodes, 2000);
    const double h = line.length / (nodes - 1);
    for (int i : {100, 667, 1000, 1800}) EXPECT_NEAR(series.evaluate(i * h, tau).value, u[i], 1e-4) << tau;
  }
}

TEST(OraclePrice, DecaysToZeroForLongHorizons) {
  const auto p = problem(15.65);
  const double early = oracle_price(p, 13.5, 1.0, 1.0).value;
  const double late = oracle_price(p, 13.5, 1.0, 60.0).value;
  EXPECT_GT(early, 0.0);
  EXPECT_LT(late, 1e-6);
}

TEST(OraclePrice, FfmIncreasesOverScannedHorizons) {
  const auto p = problem(15.65);
  double previous = 0.0;
  for (double tau : {0.05, 0.1, 0.2, 0.3, 0.4}) {
    const double v = oracle_price(p, 13.5, 1.0, tau).value;
    EXPECT_GT(v, previous) << tau;
    previous = v;
  }
}

TEST(OraclePrice, MatchesExtendedPrecisionValues) {
  // Closed-form coefficients summed in 50-digit arithmetic.
  const double ffm[] = {0.0086208750094, 0.0419497822165, 0.0821920000388, 0.120451125712};
  const double dps[] = {0.18834250194, 0.198535379807, 0.171894662136, 0.144398042199};
  for (int k = 0; k < 4; ++k) {
    const double tau = 0.1 * (k + 1);
    EXPECT_NEAR(oracle_price(problem(15.65), 13.5, 1.0, tau).value, ffm[k], 1e-7) << tau;
    EXPECT_NEAR(oracle_price(problem(26.4), 24.1, 2.2, tau).value, dps[k], 1e-7) << tau;
  }
}

TEST(OraclePrice, BoundaryAndOutside) {
  const auto p = problem(15.65);
  EXPECT_EQ(oracle_price(p, 3.0, 1.0, 0.2).value, 0.0);
  EXPECT_EQ(oracle_price(p, 20.0, 0.0, 0.2).value, 0.0);
  EXPECT_THROW(oracle_price(p, 41.0, 1.0, 0.2), ConfigError);
  EXPECT_EQ(oracle_price(problem(43.0), 20.0, 1.0, 0.2).value, 0.0);
}

TEST(Transforms, CoincideWhenMajorIsFrozen) {
  const auto p = problem(15.65, 0.0, 1.3);
  for (double tau : {0.05, 0.2}) {
    const auto a = oracle_price(p, 14.0, 1.2, tau, 400, Transform::corrected);
    const auto b = oracle_price(p, 14.0, 1.2, tau, 400, Transform::verbatim);
    EXPECT_NEAR(a.value, b.value, 1e-12);
    EXPECT_GT(a.value, 0.0);
  }
}

TEST(Transforms, DifferWhenBothPartiesMove) {
  const auto p = problem(15.65);
  const auto a = oracle_price(p, 13.5, 1.0, 0.2, 400, Transform::corrected);
  const auto b = oracle_price(p, 13.5, 1.0, 0.2, 400, Transform::verbatim);
  EXPECT_GT(std::abs(a.value - b.value), 1e-3);
}

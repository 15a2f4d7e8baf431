#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "obflab/analytic_olbf.hpp"
#include "obflab/numerics.hpp"
#include "support/oracles.hpp"

namespace nm = obflab::numerics;
using obflab::testing::frozen_oracles;
using obflab::testing::rel_err;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(IncompleteGamma, SpotValues) {
  EXPECT_NEAR(nm::upper_incomplete_gamma(1, 2.0), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(nm::upper_incomplete_gamma(3, 2.0), 10.0 * std::exp(-2.0), 1e-14);
  EXPECT_NEAR(nm::upper_incomplete_gamma(0, 1.0), 0.219383934395520, 1e-13);
  EXPECT_NEAR(nm::upper_incomplete_gamma(-1, 1.0), std::exp(-1.0) - 0.219383934395520, 1e-13);
  EXPECT_NEAR(nm::upper_incomplete_gamma(-1, 1.0), 0.148495506775922, 1e-12);
}

TEST(IncompleteGamma, MatchesFrozenQuadrature) {
  const auto oracles = frozen_oracles();
  int checked = 0;
  for (const auto& row : oracles.at("gamma_upper")) {
    const int s = row.at("s");
    const double x = row.at("x");
    const double want = row.at("value");
    EXPECT_LE(rel_err(nm::upper_incomplete_gamma(s, x), want), 1e-10) << "s=" << s << " x=" << x;
    ++checked;
  }
  EXPECT_EQ(checked, 78);
}

TEST(IncompleteGamma, RecurrenceConsistency) {
  for (int s = -5; s <= 10; ++s) {
    for (double x : {0.5, 2.0, 8.0}) {
      const double lhs = nm::upper_incomplete_gamma(s + 1, x);
      const double rhs = s * nm::upper_incomplete_gamma(s, x) + std::pow(x, s) * std::exp(-x);
      EXPECT_LE(rel_err(rhs, lhs), 1e-10) << "s=" << s << " x=" << x;
    }
  }
}

TEST(IncompleteGamma, DecreasingInX) {
  for (int s = -4; s <= 8; ++s) {
    double prev = kInf;
    for (double x = 0.05; x < 40.0; x *= 1.3) {
      const double g = nm::upper_incomplete_gamma(s, x);
      EXPECT_LT(g, prev) << "s=" << s << " x=" << x;
      prev = g;
    }
  }
}

TEST(IncompleteGamma, ScaledAndShiftedForms) {
  for (int s : {-3, 0, 2, 7}) {
    for (double x : {0.3, 4.0, 25.0}) {
      const double g = nm::upper_incomplete_gamma(s, x);
      EXPECT_LE(rel_err(nm::upper_incomplete_gamma_scaled(s, x), std::exp(x) * g), 1e-12);
      EXPECT_LE(rel_err(nm::upper_incomplete_gamma_shifted(s, x, 1.5), std::exp(1.5) * g), 1e-12);
    }
  }
  // e^x Gamma(s, x) stays finite where Gamma(s, x) underflows
  const double big = nm::upper_incomplete_gamma_scaled(2, 1000.0);
  EXPECT_NEAR(big, 1001.0, 1e-9);
  EXPECT_EQ(nm::upper_incomplete_gamma_shifted(3, kInf, 5.0), 0.0);
}

TEST(IncompleteGamma, DomainErrors) {
  EXPECT_THROW(nm::upper_incomplete_gamma(0, 0.0), std::domain_error);
  EXPECT_THROW(nm::upper_incomplete_gamma(-2, -1.0), std::domain_error);
  EXPECT_THROW(nm::upper_incomplete_gamma(2, -0.5), std::domain_error);
  EXPECT_NEAR(nm::upper_incomplete_gamma(3, 0.0), 2.0, 1e-15);
}

TEST(RegularizedLowerGamma, ComplementsUpper) {
  for (int s = 1; s <= 9; ++s) {
    for (double x : {0.01, 0.7, 3.0, 12.0}) {
      const double upper = nm::upper_incomplete_gamma(s, x) / nm::factorial(s - 1);
      EXPECT_NEAR(nm::regularized_lower_gamma(s, x) + upper, 1.0, 1e-13);
    }
  }
  // small-x accuracy: P(3, x) ~ x^3 / 6
  EXPECT_LE(rel_err(nm::regularized_lower_gamma(3, 1e-4), 1e-12 / 6.0 * (1 - 0.75e-4)), 1e-6);
}

TEST(ExpIntegral, MatchesFrozenQuadrature) {
  const auto oracles = frozen_oracles();
  for (const auto& row : oracles.at("e1")) {
    const double x = row.at("x");
    EXPECT_LE(rel_err(nm::exp_integral_e1(x), row.at("value").get<double>()), 1e-12) << "x=" << x;
  }
}

TEST(ExpIntegral, SpotValuesAndLimit) {
  EXPECT_NEAR(nm::exp_integral_e1(1.0), 0.2193839, 1e-7);
  EXPECT_LE(rel_err(nm::exp_integral_e1(10.0), 4.156968929685324e-6), 1e-10);
  double prev = kInf;
  for (double x = 0.5; x < 700.0; x *= 2.0) {
    const double e = nm::exp_integral_e1(x);
    EXPECT_LT(e, prev);
    EXPECT_GE(e, 0.0);
    prev = e;
  }
  EXPECT_THROW(nm::exp_integral_e1(0.0), std::domain_error);
  EXPECT_THROW(nm::exp_integral_e1(-1.0), std::domain_error);
}

TEST(Integrate1d, Examples) {
  EXPECT_NEAR(nm::integrate_1d([](double t) { return t; }, 0.0, 1.0), 0.5, 1e-14);
  EXPECT_NEAR(nm::integrate_1d([](double t) { return std::exp(-t); }, 0.0, kInf), 1.0, 1e-10);
  EXPECT_NEAR(nm::integrate_1d([](double t) { return 4.0 * t * std::exp(-2.0 * t); }, 0.0, kInf), 1.0, 1e-10);
}

TEST(Integrate1d, EndpointSingularity) {
  const double v = nm::integrate_1d([](double t) { return 1.0 / std::sqrt(t); }, 0.0, 1.0);
  EXPECT_NEAR(v, 2.0, 1e-7);
}

TEST(Integrate1d, NonConvergenceReportsEstimate) {
  nm::QuadratureSpec spec;
  spec.max_subdivisions = 2;
  spec.rel_tol = 1e-14;
  spec.abs_tol = 1e-300;
  try {
    nm::integrate_1d([](double t) { return std::sin(200.0 * t) * std::sin(200.0 * t); }, 0.0, 3.0, spec);
    FAIL() << "expected NonConvergenceError";
  } catch (const nm::NonConvergenceError& e) {
    EXPECT_TRUE(std::isfinite(e.estimate()));
    EXPECT_GT(e.error_bound(), 0.0);
  }
  const auto r = nm::integrate_adaptive([](double t) { return std::sin(200.0 * t) * std::sin(200.0 * t); },
                                        0.0, 3.0, spec);
  EXPECT_FALSE(r.converged);
}

TEST(Integrate1d, Deterministic) {
  auto f = [](double t) { return std::log1p(t) * std::exp(-t * t); };
  EXPECT_EQ(nm::integrate_1d(f, 0.0, 5.0), nm::integrate_1d(f, 0.0, 5.0));
}

TEST(QuadratureSpec, Validation) {
  nm::QuadratureSpec s;
  EXPECT_NO_THROW(s.validate());
  s.rel_tol = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = {};
  s.abs_tol = -1.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = {};
  s.max_subdivisions = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  const auto t = nm::QuadratureSpec{}.tightened();
  EXPECT_DOUBLE_EQ(t.rel_tol, 1e-9);
  EXPECT_DOUBLE_EQ(t.abs_tol, 1e-13);
}

TEST(SemiInfinite, Examples) {
  const auto oracles = frozen_oracles();
  EXPECT_NEAR(nm::integrate_semi_infinite([](double t) { return std::exp(-t); }, 0.0), 1.0, 1e-10);
  const double e_e1 = std::numbers::e * nm::exp_integral_e1(1.0);
  const double v = nm::integrate_semi_infinite([](double t) { return std::log1p(t) * std::exp(-t); }, 0.0);
  EXPECT_LE(rel_err(v, e_e1), 1e-8);
  EXPECT_LE(rel_err(v, oracles.at("log1p_exp_integral").get<double>()), 1e-8);
  EXPECT_NEAR(v, 0.596347, 1e-6);
  EXPECT_LE(rel_err(nm::integrate_semi_infinite([](double t) { return t * std::exp(-t * t); }, 1.0),
                    std::exp(-1.0) / 2.0),
            1e-8);
}

TEST(SemiInfinite, ScaleArgument) {
  // mass far from 1: Gamma(3) law stretched by 400
  auto f = [](double y) {
    const double u = y / 400.0;
    return u * u * std::exp(-u) / (2.0 * 400.0);
  };
  EXPECT_NEAR(nm::integrate_semi_infinite(f, 0.0, {}, 800.0), 1.0, 1e-8);
}

TEST(Nested, Examples) {
  using B = nm::NestedBound;
  auto zero = [](std::span<const double>) { return 0.0; };
  auto one = [](std::span<const double>) { return 1.0; };
  {
    const B bounds[] = {B{zero, one}, B{zero, [](std::span<const double> o) { return o[0]; }}};
    EXPECT_NEAR(nm::integrate_nested([](std::span<const double>) { return 1.0; }, bounds), 0.5, 1e-12);
  }
  {
    const B bounds[] = {B{zero, one}, B{[](std::span<const double> o) { return o[0]; }, one},
                        B{[](std::span<const double> o) { return o[1]; }, one}};
    EXPECT_NEAR(nm::integrate_nested([](std::span<const double>) { return 1.0; }, bounds), 1.0 / 6.0, 1e-12);
  }
  {
    const obflab::OlbfParams p{3, 3, 1.0};
    // z3 outermost, then z2 in [0, 1 - z3], then z1 in [z2 + z3, 1]
    const B bounds[] = {B{zero, one}, B{zero, [](std::span<const double> o) { return 1.0 - o[0]; }},
                        B{[](std::span<const double> o) { return o[0] + o[1]; }, one}};
    const double mass = nm::integrate_nested(
        [&](std::span<const double> z) {
          const double zs[] = {z[2], z[1], z[0]};
          return obflab::olbf_unordered_pdf_z(zs, p);
        },
        bounds);
    EXPECT_NEAR(mass, 1.0, 1e-6);
  }
}

TEST(Nested, DepthCap) {
  using B = nm::NestedBound;
  auto zero = [](std::span<const double>) { return 0.0; };
  auto one = [](std::span<const double>) { return 1.0; };
  const std::vector<B> four(4, B{zero, one});
  EXPECT_THROW(nm::integrate_nested([](std::span<const double>) { return 1.0; }, four), std::invalid_argument);
  EXPECT_NEAR(nm::integrate_iterated([](std::span<const double>) { return 1.0; }, four), 1.0, 1e-12);
}

TEST(Combinatorics, FactorialBinomial) {
  EXPECT_EQ(nm::factorial(0), 1.0);
  EXPECT_EQ(nm::factorial(10), 3628800.0);
  EXPECT_EQ(nm::binomial(10, 3), 120.0);
  EXPECT_EQ(nm::binomial(4, 0), 1.0);
  EXPECT_EQ(nm::binomial(4, 5), 0.0);
}

TEST(CompensatedSum, RecoversLostBits) {
  nm::CompensatedSum s;
  s.add(1.0);
  for (int i = 0; i < 1000; ++i) s.add(1e-16);
  s.add(-1.0);
  EXPECT_NEAR(s.value(), 1e-13, 1e-25);
}

}  // namespace

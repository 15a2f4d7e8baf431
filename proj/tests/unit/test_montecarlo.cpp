#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "obflab/channel.hpp"
#include "obflab/montecarlo.hpp"
#include "obflab/numerics.hpp"
#include "obflab/rng.hpp"
#include "obflab/schedulers.hpp"

using namespace obflab;

namespace {

ExperimentConfig make_config(Scheme s, int m, int k, double db, std::int64_t trials, std::uint64_t seed,
                             std::optional<int> force_r = std::nullopt) {
  ExperimentConfig c;
  c.scheme = s;
  const int r = force_r ? *force_r : m;
  c.params = SystemParams{m, k, db_to_linear(db), r};
  c.trials = trials;
  c.seed = seed;
  c.force_r = force_r;
  return c;
}

RunOptions quick() {
  RunOptions o;
  o.compute_ks = false;
  o.compute_analytic_mean = false;
  return o;
}

TEST(SchemeNames, RoundTrip) {
  for (Scheme s : {Scheme::adaptive_obf, Scheme::olbf, Scheme::zfs, Scheme::zfdp, Scheme::random_obf,
                   Scheme::random_olbf}) {
    EXPECT_EQ(parse_scheme(scheme_name(s)), s);
  }
  EXPECT_EQ(scheme_name(Scheme::adaptive_obf), "adaptive-obf");
  EXPECT_THROW(parse_scheme("obf"), std::invalid_argument);
}

TEST(ExperimentConfig, Validation) {
  auto c = make_config(Scheme::adaptive_obf, 3, 10, 10.0, 10, 1, 3);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.fixed_ranks(), 3);
  c.force_r = 4;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.force_r.reset();
  EXPECT_FALSE(c.fixed_ranks().has_value());
  c.trials = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  auto o = make_config(Scheme::olbf, 3, 2, 10.0, 10, 1);
  EXPECT_THROW(o.validate(), std::invalid_argument);
  auto z = make_config(Scheme::zfs, 3, 10, 10.0, 10, 1, 2);
  EXPECT_THROW(z.validate(), std::invalid_argument);
}

TEST(RunExperiment, SingleTrialReproducesOutcome) {
  const auto c = make_config(Scheme::adaptive_obf, 3, 10, 15.0, 1, 42, 3);
  const auto report = run_experiment(c, quick());
  ASSERT_EQ(report.trials.size(), 1u);
  const auto out = adaptive_obf(draw_channels(c.params, {42, 0}), c.params.power, ObfMode::force(3));
  EXPECT_EQ(report.trials[0].users, out.users);
  EXPECT_EQ(report.trials[0].sinrs, out.sinrs);
  EXPECT_EQ(report.trials[0].sum_rate, out.sum_rate);

  const auto o = make_config(Scheme::olbf, 3, 10, 15.0, 1, 42);
  const auto ro = run_experiment(o, quick());
  const auto oo = olbf(draw_channels(o.params, {42, 0}), o.params.power);
  EXPECT_EQ(ro.trials[0].users, oo.users);
  EXPECT_EQ(ro.trials[0].sinrs, oo.sinrs);
}

TEST(RunExperiment, TrialUsesItsOwnSeed) {
  const auto c = make_config(Scheme::zfdp, 3, 8, 10.0, 50, 9);
  const auto report = run_experiment(c, quick());
  EXPECT_EQ(report.trials[37], run_trial(c, 37));
  EXPECT_EQ(report.structural_checks, 1);
}

TEST(RunExperiment, WorkerCountDoesNotChangeResults) {
  for (Scheme s : {Scheme::adaptive_obf, Scheme::olbf, Scheme::zfdp, Scheme::random_olbf}) {
    auto c = make_config(s, 3, 10, 10.0, 3001, 5);
    c.threads = 1;
    const auto one = run_experiment(c, quick());
    c.threads = 4;
    const auto four = run_experiment(c, quick());
    EXPECT_EQ(four.workers, 4);
    EXPECT_TRUE(one.trials == four.trials) << scheme_name(s);
    EXPECT_EQ(one.sum_rate.mean, four.sum_rate.mean);
    EXPECT_EQ(one.sum_rate.std_error, four.sum_rate.std_error);
  }
}

TEST(KsDistance, Examples) {
  auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
  EXPECT_DOUBLE_EQ(ks_distance(EmpiricalDistribution({0.5}), uniform), 0.5);
  EXPECT_DOUBLE_EQ(ks_distance(EmpiricalDistribution({-3.0, -2.0, -1.0}), uniform), 1.0);
  EXPECT_DOUBLE_EQ(ks_distance(EmpiricalDistribution({0.25, 0.75}), uniform), 0.25);
  EXPECT_THROW(ks_distance(EmpiricalDistribution(), uniform), std::invalid_argument);
  EXPECT_THROW(EmpiricalDistribution({1.0, NAN}), std::invalid_argument);
}

TEST(KsDistance, NullSampleWithinBound) {
  PhiloxStream rng({77, 0});
  std::vector<double> xs(100000);
  for (auto& x : xs) x = -std::log(rng.uniform_open());
  const double ks = ks_distance(EmpiricalDistribution(std::move(xs)), [](double x) { return -std::expm1(-x); });
  EXPECT_LE(ks, 1.95 / std::sqrt(100000.0));
}

TEST(EmpiricalDistribution, CdfAndMean) {
  const EmpiricalDistribution e({3.0, 1.0, 2.0, 2.0});
  EXPECT_EQ(e.samples(), (std::vector<double>{1.0, 2.0, 2.0, 3.0}));
  EXPECT_DOUBLE_EQ(e.cdf(0.5), 0.0);
  EXPECT_DOUBLE_EQ(e.cdf(2.0), 0.75);
  EXPECT_DOUBLE_EQ(e.cdf(9.0), 1.0);
  EXPECT_DOUBLE_EQ(e.mean(), 2.0);
}

TEST(MeanAndStderr, Examples) {
  const auto m = mean_and_stderr({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.std_error, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(mean_and_stderr({7.0}).std_error, 0.0);
}

TEST(MeanSumRate, SingleUserMatchesExpIntegral) {
  const auto c = make_config(Scheme::adaptive_obf, 1, 1, 0.0, 1000000, 3, 1);
  const auto est = mean_sum_rate_mc(c);
  EXPECT_NEAR(est.mean, 0.5963, 0.001);
  EXPECT_NEAR(est.mean, std::numbers::e * numerics::exp_integral_e1(1.0), 4.0 * est.std_error);
}

TEST(MeanSumRate, ZfdpAtLeastZfs) {
  const auto dp = mean_sum_rate_mc(make_config(Scheme::zfdp, 3, 10, 10.0, 20000, 8));
  const auto zf = mean_sum_rate_mc(make_config(Scheme::zfs, 3, 10, 10.0, 20000, 8));
  EXPECT_GT(dp.mean, zf.mean);
}

TEST(MeanSumRate, StderrScalesAsInverseRoot) {
  const auto a = mean_sum_rate_mc(make_config(Scheme::olbf, 3, 10, 10.0, 10000, 21));
  const auto b = mean_sum_rate_mc(make_config(Scheme::olbf, 3, 10, 10.0, 20000, 21));
  const auto d = mean_sum_rate_mc(make_config(Scheme::olbf, 3, 10, 10.0, 40000, 21));
  EXPECT_NEAR(a.std_error / b.std_error, std::sqrt(2.0), 0.2 * std::sqrt(2.0));
  EXPECT_NEAR(a.std_error / d.std_error, 2.0, 0.4);
}

TEST(Summarize, KsAgainstAnalyticForForcedObf) {
  const auto c = make_config(Scheme::adaptive_obf, 2, 10, 15.0, 20000, 11, 2);
  const auto report = run_experiment(c);
  ASSERT_EQ(report.ks.size(), 2u);
  for (const auto& ks : report.ks) {
    ASSERT_TRUE(ks.has_value());
    EXPECT_LE(*ks, 0.02);
  }
  ASSERT_TRUE(report.analytic_sum_rate.has_value());
  EXPECT_NEAR(*report.analytic_sum_rate, report.sum_rate.mean, 4.0 * report.sum_rate.std_error);
}

TEST(Summarize, AdaptiveStopHasNoAnalytic) {
  const auto report = run_experiment(make_config(Scheme::adaptive_obf, 3, 10, 10.0, 200, 2));
  for (const auto& ks : report.ks) EXPECT_FALSE(ks.has_value());
  EXPECT_FALSE(report.analytic_sum_rate.has_value());
}

TEST(RandomSelection, ObfMatchesUnorderedMarginals) {
  const auto report = run_experiment(make_config(Scheme::random_obf, 3, 10, 10.0, 100000, 31));
  ASSERT_EQ(report.ks.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_TRUE(report.ks[i].has_value());
    EXPECT_LE(*report.ks[i], 0.01) << "rank " << i + 1;
  }
}

TEST(RandomSelection, OlbfMatchesUnorderedMarginals) {
  const auto report = run_experiment(make_config(Scheme::random_olbf, 3, 10, 10.0, 100000, 32));
  ASSERT_EQ(report.ks.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_TRUE(report.ks[i].has_value());
    EXPECT_LE(*report.ks[i], 0.01) << "rank " << i + 1;
  }
  for (const auto& t : report.trials) {
    double tail = 0.0;
    for (std::size_t j = 1; j < t.sinrs.size(); ++j) tail += t.sinrs[j] / (1.0 + t.sinrs[j]);
    ASSERT_LE(tail, t.sinrs[0] / (1.0 + t.sinrs[0]) + 1e-12);
  }
}

TEST(DensityHistogram, IntegratesToCoveredMass) {
  PhiloxStream rng({5, 5});
  std::vector<double> xs(50000);
  for (auto& x : xs) x = -std::log(rng.uniform_open());
  const EmpiricalDistribution e(std::move(xs));
  const auto bins = density_histogram(e, 100, 4.0);
  ASSERT_EQ(bins.size(), 100u);
  double mass = 0.0;
  for (const auto& b : bins) mass += b.density * (b.hi - b.lo);
  EXPECT_NEAR(mass, e.cdf(4.0 - 1e-12), 1e-12);
  EXPECT_NEAR(bins[0].density, 1.0, 0.05);
  const auto automatic = density_histogram(e, 10);
  EXPECT_NEAR(e.cdf(automatic.back().hi), 0.999, 1e-4);
}

TEST(ResolveThreads, Precedence) {
  EXPECT_EQ(resolve_threads(3), 3);
  ::setenv("OBFLAB_THREADS", "5", 1);
  EXPECT_EQ(resolve_threads(0), 5);
  EXPECT_EQ(resolve_threads(2), 2);
  ::unsetenv("OBFLAB_THREADS");
  EXPECT_GE(resolve_threads(0), 1);
}

}  // namespace

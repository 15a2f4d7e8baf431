#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <set>
#include <vector>

#include "obflab/channel.hpp"
#include "obflab/rng.hpp"

using namespace obflab;
using cd = std::complex<double>;

namespace {

double two_sample_ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

CVector random_unit(int m, std::uint64_t seed) {
  PhiloxStream rng({seed, 0});
  CVector v(m);
  for (int i = 0; i < m; ++i) v(i) = rng.complex_normal();
  return v / v.norm();
}

TEST(Philox, KnownAnswer) {
  // Random123 known-answer vector for philox4x32-10 with zero counter and key.
  const auto out = PhiloxStream::philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, StreamsAndPurposesDiffer) {
  PhiloxStream a({42, 0}), b({42, 1}), c({42, 0}, PhiloxStream::Purpose::selection), d({43, 0});
  const auto x = a.next_u64();
  EXPECT_NE(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
  EXPECT_NE(x, d.next_u64());
  PhiloxStream again({42, 0});
  EXPECT_EQ(x, again.next_u64());
}

TEST(Philox, UniformRanges) {
  PhiloxStream rng({7, 3});
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    const double v = rng.uniform_open();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_GT(v, 0.0);
    ASSERT_LE(v, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 450);
  EXPECT_THROW(rng.uniform_below(0), std::invalid_argument);
}

TEST(SystemParams, Validation) {
  EXPECT_NO_THROW((SystemParams{3, 10, 1.0, 3}.validate()));
  EXPECT_THROW((SystemParams{3, 2, 1.0, 2}.validate()), std::invalid_argument);
  EXPECT_THROW((SystemParams{3, 10, 1.0, 4}.validate()), std::invalid_argument);
  EXPECT_THROW((SystemParams{3, 10, 0.0, 3}.validate()), std::invalid_argument);
  EXPECT_THROW((SystemParams{0, 10, 1.0, 1}.validate()), std::invalid_argument);
  EXPECT_NEAR(db_to_linear(15.0), 31.622776601683793, 1e-12);
  EXPECT_DOUBLE_EQ(db_to_linear(0.0), 1.0);
}

TEST(DrawChannels, UnitVariance) {
  const SystemParams p{4, 250000, 1.0, 1};
  const ChannelSet h = draw_channels(p, {11, 0});
  EXPECT_EQ(h.users(), 250000);
  EXPECT_EQ(h.antennas(), 4);
  const double mean = h.gains().cwiseAbs2().mean();
  EXPECT_NEAR(mean, 1.0, 0.005);
}

TEST(DrawChannels, NormIsGammaTwo) {
  const SystemParams p{2, 200000, 1.0, 1};
  const ChannelSet h = draw_channels(p, {12, 0});
  double sum = 0.0;
  for (int k = 0; k < h.users(); ++k) sum += h.norm2(k);
  EXPECT_NEAR(sum / h.users(), 2.0, 0.01);
}

TEST(DrawChannels, SameSeedSameChannel) {
  const SystemParams p{3, 10, 1.0, 3};
  const ChannelSet a = draw_channels(p, {5, 9});
  const ChannelSet b = draw_channels(p, {5, 9});
  EXPECT_TRUE(a.gains() == b.gains());
  EXPECT_EQ(a.seed(), b.seed());
  const ChannelSet c = draw_channels(p, {5, 10});
  EXPECT_FALSE(a.gains() == c.gains());
}

TEST(ChannelSet, RejectsNonFinite) {
  CMatrix g = CMatrix::Ones(2, 2);
  g(1, 1) = cd(NAN, 0.0);
  EXPECT_THROW(ChannelSet(g, {}), std::invalid_argument);
}

TEST(ProjectComplement, Examples) {
  const CVector h = (CVector(2) << 3.0, cd(0.0, 4.0)).finished();
  EXPECT_TRUE(project_complement(CMatrix(2, 0), h).isApprox(h));

  const CMatrix w = (CMatrix(2, 1) << 1.0, 0.0).finished();
  const CVector out = project_complement(w, h);
  EXPECT_LE(std::abs(out(0)), 1e-15);
  EXPECT_LE(std::abs(out(1) - cd(0.0, 4.0)), 1e-15);

  const CVector in_span = (CVector(2) << cd(2.0, -1.0), 0.0).finished();
  EXPECT_LE(project_complement(w, in_span).norm(), 1e-12);

  EXPECT_THROW(project_complement(CMatrix::Identity(3, 1), h), std::invalid_argument);
}

TEST(ProjectComplement, IdempotentAndOrthogonal) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const CVector v = random_unit(4, s);
    CMatrix w(4, 2);
    w.col(0) = v;
    w.col(1) = null_space_basis(v).col(0);
    const CVector h = random_unit(4, 1000 + s) * 2.7;
    const CVector once = project_complement(w, h);
    const CVector twice = project_complement(w, once);
    EXPECT_LE((once - twice).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((w.adjoint() * once).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(NullSpaceBasis, Examples) {
  const CVector e1 = (CVector(2) << 1.0, 0.0).finished();
  const CMatrix b = null_space_basis(e1);
  ASSERT_EQ(b.cols(), 1);
  EXPECT_NEAR(std::abs(b(1, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(b(0, 0)), 0.0, 1e-15);

  const CVector e3 = (CVector(3) << 0.0, 0.0, 1.0).finished();
  const CMatrix b3 = null_space_basis(e3);
  ASSERT_EQ(b3.cols(), 2);
  EXPECT_LE(b3.row(2).norm(), 1e-15);

  EXPECT_THROW(null_space_basis(CVector::Zero(3)), std::invalid_argument);
  EXPECT_THROW(null_space_basis((CVector(2) << 2.0, 0.0).finished()), std::invalid_argument);
}

TEST(NullSpaceBasis, CompletesUnitaryBasis) {
  for (int m = 2; m <= 6; ++m) {
    for (std::uint64_t s = 0; s < 40; ++s) {
      const CVector v = random_unit(m, 100 * m + s);
      CMatrix u(m, m);
      u.col(0) = v;
      u.rightCols(m - 1) = null_space_basis(v);
      const double err = (u.adjoint() * u - CMatrix::Identity(m, m)).cwiseAbs().maxCoeff();
      EXPECT_LE(err, 1e-10) << "m=" << m;
    }
  }
}

TEST(NullSpaceBasis, Deterministic) {
  const CVector v = random_unit(4, 77);
  EXPECT_TRUE(null_space_basis(v) == null_space_basis(v));
}

TEST(BeamformerMatrix, Factories) {
  const CVector v = random_unit(3, 5);
  CMatrix w(3, 3);
  w.col(0) = v;
  w.rightCols(2) = null_space_basis(v);
  const auto b = BeamformerMatrix::orthonormal(w);
  EXPECT_TRUE(b.is_orthonormal());
  EXPECT_EQ(b.columns(), 3);

  CMatrix skew = CMatrix::Identity(2, 2);
  skew(0, 1) = 1.0;
  EXPECT_THROW(BeamformerMatrix::orthonormal(skew), std::invalid_argument);
  skew.col(1).normalize();
  const auto z = BeamformerMatrix::unit_columns(skew);
  EXPECT_FALSE(z.is_orthonormal());
  EXPECT_THROW(BeamformerMatrix::unit_columns(CMatrix::Ones(2, 1)), std::invalid_argument);
}

// ||P^H h||^2 for fixed orthonormal P has the law of the first n-1 squared
// entries of h.
TEST(UnitaryInvariance, ProjectedEnergyLaw) {
  const int m = 4;
  const int n_minus_1 = 2;
  const CVector v = random_unit(m, 31);
  CMatrix p(m, n_minus_1);
  p.col(0) = v;
  p.col(1) = null_space_basis(v).col(1);
  const int draws = 100000;
  const SystemParams params{m, draws, 1.0, 1};
  const ChannelSet a = draw_channels(params, {2024, 1});
  const ChannelSet b = draw_channels(params, {2024, 2});
  std::vector<double> proj(draws), head(draws);
  for (int k = 0; k < draws; ++k) {
    proj[k] = (p.adjoint() * a.channel(k)).squaredNorm();
    head[k] = b.gains().row(k).head(n_minus_1).squaredNorm();
  }
  EXPECT_LE(two_sample_ks(proj, head), 0.01);
}

}  // namespace

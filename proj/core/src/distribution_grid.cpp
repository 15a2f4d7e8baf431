#include "obflab/distribution_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "obflab/numerics.hpp"

namespace obflab {

namespace {

constexpr std::array<double, 10> kNodes = {
    -0.973906528517171720077964012084452, -0.865063366688984510732096688423493,
    -0.679409568299024406234327365114874, -0.433395394129247190799265943165784,
    -0.148874338981631210884826001129720, 0.148874338981631210884826001129720,
    0.433395394129247190799265943165784,  0.679409568299024406234327365114874,
    0.865063366688984510732096688423493,  0.973906528517171720077964012084452};

constexpr std::array<double, 10> kWeights = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338, 0.295524224714752870173892994651338,
    0.269266719309996355091226921569469, 0.219086362515982043995534934228163,
    0.149451349150580593145776339657697, 0.066671344308688137593568809893332};

// P_0..P_{n} at x.
template <std::size_t N>
std::array<double, N> legendre_values(double x) {
  std::array<double, N> p{};
  p[0] = 1.0;
  if (N > 1) p[1] = x;
  for (std::size_t k = 2; k < N; ++k) {
    p[k] = ((2.0 * k - 1.0) * x * p[k - 1] - (k - 1.0) * p[k - 2]) / k;
  }
  return p;
}

// Coefficients of the degree-9 Legendre interpolant through the GL nodes.
std::array<double, 10> legendre_coefficients(const std::array<double, 10>& values) {
  std::array<double, 10> c{};
  for (int j = 0; j < 10; ++j) {
    const auto p = legendre_values<10>(kNodes[j]);
    for (int k = 0; k < 10; ++k) c[k] += (2.0 * k + 1.0) / 2.0 * kWeights[j] * values[j] * p[k];
  }
  return c;
}

struct Leaf {
  double lo;
  double hi;
  std::array<double, 10> values;
  double mass;
};

class Builder {
 public:
  Builder(const std::function<double(double)>& pdf, double scale, const GridSpec& spec)
      : pdf_(pdf), scale_(scale), spec_(spec) {}

  Leaf evaluate(double lo, double hi) const {
    Leaf leaf{lo, hi, {}, 0.0};
    const double c = 0.5 * (lo + hi);
    const double h = 0.5 * (hi - lo);
    double sum = 0.0;
    for (int j = 0; j < 10; ++j) {
      const double u = c + h * kNodes[j];
      const double one_minus = 1.0 - u;
      const double y = scale_ * u / one_minus;
      double v = pdf_(y) * scale_ / (one_minus * one_minus);
      if (!std::isfinite(v)) throw std::domain_error("density is not finite");
      v = std::max(v, 0.0);  // rounding below zero in cancelling closed forms
      leaf.values[j] = v;
      sum += kWeights[j] * v;
    }
    leaf.mass = sum * h;
    return leaf;
  }

  // Accept a cell once its Legendre tail is negligible against the tolerance;
  // otherwise bisect.
  void refine(const Leaf& leaf, int depth, std::vector<Leaf>& out) const {
    const double h = 0.5 * (leaf.hi - leaf.lo);
    const auto coeffs = legendre_coefficients(leaf.values);
    const double err = h * (std::abs(coeffs[8]) + std::abs(coeffs[9]));
    const double tol = std::max(spec_.cell_abs_tol, spec_.cell_rel_tol * std::abs(leaf.mass));
    if (err <= tol || depth >= spec_.max_depth) {
      out.push_back(leaf);
      return;
    }
    const double mid = 0.5 * (leaf.lo + leaf.hi);
    refine(evaluate(leaf.lo, mid), depth + 1, out);
    refine(evaluate(mid, leaf.hi), depth + 1, out);
  }

 private:
  const std::function<double(double)>& pdf_;
  double scale_;
  GridSpec spec_;
};

}  // namespace

DistributionGrid DistributionGrid::build(const std::function<double(double)>& pdf,
                                         double scale, const GridSpec& spec) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("grid scale must be positive");
  }
  if (spec.initial_cells < 1) throw std::invalid_argument("need at least one cell");
  Builder builder(pdf, scale, spec);
  std::vector<Leaf> leaves;
  for (int i = 0; i < spec.initial_cells; ++i) {
    const double lo = static_cast<double>(i) / spec.initial_cells;
    const double hi = static_cast<double>(i + 1) / spec.initial_cells;
    builder.refine(builder.evaluate(lo, hi), 0, leaves);
  }

  DistributionGrid grid;
  grid.scale_ = scale;
  grid.cells_.reserve(leaves.size());
  numerics::CompensatedSum running;
  for (const Leaf& leaf : leaves) {
    Cell cell{};
    cell.u_lo = leaf.lo;
    cell.u_hi = leaf.hi;
    cell.mass_before = running.value();
    cell.mass = leaf.mass;
    cell.values = leaf.values;
    cell.legendre = legendre_coefficients(leaf.values);
    running.add(leaf.mass);
    grid.cells_.push_back(cell);
  }
  grid.total_ = running.value();
  return grid;
}

double DistributionGrid::cdf(double y) const {
  if (std::isnan(y)) throw std::domain_error("cdf of NaN");
  if (y <= 0.0) return 0.0;
  if (std::isinf(y)) return total_;
  const double u = y / (y + scale_);
  auto it = std::lower_bound(cells_.begin(), cells_.end(), u,
                             [](const Cell& c, double v) { return c.u_hi < v; });
  if (it == cells_.end()) return total_;
  const Cell& c = *it;
  const double h = 0.5 * (c.u_hi - c.u_lo);
  const double x = std::clamp((u - 0.5 * (c.u_lo + c.u_hi)) / h, -1.0, 1.0);
  const auto p = legendre_values<11>(x);
  double partial = c.legendre[0] * (x + 1.0);
  for (int k = 1; k < 10; ++k) {
    partial += c.legendre[k] * (p[k + 1] - p[k - 1]) / (2.0 * k + 1.0);
  }
  // Keep the cdf monotone across cell edges despite the truncated expansion.
  const double within = std::clamp(partial * h, 0.0, c.mass);
  return c.mass_before + within;
}

double DistributionGrid::pdf(double y) const {
  if (std::isnan(y)) throw std::domain_error("pdf of NaN");
  if (y < 0.0 || std::isinf(y)) return 0.0;
  const double u = y / (y + scale_);
  auto it = std::lower_bound(cells_.begin(), cells_.end(), u,
                             [](const Cell& c, double v) { return c.u_hi < v; });
  if (it == cells_.end()) return 0.0;
  const Cell& c = *it;
  const double h = 0.5 * (c.u_hi - c.u_lo);
  const double x = std::clamp((u - 0.5 * (c.u_lo + c.u_hi)) / h, -1.0, 1.0);
  const auto p = legendre_values<10>(x);
  double pu = 0.0;
  for (int k = 0; k < 10; ++k) pu += c.legendre[k] * p[k];
  const double du_dy = scale_ / ((y + scale_) * (y + scale_));
  return std::max(0.0, pu * du_dy);
}

double DistributionGrid::expectation(const std::function<double(double)>& g) const {
  numerics::CompensatedSum acc;
  for (const Cell& c : cells_) {
    const double mid = 0.5 * (c.u_lo + c.u_hi);
    const double h = 0.5 * (c.u_hi - c.u_lo);
    double s = 0.0;
    for (int j = 0; j < 10; ++j) {
      if (c.values[j] == 0.0) continue;
      const double u = mid + h * kNodes[j];
      s += kWeights[j] * c.values[j] * g(scale_ * u / (1.0 - u));
    }
    acc.add(s * h);
  }
  return acc.value();
}

std::vector<double> DistributionGrid::abscissae() const {
  std::vector<double> out;
  out.reserve(cells_.size() + 1);
  out.push_back(0.0);
  for (const Cell& c : cells_) {
    out.push_back(c.u_hi >= 1.0 ? std::numeric_limits<double>::infinity()
                                : scale_ * c.u_hi / (1.0 - c.u_hi));
  }
  return out;
}

std::vector<double> DistributionGrid::cdf_values() const {
  std::vector<double> out;
  out.reserve(cells_.size() + 1);
  out.push_back(0.0);
  for (const Cell& c : cells_) out.push_back(c.mass_before + c.mass);
  return out;
}

}  // namespace obflab

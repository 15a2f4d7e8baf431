#include "obflab/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <vector>

namespace obflab::numerics {

namespace {

// Kronrod abscissae on [0, 1]; odd indices are the 10-point Gauss nodes.
constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};

constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208983230640, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};

constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Panel {
  double a;
  double b;
  double value;
  double error;
};

struct WorseFirst {
  bool operator()(const Panel& x, const Panel& y) const {
    if (x.error != y.error) return x.error < y.error;
    return x.a > y.a;
  }
};

Panel gauss_kronrod(const Integrand& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double resk = kWgk[10] * fc;
  double resg = 0.0;
  double resabs = std::abs(resk);
  std::array<double, 10> f1{};
  std::array<double, 10> f2{};
  for (int j = 0; j < 10; ++j) {
    const double dx = h * kXgk[j];
    f1[j] = f(c - dx);
    f2[j] = f(c + dx);
    const double s = f1[j] + f2[j];
    resk += kWgk[j] * s;
    resabs += kWgk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
    if (j % 2 == 1) resg += kWg[j / 2] * s;
  }
  const double mean = 0.5 * resk;
  double resasc = kWgk[10] * std::abs(fc - mean);
  for (int j = 0; j < 10; ++j) {
    resasc += kWgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
  }
  const double hh = std::abs(h);
  resasc *= hh;
  resabs *= hh;

  // QUADPACK error heuristic.
  double err = std::abs((resk - resg) * h);
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr double tiny = std::numeric_limits<double>::min();
  if (resabs > tiny / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
  if (!std::isfinite(resk)) err = std::numeric_limits<double>::infinity();
  return {a, b, resk * h, err};
}

double semi_infinite_map(const Integrand& f, double a, double scale, double u) {
  if (u >= 1.0) return 0.0;
  const double one_minus = 1.0 - u;
  const double y = a + scale * u / one_minus;
  const double fy = f(y);
  if (fy == 0.0) return 0.0;
  const double v = fy * scale / (one_minus * one_minus);
  return std::isfinite(v) ? v : 0.0;
}

}  // namespace

void QuadratureSpec::validate() const {
  if (!(rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be positive");
  if (!(abs_tol > 0.0)) throw std::invalid_argument("abs_tol must be positive");
  if (max_subdivisions < 1) {
    throw std::invalid_argument("max_subdivisions must be at least 1");
  }
}

QuadratureSpec QuadratureSpec::tightened() const {
  QuadratureSpec s = *this;
  s.rel_tol = std::max(rel_tol * 0.1, 1e-15);
  s.abs_tol = std::max(abs_tol * 0.1, 1e-300);
  return s;
}

NonConvergenceError::NonConvergenceError(double estimate, double error_bound)
    : std::runtime_error("quadrature did not converge: estimate " +
                         std::to_string(estimate) + ", error bound " +
                         std::to_string(error_bound)),
      estimate_(estimate),
      error_bound_(error_bound) {}

QuadratureResult integrate_adaptive(const Integrand& f, double a, double b,
                                    const QuadratureSpec& spec,
                                    int initial_panels) {
  spec.validate();
  if (std::isnan(a) || std::isnan(b) || a > b) {
    throw std::invalid_argument("integration limits must satisfy a <= b");
  }
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("integrate_adaptive needs finite limits");
  }
  if (a == b) return {};
  initial_panels = std::max(1, initial_panels);

  std::priority_queue<Panel, std::vector<Panel>, WorseFirst> heap;
  double total = 0.0;
  double total_err = 0.0;
  const double width = (b - a) / initial_panels;
  for (int i = 0; i < initial_panels; ++i) {
    const double lo = a + i * width;
    const double hi = (i + 1 == initial_panels) ? b : a + (i + 1) * width;
    Panel p = gauss_kronrod(f, lo, hi);
    total += p.value;
    total_err += p.error;
    heap.push(p);
  }

  int subdivisions = 0;
  auto target = [&] { return std::max(spec.abs_tol, spec.rel_tol * std::abs(total)); };
  while (total_err > target() && subdivisions < spec.max_subdivisions) {
    const Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;  // panel at machine resolution
    heap.pop();
    const Panel left = gauss_kronrod(f, worst.a, mid);
    const Panel right = gauss_kronrod(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++subdivisions;
  }

  // Re-sum from the panels so the running update's rounding does not leak out.
  std::vector<Panel> panels;
  panels.reserve(heap.size());
  while (!heap.empty()) {
    panels.push_back(heap.top());
    heap.pop();
  }
  std::sort(panels.begin(), panels.end(),
            [](const Panel& x, const Panel& y) { return x.a < y.a; });
  CompensatedSum value;
  CompensatedSum error;
  for (const Panel& p : panels) {
    value.add(p.value);
    error.add(p.error);
  }
  QuadratureResult r;
  r.value = value.value();
  r.error = error.value();
  r.subdivisions = subdivisions;
  r.converged = r.error <= std::max(spec.abs_tol, spec.rel_tol * std::abs(r.value));
  return r;
}

double integrate_1d(const Integrand& f, double a, double b,
                    const QuadratureSpec& spec) {
  if (std::isinf(b) && b > 0.0 && std::isfinite(a)) {
    return integrate_semi_infinite(f, a, spec);
  }
  const QuadratureResult r = integrate_adaptive(f, a, b, spec);
  if (!r.converged) throw NonConvergenceError(r.value, r.error);
  return r.value;
}

QuadratureResult integrate_semi_infinite_adaptive(const Integrand& f, double a,
                                                  const QuadratureSpec& spec,
                                                  double scale) {
  if (!std::isfinite(a)) throw std::invalid_argument("lower limit must be finite");
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("scale must be positive and finite");
  }
  auto g = [&](double u) { return semi_infinite_map(f, a, scale, u); };
  return integrate_adaptive(g, 0.0, 1.0, spec, 4);
}

double integrate_semi_infinite(const Integrand& f, double a,
                               const QuadratureSpec& spec, double scale) {
  const QuadratureResult r = integrate_semi_infinite_adaptive(f, a, spec, scale);
  if (!r.converged) throw NonConvergenceError(r.value, r.error);
  return r.value;
}

namespace {

struct NestedState {
  const MultiIntegrand* f;
  std::span<const NestedBound> bounds;
  std::vector<double> x;
};

QuadratureResult nested_level(NestedState& st, std::size_t level,
                              const QuadratureSpec& spec) {
  const std::span<const double> outer(st.x.data(), level);
  const NestedBound& bd = st.bounds[level];
  const double lo = bd.lower(outer);
  const double hi = bd.upper(outer);
  if (!(hi > lo)) return {};
  const QuadratureSpec inner_spec = spec.tightened();
  auto g = [&st, level, &inner_spec](double t) {
    st.x[level] = t;
    if (level + 1 == st.bounds.size()) {
      return (*st.f)(std::span<const double>(st.x.data(), level + 1));
    }
    return nested_level(st, level + 1, inner_spec).value;
  };
  if (std::isinf(hi)) return integrate_semi_infinite_adaptive(g, lo, spec, bd.scale);
  return integrate_adaptive(g, lo, hi, spec);
}

}  // namespace

double integrate_nested(const MultiIntegrand& f,
                        std::span<const NestedBound> bounds,
                        const QuadratureSpec& spec) {
  if (bounds.empty() || bounds.size() > 3) {
    throw std::invalid_argument("integrate_nested supports 1 to 3 levels");
  }
  return integrate_iterated(f, bounds, spec);
}

double integrate_iterated(const MultiIntegrand& f,
                          std::span<const NestedBound> bounds,
                          const QuadratureSpec& spec) {
  if (bounds.empty()) throw std::invalid_argument("integrate_iterated needs a level");
  spec.validate();
  NestedState st{&f, bounds, std::vector<double>(bounds.size(), 0.0)};
  const QuadratureResult r = nested_level(st, 0, spec);
  if (!r.converged) throw NonConvergenceError(r.value, r.error);
  return r.value;
}

// Special functions ---------------------------------------------------------

namespace {

// Modified Lentz evaluation of the Legendre continued fraction; returns h
// with Gamma(s, x) = x^s e^-x h. Converges quickly for x > 1.
double gamma_continued_fraction(int s, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - static_cast<double>(s));
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw std::runtime_error("incomplete gamma continued fraction did not converge");
}

// log(e^x Gamma(s, x)) for x > 0 finite.
double log_scaled_gamma(int s, double x) {
  if (s >= 1) {
    double term = 1.0;
    double sum = 1.0;
    for (int i = 1; i < s; ++i) {
      term *= x / i;
      sum += term;
    }
    return std::lgamma(static_cast<double>(s)) + std::log(sum);
  }
  if (x > 1.0) return s * std::log(x) + std::log(gamma_continued_fraction(s, x));
  double g = std::exp(x) * exp_integral_e1(x);
  for (int k = 0; k > s; --k) g = (g - std::pow(x, k - 1)) / (k - 1);
  return std::log(g);
}

double e1_series(double x) {
  constexpr double euler_gamma = 0.57721566490153286061;
  double term = 1.0;
  double sum = 0.0;
  for (int k = 1; k < 200; ++k) {
    term *= -x / k;
    const double add = term / k;
    sum += add;
    if (std::abs(add) < 1e-17 * std::abs(sum)) break;
  }
  return -euler_gamma - std::log(x) - sum;
}

void check_gamma_domain(int s, double x) {
  if (std::isnan(x)) throw std::domain_error("incomplete gamma argument is NaN");
  if (s <= 0 && !(x > 0.0)) {
    throw std::domain_error("incomplete gamma of non-positive order needs x > 0");
  }
  if (x < 0.0) throw std::domain_error("incomplete gamma needs x >= 0");
}

}  // namespace

double exp_integral_e1(double x) {
  if (!(x > 0.0)) throw std::domain_error("E1 needs x > 0");
  if (std::isinf(x)) return 0.0;
  if (x <= 1.0) return e1_series(x);
  return std::exp(-x) * gamma_continued_fraction(0, x);
}

double upper_incomplete_gamma(int s, double x) {
  check_gamma_domain(s, x);
  if (std::isinf(x)) return 0.0;
  return std::exp(log_scaled_gamma(s, x) - x);
}

double upper_incomplete_gamma_scaled(int s, double x) {
  check_gamma_domain(s, x);
  if (std::isinf(x)) {
    return s == 1 ? 1.0 : (s > 1 ? std::numeric_limits<double>::infinity() : 0.0);
  }
  return std::exp(log_scaled_gamma(s, x));
}

double upper_incomplete_gamma_shifted(int s, double x, double shift) {
  check_gamma_domain(s, x);
  if (std::isinf(x)) return 0.0;
  return std::exp(shift - x + log_scaled_gamma(s, x));
}

double regularized_lower_gamma(int s, double x) {
  if (s < 1) throw std::domain_error("regularized gamma needs s >= 1");
  if (std::isnan(x) || x < 0.0) throw std::domain_error("regularized gamma needs x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < s) {
    // e^-x x^s / s! * sum_k x^k / ((s+1)...(s+k))
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 1000; ++k) {
      term *= x / (s + k);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::exp(s * std::log(x) - x - std::lgamma(s + 1.0)) * sum;
  }
  return 1.0 - std::exp(log_scaled_gamma(s, x) - x - std::lgamma(static_cast<double>(s)));
}

double factorial(int n) {
  if (n < 0) throw std::domain_error("factorial of negative number");
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

void CompensatedSum::add(double v) noexcept {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    correction_ += (sum_ - t) + v;
  } else {
    correction_ += (v - t) + sum_;
  }
  sum_ = t;
}

}  // namespace obflab::numerics

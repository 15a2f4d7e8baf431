#include "obflab/analytic_obf.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace obflab {

namespace {

using numerics::binomial;
using numerics::factorial;
constexpr double kInf = std::numeric_limits<double>::infinity();

double ratio(double y) { return std::isinf(y) ? 1.0 : y / (1.0 + y); }
double inv1p(double y) { return std::isinf(y) ? 0.0 : 1.0 / (1.0 + y); }

void require_ordered(std::span<const double> ys) {
  if (ys.empty()) throw std::invalid_argument("need at least one SINR");
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (std::isnan(ys[i]) || ys[i] < 0.0) throw std::domain_error("SINRs must be nonnegative");
    if (i > 0 && ys[i] > ys[i - 1]) throw std::domain_error("SINRs must be non-increasing");
  }
}

bool ordered(std::span<const double> ys) {
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (!(ys[i] >= 0.0)) return false;
    if (i > 0 && ys[i] > ys[i - 1]) return false;
  }
  return true;
}

// Closed forms shared by the public entry points. G(s, y) is
// e^a Gamma(s, a (1 + y)) with a = r / P.
class ObfKernel {
 public:
  explicit ObfKernel(const ObfParams& p) : m_(p.antennas), k_(p.users), a_(p.noise()) {}

  [[nodiscard]] int antennas() const { return m_; }
  [[nodiscard]] double a() const { return a_; }

  [[nodiscard]] double G(int s, double y) const {
    return numerics::upper_incomplete_gamma_shifted(s, a_ * (1.0 + y), a_);
  }

  [[nodiscard]] double phi1(double y) const {
    if (y < 0.0 || std::isinf(y)) return 0.0;
    if (y == 0.0) return m_ == 1 ? a_ : 0.0;
    return std::exp(m_ * std::log(a_) + (m_ - 1) * std::log(y) - a_ * y -
                    std::lgamma(static_cast<double>(m_)));
  }

  [[nodiscard]] double cdf1(double y) const {
    return numerics::regularized_lower_gamma(m_, a_ * y);
  }

  [[nodiscard]] double phi2(double y2, double y1) const {
    return std::pow(y2, m_ - 2) * (G(m_, y2) - G(m_, y1)) /
           (factorial(m_ - 2) * std::pow(1.0 + y2, m_));
  }

  [[nodiscard]] double cdf2(double y2, double y1) const {
    return cdf1(y2) + std::pow(ratio(y2), m_ - 1) * (G(m_, y2) - G(m_, y1)) / factorial(m_ - 1);
  }

  [[nodiscard]] double phi3(double y3, double y2, double y1) const {
    const double b3 = 1.0 + y3;
    const double b2 = 1.0 + y2;
    const double brace = G(m_, y3) / b3 - G(m_, y2) / b2 -
                         (y2 - y3) / (b2 * b3) * G(m_, y1) +
                         a_ * (G(m_ - 1, y2) - G(m_ - 1, y3));
    return std::pow(y3, m_ - 3) / std::pow(b3, m_ - 1) * brace / factorial(m_ - 3);
  }

  [[nodiscard]] double cdf3(double y3, double y2, double y1) const {
    const double l3 = std::log1p(y3);
    const double g_m_y1 = G(m_, y1);
    const double g_m_y2 = G(m_, y2);
    const double g_m_y3 = G(m_, y3);
    const double g_m1_y3 = G(m_ - 1, y3);
    const double g_m_0 = G(m_, 0.0);
    const double g_m1_0 = G(m_ - 1, 0.0);
    const double upper = a_ * G(m_ - 1, y2) + (g_m_y1 - g_m_y2) * inv1p(y2);
    numerics::CompensatedSum acc;
    for (int i = 0; i <= m_ - 3; ++i) {
      const double c = binomial(m_ - 3, i) * ((i % 2 == 0) ? 1.0 : -1.0);
      const double p1 = std::exp(-(i + 1) * l3);
      const double p2 = std::exp(-(i + 2) * l3);
      const double ai2 = std::pow(a_, i + 2);
      const double d12 = (i + 1.0) * (i + 2.0);
      const double t1 = -std::expm1(-(i + 1) * l3) / (i + 1) * upper;
      const double t2 = std::expm1(-(i + 2) * l3) / (i + 2) * g_m_y1;
      const double t3 = a_ * g_m1_y3 * p1 / (i + 1) - g_m_y3 * p2 / (i + 2) -
                        ai2 * G(m_ - i - 2, y3) / d12;
      const double t4 = a_ * g_m1_0 / (i + 1) - g_m_0 / (i + 2) -
                        ai2 * G(m_ - i - 2, 0.0) / d12;
      acc.add(c * t1);
      acc.add(c * t2);
      acc.add(c * t3);
      acc.add(-c * t4);
    }
    return acc.value() / factorial(m_ - 3);
  }

  // phi_n for n >= 4 by integrating v_{n-1}, ..., v_2; v_1 is done in closed form.
  [[nodiscard]] double phi_numeric(std::span<const double> ys) const {
    const int n = static_cast<int>(ys.size());
    const double yn = ys[n - 1];
    const double y1 = ys[0];
    const double front = std::pow(ratio(yn), m_ - n) * inv1p(yn) * inv1p(yn) /
                         std::tgamma(m_ - n + 1.0);
    const double g_y1 = G(m_, y1);
    // Variables, outermost first: v_{n-1}, v_{n-2}, ..., v_2.
    std::vector<numerics::NestedBound> bounds;
    for (int level = 0; level < n - 2; ++level) {
      const int k = n - 1 - level;  // index of v_k
      const double cap = ys[k - 1];
      numerics::NestedBound b;
      b.lower = [yn, level](std::span<const double> outer) {
        return level == 0 ? yn : outer[level - 1];
      };
      b.upper = [cap](std::span<const double>) { return cap; };
      bounds.push_back(std::move(b));
    }
    auto f = [&](std::span<const double> v) {
      double prod = 1.0;
      for (double vk : v) prod *= inv1p(vk) * inv1p(vk);
      return prod * (G(m_, v.back()) - g_y1);
    };
    numerics::QuadratureSpec spec;
    spec.rel_tol = 1e-9;
    spec.abs_tol = 1e-15;
    return front * numerics::integrate_iterated(f, bounds, spec);
  }

  // n = 4 in w = v/(1+v): the v_3 chain collapses to a length, leaving one
  // integral over w_2 on [0, c_2] split at the caps.
  [[nodiscard]] double chain4(double c4, double c3, double c2, double y1, bool cumulative) const {
    const double g_y1 = G(m_, y1);
    const int e = m_ - 4;
    auto f = [&](double w) {
      const double v = w >= 1.0 ? kInf : w / (1.0 - w);
      const double g = G(m_, v) - g_y1;
      const double len = std::min(w, c3);
      if (!cumulative) return g * (len - c4);
      const double u = std::min(c4, w);
      return g * (len * std::pow(u, e + 1) / (e + 1) - std::pow(u, e + 2) / (e + 2));
    };
    numerics::QuadratureSpec spec;
    spec.rel_tol = 1e-13;
    spec.abs_tol = 1e-20;
    const double lo = cumulative ? 0.0 : c4;
    double cuts[] = {lo, c4, c3, c2};
    numerics::CompensatedSum acc;
    for (int i = 0; i < 3; ++i) {
      const double a = std::max(lo, cuts[i]);
      const double b = cuts[i + 1];
      if (b > a) acc.add(numerics::integrate_1d(f, a, b, spec));
    }
    return acc.value() / factorial(e);
  }

  [[nodiscard]] double phi4(std::span<const double> ys) const {
    const double c4 = ratio(ys[3]);
    const double front = std::pow(c4, m_ - 4) * inv1p(ys[3]) * inv1p(ys[3]);
    return front * chain4(c4, ratio(ys[2]), ratio(ys[1]), ys[0], false);
  }

  [[nodiscard]] double cdf4(std::span<const double> ys) const {
    return chain4(ratio(ys[3]), ratio(ys[2]), ratio(ys[1]), ys[0], true);
  }

  [[nodiscard]] double phi(std::span<const double> ys) const {
    switch (ys.size()) {
      case 1: return phi1(ys[0]);
      case 2: return phi2(ys[1], ys[0]);
      case 3: return phi3(ys[2], ys[1], ys[0]);
      case 4: return phi4(ys);
      default: return phi_numeric(ys);
    }
  }

  [[nodiscard]] double cdf(std::span<const double> ys) const {
    switch (ys.size()) {
      case 1: return cdf1(ys[0]);
      case 2: return cdf2(ys[1], ys[0]);
      case 3: return cdf3(ys[2], ys[1], ys[0]);
      case 4: return cdf4(ys);
      default: {
        std::vector<double> args(ys.begin(), ys.end());
        auto f = [&](double alpha) {
          args.back() = alpha;
          return phi_numeric(args);
        };
        numerics::QuadratureSpec spec;
        spec.rel_tol = 1e-8;
        spec.abs_tol = 1e-14;
        return numerics::integrate_1d(f, 0.0, ys.back(), spec);
      }
    }
  }

  // K!/(K-n)! F^{K-n} prod phi_i on the ordered region.
  [[nodiscard]] double scheduled(std::span<const double> ys) const {
    const int n = static_cast<int>(ys.size());
    double prod = 1.0;
    for (int i = 1; i <= n && prod > 0.0; ++i) prod *= phi(ys.first(i));
    if (prod <= 0.0) return 0.0;
    const double f = std::clamp(cdf(ys), 0.0, 1.0);
    double perm = 1.0;
    for (int i = 0; i < n; ++i) perm *= (k_ - i);
    return perm * std::pow(f, k_ - n) * prod;
  }

 private:
  int m_;
  int k_;
  double a_;
};

}  // namespace

void ObfParams::validate() const {
  if (scheduled < 1 || scheduled > antennas) throw std::invalid_argument("need 1 <= r <= M");
  if (users < scheduled) throw std::invalid_argument("need K >= r");
  if (!(power > 0.0) || !std::isfinite(power)) throw std::invalid_argument("P must be positive");
}

std::vector<double> obf_x_to_v(std::span<const double> xs, const ObfParams& p) {
  p.validate();
  if (static_cast<int>(xs.size()) != p.scheduled) throw std::invalid_argument("need r coordinates");
  for (double x : xs) {
    if (!(x >= 0.0)) throw std::domain_error("coordinates must be nonnegative");
  }
  const int r = p.scheduled;
  const double a = p.noise();
  std::vector<double> tail(r + 1, 0.0);
  for (int i = r - 1; i >= 0; --i) tail[i] = tail[i + 1] + xs[i];
  std::vector<double> v(r);
  v[0] = tail[0] / a;
  double head = 0.0;
  for (int n = 1; n < r; ++n) {
    head += xs[n - 1];
    v[n] = tail[n] / (head + a);
  }
  return v;
}

ObfInverse obf_v_to_x(std::span<const double> vs, const ObfParams& p) {
  p.validate();
  if (static_cast<int>(vs.size()) != p.scheduled) throw std::invalid_argument("need r SINRs");
  require_ordered(vs);
  const int r = p.scheduled;
  const double a = p.noise();
  ObfInverse out;
  out.xs.resize(r);
  for (int n = 0; n + 1 < r; ++n) {
    out.xs[n] = a * (1.0 + vs[0]) * (vs[n] - vs[n + 1]) / ((1.0 + vs[n]) * (1.0 + vs[n + 1]));
  }
  out.xs[r - 1] = a * (1.0 + vs[0]) * vs[r - 1] / (1.0 + vs[r - 1]);
  double det = std::pow(a, r) * std::pow(1.0 + vs[0], r - 1);
  for (int k = 1; k < r; ++k) det /= (1.0 + vs[k]) * (1.0 + vs[k]);
  out.abs_jacobian = det;
  return out;
}

double obf_x_pdf(std::span<const double> xs, const ObfParams& p) {
  p.validate();
  if (static_cast<int>(xs.size()) != p.scheduled) throw std::invalid_argument("need r coordinates");
  double total = 0.0;
  for (double x : xs) {
    if (!(x >= 0.0)) return 0.0;
    total += x;
  }
  const int shape = p.antennas - p.scheduled;
  return std::exp(-total) * std::pow(xs.back(), shape) / factorial(shape);
}

double obf_unordered_pdf(std::span<const double> vs, const ObfParams& p) {
  p.validate();
  const int n = static_cast<int>(vs.size());
  if (n < 1 || n > p.scheduled) throw std::invalid_argument("need 1 <= n <= r");
  if (!ordered(vs)) return 0.0;
  const int m = p.antennas;
  const double a = p.noise();
  double log_f = m * std::log(a) - a * vs[0] - std::lgamma(m - n + 1.0) +
                 (m - 1) * std::log1p(vs[0]);
  for (int k = 1; k < n; ++k) log_f -= 2.0 * std::log1p(vs[k]);
  if (m > n) {
    if (vs[n - 1] == 0.0) return 0.0;
    log_f += (m - n) * (std::log(vs[n - 1]) - std::log1p(vs[n - 1]));
  }
  return std::exp(log_f);
}

double obf_phi(std::span<const double> ys, const ObfParams& p) {
  p.validate();
  if (static_cast<int>(ys.size()) > p.scheduled) throw std::invalid_argument("need n <= r");
  require_ordered(ys);
  return ObfKernel(p).phi(ys);
}

double obf_unordered_cdf(std::span<const double> ys, const ObfParams& p) {
  p.validate();
  if (static_cast<int>(ys.size()) > p.scheduled) throw std::invalid_argument("need n <= r");
  require_ordered(ys);
  return ObfKernel(p).cdf(ys);
}

double obf_I3(double y3, double y2, double y1, const ObfParams& p) {
  p.validate();
  if (p.scheduled < 3) throw std::invalid_argument("I3 needs r >= 3");
  const double ys[] = {y1, y2, y3};
  require_ordered(ys);
  return ObfKernel(p).cdf3(y3, y2, y1);
}

double obf_joint_pdf_scheduled(std::span<const double> ys, const ObfParams& p) {
  p.validate();
  if (ys.empty() || static_cast<int>(ys.size()) > p.scheduled) {
    throw std::invalid_argument("need 1 <= n <= r");
  }
  if (!ordered(ys)) return 0.0;
  return ObfKernel(p).scheduled(ys);
}

double obf_scale(const ObfParams& p) {
  p.validate();
  const ObfKernel kernel(p);
  // Median of y_1: P(M, a y)^K = 1/2.
  const double target = std::pow(0.5, 1.0 / p.users);
  double lo = 0.0;
  double hi = 1.0;
  while (kernel.cdf1(hi) < target) hi *= 2.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (kernel.cdf1(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double obf_marginal_pdf(int n, double y, const ObfParams& p) {
  p.validate();
  if (n < 1 || n > p.scheduled) throw std::invalid_argument("need 1 <= n <= r");
  if (n > 4) throw std::invalid_argument("marginals are available for n <= 4");
  if (!(y >= 0.0) || std::isinf(y)) return 0.0;
  const ObfKernel kernel(p);
  if (n == 1) {
    return p.users * std::pow(kernel.cdf1(y), p.users - 1) * kernel.phi1(y);
  }
  if (n == 4) {
    // Three levels of adaptive quadrature cost ~1e6 evaluations; a fixed
    // 30-point rule per level in w = y/(1+y) holds ~1e-8.
    using Rule = boost::math::quadrature::gauss<double, 30>;
    double args[4] = {0.0, 0.0, 0.0, y};
    auto level = [](double lo, auto&& inner) { return Rule::integrate(inner, lo, 1.0); };
    return level(ratio(y), [&](double w3) {
      args[2] = w3 / (1.0 - w3);
      const double j3 = 1.0 / ((1.0 - w3) * (1.0 - w3));
      return j3 * level(w3, [&](double w2) {
        args[1] = w2 / (1.0 - w2);
        const double j2 = 1.0 / ((1.0 - w2) * (1.0 - w2));
        return j2 * level(w2, [&](double w1) {
          args[0] = w1 / (1.0 - w1);
          return kernel.scheduled(args) / ((1.0 - w1) * (1.0 - w1));
        });
      });
    });
  }
  const double scale = obf_scale(p);
  numerics::QuadratureSpec spec;
  spec.rel_tol = 1e-7;
  spec.abs_tol = 1e-12;
  // Integrate y_{n-1}, ..., y_1 over [y_{k+1}, inf), outermost y_{n-1}.
  std::vector<numerics::NestedBound> bounds;
  for (int level = 0; level < n - 1; ++level) {
    numerics::NestedBound b;
    b.lower = [y, level](std::span<const double> outer) {
      return level == 0 ? y : outer[level - 1];
    };
    b.upper = [](std::span<const double>) { return kInf; };
    b.scale = scale;
    bounds.push_back(std::move(b));
  }
  std::vector<double> args(static_cast<std::size_t>(n));
  auto f = [&](std::span<const double> outer) {
    // outer = (y_{n-1}, ..., y_1); args = (y_1, ..., y_n).
    for (int i = 0; i < n - 1; ++i) args[i] = outer[n - 2 - i];
    args[n - 1] = y;
    return kernel.scheduled(args);
  };
  return numerics::integrate_iterated(f, bounds, spec);
}

DistributionGrid obf_marginal_grid(int n, const ObfParams& p, const GridSpec& spec) {
  auto pdf = [&](double y) { return obf_marginal_pdf(n, y, p); };
  return DistributionGrid::build(pdf, obf_scale(p), spec);
}

double obf_unordered_marginal_pdf(int n, double v, const ObfParams& p) {
  p.validate();
  if (n < 1 || n > p.scheduled) throw std::invalid_argument("need 1 <= n <= r");
  if (!(v >= 0.0) || std::isinf(v)) return 0.0;
  const ObfKernel kernel(p);
  if (n == 1) return kernel.phi1(v);
  const int m = p.antennas;
  const double a = p.noise();
  const double w = ratio(v);
  // Ordered v_2..v_{n-1} integrate to (w_1 - w_n)^{n-2} / (n-2)! in w = v/(1+v);
  // the remaining v_1 integral expands binomially into incomplete gammas.
  numerics::CompensatedSum acc;
  for (int j = 0; j <= n - 2; ++j) {
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    acc.add(sign * binomial(n - 2, j) * std::pow(1.0 - w, n - 2 - j) * std::pow(a, j) *
            kernel.G(m - j, v));
  }
  return std::pow(w, m - n) * inv1p(v) * inv1p(v) * acc.value() /
         (factorial(m - n) * factorial(n - 2));
}

double obf_unordered_marginal_cdf(int n, double v, const ObfParams& p) {
  p.validate();
  if (n < 1 || n > p.scheduled) throw std::invalid_argument("need 1 <= n <= r");
  if (!(v > 0.0)) return 0.0;
  if (std::isinf(v)) return 1.0;
  if (n <= 3) {
    std::vector<double> ys(static_cast<std::size_t>(n), kInf);
    ys.back() = v;
    return std::clamp(ObfKernel(p).cdf(ys), 0.0, 1.0);
  }
  auto f = [&](double t) { return obf_unordered_marginal_pdf(n, t, p); };
  return std::clamp(numerics::integrate_1d(f, 0.0, v), 0.0, 1.0);
}

double obf_mean_sum_rate(const ObfParams& p) {
  p.validate();
  if (p.scheduled > 4) throw std::invalid_argument("mean sum rate needs r <= 4");
  numerics::CompensatedSum total;
  for (int n = 1; n <= p.scheduled; ++n) {
    const DistributionGrid grid = obf_marginal_grid(n, p);
    total.add(grid.expectation([](double y) { return std::log1p(y); }));
  }
  return total.value();
}

}  // namespace obflab

#include "obflab/analytic_olbf.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace obflab {

namespace {

using numerics::binomial;
using numerics::factorial;
constexpr double kInf = std::numeric_limits<double>::infinity();

double sign_of(int i) { return (i % 2 == 0) ? 1.0 : -1.0; }

void require_unit_interval(std::span<const double> ts) {
  if (ts.empty()) throw std::invalid_argument("need at least one coordinate");
  for (double t : ts) {
    if (std::isnan(t) || t < 0.0 || t > 1.0) {
      throw std::domain_error("transformed SINRs must lie in [0, 1]");
    }
  }
}

// Alternating sum that remembers how much cancellation went into it.
class TermSum {
 public:
  void add(double v) {
    sum_.add(v);
    magnitude_ += std::abs(v);
  }
  [[nodiscard]] double value() const { return sum_.value(); }
  // Rounding of the individual terms stays below ~1e-11 of the result.
  [[nodiscard]] bool trustworthy() const { return magnitude_ <= 1e4 * std::abs(value()); }

 private:
  numerics::CompensatedSum sum_;
  double magnitude_ = 0.0;
};

// Closed forms in the z domain. G(s, t) = e^b Gamma(s, b / (1 - t)), b = M / P.
class OlbfKernel {
 public:
  explicit OlbfKernel(const OlbfParams& p) : m_(p.antennas), k_(p.users), b_(p.noise()) {}

  [[nodiscard]] int antennas() const { return m_; }

  // Off: skip the quadrature rescue of cancelling closed forms. Inside
  // marginal integrals only absolute accuracy matters.
  void set_exact(bool on) { exact_ = on; }

  // Orders 1 - M .. M are all that the closed forms touch.
  [[nodiscard]] double G(int s, double t) const {
    if (t >= 1.0) return 0.0;
    return row(t)[static_cast<std::size_t>(s + m_ - 1)];
  }

  // f(z_1) (1 - z_1)^0 part shared by every joint density: b^M e^{-b z/(1-z)} / (1-z)^{M+1}.
  [[nodiscard]] double g(double z) const {
    if (z < 0.0 || z >= 1.0) return 0.0;
    return std::exp(m_ * std::log(b_) - b_ * z / (1.0 - z) - (m_ + 1) * std::log1p(-z));
  }

  [[nodiscard]] double xi1(double t) const {
    if (t <= 0.0) return 0.0;
    return g(t) * std::pow(t, m_ - 1) / factorial(m_ - 1);
  }

  [[nodiscard]] double cdf1(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return numerics::regularized_lower_gamma(m_, b_ * t / (1.0 - t));
  }

  [[nodiscard]] double cdf1_expansion(double t) const {
    numerics::CompensatedSum acc;
    for (int i = 0; i <= m_ - 1; ++i) {
      acc.add(binomial(m_ - 1, i) * sign_of(i) * std::pow(b_, i) * (G(m_ - i, 0.0) - G(m_ - i, t)));
    }
    return acc.value() / factorial(m_ - 1);
  }

  [[nodiscard]] double xi2(double t2, double t1) const {
    if (t2 > t1) return 0.0;
    TermSum acc;
    for (int i = 0; i <= m_ - 2; ++i) {
      const double c = binomial(m_ - 2, i) * sign_of(i) * std::pow(b_, i) * std::pow(1.0 - t2, m_ - 2 - i);
      acc.add(c * G(m_ - i, t2));
      acc.add(-c * G(m_ - i, t1));
    }
    if (exact_ && !acc.trustworthy()) return kernel_quadrature(m_ - 2, t2, t1);
    return acc.value() / factorial(m_ - 2);
  }

  [[nodiscard]] double eta(double x, double t1, double t3) const {
    TermSum acc;
    const double g_t1_base = 1.0 - t3;
    const double g_top = 1.0 - x - t3;
    for (int i = 0; i <= m_ - 3; ++i) {
      const int e = m_ - i - 2;  // >= 1 for i <= M - 3
      const double c = binomial(m_ - 3, i) * sign_of(i) * std::pow(b_, i);
      const double lead = -c * G(m_ - i, t1) / e;
      acc.add(lead * std::pow(g_t1_base, e));
      acc.add(-lead * std::pow(g_top, e));
      const double front = c * factorial(m_ - i - 1) * std::pow(b_, e);
      for (int j = 0; j <= m_ - i - 1; ++j) {
        const int s = i + j + 2 - m_;
        acc.add(front * G(s, t3) / factorial(j));
        acc.add(-front * G(s, x + t3) / factorial(j));
      }
    }
    if (exact_ && !acc.trustworthy()) {
      return kernel_quadrature(m_ - 2, t3, t1) - kernel_quadrature(m_ - 2, x + t3, t1);
    }
    return acc.value() / factorial(m_ - 3);
  }

  [[nodiscard]] double xi3(double t3, double t2, double t1) const {
    if (t3 > t1) return 0.0;
    return t1 >= t2 + t3 ? eta(t2, t1, t3) : eta(t1 - t3, t1, t3);
  }

  [[nodiscard]] double kernel(int m, double c0, double t1) const {
    if (!(c0 < t1)) return 0.0;
    TermSum acc;
    for (int i = 0; i <= m; ++i) {
      const double c = binomial(m, i) * sign_of(i) * std::pow(1.0 - c0, m - i) * std::pow(b_, i);
      acc.add(c * G(m_ - i, c0));
      acc.add(-c * G(m_ - i, t1));
    }
    if (exact_ && !acc.trustworthy()) return kernel_quadrature(m, c0, t1);
    return acc.value() / factorial(m);
  }

  // The same integral by quadrature; used where the closed form cancels.
  [[nodiscard]] double kernel_quadrature(int m, double c0, double t1) const {
    if (!(c0 < t1)) return 0.0;
    numerics::QuadratureSpec spec;
    spec.rel_tol = 1e-12;
    spec.abs_tol = 1e-300;
    const double norm = factorial(m);
    auto f = [&](double z) { return g(z) * std::pow(z - c0, m) / norm; };
    return numerics::integrate_adaptive(f, c0, t1, spec).value;
  }

  // xi_k for any k >= 2 via the kernel: ts = (t_1, ..., t_k).
  [[nodiscard]] double xi_kernel(std::span<const double> ts) const {
    const int k = static_cast<int>(ts.size());
    const int inner = k - 2;  // z_2..z_{k-1}
    numerics::CompensatedSum acc;
    for (unsigned mask = 0; mask < (1u << inner); ++mask) {
      double shift = ts[k - 1];
      for (int j = 0; j < inner; ++j) {
        if (mask & (1u << j)) shift += ts[1 + j];
      }
      acc.add(sign_of(std::popcount(mask)) * kernel(m_ - 2, shift, ts[0]));
    }
    return acc.value();
  }

  [[nodiscard]] double xi(std::span<const double> ts) const {
    switch (ts.size()) {
      case 1: return xi1(ts[0]);
      case 2: return xi2(ts[1], ts[0]);
      case 3: return xi3(ts[2], ts[1], ts[0]);
      default: return xi_kernel(ts);
    }
  }

  [[nodiscard]] double cdf2(double t1, double t2) const {
    t2 = std::min(t2, t1);
    TermSum acc;
    for (int i = 0; i <= m_ - 2; ++i) {
      const int e = m_ - i - 1;
      const double c = binomial(m_ - 2, i) * sign_of(i) * std::pow(b_, i);
      acc.add(-c * G(m_ - i, t1) * (-std::expm1(e * std::log1p(-t2))) / e);
      const double front = c * factorial(m_ - i - 1) * std::pow(b_, e);
      for (int j = 0; j <= m_ - i - 1; ++j) {
        const int s = i + j + 1 - m_;
        acc.add(front * G(s, 0.0) / factorial(j));
        acc.add(-front * G(s, t2) / factorial(j));
      }
    }
    if (exact_ && !acc.trustworthy()) {
      const double ts[] = {t1, t2};
      return cdf_head_recursive(ts);
    }
    return acc.value() / factorial(m_ - 2);
  }

  [[nodiscard]] double cdf3_head(double t1, double t2, double t3) const {
    TermSum acc;
    const double s23 = t2 + t3;
    for (int i = 0; i <= m_ - 1; ++i) {
      const int e = m_ - i - 1;
      const double c = binomial(m_ - 1, i) * sign_of(i) * std::pow(b_, i);
      const double p2 = std::pow(1.0 - t2, e);
      const double p3 = std::pow(1.0 - t3, e);
      const double p23 = std::pow(std::max(0.0, 1.0 - s23), e);
      acc.add(c * G(m_ - i, 0.0));
      acc.add(-c * p2 * G(m_ - i, t2));
      acc.add(-c * p3 * G(m_ - i, t3));
      acc.add(c * p23 * G(m_ - i, s23));
      const double gt1 = c * G(m_ - i, t1);
      acc.add(-gt1);
      acc.add(gt1 * p2);
      acc.add(gt1 * p3);
      acc.add(-gt1 * p23);
    }
    if (exact_ && !acc.trustworthy()) {
      const double ts[] = {t1, t2, t3};
      return cdf_head_recursive(ts);
    }
    return acc.value() / factorial(m_ - 1);
  }

  // Density in z_1 of {z_1, z_j <= t_j for j in `mask`} by the W / W-bar recursion.
  class WRecursion {
   public:
    WRecursion(const OlbfKernel& k, std::span<const double> tail) : k_(k), n_tail_(static_cast<int>(tail.size())) {
      sums_.assign(1u << n_tail_, 0.0);
      for (unsigned mask = 1; mask < sums_.size(); ++mask) {
        const int low = std::countr_zero(mask);
        sums_[mask] = sums_[mask & (mask - 1)] + tail[low];
      }
    }

    [[nodiscard]] const std::vector<double>& partial_sums() const { return sums_; }

    [[nodiscard]] double w(double z1, unsigned mask) const {
      if (z1 >= sums_[mask]) return closed(z1, mask);
      double acc = 0.0;
      for (unsigned s = 0; s < mask; ++s) {
        if ((s & mask) != s) continue;  // proper subsets of mask
        acc += sign_of(std::popcount(s)) * w_bar(z1, s);
      }
      return acc;
    }

   private:
    [[nodiscard]] double w_bar(double z1, unsigned mask) const {
      if (mask == 0) return k_.xi1(z1);
      if (z1 < sums_[mask]) return 0.0;
      double acc = 0.0;
      for (unsigned r = 0;; r = (r - mask) & mask) {
        acc += sign_of(std::popcount(r)) * closed(z1, r);
        if (r == mask) break;
      }
      return acc;
    }

    // Closed form valid for z1 >= sum of t_j over mask.
    [[nodiscard]] double closed(double z1, unsigned mask) const {
      const int m = k_.antennas();
      double acc = 0.0;
      for (unsigned q = 0;; q = (q - mask) & mask) {
        acc += sign_of(std::popcount(q)) * std::pow(z1 - sums_[q], m - 1);
        if (q == mask) break;
      }
      return k_.g(z1) * acc / factorial(m - 1);
    }

    const OlbfKernel& k_;
    int n_tail_;
    std::vector<double> sums_;
  };

  [[nodiscard]] double cdf_head_recursive(std::span<const double> ts) const {
    const double t1 = ts[0];
    WRecursion rec(*this, ts.subspan(1));
    const unsigned full = (1u << (ts.size() - 1)) - 1;
    std::vector<double> cuts = {0.0, t1};
    for (double s : rec.partial_sums()) {
      if (s > 0.0 && s < t1) cuts.push_back(s);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    numerics::QuadratureSpec spec;
    spec.rel_tol = 1e-12;
    spec.abs_tol = 1e-16;
    numerics::CompensatedSum acc;
    auto f = [&](double z) { return rec.w(z, full); };
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      acc.add(numerics::integrate_adaptive(f, cuts[i], cuts[i + 1], spec).value);
    }
    return acc.value();
  }

  [[nodiscard]] double cdf_kernel(std::span<const double> ts) const {
    const int tail = static_cast<int>(ts.size()) - 1;
    numerics::CompensatedSum acc;
    for (unsigned mask = 0; mask < (1u << tail); ++mask) {
      double shift = 0.0;
      for (int j = 0; j < tail; ++j) {
        if (mask & (1u << j)) shift += ts[1 + j];
      }
      acc.add(sign_of(std::popcount(mask)) * kernel(m_ - 1, shift, ts[0]));
    }
    return acc.value();
  }

  // Head-branch F for t1 >= sum of tail.
  [[nodiscard]] double cdf_head(std::span<const double> ts) const {
    switch (ts.size()) {
      case 1: return cdf1(ts[0]);
      case 2: return cdf2(ts[0], ts[1]);
      case 3: return cdf3_head(ts[0], ts[1], ts[2]);
      default: return cdf_head_recursive(ts);
    }
  }

  // F for clamped ts (tail entries <= t1).
  [[nodiscard]] CdfSegment cdf(std::span<const double> ts) const {
    const int n = static_cast<int>(ts.size());
    double tail_sum = 0.0;
    for (int j = 1; j < n; ++j) tail_sum += ts[j];
    if (n <= 2 || ts[0] >= tail_sum) return {CdfBranch::head, cdf_head(ts)};

    // Split: sum over proper subsets S of the tail of (-1)^|S| Fbar(t1, t_S).
    const int tail = n - 1;
    std::vector<double> sums(1u << tail, 0.0);
    for (unsigned mask = 1; mask < sums.size(); ++mask) {
      sums[mask] = sums[mask & (mask - 1)] + ts[1 + std::countr_zero(mask)];
    }
    const unsigned full = (1u << tail) - 1;
    std::vector<double> head_memo(1u << tail, std::numeric_limits<double>::quiet_NaN());
    auto head_of = [&](unsigned mask) {
      if (std::isnan(head_memo[mask])) {
        std::vector<double> sub = {ts[0]};
        for (int j = 0; j < tail; ++j) {
          if (mask & (1u << j)) sub.push_back(ts[1 + j]);
        }
        head_memo[mask] = cdf_head(sub);
      }
      return head_memo[mask];
    };
    numerics::CompensatedSum acc;
    for (unsigned s = 0; s < full; ++s) {
      if (ts[0] < sums[s]) continue;  // survival vanishes
      double survival = 0.0;
      for (unsigned r = 0;; r = (r - s) & s) {
        survival += sign_of(std::popcount(r)) * head_of(r);
        if (r == s) break;
      }
      acc.add(sign_of(std::popcount(s)) * survival);
    }
    return {CdfBranch::split, acc.value()};
  }

  [[nodiscard]] double survival(std::span<const double> ts) const {
    const int n = static_cast<int>(ts.size());
    double tail_sum = 0.0;
    for (int j = 1; j < n; ++j) {
      if (ts[j] >= ts[0] && ts[0] < 1.0) return 0.0;
      tail_sum += ts[j];
    }
    if (ts[0] < tail_sum) return 0.0;
    const int tail = n - 1;
    numerics::CompensatedSum acc;
    for (unsigned r = 0; r < (1u << tail); ++r) {
      std::vector<double> sub = {ts[0]};
      for (int j = 0; j < tail; ++j) {
        if (r & (1u << j)) sub.push_back(ts[1 + j]);
      }
      acc.add(sign_of(std::popcount(r)) * cdf_head(sub));
    }
    return acc.value();
  }

  [[nodiscard]] double joint_t(std::span<const double> ts) const {
    const int n = static_cast<int>(ts.size());
    double prod = 1.0;
    for (int k = 1; k <= n && prod > 0.0; ++k) prod *= std::max(0.0, xi(ts.first(k)));
    if (prod <= 0.0) return 0.0;
    const double f = std::clamp(cdf(ts).value, 0.0, 1.0);
    double perm = 1.0;
    for (int i = 0; i < n; ++i) perm *= (k_ - i);
    return perm * std::pow(f, k_ - n) * prod;
  }

 private:
  // Every G(., t) at one t, cached for the few t values a joint density
  // evaluation revisits.
  const std::vector<double>& row(double t) const {
    for (const auto& r : rows_) {
      if (r.t == t && !r.values.empty()) return r.values;
    }
    GRow& r = rows_[next_row_];
    next_row_ = (next_row_ + 1) % rows_.size();
    r.t = t;
    r.values.assign(static_cast<std::size_t>(2 * m_), 0.0);
    const double x = b_ / (1.0 - t);
    const double e = std::exp(b_ - x);
    // s >= 1: (s-1)! sum_{i<s} x^i / i!
    double term = 1.0;
    double sum = 1.0;
    for (int s = 1; s <= m_; ++s) {
      if (s > 1) {
        term *= x / (s - 1);
        sum += term;
      }
      r.values[static_cast<std::size_t>(s + m_ - 1)] = e * factorial(s - 1) * sum;
    }
    for (int s = 1 - m_; s <= 0; ++s) {
      r.values[static_cast<std::size_t>(s + m_ - 1)] = numerics::upper_incomplete_gamma_shifted(s, x, b_);
    }
    return r.values;
  }

  struct GRow {
    double t = -1.0;
    std::vector<double> values;
  };

  int m_;
  int k_;
  double b_;
  bool exact_ = true;
  mutable std::array<GRow, 8> rows_;
  mutable std::size_t next_row_ = 0;
};

std::vector<double> clamp_tail(std::span<const double> ts) {
  std::vector<double> out(ts.begin(), ts.end());
  for (std::size_t j = 1; j < out.size(); ++j) out[j] = std::min(out[j], out[0]);
  return out;
}

double checked_probability(double v) {
  if (v < -1e-9 || v > 1.0 + 1e-9) {
    throw std::runtime_error("CDF evaluation left [0, 1] by " +
                             std::to_string(v < 0.0 ? -v : v - 1.0));
  }
  return std::clamp(v, 0.0, 1.0);
}

bool in_t_region(std::span<const double> ts) {
  if (ts.empty()) return false;
  if (!(ts[0] >= 0.0) || ts[0] > 1.0) return false;
  for (std::size_t j = 1; j < ts.size(); ++j) {
    if (!(ts[j] >= 0.0) || ts[j] > ts[0]) return false;
  }
  return true;
}

}  // namespace

void OlbfParams::validate() const {
  if (antennas < 2) throw std::invalid_argument("OLBF needs M >= 2");
  if (users < antennas) throw std::invalid_argument("OLBF needs K >= M");
  if (!(power > 0.0) || !std::isfinite(power)) throw std::invalid_argument("P must be positive");
}

double v_to_z(double v) {
  if (!(v >= 0.0)) throw std::domain_error("v must be nonnegative");
  return std::isinf(v) ? 1.0 : v / (v + 1.0);
}

double z_to_v(double z) {
  if (!(z >= 0.0) || z > 1.0) throw std::domain_error("z must lie in [0, 1]");
  return z >= 1.0 ? kInf : z / (1.0 - z);
}

std::vector<double> olbf_x_to_v(std::span<const double> xs, const OlbfParams& p) {
  p.validate();
  const int m = p.antennas;
  if (static_cast<int>(xs.size()) != m) throw std::invalid_argument("need M coordinates");
  double total = 0.0;
  for (double x : xs) {
    if (!(x >= 0.0)) throw std::domain_error("coordinates must be nonnegative");
    total += x;
  }
  const double b = p.noise();
  std::vector<double> v(m);
  v[0] = total / b;
  for (int n = 1; n < m; ++n) v[n] = xs[n] / (total - xs[n] + b);
  return v;
}

OlbfInverse olbf_v_to_x(std::span<const double> vs, const OlbfParams& p) {
  p.validate();
  const int m = p.antennas;
  if (static_cast<int>(vs.size()) != m) throw std::invalid_argument("need M SINRs");
  double wsum = 0.0;
  for (int k = 1; k < m; ++k) {
    if (!(vs[k] >= 0.0)) throw std::domain_error("SINRs must be nonnegative");
    wsum += vs[k] / (1.0 + vs[k]);
  }
  if (!(vs[0] >= 0.0) || vs[0] / (1.0 + vs[0]) < wsum - 1e-15) {
    throw std::domain_error("SINRs outside the OLBF support");
  }
  const double b = p.noise();
  OlbfInverse out;
  out.xs.resize(m);
  out.xs[0] = std::max(0.0, b * vs[0] - b * (1.0 + vs[0]) * wsum);
  for (int k = 1; k < m; ++k) out.xs[k] = b * (1.0 + vs[0]) * vs[k] / (1.0 + vs[k]);
  double det = std::pow(b, m) * std::pow(1.0 + vs[0], m - 1);
  for (int k = 1; k < m; ++k) det /= (1.0 + vs[k]) * (1.0 + vs[k]);
  out.abs_jacobian = det;
  return out;
}

double olbf_unordered_pdf_v(std::span<const double> vs, const OlbfParams& p) {
  p.validate();
  const int m = p.antennas;
  if (static_cast<int>(vs.size()) != m) throw std::invalid_argument("need M SINRs");
  double wsum = 0.0;
  for (int k = 1; k < m; ++k) {
    if (!(vs[k] >= 0.0)) return 0.0;
    wsum += vs[k] / (1.0 + vs[k]);
  }
  if (!(vs[0] >= 0.0) || vs[0] / (1.0 + vs[0]) < wsum) return 0.0;
  const double b = p.noise();
  double log_f = m * std::log(b) - b * vs[0] + (m - 1) * std::log1p(vs[0]);
  for (int k = 1; k < m; ++k) log_f -= 2.0 * std::log1p(vs[k]);
  return std::exp(log_f);
}

double olbf_unordered_pdf_z(std::span<const double> zs, const OlbfParams& p) {
  p.validate();
  const int n = static_cast<int>(zs.size());
  if (n < 1 || n > p.antennas) throw std::invalid_argument("need 1 <= n <= M");
  double rest = 0.0;
  for (int j = 1; j < n; ++j) {
    if (!(zs[j] >= 0.0) || zs[j] > 1.0) return 0.0;
    rest += zs[j];
  }
  if (!(zs[0] >= 0.0) || zs[0] > 1.0 || rest > zs[0]) return 0.0;
  const OlbfKernel kernel(p);
  return kernel.g(zs[0]) * std::pow(zs[0] - rest, p.antennas - n) / factorial(p.antennas - n);
}

double olbf_xi(std::span<const double> ts, const OlbfParams& p) {
  p.validate();
  if (static_cast<int>(ts.size()) > p.antennas) throw std::invalid_argument("need k <= M");
  require_unit_interval(ts);
  return std::max(0.0, OlbfKernel(p).xi(ts));
}

double olbf_eta(double x, double t1, double t3, const OlbfParams& p) {
  p.validate();
  if (p.antennas < 3) throw std::invalid_argument("eta needs M >= 3");
  const double ts[] = {x, t1, t3};
  require_unit_interval(ts);
  if (x > t1 - t3 + 1e-15) throw std::domain_error("eta needs x <= t1 - t3");
  return OlbfKernel(p).eta(std::min(x, t1 - t3), t1, t3);
}

CdfSegment olbf_cdf_z(std::span<const double> ts, const OlbfParams& p) {
  p.validate();
  if (static_cast<int>(ts.size()) > p.antennas) throw std::invalid_argument("need n <= M");
  require_unit_interval(ts);
  const std::vector<double> clamped = clamp_tail(ts);
  CdfSegment seg = OlbfKernel(p).cdf(clamped);
  seg.value = checked_probability(seg.value);
  return seg;
}

double olbf_survival_z(std::span<const double> ts, const OlbfParams& p) {
  p.validate();
  if (static_cast<int>(ts.size()) > p.antennas) throw std::invalid_argument("need n <= M");
  require_unit_interval(ts);
  return checked_probability(OlbfKernel(p).survival(ts));
}

double olbf_joint_pdf_t(std::span<const double> ts, const OlbfParams& p) {
  p.validate();
  if (ts.empty() || static_cast<int>(ts.size()) > p.antennas) {
    throw std::invalid_argument("need 1 <= n <= M");
  }
  if (!in_t_region(ts)) return 0.0;
  return OlbfKernel(p).joint_t(ts);
}

double olbf_joint_pdf_y(std::span<const double> ys, const OlbfParams& p) {
  p.validate();
  if (ys.empty() || static_cast<int>(ys.size()) > p.antennas) {
    throw std::invalid_argument("need 1 <= n <= M");
  }
  std::vector<double> ts(ys.size());
  double jac = 1.0;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    if (!(ys[j] >= 0.0) || std::isinf(ys[j])) return 0.0;
    ts[j] = ys[j] / (1.0 + ys[j]);
    jac /= (1.0 + ys[j]) * (1.0 + ys[j]);
  }
  if (!in_t_region(ts)) return 0.0;
  return OlbfKernel(p).joint_t(ts) * jac;
}

double olbf_scale(const OlbfParams& p) {
  p.validate();
  const OlbfKernel kernel(p);
  const double target = std::pow(0.5, 1.0 / p.users);
  auto cdf_y = [&](double y) { return kernel.cdf1(y / (1.0 + y)); };
  double lo = 0.0;
  double hi = 1.0;
  while (cdf_y(hi) < target) hi *= 2.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf_y(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double olbf_marginal_pdf(int n, double y, const OlbfParams& p) {
  p.validate();
  if (n < 1 || n > p.antennas) throw std::invalid_argument("need 1 <= n <= M");
  if (!(y >= 0.0) || std::isinf(y)) return 0.0;
  OlbfKernel kernel(p);
  kernel.set_exact(false);
  const double t = y / (1.0 + y);
  const double jac = 1.0 / ((1.0 + y) * (1.0 + y));
  if (n == 1) {
    return p.users * std::pow(kernel.cdf1(t), p.users - 1) * kernel.xi1(t) * jac;
  }
  numerics::QuadratureSpec spec;
  spec.rel_tol = 1e-7;
  spec.abs_tol = 1e-12;
  const numerics::QuadratureSpec inner = spec.tightened();
  std::vector<double> ts(static_cast<std::size_t>(n));
  ts[n - 1] = t;

  // Density in t_1 after integrating the middle coordinates t_2..t_{n-1} over [0, t_1].
  auto middle = [&](double t1) -> double {
    ts[0] = t1;
    if (n == 2) return kernel.joint_t(ts);
    if (n == 3) {
      auto h = [&](double t2) {
        ts[1] = t2;
        return kernel.joint_t(ts);
      };
      const double seam = t1 - t;  // branch change of xi_3 and F_{z3}
      double acc = 0.0;
      if (seam > 0.0) acc += numerics::integrate_adaptive(h, 0.0, seam, inner).value;
      acc += numerics::integrate_adaptive(h, std::max(seam, 0.0), t1, inner).value;
      return acc;
    }
    std::vector<numerics::NestedBound> bounds;
    for (int j = 1; j < n - 1; ++j) {
      numerics::NestedBound b;
      b.lower = [](std::span<const double>) { return 0.0; };
      b.upper = [t1](std::span<const double>) { return t1; };
      bounds.push_back(std::move(b));
    }
    auto h = [&](std::span<const double> mid) {
      for (int j = 1; j < n - 1; ++j) ts[j] = mid[j - 1];
      return kernel.joint_t(ts);
    };
    return numerics::integrate_iterated(h, bounds, inner);
  };
  // Outer t_1 over [t, 1] mapped to y_1 over [y, inf).
  auto outer = [&](double y1) {
    const double t1 = y1 / (1.0 + y1);
    return middle(t1) / ((1.0 + y1) * (1.0 + y1));
  };
  return numerics::integrate_semi_infinite(outer, y, spec, olbf_scale(p)) * jac;
}

DistributionGrid olbf_marginal_grid(int n, const OlbfParams& p, const GridSpec& spec) {
  auto pdf = [&](double y) { return olbf_marginal_pdf(n, y, p); };
  return DistributionGrid::build(pdf, olbf_scale(p), spec);
}

double olbf_unordered_marginal_cdf(int n, double v, const OlbfParams& p) {
  p.validate();
  if (n < 1 || n > p.antennas) throw std::invalid_argument("need 1 <= n <= M");
  if (!(v > 0.0)) return 0.0;
  if (std::isinf(v)) return 1.0;
  const OlbfKernel kernel(p);
  const double t = v / (1.0 + v);
  if (n == 1) return kernel.cdf1(t);
  return std::clamp(kernel.cdf2(1.0, t), 0.0, 1.0);
}

double olbf_mean_sum_rate(const OlbfParams& p) {
  p.validate();
  numerics::CompensatedSum total;
  for (int n = 1; n <= p.antennas; ++n) {
    const DistributionGrid grid = olbf_marginal_grid(n, p);
    total.add(grid.expectation([](double y) { return std::log1p(y); }));
  }
  return total.value();
}

namespace olbf_detail {

double cdf_z1_expansion(double t1, const OlbfParams& p) {
  p.validate();
  return OlbfKernel(p).cdf1_expansion(t1);
}

double cdf_z2_closed(double t1, double t2, const OlbfParams& p) {
  p.validate();
  return OlbfKernel(p).cdf2(t1, t2);
}

double cdf_z3_head_closed(double t1, double t2, double t3, const OlbfParams& p) {
  p.validate();
  if (p.antennas < 3) throw std::invalid_argument("F_z3 needs M >= 3");
  if (t1 < t2 + t3) throw std::domain_error("head branch needs t1 >= t2 + t3");
  return OlbfKernel(p).cdf3_head(t1, t2, t3);
}

double cdf_head_recursive(std::span<const double> ts, const OlbfParams& p) {
  p.validate();
  require_unit_interval(ts);
  double tail = 0.0;
  for (std::size_t j = 1; j < ts.size(); ++j) tail += ts[j];
  if (ts[0] < tail) throw std::domain_error("head branch needs t1 >= sum of tail");
  return OlbfKernel(p).cdf_head_recursive(ts);
}

double dirichlet_kernel(int m, double c0, double t1, const OlbfParams& p) {
  p.validate();
  if (m < 0 || m > p.antennas - 1) throw std::invalid_argument("kernel order out of range");
  return OlbfKernel(p).kernel(m, c0, t1);
}

double cdf_kernel(std::span<const double> ts, const OlbfParams& p) {
  p.validate();
  require_unit_interval(ts);
  return OlbfKernel(p).cdf_kernel(clamp_tail(ts));
}

}  // namespace olbf_detail

}  // namespace obflab

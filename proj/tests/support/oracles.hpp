#pragma once

// Reference values by brute-force quadrature of the unordered densities.
// Nothing here touches the closed forms; every region kink is passed as an
// explicit breakpoint so each piece is smooth.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "obflab/analytic_obf.hpp"
#include "obflab/analytic_olbf.hpp"
#include "obflab/numerics.hpp"

namespace obflab::testing {

inline nlohmann::json frozen_oracles() {
  std::ifstream is(OBFLAB_ORACLE_FILE);
  if (!is) throw std::runtime_error("cannot open " + std::string(OBFLAB_ORACLE_FILE));
  return nlohmann::json::parse(is);
}

inline double rel_err(double got, double want) {
  const double d = std::abs(got - want);
  return want == 0.0 ? d : d / std::abs(want);
}

inline numerics::QuadratureSpec oracle_spec() {
  numerics::QuadratureSpec s;
  s.rel_tol = 1e-11;
  s.abs_tol = 1e-300;
  s.max_subdivisions = 4000;
  return s;
}

/// Integral over [a, b] split at every breakpoint strictly inside.
template <typename F>
double integrate_pieces(F&& f, double a, double b, std::vector<double> cuts,
                        const numerics::QuadratureSpec& spec = oracle_spec()) {
  if (!(b > a)) return 0.0;
  cuts.push_back(a);
  cuts.push_back(b);
  std::erase_if(cuts, [&](double c) { return c < a || c > b; });
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  numerics::CompensatedSum sum;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] > cuts[i]) sum.add(numerics::integrate_1d(f, cuts[i], cuts[i + 1], spec));
  }
  return sum.value();
}

// OBF -----------------------------------------------------------------------

inline double obf_phi2_quad(double y1, double y2, const ObfParams& p) {
  return integrate_pieces(
      [&](double v1) {
        const double vs[] = {v1, y2};
        return obf_unordered_pdf(vs, p);
      },
      y2, y1, {});
}

inline double obf_phi3_quad(double y1, double y2, double y3, const ObfParams& p) {
  return integrate_pieces(
      [&](double v2) {
        return integrate_pieces(
            [&](double v1) {
              const double vs[] = {v1, v2, y3};
              return obf_unordered_pdf(vs, p);
            },
            v2, y1, {});
      },
      y3, y2, {});
}

inline double obf_I3_quad(double y1, double y2, double y3, const ObfParams& p) {
  return integrate_pieces([&](double a) { return obf_phi3_quad(y1, y2, a, p); }, 0.0, y3, {});
}

// OLBF ----------------------------------------------------------------------

inline double olbf_pdf_z(std::vector<double> zs, const OlbfParams& p) {
  return olbf_unordered_pdf_z(zs, p);
}

inline double olbf_xi2_quad(double t1, double t2, const OlbfParams& p) {
  return integrate_pieces([&](double z1) { return olbf_pdf_z({z1, t2}, p); }, t2, t1, {});
}

inline double olbf_eta_quad(double x, double t1, double t3, const OlbfParams& p) {
  return integrate_pieces(
      [&](double z2) {
        return integrate_pieces([&](double z1) { return olbf_pdf_z({z1, z2, t3}, p); }, z2 + t3, t1, {});
      },
      0.0, x, {});
}

namespace detail {

// Sums of every nonempty subset of ts[lo..hi).
inline std::vector<double> subset_sums(const std::vector<double>& ts, std::size_t lo, std::size_t hi) {
  std::vector<double> out{0.0};
  for (std::size_t j = lo; j < hi; ++j) {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out.push_back(out[i] + ts[j]);
  }
  out.erase(out.begin());
  return out;
}

// Integrates z_k, z_{k-1}, ..., z_2 (outermost first), then z_1.
inline double cdf_level(const std::vector<double>& ts, std::vector<double>& zs, std::size_t k, double used,
                        const OlbfParams& p) {
  const double t1 = ts[0];
  if (k == 0) {
    return integrate_pieces([&](double z1) {
      zs[0] = z1;
      return olbf_unordered_pdf_z(zs, p);
    }, used, t1, {});
  }
  const double hi = std::min(ts[k], t1 - used);
  std::vector<double> cuts;
  for (double s : subset_sums(ts, 1, k)) cuts.push_back(t1 - used - s);
  return integrate_pieces([&](double zk) {
    zs[k] = zk;
    return cdf_level(ts, zs, k - 1, used + zk, p);
  }, 0.0, hi, cuts);
}

inline double survival_level(const std::vector<double>& ts, std::vector<double>& zs, std::size_t k,
                             double used, const OlbfParams& p) {
  const double t1 = ts[0];
  if (k == 0) {
    return integrate_pieces([&](double z1) {
      zs[0] = z1;
      return olbf_unordered_pdf_z(zs, p);
    }, used, t1, {});
  }
  double inner_min = 0.0;
  for (std::size_t j = 1; j < k; ++j) inner_min += ts[j];
  return integrate_pieces([&](double zk) {
    zs[k] = zk;
    return survival_level(ts, zs, k - 1, used + zk, p);
  }, ts[k], t1 - used - inner_min, {});
}

}  // namespace detail

/// Pr(z_1 <= t_1, ..., z_n <= t_n) by n-fold quadrature.
inline double olbf_cdf_quad(std::vector<double> ts, const OlbfParams& p) {
  std::vector<double> zs(ts.size(), 0.0);
  return detail::cdf_level(ts, zs, ts.size() - 1, 0.0, p);
}

/// d/dt_k Pr(z_1 <= t_1, ..., z_k <= t_k): z_k pinned at t_k, the rest integrated.
inline double olbf_xi_quad(std::vector<double> ts, const OlbfParams& p) {
  const std::size_t k = ts.size() - 1;
  std::vector<double> zs(ts.size(), 0.0);
  zs[k] = ts[k];
  return detail::cdf_level(ts, zs, k - 1, ts[k], p);
}

/// Pr(z_1 <= t_1, z_2 > t_2, ..., z_n > t_n) by n-fold quadrature.
inline double olbf_survival_quad(std::vector<double> ts, const OlbfParams& p) {
  std::vector<double> zs(ts.size(), 0.0);
  return detail::survival_level(ts, zs, ts.size() - 1, 0.0, p);
}

}  // namespace obflab::testing

#pragma once

#include <span>
#include <vector>

#include "obflab/distribution_grid.hpp"
#include "obflab/numerics.hpp"

namespace obflab {

/// OLBF always schedules r = M users out of K.
struct OlbfParams {
  int antennas = 2;
  int users = 2;
  double power = 1.0;

  /// Throws std::invalid_argument unless K >= M >= 2 and P > 0.
  void validate() const;
  /// b = M / P.
  [[nodiscard]] double noise() const { return antennas / power; }
};

double v_to_z(double v);
double z_to_v(double z);

/// Unordered SINRs from M i.i.d. unit exponentials.
std::vector<double> olbf_x_to_v(std::span<const double> xs, const OlbfParams& p);

struct OlbfInverse {
  std::vector<double> xs;
  double abs_jacobian = 0.0;  // |det d(x)/d(v)|
};

/// Inverse of olbf_x_to_v; throws std::domain_error off the support
/// v_1/(1+v_1) >= sum_k v_k/(1+v_k).
OlbfInverse olbf_v_to_x(std::span<const double> vs, const OlbfParams& p);

/// Joint density of all M unordered SINRs; zero off the support.
double olbf_unordered_pdf_v(std::span<const double> vs, const OlbfParams& p);

/// Joint density of (z_1..z_n), zero off 0 <= z_2 + ... + z_n <= z_1 <= 1.
double olbf_unordered_pdf_z(std::span<const double> zs, const OlbfParams& p);

/// xi_k(t_k, ..., t_1) with ts = (t_1, ..., t_k). Zero when some t_j > t_1
/// would leave the region empty; throws on values outside [0, 1].
double olbf_xi(std::span<const double> ts, const OlbfParams& p);

/// eta(x) for fixed t_1, t_3: the z_2 integral over [0, x] of xi_3's integrand.
double olbf_eta(double x, double t1, double t3, const OlbfParams& p);

enum class CdfBranch { head, split };

struct CdfSegment {
  CdfBranch segment = CdfBranch::head;
  double value = 0.0;
};

/// Pr(z_1 <= t_1, ..., z_n <= t_n) with ts = (t_1, ..., t_n).
CdfSegment olbf_cdf_z(std::span<const double> ts, const OlbfParams& p);

/// Pr(z_1 <= t_1, z_2 > t_2, ..., z_n > t_n).
double olbf_survival_z(std::span<const double> ts, const OlbfParams& p);

/// Joint density of the first n scheduled transformed SINRs t_j = y_j/(1+y_j).
double olbf_joint_pdf_t(std::span<const double> ts, const OlbfParams& p);

/// Same density in the SINR domain.
double olbf_joint_pdf_y(std::span<const double> ys, const OlbfParams& p);

/// Marginal density of the n-th scheduled SINR.
double olbf_marginal_pdf(int n, double y, const OlbfParams& p);

DistributionGrid olbf_marginal_grid(int n, const OlbfParams& p, const GridSpec& spec = {});

/// CDF of the n-th unordered SINR (n = 1 own beam, n >= 2 any other beam).
double olbf_unordered_marginal_cdf(int n, double v, const OlbfParams& p);

/// Sum over scheduled users of E ln(1 + y_n), in nats.
double olbf_mean_sum_rate(const OlbfParams& p);

/// Typical size of y_1.
double olbf_scale(const OlbfParams& p);

namespace olbf_detail {

// Alternative evaluation routes, exposed for cross-checks.

/// F_{z1} through the binomial expansion.
double cdf_z1_expansion(double t1, const OlbfParams& p);
/// F_{z2} in closed form (t2 <= t1).
double cdf_z2_closed(double t1, double t2, const OlbfParams& p);
/// F_{z3} head branch in closed form (t1 >= t2 + t3).
double cdf_z3_head_closed(double t1, double t2, double t3, const OlbfParams& p);
/// F_{zn} head branch through the W-recursion with numeric z_1 integration.
double cdf_head_recursive(std::span<const double> ts, const OlbfParams& p);
/// int_{c0}^{t1} f(z_1) (z_1 - c0)^m / m! dz_1 with f(z_1)(1-z_1)^{M+1}
/// = b^M e^{-b z_1/(1-z_1)}, in closed form.
double dirichlet_kernel(int m, double c0, double t1, const OlbfParams& p);
/// F_{zn} for any branch as an alternating sum of dirichlet_kernel terms.
double cdf_kernel(std::span<const double> ts, const OlbfParams& p);

}  // namespace olbf_detail

}  // namespace obflab

#pragma once

#include <span>
#include <vector>

#include "obflab/distribution_grid.hpp"
#include "obflab/numerics.hpp"

namespace obflab {

/// Adaptive OBF with exactly r scheduled users among K, M antennas, power P.
struct ObfParams {
  int antennas = 2;
  int users = 2;
  int scheduled = 2;
  double power = 1.0;

  /// Throws std::invalid_argument unless K >= r, M >= r >= 1, P > 0.
  void validate() const;
  /// a = r / P, the noise term of every candidacy SINR.
  [[nodiscard]] double noise() const { return scheduled / power; }
};

/// Unordered SINRs from the squared channel coordinates x_1..x_r.
std::vector<double> obf_x_to_v(std::span<const double> xs, const ObfParams& p);

struct ObfInverse {
  std::vector<double> xs;
  double abs_jacobian = 0.0;  // |det d(x)/d(v)|
};

/// Inverse of obf_x_to_v together with its Jacobian determinant.
ObfInverse obf_v_to_x(std::span<const double> vs, const ObfParams& p);

/// Density of the x coordinates: x_1..x_{r-1} unit exponentials and
/// x_r ~ Gamma(M - r + 1).
double obf_x_pdf(std::span<const double> xs, const ObfParams& p);

/// Joint density of the first n unordered SINRs; zero off v_1 >= ... >= v_n >= 0.
double obf_unordered_pdf(std::span<const double> vs, const ObfParams& p);

/// phi_n(y_n; y_{n-1}, ..., y_1) with ys = (y_1, ..., y_n): the unordered
/// density integrated over v_1..v_{n-1} in [v_{k+1}, y_k].
double obf_phi(std::span<const double> ys, const ObfParams& p);

/// Joint CDF of (v_1..v_n) over the ordered region, evaluated at ys. For
/// n = 1, 2, 3 closed form; n >= 4 by quadrature. Entries of ys may be +inf.
double obf_unordered_cdf(std::span<const double> ys, const ObfParams& p);

/// int_0^{y3} phi_3(a, y2, y1) da in closed form.
double obf_I3(double y3, double y2, double y1, const ObfParams& p);

/// Joint density of the first n scheduled SINRs.
double obf_joint_pdf_scheduled(std::span<const double> ys, const ObfParams& p);

/// Marginal density of the n-th scheduled SINR (n <= 4).
double obf_marginal_pdf(int n, double y, const ObfParams& p);

/// Tabulated marginal of the n-th scheduled SINR.
DistributionGrid obf_marginal_grid(int n, const ObfParams& p, const GridSpec& spec = {});

/// Marginal density of the n-th unordered SINR and its CDF.
double obf_unordered_marginal_pdf(int n, double v, const ObfParams& p);
double obf_unordered_marginal_cdf(int n, double v, const ObfParams& p);

/// Sum over scheduled users of E ln(1 + y_n), in nats (r <= 3 by default
/// tabulation; r = 4 allowed but slow).
double obf_mean_sum_rate(const ObfParams& p);

/// Typical size of y_1, used to scale the half-line maps.
double obf_scale(const ObfParams& p);

}  // namespace obflab

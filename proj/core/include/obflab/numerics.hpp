#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>

namespace obflab::numerics {

/// Tolerances for the adaptive Gauss-Kronrod integrators.
struct QuadratureSpec {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  int max_subdivisions = 2000;

  /// Throws std::invalid_argument if any field is out of range.
  void validate() const;

  /// Both tolerances one decade tighter. Used for the inner levels of
  /// nested integrals.
  [[nodiscard]] QuadratureSpec tightened() const;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int subdivisions = 0;
  bool converged = true;
};

/// Raised when the subdivision budget runs out before the requested
/// tolerance is met. Carries the best estimate found so far.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(double estimate, double error_bound);

  [[nodiscard]] double estimate() const noexcept { return estimate_; }
  [[nodiscard]] double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

using Integrand = std::function<double(double)>;
using MultiIntegrand = std::function<double(std::span<const double>)>;

/// Adaptive G10/K21 quadrature over the finite interval [a, b]. Never
/// throws on non-convergence; the caller inspects `converged`.
/// `initial_panels` splits [a, b] uniformly before adaptation starts.
QuadratureResult integrate_adaptive(const Integrand& f, double a, double b,
                                    const QuadratureSpec& spec,
                                    int initial_panels = 1);

/// Integral of f over [a, b]. An infinite b is handled by
/// integrate_semi_infinite. Throws NonConvergenceError when the budget is
/// exhausted.
double integrate_1d(const Integrand& f, double a, double b,
                    const QuadratureSpec& spec = {});

/// Integral of f over [a, inf) through y = a + scale * u / (1 - u).
/// `scale` should be of the order of where f keeps its mass.
double integrate_semi_infinite(const Integrand& f, double a,
                               const QuadratureSpec& spec = {},
                               double scale = 1.0);

/// Non-throwing variant of integrate_semi_infinite.
QuadratureResult integrate_semi_infinite_adaptive(const Integrand& f, double a,
                                                  const QuadratureSpec& spec,
                                                  double scale = 1.0);

/// Limits for one level of a nested integral. Both functions receive the
/// coordinates of the enclosing levels (outermost first). The upper limit
/// may be +infinity.
struct NestedBound {
  std::function<double(std::span<const double>)> lower;
  std::function<double(std::span<const double>)> upper;
  double scale = 1.0;  // used only when upper is infinite
};

/// Iterated integral of f over up to three levels. bounds[0] is the
/// outermost variable. Inner levels run one decade tighter than the level
/// enclosing them. Empty ranges contribute zero.
double integrate_nested(const MultiIntegrand& f,
                        std::span<const NestedBound> bounds,
                        const QuadratureSpec& spec = {});

/// Same as integrate_nested without the three-level cap. Cost grows
/// geometrically with depth.
double integrate_iterated(const MultiIntegrand& f,
                          std::span<const NestedBound> bounds,
                          const QuadratureSpec& spec = {});

// Special functions ---------------------------------------------------------

/// E1(x) = int_x^inf e^-t / t dt, for x > 0.
double exp_integral_e1(double x);

/// Upper incomplete gamma function for integer order. For s >= 1 this is
/// the finite sum Gamma(s) e^-x sum_{i<s} x^i / i!; for s <= 0 it requires
/// x > 0.
double upper_incomplete_gamma(int s, double x);

/// e^x * Gamma(s, x). Stays representable where Gamma(s, x) underflows.
double upper_incomplete_gamma_scaled(int s, double x);

/// e^shift * Gamma(s, x), folded in log space. Returns 0 for x = +inf.
double upper_incomplete_gamma_shifted(int s, double x, double shift);

/// Regularized lower incomplete gamma P(s, x) for integer s >= 1.
double regularized_lower_gamma(int s, double x);

double factorial(int n);
double binomial(int n, int k);

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) noexcept;
  [[nodiscard]] double value() const noexcept { return sum_ + correction_; }

 private:
  double sum_ = 0.0;
  double correction_ = 0.0;
};

}  // namespace obflab::numerics

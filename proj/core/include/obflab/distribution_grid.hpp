#pragma once

#include <array>
#include <functional>
#include <vector>

namespace obflab {

struct GridSpec {
  int initial_cells = 48;
  double cell_abs_tol = 1e-8;
  double cell_rel_tol = 1e-6;
  int max_depth = 20;
};

/// Tabulated density of a nonnegative random variable, built once from a
/// pointwise pdf. The half line is mapped to u = y / (y + scale) in [0, 1)
/// and covered by adaptively bisected cells, each holding a 10-point
/// Gauss-Legendre rule and the matching Legendre expansion of the density.
/// The CDF is exact integration of that expansion.
class DistributionGrid {
 public:
  static DistributionGrid build(const std::function<double(double)>& pdf,
                                double scale, const GridSpec& spec = {});

  [[nodiscard]] double cdf(double y) const;
  [[nodiscard]] double pdf(double y) const;
  [[nodiscard]] double total_mass() const { return total_; }
  [[nodiscard]] double scale() const { return scale_; }

  /// E[g(Y)] under the tabulated density.
  [[nodiscard]] double expectation(const std::function<double(double)>& g) const;

  /// Cell edges mapped back to y (the last edge is +inf) and the CDF there.
  [[nodiscard]] std::vector<double> abscissae() const;
  [[nodiscard]] std::vector<double> cdf_values() const;

  [[nodiscard]] std::size_t cells() const { return cells_.size(); }

 private:
  struct Cell {
    double u_lo;
    double u_hi;
    double mass_before;
    double mass;
    std::array<double, 10> values;   // density in u at the GL nodes
    std::array<double, 10> legendre; // expansion coefficients on [-1, 1]
  };

  double scale_ = 1.0;
  double total_ = 0.0;
  std::vector<Cell> cells_;
};

}  // namespace obflab

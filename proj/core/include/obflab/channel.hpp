#pragma once

#include <Eigen/Dense>
#include <complex>

#include "obflab/rng.hpp"

namespace obflab {

using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// M antennas, K users, total power P (linear), r scheduled users.
struct SystemParams {
  int antennas = 1;
  int users = 1;
  double power = 1.0;
  int scheduled = 1;

  /// Throws std::invalid_argument unless K >= M >= 1, 1 <= r <= M, P > 0.
  void validate() const;

  friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

double db_to_linear(double db);

/// K x M channel matrix, one row per user, with the seed it was drawn from.
class ChannelSet {
 public:
  ChannelSet(CMatrix gains, SeedRecord seed);

  [[nodiscard]] const CMatrix& gains() const { return h_; }
  [[nodiscard]] SeedRecord seed() const { return seed_; }
  [[nodiscard]] int users() const { return static_cast<int>(h_.rows()); }
  [[nodiscard]] int antennas() const { return static_cast<int>(h_.cols()); }
  /// Channel of user k as a column vector.
  [[nodiscard]] CVector channel(int k) const { return h_.row(k).transpose(); }
  [[nodiscard]] double norm2(int k) const { return h_.row(k).squaredNorm(); }

 private:
  CMatrix h_;
  SeedRecord seed_;
};

/// M x n matrix of unit-norm beamforming columns. The orthonormal factory
/// enforces pairwise orthogonality; zero-forcing beams are only unit norm.
class BeamformerMatrix {
 public:
  static constexpr double kTolerance = 1e-10;

  BeamformerMatrix() = default;
  static BeamformerMatrix orthonormal(CMatrix w);
  static BeamformerMatrix unit_columns(CMatrix w);

  [[nodiscard]] const CMatrix& weights() const { return w_; }
  [[nodiscard]] int columns() const { return static_cast<int>(w_.cols()); }
  [[nodiscard]] bool is_orthonormal() const { return orthonormality_error() <= kTolerance; }
  /// max |W^H W - I| entrywise.
  [[nodiscard]] double orthonormality_error() const;

 private:
  explicit BeamformerMatrix(CMatrix w) : w_(std::move(w)) {}
  CMatrix w_;
};

/// Entries (a + ib)/sqrt(2), a, b standard normal, from the channel
/// substream of `seed`.
ChannelSet draw_channels(const SystemParams& params, SeedRecord seed);

/// (I - W W^H) h for W with orthonormal columns (possibly none).
CVector project_complement(const CMatrix& w, const CVector& h);
CVector project_complement(const BeamformerMatrix& w, const CVector& h);

/// M x (M-1) orthonormal basis of the complement of unit vector v, by
/// Gram-Schmidt over the canonical basis skipping the coordinate where |v|
/// is largest.
CMatrix null_space_basis(const CVector& v);

}  // namespace obflab

#include "obflab/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace obflab {

void SystemParams::validate() const {
  if (antennas < 1) throw std::invalid_argument("M must be at least 1");
  if (users < antennas) throw std::invalid_argument("K must be at least M");
  if (scheduled < 1 || scheduled > antennas) {
    throw std::invalid_argument("r must lie in [1, M]");
  }
  if (!(power > 0.0) || !std::isfinite(power)) {
    throw std::invalid_argument("P must be positive and finite");
  }
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

ChannelSet::ChannelSet(CMatrix gains, SeedRecord seed) : h_(std::move(gains)), seed_(seed) {
  if (!h_.allFinite()) throw std::invalid_argument("channel entries must be finite");
}

BeamformerMatrix BeamformerMatrix::orthonormal(CMatrix w) {
  BeamformerMatrix b(std::move(w));
  if (!b.is_orthonormal()) {
    throw std::invalid_argument("beamformer columns are not orthonormal");
  }
  return b;
}

BeamformerMatrix BeamformerMatrix::unit_columns(CMatrix w) {
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    if (std::abs(w.col(j).norm() - 1.0) > kTolerance) {
      throw std::invalid_argument("beamformer column is not unit norm");
    }
  }
  return BeamformerMatrix(std::move(w));
}

double BeamformerMatrix::orthonormality_error() const {
  if (w_.cols() == 0) return 0.0;
  const CMatrix g = w_.adjoint() * w_ - CMatrix::Identity(w_.cols(), w_.cols());
  return g.cwiseAbs().maxCoeff();
}

ChannelSet draw_channels(const SystemParams& params, SeedRecord seed) {
  PhiloxStream rng(seed, PhiloxStream::Purpose::channel);
  CMatrix h(params.users, params.antennas);
  for (int k = 0; k < params.users; ++k) {
    for (int m = 0; m < params.antennas; ++m) h(k, m) = rng.complex_normal();
  }
  return ChannelSet(std::move(h), seed);
}

CVector project_complement(const CMatrix& w, const CVector& h) {
  if (w.rows() != h.size() && w.cols() > 0) {
    throw std::invalid_argument("project_complement: dimension mismatch");
  }
  if (w.cols() == 0) return h;
  return h - w * (w.adjoint() * h);
}

CVector project_complement(const BeamformerMatrix& w, const CVector& h) {
  if (w.columns() > 0 && w.weights().rows() != h.size()) {
    throw std::invalid_argument("project_complement: dimension mismatch");
  }
  return project_complement(w.weights(), h);
}

CMatrix null_space_basis(const CVector& v) {
  const Eigen::Index m = v.size();
  const double norm = v.norm();
  if (m == 0 || norm == 0.0) throw std::invalid_argument("null_space_basis of zero vector");
  if (std::abs(norm - 1.0) > 1e-12) throw std::invalid_argument("null_space_basis needs a unit vector");

  Eigen::Index skip = 0;
  v.cwiseAbs().maxCoeff(&skip);
  CMatrix basis(m, m - 1);
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (i == skip) continue;
    CVector e = CVector::Zero(m);
    e(i) = 1.0;
    // Two passes of modified Gram-Schmidt against v and earlier columns.
    for (int pass = 0; pass < 2; ++pass) {
      e -= v * v.dot(e);
      for (Eigen::Index j = 0; j < col; ++j) e -= basis.col(j) * basis.col(j).dot(e);
    }
    basis.col(col++) = e / e.norm();
  }
  return basis;
}

}  // namespace obflab

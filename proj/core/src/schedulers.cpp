#include "obflab/schedulers.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "obflab/numerics.hpp"

namespace obflab {

namespace {

std::vector<double> row_norms2(const CMatrix& h) {
  std::vector<double> out(static_cast<std::size_t>(h.rows()));
  for (Eigen::Index k = 0; k < h.rows(); ++k) out[k] = h.row(k).squaredNorm();
  return out;
}

int argmax_gain(const std::vector<double>& norms2) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(norms2.size()); ++k) {
    if (norms2[k] > norms2[best]) best = k;
  }
  return best;
}

// ||h||^2 - sum_j |w_j^H h|^2 over the first `cols` columns of w.
double residual_power(const CMatrix& w, Eigen::Index cols, const CVector& h, double norm2) {
  double captured = 0.0;
  for (Eigen::Index j = 0; j < cols; ++j) captured += std::norm(w.col(j).dot(h));
  return std::max(0.0, norm2 - captured);
}

double obf_sinr(double norm2, double residual, double noise) {
  return residual / (norm2 - residual + noise);
}

// Final SINRs when every scheduled user sees noise `noise`.
std::vector<double> obf_final_sinrs(const std::vector<double>& residuals,
                                    const std::vector<double>& norms2, double noise) {
  std::vector<double> out(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    out[i] = obf_sinr(norms2[i], residuals[i], noise);
  }
  return out;
}

std::vector<int> draw_distinct(int k, int count, SeedRecord seed) {
  PhiloxStream rng(seed, PhiloxStream::Purpose::selection);
  std::vector<int> pool(static_cast<std::size_t>(k));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < count; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(k - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

void check_power(double power) {
  if (!(power > 0.0) || !std::isfinite(power)) throw std::invalid_argument("P must be positive");
}

}  // namespace

double sum_rate(std::span<const double> sinrs) {
  numerics::CompensatedSum acc;
  for (double s : sinrs) {
    if (!(s >= 0.0)) throw std::invalid_argument("SINR must be nonnegative");
    acc.add(std::log1p(s));
  }
  return acc.value();
}

ScheduleOutcome adaptive_obf(const ChannelSet& h, double power, ObfMode mode) {
  check_power(power);
  const int k_users = h.users();
  const int m = h.antennas();
  if (k_users < 1) throw std::invalid_argument("adaptive_obf needs at least one user");
  const int max_steps = std::min(k_users, m);
  if (mode.force_r && (*mode.force_r < 1 || *mode.force_r > max_steps)) {
    throw std::invalid_argument("force-r must lie in [1, min(K, M)]");
  }
  const CMatrix& g = h.gains();
  const std::vector<double> norms2 = row_norms2(g);

  CMatrix w(m, m);
  std::vector<char> taken(static_cast<std::size_t>(k_users), 0);
  std::vector<int> users;
  std::vector<double> residuals;
  std::vector<double> user_norms2;
  ScheduleOutcome out;

  const int first = argmax_gain(norms2);
  users.push_back(first);
  taken[first] = 1;
  residuals.push_back(norms2[first]);
  user_norms2.push_back(norms2[first]);
  w.col(0) = g.row(first).transpose() / std::sqrt(norms2[first]);
  const double first_noise = (mode.force_r ? *mode.force_r : 1) / power;
  out.step_sinrs.push_back(norms2[first] / first_noise);

  std::vector<double> sinrs = obf_final_sinrs(residuals, user_norms2, first_noise);
  double rate = sum_rate(sinrs);
  out.rate_trace.push_back(rate);

  const int steps = mode.force_r ? *mode.force_r : max_steps;
  for (int n = 2; n <= steps; ++n) {
    const double noise = (mode.force_r ? *mode.force_r : n) / power;
    int best = -1;
    double best_sinr = 0.0;
    double best_residual = 0.0;
    for (int u = 0; u < k_users; ++u) {
      if (taken[u]) continue;
      const CVector hu = g.row(u).transpose();
      const double res = residual_power(w, n - 1, hu, norms2[u]);
      const double s = obf_sinr(norms2[u], res, noise);
      if (s > best_sinr) {
        best_sinr = s;
        best = u;
        best_residual = res;
      }
    }
    if (best < 0) break;  // every remaining candidate is fully aligned

    const CVector hbar = g.row(best).transpose() / std::sqrt(norms2[best]);
    const CVector proj = project_complement(w.leftCols(n - 1), hbar);
    CMatrix w_next = w;
    w_next.col(n - 1) = proj / proj.norm();

    std::vector<double> res_next = residuals;
    res_next.push_back(best_residual);
    std::vector<double> norms_next = user_norms2;
    norms_next.push_back(norms2[best]);
    std::vector<double> sinrs_next = obf_final_sinrs(res_next, norms_next, noise);
    const double rate_next = sum_rate(sinrs_next);
    out.rate_trace.push_back(rate_next);
    if (!mode.force_r && rate_next <= rate) break;

    w = std::move(w_next);
    users.push_back(best);
    taken[best] = 1;
    residuals = std::move(res_next);
    user_norms2 = std::move(norms_next);
    sinrs = std::move(sinrs_next);
    rate = rate_next;
    out.step_sinrs.push_back(best_sinr);
  }

  out.users = std::move(users);
  out.beams = BeamformerMatrix::orthonormal(w.leftCols(static_cast<Eigen::Index>(out.users.size())));
  out.sinrs = std::move(sinrs);
  out.sum_rate = rate;
  return out;
}

ScheduleOutcome olbf(const ChannelSet& h, double power) {
  check_power(power);
  const int k_users = h.users();
  const int m = h.antennas();
  if (k_users < m) throw std::invalid_argument("olbf needs K >= M");
  const CMatrix& g = h.gains();
  const std::vector<double> norms2 = row_norms2(g);
  const double noise = m / power;

  ScheduleOutcome out;
  std::vector<char> taken(static_cast<std::size_t>(k_users), 0);
  const int first = argmax_gain(norms2);
  taken[first] = 1;
  out.users.push_back(first);
  out.sinrs.push_back(norms2[first] / noise);

  CMatrix w(m, m);
  w.col(0) = g.row(first).transpose() / std::sqrt(norms2[first]);
  if (m > 1) w.rightCols(m - 1) = null_space_basis(w.col(0));

  for (int n = 2; n <= m; ++n) {
    const auto beam = w.col(n - 1);
    int best = -1;
    double best_sinr = 0.0;
    for (int u = 0; u < k_users; ++u) {
      if (taken[u]) continue;
      const double on_beam = std::norm(beam.dot(g.row(u).transpose()));
      const double s = on_beam / (norms2[u] - on_beam + noise);
      if (s > best_sinr) {
        best_sinr = s;
        best = u;
      }
    }
    if (best < 0) {
      // Only possible when every remaining channel is orthogonal to the beam.
      for (int u = 0; u < k_users && best < 0; ++u) {
        if (!taken[u]) best = u;
      }
    }
    taken[best] = 1;
    out.users.push_back(best);
    out.sinrs.push_back(best_sinr);
  }
  out.step_sinrs = out.sinrs;
  out.beams = BeamformerMatrix::orthonormal(std::move(w));
  out.sum_rate = sum_rate(out.sinrs);
  out.rate_trace.push_back(out.sum_rate);
  return out;
}

UnorderedSinrs random_selection_obf(const ChannelSet& h, double power, int r,
                                    SeedRecord seed) {
  check_power(power);
  const int k_users = h.users();
  const int m = h.antennas();
  if (r < 1 || r > std::min(k_users, m)) {
    throw std::invalid_argument("r must lie in [1, min(K, M)]");
  }
  const std::vector<int> drawn = draw_distinct(k_users, r, seed);
  const CMatrix& g = h.gains();
  const double noise = r / power;

  UnorderedSinrs out;
  out.probe = drawn[0];
  const CVector probe = g.row(drawn[0]).transpose();
  const double probe_norm2 = probe.squaredNorm();
  out.sinrs.push_back(probe_norm2 / noise);

  CMatrix w(m, std::max(r - 1, 0));
  for (int n = 2; n <= r; ++n) {
    // Beam n-1 comes from the (n-1)-th helper user.
    const CVector helper = g.row(drawn[n - 1]).transpose();
    const CVector proj = project_complement(w.leftCols(n - 2), helper / helper.norm());
    w.col(n - 2) = proj / proj.norm();
    const double res = residual_power(w, n - 1, probe, probe_norm2);
    out.sinrs.push_back(obf_sinr(probe_norm2, res, noise));
  }
  return out;
}

UnorderedSinrs random_selection_olbf(const ChannelSet& h, double power, SeedRecord seed) {
  check_power(power);
  const int k_users = h.users();
  const int m = h.antennas();
  if (k_users < m) throw std::invalid_argument("olbf needs K >= M");
  const int draws = std::min(2, k_users);
  const std::vector<int> drawn = draw_distinct(k_users, draws, seed);
  const CMatrix& g = h.gains();
  const double noise = m / power;

  UnorderedSinrs out;
  out.probe = drawn[0];
  const CVector probe = g.row(drawn[0]).transpose();
  const double probe_norm2 = probe.squaredNorm();
  out.sinrs.push_back(probe_norm2 / noise);
  if (m == 1) return out;

  const CVector anchor = g.row(drawn[1]).transpose();
  const CMatrix basis = null_space_basis(anchor / anchor.norm());
  for (int n = 2; n <= m; ++n) {
    const double on_beam = std::norm(basis.col(n - 2).dot(probe));
    out.sinrs.push_back(on_beam / (probe_norm2 - on_beam + noise));
  }
  return out;
}

namespace {

// Zero-forcing SINRs of the rows of `sub`, or empty if the rows are
// numerically dependent.
std::vector<double> zf_sinrs(const CMatrix& sub, double per_user_power) {
  const CMatrix gram = sub * sub.adjoint();
  Eigen::LDLT<CMatrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success) return {};
  const auto d = ldlt.vectorD();
  const double scale = gram.diagonal().real().maxCoeff();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(std::real(d(i)) > 1e-12 * scale)) return {};
  }
  const CMatrix inv = ldlt.solve(CMatrix::Identity(gram.rows(), gram.cols()));
  std::vector<double> out(static_cast<std::size_t>(gram.rows()));
  for (Eigen::Index i = 0; i < gram.rows(); ++i) out[i] = per_user_power / inv(i, i).real();
  return out;
}

CMatrix stack_rows(const CMatrix& g, const std::vector<int>& users) {
  CMatrix sub(static_cast<Eigen::Index>(users.size()), g.cols());
  for (std::size_t i = 0; i < users.size(); ++i) sub.row(i) = g.row(users[i]);
  return sub;
}

void check_r(const ChannelSet& h, int r) {
  if (r < 1 || r > std::min(h.users(), h.antennas())) {
    throw std::invalid_argument("r must lie in [1, min(K, M)]");
  }
}

}  // namespace

ScheduleOutcome zfs_schedule(const ChannelSet& h, double power, int r) {
  check_power(power);
  check_r(h, r);
  const CMatrix& g = h.gains();
  const double p_user = power / r;
  ScheduleOutcome out;
  std::vector<char> taken(static_cast<std::size_t>(h.users()), 0);

  for (int step = 0; step < r; ++step) {
    int best = -1;
    double best_rate = -1.0;
    std::vector<double> best_sinrs;
    std::vector<int> trial = out.users;
    trial.push_back(-1);
    for (int u = 0; u < h.users(); ++u) {
      if (taken[u]) continue;
      trial.back() = u;
      std::vector<double> s = zf_sinrs(stack_rows(g, trial), p_user);
      if (s.empty()) continue;
      const double rate = sum_rate(s);
      if (rate > best_rate) {
        best_rate = rate;
        best = u;
        best_sinrs = std::move(s);
      }
    }
    if (best < 0) throw std::runtime_error("zfs_schedule: no linearly independent candidate left");
    taken[best] = 1;
    out.users.push_back(best);
    out.sinrs = std::move(best_sinrs);
    out.step_sinrs.push_back(out.sinrs.back());
    out.rate_trace.push_back(best_rate);
  }

  const CMatrix sub = stack_rows(g, out.users);
  // Row i of `sub` holds h_i^T, so h_i^H w_j = conj(sub) w_j.
  const CMatrix lhs = sub.conjugate();
  CMatrix w = lhs.adjoint() * (lhs * lhs.adjoint()).inverse();
  for (Eigen::Index j = 0; j < w.cols(); ++j) w.col(j).normalize();
  out.beams = BeamformerMatrix::unit_columns(std::move(w));
  out.sum_rate = sum_rate(out.sinrs);
  return out;
}

ScheduleOutcome greedy_zfdp_schedule(const ChannelSet& h, double power, int r) {
  check_power(power);
  check_r(h, r);
  const CMatrix& g = h.gains();
  const double p_user = power / r;
  const std::vector<double> norms2 = row_norms2(g);
  ScheduleOutcome out;
  std::vector<char> taken(static_cast<std::size_t>(h.users()), 0);
  CMatrix q(h.antennas(), r);

  for (int step = 0; step < r; ++step) {
    int best = -1;
    double best_gain = 0.0;
    for (int u = 0; u < h.users(); ++u) {
      if (taken[u]) continue;
      const CVector hu = g.row(u).transpose();
      const double gain = residual_power(q, step, hu, norms2[u]);
      if (gain > 1e-12 * norms2[u] && gain > best_gain) {
        best_gain = gain;
        best = u;
      }
    }
    if (best < 0) throw std::runtime_error("greedy_zfdp_schedule: no independent candidate left");
    const CVector proj = project_complement(q.leftCols(step), g.row(best).transpose());
    q.col(step) = proj / proj.norm();
    taken[best] = 1;
    out.users.push_back(best);
    out.sinrs.push_back(p_user * best_gain);
    out.step_sinrs.push_back(out.sinrs.back());
    out.rate_trace.push_back(sum_rate(out.sinrs));
  }
  out.beams = BeamformerMatrix::orthonormal(std::move(q));
  out.sum_rate = sum_rate(out.sinrs);
  return out;
}

}  // namespace obflab

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "obflab/channel.hpp"

namespace obflab {

struct ScheduleOutcome {
  std::vector<int> users;          // scheduling order, 0-based indices
  BeamformerMatrix beams;          // column i serves users[i]
  std::vector<double> sinrs;       // at the final power split
  double sum_rate = 0.0;           // nats
  std::vector<double> step_sinrs;  // winning candidacy SINR at each step
  std::vector<double> rate_trace;  // C(U_1), C(U_2), ... as evaluated

  [[nodiscard]] int n_scheduled() const { return static_cast<int>(users.size()); }
};

/// Adaptive-stop when force_r is empty; otherwise exactly force_r steps
/// with every SINR evaluated at the split P / force_r.
struct ObfMode {
  std::optional<int> force_r;

  static ObfMode adaptive_stop() { return {}; }
  static ObfMode force(int r) { return {r}; }
};

ScheduleOutcome adaptive_obf(const ChannelSet& h, double power, ObfMode mode = {});

ScheduleOutcome olbf(const ChannelSet& h, double power);

/// Candidacy SINRs of one randomly drawn user (the probe) along a
/// randomly built beam sequence, i.e. the scheduler without ordering.
struct UnorderedSinrs {
  int probe = -1;
  std::vector<double> sinrs;
};

/// Draws r distinct users. The first is the probe; the other r - 1 build
/// the beams of steps 1..r-1 with the adaptive OBF projection rule. Returns the
/// probe's candidacy SINRs at steps 1..r with power split P / r.
UnorderedSinrs random_selection_obf(const ChannelSet& h, double power, int r,
                                    SeedRecord seed);

/// Draws two distinct users: the probe, and the user whose channel fixes
/// the orthonormal beam set. Returns the probe's SINR on each of the M
/// beams with power split P / M (first entry: its own matched beam).
UnorderedSinrs random_selection_olbf(const ChannelSet& h, double power, SeedRecord seed);

/// Greedy zero-forcing selection, uniform power P / r.
ScheduleOutcome zfs_schedule(const ChannelSet& h, double power, int r);

/// Greedy zero-forcing dirty-paper selection, uniform power P / r.
ScheduleOutcome greedy_zfdp_schedule(const ChannelSet& h, double power, int r);

/// Sum of ln(1 + s).
double sum_rate(std::span<const double> sinrs);

}  // namespace obflab

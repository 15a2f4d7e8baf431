#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "obflab/channel.hpp"

namespace obflab {

enum class Scheme { adaptive_obf, olbf, zfs, zfdp, random_obf, random_olbf };

std::string_view scheme_name(Scheme s);
/// Accepts the names printed by scheme_name; throws std::invalid_argument.
Scheme parse_scheme(std::string_view name);

struct ExperimentConfig {
  SystemParams params;
  Scheme scheme = Scheme::adaptive_obf;
  std::int64_t trials = 1;
  std::uint64_t seed = 0;
  std::optional<int> force_r;  // adaptive OBF only
  int threads = 0;             // 0: OBFLAB_THREADS or hardware concurrency

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.params == b.params && a.scheme == b.scheme && a.trials == b.trials &&
           a.seed == b.seed && a.force_r == b.force_r;
  }

  /// Throws std::invalid_argument for an invalid combination.
  void validate() const;
  /// Number of SINRs every trial reports, or nullopt when it varies
  /// (adaptive-stop OBF).
  [[nodiscard]] std::optional<int> fixed_ranks() const;
};

/// One trial: scheduled (or probed) users in rank order with their SINRs.
struct TrialRecord {
  std::vector<int> users;
  std::vector<double> sinrs;
  double sum_rate = 0.0;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

class EmpiricalDistribution {
 public:
  EmpiricalDistribution() = default;
  /// Sorts; throws std::invalid_argument on non-finite samples.
  explicit EmpiricalDistribution(std::vector<double> samples);

  [[nodiscard]] const std::vector<double>& samples() const { return samples_; }
  [[nodiscard]] std::size_t size() const { return samples_.size(); }
  [[nodiscard]] bool empty() const { return samples_.empty(); }
  [[nodiscard]] double cdf(double x) const;
  [[nodiscard]] double mean() const;

 private:
  std::vector<double> samples_;
};

/// sup_i max(|i/N - F(x_i)|, |(i-1)/N - F(x_i)|). Throws on an empty sample.
double ks_distance(const EmpiricalDistribution& emp, const std::function<double(double)>& cdf);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Fixed-order compensated mean and standard error.
MeanEstimate mean_and_stderr(const std::vector<double>& xs);

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<TrialRecord> trials;
  std::vector<EmpiricalDistribution> per_rank;  // index 0: rank 1
  std::vector<std::optional<double>> ks;        // per rank, when an analytic CDF exists
  MeanEstimate sum_rate;
  std::optional<double> analytic_sum_rate;
  std::int64_t structural_checks = 0;
  int workers = 1;
  double runtime_seconds = 0.0;
};

struct RunOptions {
  bool compute_ks = true;
  bool compute_analytic_mean = true;
};

/// Single trial t of the experiment; trial t always uses seed {seed, t}.
TrialRecord run_trial(const ExperimentConfig& config, std::int64_t t);

/// Deterministic for a given config regardless of the worker count.
ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Fills per_rank, ks, sum_rate and analytic_sum_rate from report.trials.
void summarize(ExperimentReport& report, const RunOptions& options = {});

MeanEstimate mean_sum_rate_mc(const ExperimentConfig& config);

/// Analytic CDF of the rank-n SINR (1-based) for this config, if one is
/// implemented. Tabulated CDFs are cached per parameter set.
std::optional<std::function<double(double)>> analytic_cdf(const ExperimentConfig& config, int rank);
std::optional<std::function<double(double)>> analytic_pdf(const ExperimentConfig& config, int rank);
std::optional<double> analytic_mean_sum_rate(const ExperimentConfig& config);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  double density = 0.0;  // count / (N * width)
};

/// Equal-width bins over [0, upper); upper <= 0 picks the 0.999 quantile.
std::vector<HistogramBin> density_histogram(const EmpiricalDistribution& emp, int bins,
                                            double upper = 0.0);

/// Explicit request if positive, else OBFLAB_THREADS, else hardware concurrency.
int resolve_threads(int requested);

}  // namespace obflab

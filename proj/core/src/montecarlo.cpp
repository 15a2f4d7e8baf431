#include "obflab/montecarlo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "obflab/analytic_obf.hpp"
#include "obflab/analytic_olbf.hpp"
#include "obflab/numerics.hpp"
#include "obflab/schedulers.hpp"

namespace obflab {

namespace {

constexpr std::int64_t kCheckEvery = 1000;

struct SchemeName {
  Scheme scheme;
  std::string_view name;
};

constexpr SchemeName kSchemes[] = {
    {Scheme::adaptive_obf, "adaptive-obf"}, {Scheme::olbf, "olbf"},
    {Scheme::zfs, "zfs"},                   {Scheme::zfdp, "zfdp"},
    {Scheme::random_obf, "random-obf"},     {Scheme::random_olbf, "random-olbf"},
};

void check_trial(const ExperimentConfig& config, const ScheduleOutcome* outcome,
                 const TrialRecord& rec) {
  for (double s : rec.sinrs) {
    if (!(s >= 0.0)) throw std::logic_error("negative or NaN SINR in trial");
  }
  if (outcome != nullptr && config.scheme != Scheme::zfs && !outcome->beams.is_orthonormal()) {
    throw std::logic_error("beamformer lost orthonormality");
  }
  if (config.scheme == Scheme::olbf) {
    const double t1 = rec.sinrs[0] / (1.0 + rec.sinrs[0]);
    for (std::size_t j = 1; j < rec.sinrs.size(); ++j) {
      if (rec.sinrs[j] / (1.0 + rec.sinrs[j]) > t1 + 1e-12) {
        throw std::logic_error("OLBF SINRs left the ordered t-region");
      }
    }
  }
}

TrialRecord record_of(const ScheduleOutcome& out) {
  return {out.users, out.sinrs, out.sum_rate};
}

// Tabulated analytic marginals, shared across experiments with equal parameters.
struct ModelKey {
  Scheme scheme;
  int m, k, r;
  double p;
  auto operator<=>(const ModelKey&) const = default;
};

struct Model {
  std::vector<std::shared_ptr<const DistributionGrid>> grids;
  std::mutex mutex;
};

class ModelCache {
 public:
  std::shared_ptr<const DistributionGrid> grid(const ModelKey& key, int rank) {
    std::shared_ptr<Model> model;
    {
      std::lock_guard lock(mutex_);
      auto& slot = models_[key];
      if (!slot) {
        slot = std::make_shared<Model>();
        slot->grids.resize(static_cast<std::size_t>(key.r));
      }
      model = slot;
    }
    std::lock_guard lock(model->mutex);
    auto& g = model->grids[rank - 1];
    if (!g) {
      if (key.scheme == Scheme::adaptive_obf) {
        g = std::make_shared<const DistributionGrid>(
            obf_marginal_grid(rank, ObfParams{key.m, key.k, key.r, key.p}));
      } else {
        g = std::make_shared<const DistributionGrid>(
            olbf_marginal_grid(rank, OlbfParams{key.m, key.k, key.p}));
      }
    }
    return g;
  }

 private:
  std::mutex mutex_;
  std::map<ModelKey, std::shared_ptr<Model>> models_;
};

ModelCache& model_cache() {
  static ModelCache cache;
  return cache;
}

// Ordered-marginal tabulation is offered for at most three ranks.
std::optional<ModelKey> tabulated_key(const ExperimentConfig& c) {
  const SystemParams& p = c.params;
  if (c.scheme == Scheme::adaptive_obf && c.force_r && *c.force_r <= 3) {
    return ModelKey{c.scheme, p.antennas, p.users, *c.force_r, p.power};
  }
  if (c.scheme == Scheme::olbf && p.antennas >= 2 && p.antennas <= 3) {
    return ModelKey{c.scheme, p.antennas, p.users, p.antennas, p.power};
  }
  return std::nullopt;
}

}  // namespace

std::string_view scheme_name(Scheme s) {
  for (const auto& e : kSchemes) {
    if (e.scheme == s) return e.name;
  }
  throw std::invalid_argument("unknown scheme");
}

Scheme parse_scheme(std::string_view name) {
  for (const auto& e : kSchemes) {
    if (e.name == name) return e.scheme;
  }
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  params.validate();
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (threads < 0) throw std::invalid_argument("threads must be nonnegative");
  if (force_r) {
    if (scheme != Scheme::adaptive_obf) throw std::invalid_argument("force-r applies to adaptive-obf only");
    if (*force_r < 1 || *force_r > params.antennas) throw std::invalid_argument("force-r must lie in [1, M]");
    if (*force_r > params.users) throw std::invalid_argument("force-r exceeds K");
  }
  if ((scheme == Scheme::olbf || scheme == Scheme::random_olbf) && params.antennas < 2) {
    throw std::invalid_argument("OLBF needs M >= 2");
  }
  if (scheme == Scheme::random_olbf && params.users < 2) {
    throw std::invalid_argument("random-olbf needs K >= 2");
  }
}

std::optional<int> ExperimentConfig::fixed_ranks() const {
  switch (scheme) {
    case Scheme::adaptive_obf:
      return force_r ? std::optional<int>(*force_r) : std::nullopt;
    case Scheme::olbf:
    case Scheme::random_olbf:
      return params.antennas;
    case Scheme::zfs:
    case Scheme::zfdp:
    case Scheme::random_obf:
      return params.scheduled;
  }
  return std::nullopt;
}

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples) : samples_(std::move(samples)) {
  for (double s : samples_) {
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite sample");
  }
  std::sort(samples_.begin(), samples_.end());
}

double EmpiricalDistribution::cdf(double x) const {
  if (samples_.empty()) throw std::logic_error("empty distribution");
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
  return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
}

double EmpiricalDistribution::mean() const { return mean_and_stderr(samples_).mean; }

double ks_distance(const EmpiricalDistribution& emp, const std::function<double(double)>& cdf) {
  if (emp.empty()) throw std::invalid_argument("KS distance of an empty sample");
  const auto& xs = emp.samples();
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = std::clamp(cdf(xs[i]), 0.0, 1.0);
    d = std::max({d, std::abs((i + 1) / n - f), std::abs(i / n - f)});
  }
  return std::min(d, 1.0);
}

MeanEstimate mean_and_stderr(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean of an empty sample");
  numerics::CompensatedSum s;
  for (double x : xs) s.add(x);
  const double n = static_cast<double>(xs.size());
  const double mean = s.value() / n;
  if (xs.size() < 2) return {mean, 0.0};
  numerics::CompensatedSum ss;
  for (double x : xs) ss.add((x - mean) * (x - mean));
  return {mean, std::sqrt(ss.value() / (n - 1.0) / n)};
}

TrialRecord run_trial(const ExperimentConfig& config, std::int64_t t) {
  const SeedRecord seed{config.seed, static_cast<std::uint64_t>(t)};
  const ChannelSet h = draw_channels(config.params, seed);
  const double power = config.params.power;
  switch (config.scheme) {
    case Scheme::adaptive_obf:
      return record_of(adaptive_obf(h, power, ObfMode{config.force_r}));
    case Scheme::olbf:
      return record_of(olbf(h, power));
    case Scheme::zfs:
      return record_of(zfs_schedule(h, power, config.params.scheduled));
    case Scheme::zfdp:
      return record_of(greedy_zfdp_schedule(h, power, config.params.scheduled));
    case Scheme::random_obf: {
      UnorderedSinrs u = random_selection_obf(h, power, config.params.scheduled, seed);
      TrialRecord rec;
      rec.users.assign(u.sinrs.size(), u.probe);
      rec.sum_rate = sum_rate(u.sinrs);
      rec.sinrs = std::move(u.sinrs);
      return rec;
    }
    case Scheme::random_olbf: {
      UnorderedSinrs u = random_selection_olbf(h, power, seed);
      TrialRecord rec;
      rec.users.assign(u.sinrs.size(), u.probe);
      rec.sum_rate = sum_rate(u.sinrs);
      rec.sinrs = std::move(u.sinrs);
      return rec;
    }
  }
  throw std::logic_error("unhandled scheme");
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("OBFLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::optional<std::function<double(double)>> analytic_cdf(const ExperimentConfig& config, int rank) {
  const auto ranks = config.fixed_ranks();
  if (!ranks || rank < 1 || rank > *ranks) return std::nullopt;
  const SystemParams& p = config.params;
  if (auto key = tabulated_key(config)) {
    auto grid = model_cache().grid(*key, rank);
    return [grid](double y) { return grid->cdf(y); };
  }
  if (config.scheme == Scheme::random_obf) {
    const ObfParams op{p.antennas, p.users, p.scheduled, p.power};
    return [op, rank](double v) { return obf_unordered_marginal_cdf(rank, v, op); };
  }
  if (config.scheme == Scheme::random_olbf) {
    const OlbfParams op{p.antennas, p.users, p.power};
    return [op, rank](double v) { return olbf_unordered_marginal_cdf(rank, v, op); };
  }
  return std::nullopt;
}

std::optional<std::function<double(double)>> analytic_pdf(const ExperimentConfig& config, int rank) {
  const auto ranks = config.fixed_ranks();
  if (!ranks || rank < 1 || rank > *ranks) return std::nullopt;
  const SystemParams& p = config.params;
  if (auto key = tabulated_key(config)) {
    auto grid = model_cache().grid(*key, rank);
    return [grid](double y) { return grid->pdf(y); };
  }
  if (config.scheme == Scheme::random_obf) {
    const ObfParams op{p.antennas, p.users, p.scheduled, p.power};
    return [op, rank](double v) { return obf_unordered_marginal_pdf(rank, v, op); };
  }
  return std::nullopt;
}

std::optional<double> analytic_mean_sum_rate(const ExperimentConfig& config) {
  const auto key = tabulated_key(config);
  if (!key) return std::nullopt;
  numerics::CompensatedSum total;
  for (int n = 1; n <= key->r; ++n) {
    total.add(model_cache().grid(*key, n)->expectation([](double y) { return std::log1p(y); }));
  }
  return total.value();
}

void summarize(ExperimentReport& report, const RunOptions& options) {
  const ExperimentConfig& config = report.config;
  std::size_t ranks = 0;
  for (const auto& rec : report.trials) ranks = std::max(ranks, rec.sinrs.size());
  std::vector<std::vector<double>> by_rank(ranks);
  std::vector<double> rates;
  rates.reserve(report.trials.size());
  for (const auto& rec : report.trials) {
    for (std::size_t i = 0; i < rec.sinrs.size(); ++i) by_rank[i].push_back(rec.sinrs[i]);
    rates.push_back(rec.sum_rate);
  }
  report.per_rank.clear();
  for (auto& v : by_rank) report.per_rank.emplace_back(std::move(v));
  report.sum_rate = mean_and_stderr(rates);

  report.ks.assign(ranks, std::nullopt);
  if (options.compute_ks) {
    for (std::size_t i = 0; i < ranks; ++i) {
      if (auto cdf = analytic_cdf(config, static_cast<int>(i + 1))) {
        report.ks[i] = ks_distance(report.per_rank[i], *cdf);
      }
    }
  }
  if (options.compute_analytic_mean) report.analytic_sum_rate = analytic_mean_sum_rate(config);
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.config = config;
  report.trials.resize(static_cast<std::size_t>(config.trials));

  const int workers = static_cast<int>(
      std::min<std::int64_t>(resolve_threads(config.threads), config.trials));
  report.workers = workers;
  std::vector<std::int64_t> checks(static_cast<std::size_t>(workers), 0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));

  // Contiguous blocks; every trial writes only its own slot.
  auto work = [&](int w) {
    try {
      const std::int64_t lo = config.trials * w / workers;
      const std::int64_t hi = config.trials * (w + 1) / workers;
      for (std::int64_t t = lo; t < hi; ++t) {
        TrialRecord rec = run_trial(config, t);
        if (t % kCheckEvery == 0) {
          // Recompute the outcome to inspect the beams.
          const SeedRecord seed{config.seed, static_cast<std::uint64_t>(t)};
          const ChannelSet h = draw_channels(config.params, seed);
          std::optional<ScheduleOutcome> out;
          if (config.scheme == Scheme::adaptive_obf) out = adaptive_obf(h, config.params.power, ObfMode{config.force_r});
          if (config.scheme == Scheme::olbf) out = olbf(h, config.params.power);
          if (config.scheme == Scheme::zfdp) out = greedy_zfdp_schedule(h, config.params.power, config.params.scheduled);
          check_trial(config, out ? &*out : nullptr, rec);
          ++checks[w];
        }
        report.trials[t] = std::move(rec);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (auto c : checks) report.structural_checks += c;

  summarize(report, options);

  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

MeanEstimate mean_sum_rate_mc(const ExperimentConfig& config) {
  RunOptions options;
  options.compute_ks = false;
  options.compute_analytic_mean = false;
  return run_experiment(config, options).sum_rate;
}

std::vector<HistogramBin> density_histogram(const EmpiricalDistribution& emp, int bins, double upper) {
  if (emp.empty()) throw std::invalid_argument("histogram of an empty sample");
  if (bins < 1) throw std::invalid_argument("need at least one bin");
  const auto& xs = emp.samples();
  if (!(upper > 0.0)) {
    upper = xs[std::min(xs.size() - 1, static_cast<std::size_t>(0.999 * xs.size()))];
    if (!(upper > 0.0)) upper = 1.0;
  }
  const double width = upper / bins;
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  std::vector<std::int64_t> counts(out.size(), 0);
  for (double x : xs) {
    if (x < 0.0 || x >= upper) continue;
    counts[std::min<std::size_t>(out.size() - 1, static_cast<std::size_t>(x / width))]++;
  }
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].lo = width * static_cast<double>(i);
    out[i].hi = width * static_cast<double>(i + 1);
    out[i].density = static_cast<double>(counts[i]) / (n * width);
  }
  return out;
}

}  // namespace obflab

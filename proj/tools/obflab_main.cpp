#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "obflab/analytic_obf.hpp"
#include "obflab/analytic_olbf.hpp"
#include "obflab/montecarlo.hpp"
#include "obflab/report_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using obflab::format_double;

namespace {

constexpr int kUsageError = 2;

struct Invocation {
  std::vector<std::string> argv;
  [[nodiscard]] std::string command() const { return obflab::reproducible_command(argv); }
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

double rate_unit(bool bits) { return bits ? 1.0 / std::numbers::ln2 : 1.0; }

// --- sim -------------------------------------------------------------------

struct SimOptions {
  std::string scheme;
  int m = 0;
  int k = 0;
  double snr_db = 0.0;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  std::optional<int> force_r;
  std::optional<int> r;
  std::string out;
  std::string format = "csv";
  bool bits = false;
  bool skip_ks = false;
  int threads = 0;
};

obflab::ExperimentConfig sim_config(const SimOptions& o) {
  obflab::ExperimentConfig c;
  c.scheme = obflab::parse_scheme(o.scheme);
  c.params.antennas = o.m;
  c.params.users = o.k;
  c.params.power = obflab::db_to_linear(o.snr_db);
  c.params.scheduled = o.r.value_or(o.force_r.value_or(o.m));
  c.trials = o.trials;
  c.seed = o.seed;
  c.force_r = o.force_r;
  c.threads = o.threads;
  c.validate();
  return c;
}

void print_summary(std::ostream& os, const obflab::ExperimentReport& rep, bool bits) {
  const double u = rate_unit(bits);
  const char* unit = bits ? "bits" : "nats";
  os << "scheme " << obflab::scheme_name(rep.config.scheme) << ", " << rep.trials.size() << " trials, "
     << rep.workers << " worker(s), " << format_double(rep.runtime_seconds) << " s\n";
  os << "mean sum rate " << rep.sum_rate.mean * u << " +- " << rep.sum_rate.std_error * u << ' ' << unit
     << '\n';
  if (rep.analytic_sum_rate) os << "analytic mean sum rate " << *rep.analytic_sum_rate * u << ' ' << unit << '\n';
  for (std::size_t i = 0; i < rep.per_rank.size(); ++i) {
    os << "rank " << i + 1 << ": " << rep.per_rank[i].size() << " samples";
    if (!rep.per_rank[i].empty()) os << ", mean SINR " << rep.per_rank[i].mean();
    if (i < rep.ks.size() && rep.ks[i]) os << ", KS " << *rep.ks[i];
    os << '\n';
  }
}

int run_sim(const SimOptions& o, const Invocation& inv) {
  const obflab::ExperimentConfig config = sim_config(o);
  obflab::RunOptions run;
  run.compute_ks = !o.skip_ks;
  run.compute_analytic_mean = !o.skip_ks;
  const obflab::ExperimentReport rep = obflab::run_experiment(config, run);
  const obflab::RunManifest manifest = obflab::make_manifest(config, inv.command(), o.bits);
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    if (o.format == "json") {
      auto os = open_out(dir / "report.json");
      obflab::write_report_json(os, rep, manifest);
    } else {
      auto samples = open_out(dir / "samples.csv");
      obflab::write_samples_csv(samples, rep, manifest);
      auto summary = open_out(dir / "summary.csv");
      obflab::write_summary_csv(summary, rep, manifest);
    }
    auto side = open_out(dir / "manifest.json");
    side << obflab::manifest_sidecar(manifest, rep);
  }
  print_summary(std::cout, rep, o.bits);
  return 0;
}

// --- analytic --------------------------------------------------------------

struct AnalyticOptions {
  std::string scheme;
  int m = 0;
  int k = 0;
  double snr_db = 0.0;
  std::optional<int> r;
  int rank = 1;
  std::string grid;
  std::string out;
  bool sum_rate = false;
  bool bits = false;
};

struct GridSpec {
  double start;
  double stop;
  int count;
};

GridSpec parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string p;
  while (std::getline(ss, p, ':')) parts.push_back(p);
  if (parts.size() != 3) throw CLI::ValidationError("--grid", "expected start:stop:count");
  try {
    GridSpec g{std::stod(parts[0]), std::stod(parts[1]), std::stoi(parts[2])};
    if (g.count < 1 || g.start < 0.0 || g.stop < g.start) throw std::invalid_argument("range");
    return g;
  } catch (const std::invalid_argument&) {
    throw CLI::ValidationError("--grid", "expected 0 <= start <= stop and count >= 1");
  }
}

int run_analytic(const AnalyticOptions& o, const Invocation& inv) {
  const double power = obflab::db_to_linear(o.snr_db);
  const bool obf = o.scheme == "obf";
  json cfg{{"mode", "analytic"}, {"scheme", o.scheme}, {"antennas", o.m}, {"users", o.k},
           {"power", power}, {"rank", o.rank}, {"grid", o.grid}};

  std::function<double(double)> pdf;
  std::optional<obflab::DistributionGrid> table;
  std::function<double()> mean_rate;
  if (obf) {
    const obflab::ObfParams p{o.m, o.k, o.r.value_or(o.m), power};
    p.validate();
    cfg["scheduled"] = p.scheduled;
    if (o.rank < 1 || o.rank > p.scheduled) throw std::invalid_argument("--user-rank must lie in [1, r]");
    if (o.rank > 3) {
      std::cerr << "notice: rank " << o.rank << " has no closed-form marginal; using numeric fallback\n";
    }
    pdf = [p, n = o.rank](double y) { return obflab::obf_marginal_pdf(n, y, p); };
    if (!o.grid.empty()) table = obflab::obf_marginal_grid(o.rank, p);
    mean_rate = [p] { return obflab::obf_mean_sum_rate(p); };
  } else {
    const obflab::OlbfParams p{o.m, o.k, power};
    p.validate();
    if (o.rank < 1 || o.rank > p.antennas) throw std::invalid_argument("--user-rank must lie in [1, M]");
    pdf = [p, n = o.rank](double y) { return obflab::olbf_marginal_pdf(n, y, p); };
    if (!o.grid.empty()) table = obflab::olbf_marginal_grid(o.rank, p);
    mean_rate = [p] { return obflab::olbf_mean_sum_rate(p); };
  }

  if (!o.grid.empty()) {
    const GridSpec g = parse_grid(o.grid);
    const obflab::RunManifest manifest = obflab::make_manifest(cfg.dump(), 0, inv.command(), o.bits);
    std::ostringstream body;
    body << obflab::manifest_line(manifest) << "\ny,pdf,cdf\n";
    for (int i = 0; i < g.count; ++i) {
      const double y = g.count == 1 ? g.start : g.start + (g.stop - g.start) * i / (g.count - 1);
      body << format_double(y) << ',' << format_double(pdf(y)) << ',' << format_double(table->cdf(y)) << '\n';
    }
    if (o.out.empty()) {
      std::cout << body.str();
    } else {
      auto os = open_out(o.out);
      os << body.str();
    }
  }
  if (o.sum_rate) {
    std::cout << "analytic mean sum rate " << format_double(mean_rate() * rate_unit(o.bits)) << ' '
              << (o.bits ? "bits" : "nats") << '\n';
  }
  if (o.grid.empty() && !o.sum_rate) {
    std::cerr << "nothing to do: pass --grid and/or --sum-rate\n";
    return kUsageError;
  }
  return 0;
}

// --- figure ----------------------------------------------------------------

struct FigureOptions {
  std::string name;
  std::int64_t trials = 100000;
  std::uint64_t seed = 1;
  std::string out = ".";
  int threads = 0;
  bool analytic = true;
};

obflab::ExperimentConfig figure_config(obflab::Scheme scheme, int m, int k, double snr_db,
                                       const FigureOptions& o) {
  obflab::ExperimentConfig c;
  c.scheme = scheme;
  c.params = {m, k, obflab::db_to_linear(snr_db), m};
  if (scheme == obflab::Scheme::adaptive_obf) c.force_r = m;
  c.trials = o.trials;
  c.seed = o.seed;
  c.threads = o.threads;
  return c;
}

json figure_json(const FigureOptions& o) {
  return json{{"figure", o.name}, {"trials", o.trials}, {"seed", o.seed}, {"analytic", o.analytic}};
}

// Histogram plus analytic pdf per rank for M in {2, 3}, K = 10, P = 15 dB.
void figure_pdfs(const FigureOptions& o, obflab::Scheme scheme, const obflab::RunManifest& manifest,
                 std::ostream& hist, std::ostream& ks) {
  hist << obflab::manifest_line(manifest) << "\nM,rank,bin_lo,bin_hi,empirical_pdf,analytic_pdf\n";
  ks << obflab::manifest_line(manifest) << "\nM,rank,ks,samples\n";
  for (int m : {2, 3}) {
    const auto config = figure_config(scheme, m, 10, 15.0, o);
    obflab::RunOptions run;
    run.compute_ks = o.analytic;
    run.compute_analytic_mean = false;
    const auto rep = obflab::run_experiment(config, run);
    for (int n = 1; n <= m; ++n) {
      const auto& emp = rep.per_rank[n - 1];
      const auto pdf = o.analytic ? obflab::analytic_pdf(config, n) : std::nullopt;
      for (const auto& bin : obflab::density_histogram(emp, 100)) {
        const double mid = 0.5 * (bin.lo + bin.hi);
        hist << m << ',' << n << ',' << format_double(bin.lo) << ',' << format_double(bin.hi) << ','
             << format_double(bin.density) << ',' << (pdf ? format_double((*pdf)(mid)) : "") << '\n';
      }
      ks << m << ',' << n << ',' << (rep.ks[n - 1] ? format_double(*rep.ks[n - 1]) : "") << ','
         << emp.size() << '\n';
      std::cerr << "M=" << m << " rank " << n << " done\n";
    }
  }
}

struct RateCell {
  obflab::MeanEstimate sim;
  std::optional<double> analytic;
};

RateCell rate_cell(const obflab::ExperimentConfig& config, bool analytic) {
  obflab::RunOptions run;
  run.compute_ks = false;
  run.compute_analytic_mean = analytic;
  const auto rep = obflab::run_experiment(config, run);
  return {rep.sum_rate, rep.analytic_sum_rate};
}

std::string opt(const std::optional<double>& v, double scale = 1.0) {
  return v ? format_double(*v * scale) : "";
}

void figure_fig4(const FigureOptions& o, const obflab::RunManifest& manifest, std::ostream& os) {
  const double to_bits = 1.0 / std::numbers::ln2;
  os << obflab::manifest_line(manifest)
     << "\nM,K,snr_db,scheme,sim_nats,stderr_nats,analytic_nats,sim_bits,stderr_bits,analytic_bits\n";
  for (int m : {2, 4}) {
    for (int db = -10; db <= 20; db += 2) {
      for (auto scheme : {obflab::Scheme::adaptive_obf, obflab::Scheme::olbf, obflab::Scheme::zfs}) {
        const auto c = figure_config(scheme, m, m, db, o);
        const RateCell cell = rate_cell(c, o.analytic && m <= 3 && scheme != obflab::Scheme::zfs);
        os << m << ',' << m << ',' << db << ',' << obflab::scheme_name(scheme) << ','
           << format_double(cell.sim.mean) << ',' << format_double(cell.sim.std_error) << ','
           << opt(cell.analytic) << ',' << format_double(cell.sim.mean * to_bits) << ','
           << format_double(cell.sim.std_error * to_bits) << ',' << opt(cell.analytic, to_bits) << '\n';
      }
      std::cerr << "fig4 M=" << m << " P=" << db << " dB done\n";
    }
  }
}

void figure_fig5(const FigureOptions& o, const obflab::RunManifest& manifest, std::ostream& os) {
  const double to_bits = 1.0 / std::numbers::ln2;
  os << obflab::manifest_line(manifest)
     << "\nM,K,snr_db,zfdp_nats,zfdp_stderr,obf_nats,obf_stderr,obf_analytic,olbf_nats,olbf_stderr,"
        "olbf_analytic,ratio_obf_zfdp,ratio_olbf_zfdp,zfdp_bits,obf_bits,olbf_bits\n";
  const int m = 3;
  for (int db : {0, 10}) {
    for (int k = 3; k <= 20; ++k) {
      const RateCell zf = rate_cell(figure_config(obflab::Scheme::zfdp, m, k, db, o), false);
      const RateCell ob = rate_cell(figure_config(obflab::Scheme::adaptive_obf, m, k, db, o), o.analytic);
      const RateCell ol = rate_cell(figure_config(obflab::Scheme::olbf, m, k, db, o), o.analytic);
      os << m << ',' << k << ',' << db << ',' << format_double(zf.sim.mean) << ','
         << format_double(zf.sim.std_error) << ',' << format_double(ob.sim.mean) << ','
         << format_double(ob.sim.std_error) << ',' << opt(ob.analytic) << ','
         << format_double(ol.sim.mean) << ',' << format_double(ol.sim.std_error) << ','
         << opt(ol.analytic) << ',' << format_double(ob.sim.mean / zf.sim.mean) << ','
         << format_double(ol.sim.mean / zf.sim.mean) << ',' << format_double(zf.sim.mean * to_bits)
         << ',' << format_double(ob.sim.mean * to_bits) << ',' << format_double(ol.sim.mean * to_bits)
         << '\n';
      std::cerr << "fig5 P=" << db << " dB K=" << k << " done\n";
    }
  }
}

int run_figure(const FigureOptions& o, const Invocation& inv) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir(o.out);
  const obflab::RunManifest manifest = obflab::make_manifest(figure_json(o).dump(), o.seed, inv.command());
  if (o.name == "fig1" || o.name == "fig3") {
    const auto scheme = o.name == "fig1" ? obflab::Scheme::adaptive_obf : obflab::Scheme::olbf;
    auto hist = open_out(dir / (o.name + "_hist.csv"));
    auto ks = open_out(dir / (o.name + "_ks.csv"));
    figure_pdfs(o, scheme, manifest, hist, ks);
  } else if (o.name == "fig4") {
    auto os = open_out(dir / "fig4_sum_rate.csv");
    figure_fig4(o, manifest, os);
  } else {
    auto os = open_out(dir / "fig5_sum_rate.csv");
    figure_fig5(o, manifest, os);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto side = open_out(dir / (o.name + "_manifest.json"));
  side << obflab::manifest_sidecar(manifest, secs);
  std::cout << o.name << " written to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Invocation inv;
  inv.argv.assign(argv, argv + argc);
  if (!inv.argv.empty()) inv.argv[0] = "obflab";

  CLI::App app{"Multiuser orthogonal beamforming: simulation and exact SINR analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(obflab::tool_version()));

  SimOptions sim;
  auto* sim_cmd = app.add_subcommand("sim", "Run a seeded Monte-Carlo experiment");
  sim_cmd->add_option("--scheme", sim.scheme, "Scheduler")
      ->required()
      ->check(CLI::IsMember({"adaptive-obf", "olbf", "zfs", "zfdp", "random-obf", "random-olbf"}));
  sim_cmd->add_option("--m", sim.m, "Transmit antennas M")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--k", sim.k, "Users K")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--snr-db", sim.snr_db, "Total power P in dB")->required();
  sim_cmd->add_option("--trials", sim.trials, "Channel realizations")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed, "Master seed")->required();
  sim_cmd->add_option("--force-r", sim.force_r, "Adaptive OBF: schedule exactly r users");
  sim_cmd->add_option("--r", sim.r, "Scheduled users for zfs, zfdp and random-obf (default M)");
  sim_cmd->add_option("--out", sim.out, "Output directory");
  sim_cmd->add_option("--format", sim.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  sim_cmd->add_flag("--bits", sim.bits, "Report rates in bits instead of nats");
  sim_cmd->add_flag("--skip-ks", sim.skip_ks, "Skip analytic KS distances and analytic mean");
  sim_cmd->add_option("--threads", sim.threads, "Worker threads (default OBFLAB_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);

  AnalyticOptions an;
  auto* an_cmd = app.add_subcommand("analytic", "Evaluate analytic marginal PDF/CDF or mean sum rate");
  an_cmd->add_option("--scheme", an.scheme, "obf or olbf")->required()->check(CLI::IsMember({"obf", "olbf"}));
  an_cmd->add_option("--m", an.m, "Transmit antennas M")->required()->check(CLI::PositiveNumber);
  an_cmd->add_option("--k", an.k, "Users K")->required()->check(CLI::PositiveNumber);
  an_cmd->add_option("--snr-db", an.snr_db, "Total power P in dB")->required();
  an_cmd->add_option("--r", an.r, "Scheduled users for obf (default M)");
  an_cmd->add_option("--user-rank", an.rank, "Scheduling rank n (1-based)");
  an_cmd->add_option("--grid", an.grid, "SINR grid start:stop:count");
  an_cmd->add_option("--out", an.out, "Output CSV path (default stdout)");
  an_cmd->add_flag("--sum-rate", an.sum_rate, "Print the analytic mean sum rate");
  an_cmd->add_flag("--bits", an.bits, "Report rates in bits instead of nats");

  FigureOptions fig;
  auto* fig_cmd = app.add_subcommand("figure", "Write plot-ready data for one figure");
  fig_cmd->add_option("name", fig.name, "fig1, fig3, fig4 or fig5")
      ->required()
      ->check(CLI::IsMember({"fig1", "fig3", "fig4", "fig5"}));
  fig_cmd->add_option("--trials", fig.trials, "Realizations per point")->check(CLI::PositiveNumber);
  fig_cmd->add_option("--seed", fig.seed, "Master seed");
  fig_cmd->add_option("--out", fig.out, "Output directory");
  fig_cmd->add_option("--threads", fig.threads, "Worker threads")->check(CLI::NonNegativeNumber);
  bool no_analytic = false;
  fig_cmd->add_flag("--no-analytic", no_analytic, "Skip analytic columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kUsageError;
  }
  fig.analytic = !no_analytic;

  try {
    if (*sim_cmd) return run_sim(sim, inv);
    if (*an_cmd) return run_analytic(an, inv);
    return run_figure(fig, inv);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

#include "obflab/report_io.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace obflab {

namespace {

using nlohmann::json;

constexpr std::string_view kManifestTag = "# obflab-manifest ";
constexpr std::string_view kSamplesHeader = "trial,user_rank,user_index,sinr,sum_rate_trial";

double rate_scale(const RunManifest& m) { return m.bits ? 1.0 / std::numbers::ln2 : 1.0; }

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json manifest_json(const RunManifest& m) {
  return json{{"tool", "obflab"},
              {"version", m.tool_version},
              {"command", m.command_line},
              {"config", json::parse(m.config_json)},
              {"input_hash", m.input_hash},
              {"seed", m.seed},
              {"rate_unit", m.bits ? "bits" : "nats"}};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s, const char* what) {
  std::size_t used = 0;
  try {
    T v;
    if constexpr (std::is_same_v<T, double>) {
      v = std::stod(s, &used);
    } else {
      v = static_cast<T>(std::stoll(s, &used));
    }
    if (used != s.size()) throw std::invalid_argument(what);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("malformed ") + what + " '" + s + "'");
  }
}

}  // namespace

std::string_view tool_version() {
#ifdef OBFLAB_VERSION
  return OBFLAB_VERSION;
#else
  return "unknown";
#endif
}

std::string format_double(double v) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest.data(), &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j{{"scheme", scheme_name(c.scheme)},
         {"antennas", c.params.antennas},
         {"users", c.params.users},
         {"scheduled", c.params.scheduled},
         {"power", c.params.power},
         {"trials", c.trials},
         {"seed", c.seed},
         {"force_r", c.force_r ? json(*c.force_r) : json(nullptr)}};
  return j.dump();
}

ExperimentConfig config_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    ExperimentConfig c;
    c.scheme = parse_scheme(j.at("scheme").get<std::string>());
    c.params.antennas = j.at("antennas").get<int>();
    c.params.users = j.at("users").get<int>();
    c.params.scheduled = j.at("scheduled").get<int>();
    c.params.power = j.at("power").get<double>();
    c.trials = j.at("trials").get<std::int64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("force_r").is_null()) c.force_r = j.at("force_r").get<int>();
    return c;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad config JSON: ") + e.what());
  }
}

RunManifest make_manifest(std::string config_json, std::uint64_t seed, std::string command_line,
                          bool bits) {
  RunManifest m;
  m.tool_version = std::string(tool_version());
  m.command_line = std::move(command_line);
  m.config_json = json::parse(config_json).dump();
  m.input_hash = git_blob_sha1(m.config_json);
  m.seed = seed;
  m.timestamp = utc_now();
  m.bits = bits;
  return m;
}

RunManifest make_manifest(const ExperimentConfig& config, std::string command_line, bool bits) {
  return make_manifest(config_to_json(config), config.seed, std::move(command_line), bits);
}

std::string reproducible_command(std::span<const std::string> argv) {
  std::string out;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    const std::string& a = argv[i];
    if (a == "--threads" || a == "--out") {
      ++i;
      continue;
    }
    if (a.starts_with("--threads=") || a.starts_with("--out=")) continue;
    if (!out.empty()) out += ' ';
    out += a;
  }
  return out;
}

std::string manifest_line(const RunManifest& m) {
  return std::string(kManifestTag) + manifest_json(m).dump();
}

RunManifest parse_manifest_line(std::string_view line) {
  if (!line.starts_with(kManifestTag)) throw std::runtime_error("missing manifest line");
  try {
    const json j = json::parse(line.substr(kManifestTag.size()));
    RunManifest m;
    m.tool_version = j.at("version").get<std::string>();
    m.command_line = j.at("command").get<std::string>();
    m.config_json = j.at("config").dump();
    m.input_hash = j.at("input_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.bits = j.at("rate_unit").get<std::string>() == "bits";
    if (git_blob_sha1(m.config_json) != m.input_hash) {
      throw std::runtime_error("manifest hash does not match its config");
    }
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad manifest: ") + e.what());
  }
}

std::string manifest_sidecar(const RunManifest& m, const ExperimentReport& report) {
  json j = manifest_json(m);
  j["timestamp"] = m.timestamp;
  j["runtime_seconds"] = report.runtime_seconds;
  j["workers"] = report.workers;
  j["structural_checks"] = report.structural_checks;
  return j.dump(2) + "\n";
}

std::string manifest_sidecar(const RunManifest& m, double runtime_seconds) {
  json j = manifest_json(m);
  j["timestamp"] = m.timestamp;
  j["runtime_seconds"] = runtime_seconds;
  return j.dump(2) + "\n";
}

void write_samples_csv(std::ostream& os, const ExperimentReport& report, const RunManifest& m) {
  const double scale = rate_scale(m);
  os << manifest_line(m) << '\n' << kSamplesHeader << '\n';
  for (std::size_t t = 0; t < report.trials.size(); ++t) {
    const TrialRecord& rec = report.trials[t];
    const std::string rate = format_double(rec.sum_rate * scale);
    for (std::size_t i = 0; i < rec.sinrs.size(); ++i) {
      os << t << ',' << (i + 1) << ',' << rec.users[i] << ',' << format_double(rec.sinrs[i]) << ','
         << rate << '\n';
    }
  }
}

void write_summary_csv(std::ostream& os, const ExperimentReport& report, const RunManifest& m) {
  const double scale = rate_scale(m);
  os << manifest_line(m) << '\n' << "metric,rank,value\n";
  os << "trials,," << report.trials.size() << '\n';
  os << "mean_sum_rate,," << format_double(report.sum_rate.mean * scale) << '\n';
  os << "stderr_sum_rate,," << format_double(report.sum_rate.std_error * scale) << '\n';
  if (report.analytic_sum_rate) {
    os << "analytic_sum_rate,," << format_double(*report.analytic_sum_rate * scale) << '\n';
  }
  for (std::size_t i = 0; i < report.per_rank.size(); ++i) {
    const auto& d = report.per_rank[i];
    os << "samples," << (i + 1) << ',' << d.size() << '\n';
    if (!d.empty()) os << "mean_sinr," << (i + 1) << ',' << format_double(d.mean()) << '\n';
    if (i < report.ks.size() && report.ks[i]) {
      os << "ks," << (i + 1) << ',' << format_double(*report.ks[i]) << '\n';
    }
  }
}

void write_report_json(std::ostream& os, const ExperimentReport& report, const RunManifest& m) {
  const double scale = rate_scale(m);
  json ranks = json::array();
  for (std::size_t i = 0; i < report.per_rank.size(); ++i) {
    const auto& d = report.per_rank[i];
    json r{{"rank", i + 1}, {"samples", d.size()}};
    if (!d.empty()) r["mean_sinr"] = d.mean();
    r["ks"] = (i < report.ks.size() && report.ks[i]) ? json(*report.ks[i]) : json(nullptr);
    ranks.push_back(std::move(r));
  }
  json trials = json::array();
  for (const auto& rec : report.trials) {
    trials.push_back({{"users", rec.users}, {"sinrs", rec.sinrs}, {"sum_rate", rec.sum_rate * scale}});
  }
  json j{{"manifest", manifest_json(m)},
         {"summary",
          {{"trials", report.trials.size()},
           {"mean_sum_rate", report.sum_rate.mean * scale},
           {"stderr_sum_rate", report.sum_rate.std_error * scale},
           {"analytic_sum_rate",
            report.analytic_sum_rate ? json(*report.analytic_sum_rate * scale) : json(nullptr)},
           {"ranks", std::move(ranks)}}},
         {"trials", std::move(trials)}};
  os << j.dump(1) << '\n';
}

ParsedSamples read_samples_csv(std::istream& is) {
  ParsedSamples out;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty samples file");
  out.manifest = parse_manifest_line(line);
  out.report.config = config_from_json(out.manifest.config_json);
  if (!std::getline(is, line) || line != kSamplesHeader) throw std::runtime_error("bad samples header");
  const double scale = rate_scale(out.manifest);
  auto& trials = out.report.trials;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 5) throw std::runtime_error("expected 5 columns: " + line);
    const auto t = parse_number<std::int64_t>(cells[0], "trial");
    const auto rank = parse_number<std::int64_t>(cells[1], "user_rank");
    if (t < 0 || t > static_cast<std::int64_t>(trials.size())) throw std::runtime_error("trials out of order");
    if (t == static_cast<std::int64_t>(trials.size())) trials.emplace_back();
    TrialRecord& rec = trials[t];
    if (rank != static_cast<std::int64_t>(rec.sinrs.size()) + 1) throw std::runtime_error("ranks out of order");
    rec.users.push_back(parse_number<int>(cells[2], "user_index"));
    rec.sinrs.push_back(parse_number<double>(cells[3], "sinr"));
    rec.sum_rate = parse_number<double>(cells[4], "sum_rate_trial") / scale;
  }
  if (trials.empty()) throw std::runtime_error("samples file has no rows");
  RunOptions options;
  options.compute_ks = false;
  options.compute_analytic_mean = false;
  summarize(out.report, options);
  return out;
}

}  // namespace obflab

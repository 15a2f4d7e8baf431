#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "obflab/montecarlo.hpp"

namespace obflab {

std::string_view tool_version();

/// SHA-1 of "blob <size>\0<content>", as git hash-object prints it.
std::string git_blob_sha1(std::string_view content);

/// Compact JSON with sorted keys; the thread count is left out since it
/// never changes results.
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(std::string_view json);

struct RunManifest {
  std::string tool_version;
  std::string command_line;  // reproducible part: --threads and --out removed
  std::string config_json;
  std::string input_hash;    // git_blob_sha1(config_json)
  std::uint64_t seed = 0;
  std::string timestamp;     // UTC, ISO 8601
  bool bits = false;         // rates divided by ln 2

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

RunManifest make_manifest(const ExperimentConfig& config, std::string command_line, bool bits = false);
/// For artifacts that are not a single experiment (analytic curves, figure bundles).
RunManifest make_manifest(std::string config_json, std::uint64_t seed, std::string command_line,
                          bool bits = false);

/// Joins argv, dropping --threads/--out and their values.
std::string reproducible_command(std::span<const std::string> argv);

/// Leading "# obflab-manifest {...}" line embedded in artifacts. Omits the
/// timestamp so reruns stay byte-identical.
std::string manifest_line(const RunManifest& m);
RunManifest parse_manifest_line(std::string_view line);

/// Full manifest, including timestamp and run statistics, as a JSON document.
std::string manifest_sidecar(const RunManifest& m, const ExperimentReport& report);
std::string manifest_sidecar(const RunManifest& m, double runtime_seconds);

/// trial,user_rank,user_index,sinr,sum_rate_trial
void write_samples_csv(std::ostream& os, const ExperimentReport& report, const RunManifest& m);
/// metric,rank,value
void write_summary_csv(std::ostream& os, const ExperimentReport& report, const RunManifest& m);
void write_report_json(std::ostream& os, const ExperimentReport& report, const RunManifest& m);

struct ParsedSamples {
  RunManifest manifest;
  ExperimentReport report;  // summaries recomputed, no KS or analytic mean
};

/// Inverse of write_samples_csv. Throws std::runtime_error on malformed input.
ParsedSamples read_samples_csv(std::istream& is);

/// %.17g, enough to round-trip a double.
std::string format_double(double v);

}  // namespace obflab

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "obflab/report_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(OBFLAB_BIN) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("obflab_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("sim --k 10 --snr-db 10 --trials 10 --seed 1").code, 2);
  EXPECT_EQ(run("sim --m 3 --k 10 --snr-db 10 --trials 10 --seed 1 --scheme nope").code, 2);
  EXPECT_EQ(run("sim --scheme olbf --m 3 --k 2 --snr-db 10 --trials 10 --seed 1").code, 2);
  EXPECT_EQ(run("analytic --scheme obf --m 3 --k 10 --snr-db 10 --user-rank 4").code, 2);
  EXPECT_EQ(run("").code, 2);
  const auto help = run("--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("sim"), std::string::npos);
}

TEST(Cli, RerunIsByteIdentical) {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  const std::string base = "sim --scheme adaptive-obf --m 3 --k 10 --snr-db 15 --trials 500 --seed 42 ";
  ASSERT_EQ(run(base + "--threads 1 --out " + a.string()).code, 0);
  ASSERT_EQ(run(base + "--threads 3 --out " + b.string()).code, 0);
  EXPECT_EQ(slurp(a / "samples.csv"), slurp(b / "samples.csv"));
  EXPECT_FALSE(slurp(a / "samples.csv").empty());
  ASSERT_EQ(run(base + "--threads 1 --out " + b.string()).code, 0);
  EXPECT_EQ(slurp(a / "samples.csv"), slurp(b / "samples.csv"));
  EXPECT_TRUE(fs::exists(a / "manifest.json"));
  EXPECT_TRUE(fs::exists(a / "summary.csv"));
}

TEST(Cli, SamplesFileRoundTrips) {
  const auto dir = scratch("roundtrip");
  ASSERT_EQ(run("sim --scheme olbf --m 3 --k 10 --snr-db 10 --trials 300 --seed 9 --skip-ks --out " +
                dir.string()).code, 0);
  std::ifstream is(dir / "samples.csv");
  const auto parsed = obflab::read_samples_csv(is);
  EXPECT_EQ(parsed.report.trials.size(), 300u);
  EXPECT_EQ(parsed.report.config.seed, 9u);
  EXPECT_EQ(parsed.manifest.command_line.find("--out"), std::string::npos);
  EXPECT_EQ(parsed.manifest.input_hash, obflab::git_blob_sha1(parsed.manifest.config_json));
}

TEST(Cli, TwoAntennaOlbfMatchesForcedObf) {
  const auto a = scratch("olbf2");
  const auto b = scratch("obf2");
  ASSERT_EQ(run("sim --scheme olbf --m 2 --k 6 --snr-db 10 --trials 400 --seed 3 --skip-ks --out " +
                a.string()).code, 0);
  ASSERT_EQ(run("sim --scheme adaptive-obf --force-r 2 --m 2 --k 6 --snr-db 10 --trials 400 --seed 3 "
                "--skip-ks --out " + b.string()).code, 0);
  const auto ra = csv_rows(slurp(a / "samples.csv"));
  const auto rb = csv_rows(slurp(b / "samples.csv"));
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 1; i < ra.size(); ++i) {
    ASSERT_EQ(ra[i].size(), 5u);
    EXPECT_NEAR(std::stod(ra[i][3]), std::stod(rb[i][3]), 1e-9 * (1.0 + std::stod(rb[i][3])));
  }
}

TEST(Cli, AnalyticGrid) {
  const auto r = run("analytic --scheme obf --m 2 --k 10 --snr-db 15 --user-rank 2 --grid 0:0:1");
  ASSERT_EQ(r.code, 0);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 2u);
  ASSERT_EQ(rows[1].size(), 3u);
  EXPECT_EQ(std::stod(rows[1][0]), 0.0);
  EXPECT_TRUE(std::isfinite(std::stod(rows[1][1])));
  EXPECT_EQ(std::stod(rows[1][2]), 0.0);

  const auto o = run("analytic --scheme olbf --m 3 --k 10 --snr-db 10 --user-rank 2 --grid 0:4:5");
  ASSERT_EQ(o.code, 0);
  const auto orows = csv_rows(o.out);
  ASSERT_EQ(orows.size(), 6u);
  double prev = -1.0;
  for (std::size_t i = 1; i < orows.size(); ++i) {
    const double cdf = std::stod(orows[i][2]);
    EXPECT_GE(cdf, prev);
    prev = cdf;
  }
  EXPECT_EQ(run("analytic --scheme olbf --m 3 --k 2 --snr-db 10 --user-rank 1 --grid 0:1:2").code, 2);
}

TEST(Cli, SumRate) {
  const auto r = run("analytic --scheme obf --m 1 --k 1 --snr-db 0 --sum-rate");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("0.596"), std::string::npos) << r.out;
}

TEST(Cli, FigureFiveHasRatioColumns) {
  const auto dir = scratch("fig5");
  ASSERT_EQ(run("figure fig5 --trials 50 --seed 1 --no-analytic --threads 1 --out " + dir.string()).code, 0);
  const auto rows = csv_rows(slurp(dir / "fig5_sum_rate.csv"));
  ASSERT_EQ(rows.size(), 1u + 2u * 18u);
  const auto& head = rows[0];
  const auto col = std::find(head.begin(), head.end(), "ratio_obf_zfdp") - head.begin();
  ASSERT_LT(col, static_cast<long>(head.size()));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double v = std::stod(rows[i][col]);
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.5);
  }
  EXPECT_TRUE(fs::exists(dir / "fig5_manifest.json"));
}

}  // namespace

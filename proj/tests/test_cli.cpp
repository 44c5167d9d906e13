// End-to-end checks of the srgbm binary (path supplied via SRGBM_CLI).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "srgbm/io.hpp"

namespace {

namespace fs = std::filesystem;

std::string cli_path() {
  const char* p = std::getenv("SRGBM_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " >/dev/null 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("srgbm_cli_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// File contents with volatile metadata (wall clock) removed.
std::string stable_content(const fs::path& p) {
  std::ifstream in(p);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind("# wall_clock_s=", 0) == 0) continue;
    out += line;
    out += '\n';
  }
  return out;
}

void write_uniform_matrix(const fs::path& dir, int k, double delta) {
  std::ofstream csv(dir / "uniform.csv");
  csv << "from";
  for (int j = 1; j <= k; ++j) csv << ",to_" << j;
  csv << "\n";
  for (int i = 1; i <= k; ++i) {
    csv << i;
    for (int j = 0; j < k; ++j) csv << "," << (1.0 / k);
    csv << "\n";
  }
  std::ofstream sidecar(dir / "uniform.csv.json");
  sidecar << "{\"delta\": " << delta << ", \"k\": " << k << "}";
}

}  // namespace

TEST_CASE("mfpt: x0 == y emits a zero-MFPT table with exit 0") {
  TempDir tmp;
  CHECK(run_cli("mfpt --x0 5 --y 5 --out " + tmp.path.string()) == 0);
  const auto table = srgbm::io::read_table(tmp.path / "mfpt.csv");
  CHECK(table.columns == std::vector<std::string>{"x0", "y", "mfpt_years"});
  CHECK(table.rows.at(0).at(2) == 0.0);
}

TEST_CASE("mfpt: r-grid curve table is finite everywhere") {
  TempDir tmp;
  CHECK(run_cli("mfpt --mu 0.02 --sigma2 0.02 --x0 1 --y 10 "
                "--r-grid 0.001:0.5:50 --out " +
                tmp.path.string()) == 0);
  const auto table = srgbm::io::read_table(tmp.path / "mfpt.csv");
  CHECK(table.rows.size() == 50);
  for (const auto& row : table.rows) CHECK(std::isfinite(row.at(1)));
}

TEST_CASE("exit codes: validation 2, divergence 3") {
  TempDir tmp;
  CHECK(run_cli("mfpt --x0 5 --y 2 --out " + tmp.path.string()) == 2);
  CHECK(run_cli("mfpt --mu 0.01 --sigma2 0.05 --r 0 --x0 1 --y 10 --out " +
                tmp.path.string()) == 3);
  CHECK(run_cli("definitely-not-a-subcommand") == 2);
  CHECK(run_cli("tmfpt --matrix /nonexistent.csv --out " +
                tmp.path.string()) == 2);

  // a matrix with a bad row sum fails validation unless renormalized
  std::ofstream csv(tmp.path / "bad.csv");
  csv << "from,to_1,to_2\n1,0.6,0.2\n2,0.5,0.5\n";
  csv.close();
  std::ofstream sidecar(tmp.path / "bad.csv.json");
  sidecar << "{\"delta\": 1.0, \"k\": 2}";
  sidecar.close();
  CHECK(run_cli("tmfpt --matrix " + (tmp.path / "bad.csv").string() +
                " --out " + tmp.path.string()) == 2);
  CHECK(run_cli("tmfpt --matrix " + (tmp.path / "bad.csv").string() +
                " --renormalize --out " + tmp.path.string()) == 0);
}

TEST_CASE("tmfpt: uniform 10x10 matrix gives off-diagonal 10 periods") {
  TempDir tmp;
  write_uniform_matrix(tmp.path, 10, 10.0);
  CHECK(run_cli("tmfpt --matrix " + (tmp.path / "uniform.csv").string() +
                " --out " + tmp.path.string()) == 0);
  const auto table = srgbm::io::read_table(tmp.path / "tmfpt.csv");
  CHECK(table.rows.size() == 100);
  for (const auto& row : table.rows) {
    const bool diagonal = row.at(0) == row.at(1);
    CHECK(row.at(2) == doctest::Approx(diagonal ? 0.0 : 10.0).epsilon(1e-9));
  }
}

TEST_CASE("simulate then mfpt: cross-command agreement within 3 SE") {
  TempDir tmp;
  CHECK(run_cli("simulate --x0 1 --y 10 --dt 0.01 --n 8000 --horizon 1500 "
                "--seed 2026 --out " +
                tmp.path.string()) == 0);
  srgbm::io::Metadata meta;
  const auto summary =
      srgbm::io::read_table(tmp.path / "simulate_summary.csv", &meta);
  const double mc = summary.rows.at(0).at(0);
  const double se = summary.rows.at(0).at(1);

  CHECK(run_cli("mfpt --x0 1 --y 10 --out " + tmp.path.string()) == 0);
  const auto analytic_table = srgbm::io::read_table(tmp.path / "mfpt.csv");
  const double analytic = analytic_table.rows.at(0).at(2);
  CHECK(std::abs(mc - analytic) <= 3.0 * se);
  CHECK(summary.rows.at(0).at(4) == doctest::Approx(analytic));
  CHECK(meta.get("command") == "simulate");

  // samples artifact agrees with the summary's sample count
  const auto samples = srgbm::io::read_table(tmp.path / "fpt_samples.csv");
  CHECK(static_cast<double>(samples.rows.size()) == summary.rows.at(0).at(3));
}

TEST_CASE("fraction: zero window emits zero fraction") {
  TempDir tmp;
  CHECK(run_cli("fraction --x0 1 --y 10 --window 0 --n 500 --out " +
                tmp.path.string()) == 0);
  const auto table = srgbm::io::read_table(tmp.path / "fraction.csv");
  CHECK(table.rows.at(0).at(1) == 0.0);
}

TEST_CASE("optimal-rate: strong drift reports the r = 0 boundary") {
  TempDir tmp;
  CHECK(run_cli("optimal-rate --mu 0.5 --sigma2 0.03 --x0 1 --y 10 --out " +
                tmp.path.string()) == 0);
  const auto table = srgbm::io::read_table(tmp.path / "optimal_rate.csv");
  CHECK(table.rows.at(0).at(0) == 0.0);
  CHECK(table.rows.at(0).at(2) == 0.0);  // boundary, not interior
}

TEST_CASE("tmatrix: generated panel reloaded through CSV gives the same "
          "matrix") {
  TempDir tmp;
  CHECK(run_cli("tmatrix --n-workers 4000 --delta 5 --dt 0.02 --k 5 "
                "--save-panel --seed 11 --out " +
                tmp.path.string()) == 0);
  const std::string direct = slurp(tmp.path / "tmatrix.csv");
  CHECK(fs::exists(tmp.path / "tmatrix.csv.json"));

  fs::create_directories(tmp.path / "again");
  CHECK(run_cli("tmatrix --panel " + (tmp.path / "panel.csv").string() +
                " --k 5 --out " + (tmp.path / "again").string()) == 0);
  const auto a = srgbm::io::read_table(tmp.path / "tmatrix.csv");
  const auto b = srgbm::io::read_table(tmp.path / "again" / "tmatrix.csv");
  CHECK(a.rows == b.rows);  // %.17g incomes survive the round trip
  CHECK(!direct.empty());
}

TEST_CASE("reproducibility: rerun from the header argv under a different "
          "thread count is bit-identical") {
  TempDir tmp;
  const std::string args = "simulate --x0 1 --y 4 --dt 0.01 --n 1500 "
                           "--horizon 800 --seed 99 --out " +
                           tmp.path.string();
  CHECK(run_cli(args + " --threads 1") == 0);
  srgbm::io::Metadata meta;
  srgbm::io::read_table(tmp.path / "simulate_summary.csv", &meta);
  const std::string recorded_argv = meta.get("argv");
  CHECK(recorded_argv.find("--threads") == std::string::npos);

  const std::string first_summary =
      stable_content(tmp.path / "simulate_summary.csv");
  const std::string first_samples =
      stable_content(tmp.path / "fpt_samples.csv");
  fs::remove(tmp.path / "simulate_summary.csv");
  fs::remove(tmp.path / "fpt_samples.csv");

  // replay the recorded command line verbatim, adding only --threads
  CHECK(run_cli(recorded_argv + " --threads 2") == 0);
  CHECK(stable_content(tmp.path / "simulate_summary.csv") == first_summary);
  CHECK(stable_content(tmp.path / "fpt_samples.csv") == first_samples);
}

TEST_CASE("json format emits self-contained artifacts") {
  TempDir tmp;
  CHECK(run_cli("mfpt --x0 1 --y 10 --format json --out " +
                tmp.path.string()) == 0);
  srgbm::io::Metadata meta;
  const auto table = srgbm::io::read_table(tmp.path / "mfpt.json", &meta);
  CHECK(table.rows.at(0).at(2) == doctest::Approx(43.890157105965365));
  CHECK(meta.get("command") == "mfpt");
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "srgbm/io.hpp"

using namespace srgbm;
using namespace srgbm::io;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("srgbm_io_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p);
  out << body;
}

}  // namespace

TEST_CASE("format_double: shortest exact round-trip") {
  std::mt19937_64 eng(99);
  std::uniform_real_distribution<double> unif(-1e6, 1e6);
  std::exponential_distribution<double> expo(1.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = (i % 2 == 0) ? unif(eng) : expo(eng) * 1e-7;
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(format_double(0.25) == "0.25");
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("table round-trip: csv and json carry data and metadata") {
  TempDir tmp;
  Metadata meta;
  meta.set("version", "0.1.0");
  meta.set("seed", std::uint64_t{42});
  meta.set("mu", 0.1);

  Table table;
  table.columns = {"a", "b"};
  table.rows = {{1.0, 2.5}, {-3.0, 1e-12}, {0.3333333333333333, 7.0}};

  for (const auto format : {Format::csv, Format::json}) {
    const auto path = tmp.path / (std::string("t.") + to_string(format));
    write_table(path, meta, table, format);
    Metadata back_meta;
    const Table back = read_table(path, &back_meta);
    CHECK(back.columns == table.columns);
    CHECK(back.rows == table.rows);  // bit-exact round trip
    CHECK(back_meta.get("seed") == "42");
    CHECK(back_meta.get("version") == "0.1.0");
  }
}

TEST_CASE("read_table: malformed rows are named") {
  TempDir tmp;
  const auto path = tmp.path / "bad.csv";
  write_file(path, "a,b\n1.0,2.0\n3.0\n");
  CHECK_THROWS_WITH_AS(read_table(path), doctest::Contains("row 2"),
                       ValidationError);

  write_file(path, "a,b\n1.0,oops\n");
  CHECK_THROWS_WITH_AS(read_table(path), doctest::Contains("column 'b'"),
                       ValidationError);
}

TEST_CASE("observed series: load, validate, sort, round-trip") {
  TempDir tmp;
  const auto path = tmp.path / "series.csv";
  write_file(path,
             "year,top_share,aux_share,reset_rate\n"
             "2001,0.11,0.31,0.041\n"
             "2000,0.10,0.30,0.040\n"
             "2002,0.12,0.32,0.042\n");
  const auto series = load_observed_series(path);
  CHECK(series.size() == 3);
  CHECK(series.years == std::vector<int>{2000, 2001, 2002});  // sorted
  CHECK(series.top_share.front() == 0.10);
  CHECK(series.has_aux());

  // round-trip: emit then reload is lossless
  const auto out = tmp.path / "series_out.csv";
  save_observed_series(out, series, Metadata{});
  const auto back = load_observed_series(out);
  CHECK(back.years == series.years);
  CHECK(back.top_share == series.top_share);
  CHECK(back.aux_share == series.aux_share);
  CHECK(back.reset_rate == series.reset_rate);

  // aux column is optional
  write_file(path, "year,top_share,reset_rate\n2000,0.1,0.05\n");
  CHECK_FALSE(load_observed_series(path).has_aux());
}

TEST_CASE("observed series: parse errors name the cell") {
  TempDir tmp;
  const auto path = tmp.path / "series.csv";

  write_file(path, "year,top_share,reset_rate\n2000,1.2,0.05\n");
  CHECK_THROWS_WITH_AS(load_observed_series(path),
                       doctest::Contains("top_share"), ValidationError);

  write_file(path, "year,reset_rate\n2000,0.05\n");
  CHECK_THROWS_WITH_AS(load_observed_series(path),
                       doctest::Contains("header"), ValidationError);

  write_file(path,
             "year,top_share,reset_rate\n2000,0.1,0.05\n2000,0.2,0.05\n");
  CHECK_THROWS_WITH_AS(load_observed_series(path),
                       doctest::Contains("duplicate year"), ValidationError);

  write_file(path, "year,top_share,reset_rate\n2000,0.1,abc\n");
  CHECK_THROWS_WITH_AS(load_observed_series(path), doctest::Contains("row 1"),
                       ValidationError);
}

TEST_CASE("matrix: save/load with sidecar, validation, renormalize") {
  TempDir tmp;
  Matrix m(2, 2, 0.0);
  m(0, 0) = 0.9;
  m(0, 1) = 0.1;
  m(1, 0) = 0.25;
  m(1, 1) = 0.75;
  const markov::TransitionMatrix tm(std::move(m), 10.0,
                                    markov::QuantileScheme{2});

  const auto path = tmp.path / "matrix.csv";
  save_matrix(path, tm, Metadata{});
  CHECK(fs::exists(tmp.path / "matrix.csv.json"));  // sidecar
  const auto back = load_matrix(path);
  CHECK(back.entries() == tm.entries());
  CHECK(back.delta() == 10.0);
  CHECK(back.scheme().k == 2);

  // identity matrix is valid
  write_file(path, "from,to_1,to_2\n1,1,0\n2,0,1\n");
  write_file(tmp.path / "matrix.csv.json", "{\"delta\": 1.0, \"k\": 2}");
  CHECK(load_matrix(path).entries()(0, 0) == 1.0);

  // a row summing to 0.8 fails validation unless renormalized
  write_file(path, "from,to_1,to_2\n1,0.6,0.2\n2,0.5,0.5\n");
  CHECK_THROWS_AS(load_matrix(path), ValidationError);
  const auto renorm = load_matrix(path, /*renormalize=*/true);
  CHECK(renorm.entries()(0, 0) == doctest::Approx(0.75));
  CHECK(renorm.entries().row_sum(0) == doctest::Approx(1.0).epsilon(1e-12));

  // JSON format is self-contained
  const auto jpath = tmp.path / "matrix.json";
  save_matrix(jpath, tm, Metadata{}, Format::json);
  const auto jback = load_matrix(jpath);
  CHECK(jback.entries() == tm.entries());
  CHECK(jback.delta() == 10.0);
}

TEST_CASE("panel: save/load round-trip with delta metadata") {
  TempDir tmp;
  sim::IncomePanel panel;
  panel.worker_ids = {0, 1, 2};
  panel.snapshots.push_back({5.0, {1.0, 2.0, 3.0}});
  panel.snapshots.push_back({15.0, {1.5, 0.7, 9.0}});
  panel.delta = 10.0;

  const auto path = tmp.path / "panel.csv";
  save_panel(path, panel, Metadata{});
  const auto back = load_panel(path);
  CHECK(back.worker_ids == panel.worker_ids);
  CHECK(back.delta == 10.0);
  CHECK(back.snapshots.front().incomes == panel.snapshots.front().incomes);
  CHECK(back.snapshots.back().incomes == panel.snapshots.back().incomes);
  CHECK(back.snapshots.front().time == 5.0);

  // negative income rejected with the row named
  write_file(path, "# delta=1\nworker_id,income_t0,income_t1\n0,1.0,-2.0\n");
  CHECK_THROWS_WITH_AS(load_panel(path), doctest::Contains("row 1"),
                       ValidationError);
}

TEST_CASE("error_json is machine readable") {
  const std::string j = error_json("DomainError", "bad input");
  CHECK(j.find("\"DomainError\"") != std::string::npos);
  CHECK(j.find("\"bad input\"") != std::string::npos);
  CHECK(j.find("\"error\"") != std::string::npos);
}

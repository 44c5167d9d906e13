#include "srgbm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace srgbm::io {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, std::size_t row,
                    const std::string& column) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto* begin = t.data();
  const auto* end = t.data() + t.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    std::ostringstream msg;
    msg << "cannot parse '" << text << "' as a number at row " << row
        << ", column '" << column << "'";
    throw ValidationError(msg.str());
  }
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file: " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open output file: " + path.string());
  return out;
}

json meta_to_json(const Metadata& meta) {
  json j = json::object();
  for (const auto& [k, v] : meta.entries()) j[k] = v;
  return j;
}

Metadata meta_from_json(const json& j) {
  Metadata meta;
  if (!j.is_object()) return meta;
  for (const auto& [k, v] : j.items())
    meta.set(k, v.is_string() ? v.get<std::string>() : v.dump());
  return meta;
}

// Reads "# key=value" comment lines; positions the stream after them and
// returns the first non-comment line (the column header).
std::string read_metadata_lines(std::ifstream& in, Metadata* meta) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) != 0) return line;
    std::string body = trim(line.substr(1));
    const auto eq = body.find('=');
    if (eq != std::string::npos && meta)
      meta->set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return "";
}

void write_metadata_lines(std::ofstream& out, const Metadata& meta) {
  for (const auto& [k, v] : meta.entries()) out << "# " << k << "=" << v << "\n";
}

json table_to_json(const Metadata& meta, const Table& table) {
  json j;
  j["meta"] = meta_to_json(meta);
  j["columns"] = table.columns;
  j["rows"] = json::array();
  for (const auto& row : table.rows) j["rows"].push_back(row);
  return j;
}

}  // namespace

Format format_from_string(const std::string& name) {
  if (name == "csv") return Format::csv;
  if (name == "json") return Format::json;
  throw ValidationError("unknown output format: " + name);
}

std::string to_string(Format f) { return f == Format::csv ? "csv" : "json"; }

void Metadata::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

void Metadata::set(const std::string& key, double value) {
  set(key, format_double(value));
}

void Metadata::set(const std::string& key, std::int64_t value) {
  set(key, std::to_string(value));
}

void Metadata::set(const std::string& key, std::uint64_t value) {
  set(key, std::to_string(value));
}

bool Metadata::contains(const std::string& key) const {
  return try_get(key).has_value();
}

const std::string& Metadata::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw ValidationError("metadata key not found: " + key);
}

std::optional<std::string> Metadata::try_get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  // Shortest representation that parses back to the same double.
  std::string best;
  for (int prec = 1; prec <= 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, value);
    double back = 0.0;
    std::from_chars(probe, probe + std::strlen(probe), back);
    if (back == value && (best.empty() || std::strlen(probe) < best.size()))
      best = probe;
  }
  return best;
}

void write_table(const std::filesystem::path& path, const Metadata& meta,
                 const Table& table, Format format) {
  for (const auto& row : table.rows)
    if (row.size() != table.columns.size())
      throw ValidationError("table row width does not match column count");

  auto out = open_output(path);
  if (format == Format::json) {
    out << table_to_json(meta, table).dump(2) << "\n";
    return;
  }
  write_metadata_lines(out, meta);
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << table.columns[c];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << format_double(row[c]);
    out << "\n";
  }
}

Table read_table(const std::filesystem::path& path, Metadata* meta) {
  Table table;
  if (path.extension() == ".json") {
    auto in = open_input(path);
    json j = json::parse(in, nullptr, true);
    if (meta && j.contains("meta")) *meta = meta_from_json(j["meta"]);
    table.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows"))
      table.rows.push_back(row.get<std::vector<double>>());
    return table;
  }

  auto in = open_input(path);
  const std::string header = read_metadata_lines(in, meta);
  if (header.empty()) throw ValidationError("empty table: " + path.string());
  for (auto& c : split_csv_line(header)) table.columns.push_back(trim(c));

  std::string line;
  std::size_t row_idx = 1;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != table.columns.size()) {
      std::ostringstream msg;
      msg << "row " << row_idx << " has " << fields.size()
          << " fields, expected " << table.columns.size();
      throw ValidationError(msg.str());
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c)
      row[c] = parse_double(fields[c], row_idx, table.columns[c]);
    table.rows.push_back(std::move(row));
    ++row_idx;
  }
  return table;
}

estimation::ObservedSeries load_observed_series(
    const std::filesystem::path& path) {
  auto in = open_input(path);
  Metadata meta;
  const std::string header_line = read_metadata_lines(in, &meta);
  if (header_line.empty())
    throw ValidationError("observed series file is empty: " + path.string());

  std::vector<std::string> header;
  for (auto& c : split_csv_line(header_line)) header.push_back(trim(c));
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto year_col = column("year");
  const auto top_col = column("top_share");
  const auto aux_col = column("aux_share");
  const auto reset_col = column("reset_rate");
  if (!year_col || !top_col || !reset_col)
    throw ValidationError(
        "observed series header must contain year, top_share and reset_rate");

  struct Row {
    int year;
    double top, aux, reset;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t row_idx = 1;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      std::ostringstream msg;
      msg << "row " << row_idx << " has " << fields.size()
          << " fields, expected " << header.size();
      throw ValidationError(msg.str());
    }
    Row r{};
    const double year_val = parse_double(fields[*year_col], row_idx, "year");
    r.year = static_cast<int>(year_val);
    if (r.year != year_val) {
      std::ostringstream msg;
      msg << "year must be an integer at row " << row_idx << ", column 'year'";
      throw ValidationError(msg.str());
    }
    r.top = parse_double(fields[*top_col], row_idx, "top_share");
    if (!(r.top > 0.0 && r.top < 1.0)) {
      std::ostringstream msg;
      msg << "top_share " << r.top << " outside (0,1) at row " << row_idx
          << ", column 'top_share'";
      throw ValidationError(msg.str());
    }
    if (aux_col) {
      r.aux = parse_double(fields[*aux_col], row_idx, "aux_share");
      if (!(r.aux > 0.0 && r.aux < 1.0)) {
        std::ostringstream msg;
        msg << "aux_share " << r.aux << " outside (0,1) at row " << row_idx
            << ", column 'aux_share'";
        throw ValidationError(msg.str());
      }
    }
    r.reset = parse_double(fields[*reset_col], row_idx, "reset_rate");
    if (!(r.reset > 0.0 && r.reset < 1.0)) {
      std::ostringstream msg;
      msg << "reset_rate " << r.reset << " outside (0,1) at row " << row_idx
          << ", column 'reset_rate'";
      throw ValidationError(msg.str());
    }
    rows.push_back(r);
    ++row_idx;
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.year < b.year; });
  estimation::ObservedSeries series;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].year == rows[i - 1].year)
      throw ValidationError("duplicate year " + std::to_string(rows[i].year) +
                            " in observed series (years must be strictly "
                            "increasing)");
    series.years.push_back(rows[i].year);
    series.top_share.push_back(rows[i].top);
    if (aux_col) series.aux_share.push_back(rows[i].aux);
    series.reset_rate.push_back(rows[i].reset);
  }
  validate(series);
  return series;
}

void save_observed_series(const std::filesystem::path& path,
                          const estimation::ObservedSeries& series,
                          const Metadata& meta, Format format) {
  Table table;
  table.columns = {"year", "top_share"};
  if (series.has_aux()) table.columns.push_back("aux_share");
  table.columns.push_back("reset_rate");
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::vector<double> row{static_cast<double>(series.years[i]),
                            series.top_share[i]};
    if (series.has_aux()) row.push_back(series.aux_share[i]);
    row.push_back(series.reset_rate[i]);
    table.rows.push_back(std::move(row));
  }
  write_table(path, meta, table, format);
}

markov::TransitionMatrix load_matrix(const std::filesystem::path& path,
                                     bool renormalize, double row_tol) {
  double delta = 0.0;
  int k = 0;
  Table table;
  if (path.extension() == ".json") {
    Metadata meta;
    table = read_table(path, &meta);
    delta = parse_double(meta.get("delta"), 0, "delta");
    k = static_cast<int>(parse_double(meta.get("k"), 0, "k"));
  } else {
    table = read_table(path, nullptr);
    const auto sidecar = path.string() + ".json";
    auto in = open_input(sidecar);
    json j = json::parse(in, nullptr, true);
    delta = j.at("delta").get<double>();
    k = j.at("k").get<int>();
  }

  if (table.columns.empty() || table.columns.front() != "from")
    throw ValidationError("matrix table must start with a 'from' column");
  const int n = static_cast<int>(table.rows.size());
  if (n != k || static_cast<int>(table.columns.size()) != k + 1)
    throw ValidationError("matrix shape does not match sidecar K=" +
                          std::to_string(k));

  Matrix m(n, n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = table.rows[i][j + 1];

  if (renormalize) {
    for (int i = 0; i < n; ++i) {
      const double sum = m.row_sum(i);
      if (!(sum > 0.0))
        throw ValidationError("matrix row " + std::to_string(i + 1) +
                              " cannot be renormalized (sum <= 0)");
      for (int j = 0; j < n; ++j) m(i, j) /= sum;
    }
    row_tol = 1e-9;
  }
  return markov::TransitionMatrix(std::move(m), delta,
                                  markov::QuantileScheme{k}, row_tol);
}

void save_matrix(const std::filesystem::path& path,
                 const markov::TransitionMatrix& matrix, const Metadata& meta,
                 Format format) {
  const int k = static_cast<int>(matrix.size());
  Table table;
  table.columns.push_back("from");
  for (int j = 0; j < k; ++j)
    table.columns.push_back("to_" + std::to_string(j + 1));
  for (int i = 0; i < k; ++i) {
    std::vector<double> row{static_cast<double>(i + 1)};
    for (int j = 0; j < k; ++j) row.push_back(matrix.entries()(i, j));
    table.rows.push_back(std::move(row));
  }

  Metadata full = meta;
  full.set("delta", matrix.delta());
  full.set("k", static_cast<std::int64_t>(k));
  full.set("quantile_scheme", matrix.scheme().boundary);
  write_table(path, full, table, format);

  if (format == Format::csv) {
    json sidecar;
    sidecar["delta"] = matrix.delta();
    sidecar["k"] = k;
    sidecar["quantile_scheme"] = matrix.scheme().boundary;
    auto out = open_output(path.string() + ".json");
    out << sidecar.dump(2) << "\n";
  }
}

sim::IncomePanel load_panel(const std::filesystem::path& path) {
  Metadata meta;
  const Table table = read_table(path, &meta);
  const std::vector<std::string> expect = {"worker_id", "income_t0",
                                           "income_t1"};
  if (table.columns != expect)
    throw ValidationError(
        "panel table must have columns worker_id,income_t0,income_t1");
  if (!meta.contains("delta"))
    throw ValidationError("panel file lacks '# delta=' metadata");
  const double delta = parse_double(meta.get("delta"), 0, "delta");
  const double t0 =
      meta.contains("t0") ? parse_double(meta.get("t0"), 0, "t0") : 0.0;

  sim::IncomePanel panel;
  panel.delta = delta;
  panel.snapshots.resize(2);
  panel.snapshots[0].time = t0;
  panel.snapshots[1].time = t0 + delta;
  std::size_t row_idx = 1;
  for (const auto& row : table.rows) {
    panel.worker_ids.push_back(static_cast<std::uint64_t>(row[0]));
    if (!(row[1] > 0.0) || !(row[2] > 0.0)) {
      std::ostringstream msg;
      msg << "panel incomes must be > 0 at row " << row_idx;
      throw ValidationError(msg.str());
    }
    panel.snapshots[0].incomes.push_back(row[1]);
    panel.snapshots[1].incomes.push_back(row[2]);
    ++row_idx;
  }
  return panel;
}

void save_panel(const std::filesystem::path& path,
                const sim::IncomePanel& panel, const Metadata& meta,
                Format format) {
  if (panel.snapshots.size() < 2)
    throw ValidationError("panel must carry two snapshots");
  Table table;
  table.columns = {"worker_id", "income_t0", "income_t1"};
  const auto& s0 = panel.snapshots.front();
  const auto& s1 = panel.snapshots.back();
  for (std::size_t i = 0; i < panel.worker_ids.size(); ++i)
    table.rows.push_back({static_cast<double>(panel.worker_ids[i]),
                          s0.incomes[i], s1.incomes[i]});
  Metadata full = meta;
  full.set("delta", panel.delta);
  full.set("t0", s0.time);
  full.set("t1", s1.time);
  write_table(path, full, table, format);
}

std::string error_json(const std::string& type, const std::string& message) {
  json j;
  j["error"]["type"] = type;
  j["error"]["message"] = message;
  return j.dump();
}

}  // namespace srgbm::io

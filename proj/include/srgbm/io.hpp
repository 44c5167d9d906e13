#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "srgbm/estimation.hpp"
#include "srgbm/markov.hpp"
#include "srgbm/simulator.hpp"

namespace srgbm::io {

enum class Format { csv, json };

Format format_from_string(const std::string& name);
std::string to_string(Format f);

// Ordered key/value metadata carried by every artifact. In CSV artifacts it
// is serialized as leading "# key=value" lines; in JSON artifacts under a
// "meta" object. wall_clock_s is the only field expected to differ between
// reruns of the same command.
class Metadata {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);

  bool contains(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::optional<std::string> try_get(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Shortest representation that round-trips a double exactly.
std::string format_double(double value);

// A purely numeric named-column table; encodes every report the CLI emits.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

void write_table(const std::filesystem::path& path, const Metadata& meta,
                 const Table& table, Format format);
Table read_table(const std::filesystem::path& path, Metadata* meta = nullptr);

// Observed series CSV: header year,top_share[,aux_share],reset_rate.
// Rows are sorted by year on load; parse errors name the row and column.
estimation::ObservedSeries load_observed_series(
    const std::filesystem::path& path);
void save_observed_series(const std::filesystem::path& path,
                          const estimation::ObservedSeries& series,
                          const Metadata& meta, Format format = Format::csv);

// K x K matrix as headered CSV with a JSON sidecar (path + ".json")
// carrying delta and K; JSON-format matrices are self-contained. Rows off
// by more than row_tol (default 1e-6) fail validation unless renormalize
// is set.
markov::TransitionMatrix load_matrix(const std::filesystem::path& path,
                                     bool renormalize = false,
                                     double row_tol = 1e-6);
void save_matrix(const std::filesystem::path& path,
                 const markov::TransitionMatrix& matrix, const Metadata& meta,
                 Format format = Format::csv);

// Worker panel CSV: worker_id,income_t0,income_t1 with delta (and snapshot
// times) carried in the metadata header.
sim::IncomePanel load_panel(const std::filesystem::path& path);
void save_panel(const std::filesystem::path& path,
                const sim::IncomePanel& panel, const Metadata& meta,
                Format format = Format::csv);

// Machine-readable error object for the CLI.
std::string error_json(const std::string& type, const std::string& message);

}  // namespace srgbm::io

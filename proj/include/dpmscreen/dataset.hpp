#pragma once

// Tabular numeric data with a missing-value mask, CSV input and output.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dpmscreen {

struct Dataset {
  std::vector<std::string> names;
  std::vector<std::string> row_ids;
  /// Column-major values; missing entries hold NaN and are masked.
  std::vector<std::vector<double>> columns;
  std::vector<std::vector<std::uint8_t>> missing;

  std::size_t rows() const { return row_ids.size(); }
  std::size_t cols() const { return names.size(); }
  bool is_missing(std::size_t row, std::size_t col) const { return missing[col][row] != 0; }
  double value(std::size_t row, std::size_t col) const { return columns[col][row]; }

  /// Index of a column by name; throws InputError when absent.
  std::size_t column_index(const std::string& name) const;

  /// Checks shapes, unique names and unique row ids.
  void validate() const;

  /// Copy with rows ordered by row id: numerically when every id is an
  /// integer, lexicographically otherwise.
  Dataset sorted_by_row_id() const;

  /// Copy restricted to the named columns (in the given order).
  Dataset select(const std::vector<std::string>& names) const;
};

struct CsvOptions {
  char delimiter = ',';
  /// Column holding row ids; when empty, ids are the 1-based row ordinals.
  std::optional<std::string> id_column;
};

/// Reads a CSV file with a header row. Empty fields, "NA" and "NaN" are
/// missing. Throws InputError on duplicate headers, ragged rows or
/// non-numeric cells (listing the offending cells).
Dataset load_csv(const std::string& path, const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const CsvOptions& options = {});

/// Writes the dataset with a leading "id" column (or `id_name`); values use
/// the shortest representation that reads back exactly.
void write_csv(const Dataset& data, const std::string& path, const std::string& id_name = "id");
std::string format_csv(const Dataset& data, const std::string& id_name = "id");

/// Shortest decimal form of a double that parses back to the same value.
std::string format_double(double v);
/// Strict full-string parse; returns nullopt for anything that is not a number.
std::optional<double> parse_double(const std::string& text);

}  // namespace dpmscreen

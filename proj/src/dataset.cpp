#include "dpmscreen/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "dpmscreen/stats.hpp"

namespace dpmscreen {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

// Splits CSV text into records, honouring double-quoted fields.
std::vector<std::vector<std::string>> split_records(const std::string& text, char delim) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == delim) {
      rec.push_back(field);
      field.clear();
      any = true;
    } else if (ch == '\n') {
      if (any || !field.empty()) {
        rec.push_back(field);
        records.push_back(std::move(rec));
      }
      rec.clear();
      field.clear();
      any = false;
    } else if (ch != '\r') {
      field.push_back(ch);
      any = true;
    }
  }
  if (quoted) throw InputError("csv: unterminated quoted field");
  if (any || !field.empty()) {
    rec.push_back(field);
    records.push_back(std::move(rec));
  }
  return records;
}

bool is_missing_token(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan"; }

bool all_integers(const std::vector<std::string>& ids, std::vector<long long>& out) {
  out.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& s = ids[i];
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out[i]);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) return false;
  }
  return true;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::size_t Dataset::column_index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InputError("unknown variable: " + name);
  return static_cast<std::size_t>(it - names.begin());
}

void Dataset::validate() const {
  if (columns.size() != names.size() || missing.size() != names.size())
    throw InputError("dataset: column count mismatch");
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (columns[j].size() != row_ids.size() || missing[j].size() != row_ids.size())
      throw InputError("dataset: column " + names[j] + " has the wrong length");
  }
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw InputError("dataset: duplicate variable name " + n);
  }
  std::set<std::string> ids;
  for (const auto& r : row_ids) {
    if (!ids.insert(r).second) throw InputError("dataset: duplicate row id " + r);
  }
}

Dataset Dataset::sorted_by_row_id() const {
  std::vector<std::size_t> order(rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<long long> numeric;
  if (all_integers(row_ids, numeric)) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return numeric[a] < numeric[b]; });
  } else {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row_ids[a] < row_ids[b]; });
  }
  Dataset out;
  out.names = names;
  out.row_ids.reserve(rows());
  for (std::size_t r : order) out.row_ids.push_back(row_ids[r]);
  out.columns.resize(cols());
  out.missing.resize(cols());
  for (std::size_t j = 0; j < cols(); ++j) {
    out.columns[j].reserve(rows());
    out.missing[j].reserve(rows());
    for (std::size_t r : order) {
      out.columns[j].push_back(columns[j][r]);
      out.missing[j].push_back(missing[j][r]);
    }
  }
  return out;
}

Dataset Dataset::select(const std::vector<std::string>& wanted) const {
  Dataset out;
  out.row_ids = row_ids;
  for (const auto& w : wanted) {
    const std::size_t j = column_index(w);
    out.names.push_back(names[j]);
    out.columns.push_back(columns[j]);
    out.missing.push_back(missing[j]);
  }
  out.validate();
  return out;
}

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
  const auto records = split_records(text, options.delimiter);
  if (records.empty()) throw InputError("csv: missing header row");
  std::vector<std::string> header;
  for (const auto& h : records[0]) header.push_back(trim(h));
  const std::size_t width = header.size();

  std::optional<std::size_t> id_col;
  if (options.id_column) {
    const auto it = std::find(header.begin(), header.end(), *options.id_column);
    if (it == header.end()) throw InputError("csv: id column '" + *options.id_column + "' not found");
    id_col = static_cast<std::size_t>(it - header.begin());
  }

  Dataset d;
  std::vector<std::size_t> value_cols;
  {
    std::set<std::string> seen;
    for (std::size_t j = 0; j < width; ++j) {
      if (header[j].empty()) throw InputError("csv: empty column name at position " + std::to_string(j + 1));
      if (!seen.insert(header[j]).second) throw InputError("csv: duplicate header '" + header[j] + "'");
      if (id_col && *id_col == j) continue;
      value_cols.push_back(j);
      d.names.push_back(header[j]);
    }
  }
  const std::size_t n = records.size() - 1;
  d.columns.assign(value_cols.size(), std::vector<double>(n, 0.0));
  d.missing.assign(value_cols.size(), std::vector<std::uint8_t>(n, 0));
  d.row_ids.resize(n);

  std::vector<std::string> bad;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = records[r + 1];
    if (rec.size() != width) {
      throw InputError("csv: line " + std::to_string(r + 2) + " has " + std::to_string(rec.size()) +
                       " fields, expected " + std::to_string(width));
    }
    d.row_ids[r] = id_col ? trim(rec[*id_col]) : std::to_string(r + 1);
    for (std::size_t c = 0; c < value_cols.size(); ++c) {
      const std::string cell = trim(rec[value_cols[c]]);
      if (is_missing_token(cell)) {
        d.columns[c][r] = std::numeric_limits<double>::quiet_NaN();
        d.missing[c][r] = 1;
        continue;
      }
      const auto v = parse_double(cell);
      if (!v || !std::isfinite(*v)) {
        bad.push_back("line " + std::to_string(r + 2) + " column '" + d.names[c] + "': '" + cell + "'");
        continue;
      }
      d.columns[c][r] = *v;
    }
  }
  if (!bad.empty()) {
    std::string msg = "csv: non-numeric cells:";
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) msg += "\n  " + bad[i];
    if (bad.size() > 20) msg += "\n  ... and " + std::to_string(bad.size() - 20) + " more";
    throw InputError(msg);
  }
  d.validate();
  return d;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_csv(ss.str(), options);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string format_csv(const Dataset& data, const std::string& id_name) {
  std::string out = quote_if_needed(id_name);
  for (const auto& n : data.names) out += "," + quote_if_needed(n);
  out += "\n";
  for (std::size_t r = 0; r < data.rows(); ++r) {
    out += quote_if_needed(data.row_ids[r]);
    for (std::size_t j = 0; j < data.cols(); ++j) {
      out += ",";
      if (!data.is_missing(r, j)) out += format_double(data.value(r, j));
    }
    out += "\n";
  }
  return out;
}

void write_csv(const Dataset& data, const std::string& path, const std::string& id_name) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << format_csv(data, id_name);
  if (!out) throw InputError("write failed for " + path);
}

}  // namespace dpmscreen

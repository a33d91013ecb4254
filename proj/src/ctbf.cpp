#include "dpmscreen/ctbf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpmscreen {

namespace {

// ln Gamma(j / 2) for j = 1 .. kHalfTableSize - 1. With the default cell prior
// every argument in the Bayes factor is a multiple of 1/2.
constexpr std::size_t kHalfTableSize = std::size_t{1} << 18;

const std::vector<double>& half_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kHalfTableSize, 0.0);
    t[0] = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < kHalfTableSize; ++j) t[j] = log_gamma(0.5 * static_cast<double>(j));
    return t;
  }();
  return table;
}

inline double lg(double x) {
  const double twice = 2.0 * x;
  if (twice < static_cast<double>(kHalfTableSize) && twice == std::floor(twice) && twice >= 1.0) {
    return half_table()[static_cast<std::size_t>(twice)];
  }
  return log_gamma(x);
}

struct MarginTerms {
  double a;
  double row_alpha;
  double col_alpha;
  double cell_alpha;
};

MarginTerms margin_terms(const CtbfConfig& config, int rows, int cols) {
  const double ca = config.cell_alpha(rows, cols);
  return {ca * rows * cols, ca * cols, ca * rows, ca};
}

double log_multinomial_coefficient(const ContingencyTable& t) {
  double out = lg(static_cast<double>(t.total) + 1.0);
  for (long m : t.counts) out -= lg(static_cast<double>(m) + 1.0);
  return out;
}

double sum_margin(std::span<const long> margin, double alpha) {
  double out = 0.0;
  const double base = lg(alpha);
  for (long m : margin) {
    if (m > 0) out += lg(alpha + static_cast<double>(m)) - base;
  }
  return out;
}

void check_table(const ContingencyTable& t) {
  if (t.rows < 1 || t.cols < 1) throw InputError("contingency table must have at least one row and column");
}

// Reusable scratch space for tabulating label pairs without allocating.
class PairTabulator {
 public:
  double log_bf(std::span<const std::int32_t> x, std::span<const std::int32_t> y, const CtbfConfig& config) {
    const std::size_t n = x.size();
    int kx = 0;
    int ky = 0;
    for (std::size_t i = 0; i < n; ++i) {
      kx = std::max(kx, x[i]);
      ky = std::max(ky, y[i]);
    }
    if (n == 0 || kx == 1 || ky == 1) return 0.0;
    const std::size_t cells = static_cast<std::size_t>(kx) * ky;
    if (cell_.size() < cells) cell_.assign(cells, 0);
    row_.assign(kx, 0);
    col_.assign(ky, 0);
    touched_.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(x[i] - 1) * ky + (y[i] - 1);
      if (cell_[idx]++ == 0) touched_.push_back(idx);
      ++row_[x[i] - 1];
      ++col_[y[i] - 1];
    }
    const MarginTerms mt = margin_terms(config, kx, ky);
    double out = lg(mt.a) - lg(mt.a + static_cast<double>(n));
    out += sum_margin(row_, mt.row_alpha);
    out += sum_margin(col_, mt.col_alpha);
    const double base = lg(mt.cell_alpha);
    for (std::size_t idx : touched_) {
      out += base - lg(mt.cell_alpha + static_cast<double>(cell_[idx]));
      cell_[idx] = 0;
    }
    return out;
  }

 private:
  std::vector<long> cell_;
  std::vector<long> row_;
  std::vector<long> col_;
  std::vector<std::size_t> touched_;
};

class Relabeler {
 public:
  void apply(std::span<const std::int32_t> labels, std::span<const std::size_t> rows, std::vector<std::int32_t>& out) {
    out.resize(rows.size());
    ++stamp_;
    std::int32_t next = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::int32_t lab = labels[rows[r]];
      if (static_cast<std::size_t>(lab) >= map_.size()) {
        map_.resize(static_cast<std::size_t>(lab) + 1, 0);
        seen_.resize(static_cast<std::size_t>(lab) + 1, 0);
      }
      if (seen_[lab] != stamp_) {
        seen_[lab] = stamp_;
        map_[lab] = ++next;
      }
      out[r] = map_[lab];
    }
  }

 private:
  std::vector<std::int32_t> map_;
  std::vector<std::uint64_t> seen_;
  std::uint64_t stamp_ = 0;
};

}  // namespace

ContingencyTable ContingencyTable::transposed() const {
  std::vector<long> c(counts.size());
  for (int k = 0; k < rows; ++k)
    for (int l = 0; l < cols; ++l) c[static_cast<std::size_t>(l) * rows + k] = at(k, l);
  return make_table(cols, rows, std::move(c));
}

ContingencyTable make_table(int rows, int cols, std::vector<long> counts) {
  if (rows < 1 || cols < 1) throw InputError("contingency table must have at least one row and column");
  if (counts.size() != static_cast<std::size_t>(rows) * cols)
    throw InputError("contingency table: counts do not match the dimensions");
  ContingencyTable t;
  t.rows = rows;
  t.cols = cols;
  t.counts = std::move(counts);
  t.row_margin.assign(rows, 0);
  t.col_margin.assign(cols, 0);
  for (int k = 0; k < rows; ++k) {
    for (int l = 0; l < cols; ++l) {
      const long m = t.at(k, l);
      if (m < 0) throw InputError("contingency table: negative count");
      t.row_margin[k] += m;
      t.col_margin[l] += m;
      t.total += m;
    }
  }
  return t;
}

ContingencyTable build_table(std::span<const std::int32_t> x, std::span<const std::int32_t> y) {
  if (x.size() != y.size()) throw InputError("build_table: label vectors differ in length");
  if (x.empty()) throw InputError("build_table: empty label vectors");
  int kx = 0;
  int ky = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 1 || y[i] < 1) throw InputError("build_table: labels must be positive");
    kx = std::max(kx, x[i]);
    ky = std::max(ky, y[i]);
  }
  std::vector<long> c(static_cast<std::size_t>(kx) * ky, 0);
  for (std::size_t i = 0; i < x.size(); ++i) ++c[static_cast<std::size_t>(x[i] - 1) * ky + (y[i] - 1)];
  return make_table(kx, ky, std::move(c));
}

bool drop_empty_margins(ContingencyTable& table) {
  std::vector<int> keep_r;
  std::vector<int> keep_c;
  for (int k = 0; k < table.rows; ++k)
    if (table.row_margin[k] > 0) keep_r.push_back(k);
  for (int l = 0; l < table.cols; ++l)
    if (table.col_margin[l] > 0) keep_c.push_back(l);
  if (keep_r.size() == static_cast<std::size_t>(table.rows) && keep_c.size() == static_cast<std::size_t>(table.cols))
    return false;
  if (keep_r.empty() || keep_c.empty()) {
    table = make_table(1, 1, {0});
    return true;
  }
  std::vector<long> c;
  c.reserve(keep_r.size() * keep_c.size());
  for (int k : keep_r)
    for (int l : keep_c) c.push_back(table.at(k, l));
  table = make_table(static_cast<int>(keep_r.size()), static_cast<int>(keep_c.size()), std::move(c));
  return true;
}

double CtbfConfig::cell_alpha(int rows, int cols) const {
  if (rule == CellPrior::Constant) return alpha;
  return total_mass / (static_cast<double>(rows) * cols);
}

void CtbfConfig::validate() const {
  if (rule == CellPrior::Constant && !(alpha > 0.0 && std::isfinite(alpha)))
    throw DomainError("ctbf: cell prior alpha must be positive");
  if (rule == CellPrior::TotalMass && !(total_mass > 0.0 && std::isfinite(total_mass)))
    throw DomainError("ctbf: total prior mass a must be positive");
}

double log_marginal_m1(const ContingencyTable& table, const CtbfConfig& config) {
  check_table(table);
  config.validate();
  const MarginTerms mt = margin_terms(config, table.rows, table.cols);
  double out = log_multinomial_coefficient(table) + lg(mt.a) - lg(mt.a + static_cast<double>(table.total));
  const double base = lg(mt.cell_alpha);
  for (long m : table.counts) {
    if (m > 0) out += lg(mt.cell_alpha + static_cast<double>(m)) - base;
  }
  return out;
}

double log_marginal_m0(const ContingencyTable& table, const CtbfConfig& config) {
  check_table(table);
  config.validate();
  const MarginTerms mt = margin_terms(config, table.rows, table.cols);
  const double n = static_cast<double>(table.total);
  double out = log_multinomial_coefficient(table);
  out += lg(mt.a) - lg(mt.a + n) + sum_margin(table.row_margin, mt.row_alpha);
  out += lg(mt.a) - lg(mt.a + n) + sum_margin(table.col_margin, mt.col_alpha);
  return out;
}

double log_bf(const ContingencyTable& table, const CtbfConfig& config) {
  check_table(table);
  config.validate();
  if (table.rows == 1 || table.cols == 1) return 0.0;
  const MarginTerms mt = margin_terms(config, table.rows, table.cols);
  double out = lg(mt.a) - lg(mt.a + static_cast<double>(table.total));
  out += sum_margin(table.row_margin, mt.row_alpha);
  out += sum_margin(table.col_margin, mt.col_alpha);
  const double base = lg(mt.cell_alpha);
  for (long m : table.counts) {
    if (m > 0) out += base - lg(mt.cell_alpha + static_cast<double>(m));
  }
  return out;
}

double posterior_prob_dep(double lbf) {
  if (std::isnan(lbf)) throw DomainError("posterior_prob_dep: log Bayes factor is NaN");
  if (lbf > 0.0) {
    const double e = std::exp(-lbf);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(lbf));
}

CtbfResult p_dep_over_trace(const AllocationTrace& x, const AllocationTrace& y, const CtbfConfig& config,
                            std::span<const std::size_t> rows_x, std::span<const std::size_t> rows_y) {
  config.validate();
  if (x.saved() == 0 || y.saved() == 0) throw InputError("p_dep_over_trace: no saved iterations");
  if (x.saved() != y.saved()) throw InputError("p_dep_over_trace: traces have different numbers of iterations");
  const bool restricted = !rows_x.empty() || !rows_y.empty();
  if (restricted && rows_x.size() != rows_y.size())
    throw InputError("p_dep_over_trace: row selections differ in length");
  if (!restricted && x.n != y.n) throw InputError("p_dep_over_trace: traces have different lengths");
  for (std::size_t r : rows_x) {
    if (r >= x.n) throw InputError("p_dep_over_trace: row index out of range");
  }
  for (std::size_t r : rows_y) {
    if (r >= y.n) throw InputError("p_dep_over_trace: row index out of range");
  }

  CtbfResult out;
  out.iterations = x.saved();
  out.probs.resize(out.iterations);
  out.log_bfs.resize(out.iterations);
  PairTabulator tab;
  Relabeler relabel;
  std::vector<std::int32_t> rx;
  std::vector<std::int32_t> ry;
  double sum = 0.0;
  for (std::size_t s = 0; s < out.iterations; ++s) {
    double lbf;
    if (!restricted) {
      lbf = tab.log_bf(x.iteration(s), y.iteration(s), config);
    } else {
      relabel.apply(x.iteration(s), rows_x, rx);
      relabel.apply(y.iteration(s), rows_y, ry);
      lbf = tab.log_bf(rx, ry, config);
    }
    out.log_bfs[s] = lbf;
    out.probs[s] = posterior_prob_dep(lbf);
    sum += out.probs[s];
  }
  out.p_dep = sum / static_cast<double>(out.iterations);
  return out;
}

ChiSquareResult chi_square(ContingencyTable table) {
  ChiSquareResult out;
  out.dropped_margins = drop_empty_margins(table);
  if (table.rows < 2 || table.cols < 2 || table.total == 0) return out;
  const double n = static_cast<double>(table.total);
  double t = 0.0;
  for (int k = 0; k < table.rows; ++k) {
    for (int l = 0; l < table.cols; ++l) {
      const double e = static_cast<double>(table.row_margin[k]) * static_cast<double>(table.col_margin[l]) / n;
      const double d = static_cast<double>(table.at(k, l)) - e;
      t += d * d / e;
    }
  }
  out.statistic = t;
  out.dof = (table.rows - 1) * (table.cols - 1);
  out.p_value = chi_square_upper_tail(t, out.dof);
  return out;
}

namespace {

std::vector<double> coclustering(const AllocationTrace& trace) {
  const std::size_t n = trace.n;
  std::vector<double> p(n * n, 0.0);
  for (std::size_t s = 0; s < trace.saved(); ++s) {
    const auto lab = trace.iteration(s);
    for (std::size_t i = 0; i < n; ++i) {
      double* row = p.data() + i * n;
      const std::int32_t li = lab[i];
      for (std::size_t j = 0; j < n; ++j) row[j] += (lab[j] == li) ? 1.0 : 0.0;
    }
  }
  const double inv = 1.0 / static_cast<double>(trace.saved());
  for (double& v : p) v *= inv;
  return p;
}

double score_against(const std::vector<double>& p, std::span<const std::int32_t> lab) {
  const std::size_t n = lab.size();
  double score = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = p.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = ((lab[j] == lab[i]) ? 1.0 : 0.0) - row[j];
      score += d * d;
    }
  }
  return score;
}

}  // namespace

double dahl_score(const AllocationTrace& trace, std::span<const std::int32_t> labels) {
  if (trace.saved() == 0) throw InputError("dahl_score: no saved iterations");
  if (labels.size() != trace.n) throw InputError("dahl_score: label length does not match the trace");
  return score_against(coclustering(trace), labels);
}

std::vector<std::int32_t> dahl_partition(const AllocationTrace& trace) {
  if (trace.saved() == 0) throw InputError("dahl_partition: no saved iterations");
  const auto p = coclustering(trace);
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < trace.saved(); ++s) {
    const double sc = score_against(p, trace.iteration(s));
    if (sc < best_score) {
      best_score = sc;
      best = s;
    }
  }
  const auto lab = trace.iteration(best);
  std::vector<int> tmp(lab.begin(), lab.end());
  const auto canon = canonicalize_labels(tmp);
  return {canon.begin(), canon.end()};
}

std::vector<std::int32_t> restrict_labels(std::span<const std::int32_t> labels, std::span<const std::size_t> rows) {
  for (std::size_t r : rows) {
    if (r >= labels.size()) throw InputError("restrict_labels: row index out of range");
  }
  Relabeler relabel;
  std::vector<std::int32_t> out;
  relabel.apply(labels, rows, out);
  return out;
}

}  // namespace dpmscreen

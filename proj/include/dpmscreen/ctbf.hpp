#pragma once

// Contingency-table Bayes factor (CT-BF) dependence measure. Two marginal
// partitions are cross-tabulated; the counts are scored under a
// Dirichlet-multinomial model for the joint cells (dependence) against the
// product of Dirichlet-multinomial margins (independence).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpmscreen/dpm.hpp"

namespace dpmscreen {

/// K_X x K_Y counts, row-major.
struct ContingencyTable {
  int rows = 0;
  int cols = 0;
  std::vector<long> counts;
  std::vector<long> row_margin;
  std::vector<long> col_margin;
  long total = 0;

  long at(int k, int l) const { return counts[static_cast<std::size_t>(k) * cols + l]; }
  ContingencyTable transposed() const;
};

/// Builds a table from explicit counts (row-major), filling the margins.
/// Throws InputError on negative counts or a size mismatch.
ContingencyTable make_table(int rows, int cols, std::vector<long> counts);

/// Cross-tabulates two canonical label vectors (labels 1..K).
ContingencyTable build_table(std::span<const std::int32_t> x, std::span<const std::int32_t> y);

/// Removes empty rows and columns. Returns true when anything was dropped.
bool drop_empty_margins(ContingencyTable& table);

enum class CellPrior {
  Constant,   // alpha_kl = alpha
  TotalMass,  // alpha_kl = a / (K_X K_Y)
};

struct CtbfConfig {
  CellPrior rule = CellPrior::Constant;
  double alpha = 0.5;
  double total_mass = 1.0;

  double cell_alpha(int rows, int cols) const;
  void validate() const;
};

/// Log marginal probability of the cell counts under the dependent model
/// (Dirichlet-multinomial over the K_X K_Y cells).
double log_marginal_m1(const ContingencyTable& table, const CtbfConfig& config = {});
/// Log marginal probability under independence (product of row and column
/// Dirichlet-multinomials with alpha_k. and alpha_.l as margin priors).
double log_marginal_m0(const ContingencyTable& table, const CtbfConfig& config = {});
/// log BF = log_marginal_m0 - log_marginal_m1.
double log_bf(const ContingencyTable& table, const CtbfConfig& config = {});

/// 1 / (1 + exp(log_bf)), stable for large |log_bf|.
double posterior_prob_dep(double log_bf);

struct CtbfResult {
  double p_dep = 0.0;
  std::vector<double> probs;
  std::vector<double> log_bfs;
  std::size_t iterations = 0;
};

/// Averages the posterior probability of dependence over aligned saved
/// iterations. When `rows_x` and `rows_y` are given (equal lengths, entry r
/// of each naming the same observation), the traces are restricted to those
/// positions and relabelled by first appearance before tabulation.
CtbfResult p_dep_over_trace(const AllocationTrace& x, const AllocationTrace& y, const CtbfConfig& config = {},
                            std::span<const std::size_t> rows_x = {}, std::span<const std::size_t> rows_y = {});

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int dof = 0;
  bool dropped_margins = false;
};

/// Pearson statistic against the product of margins; empty margins are
/// dropped first. A table with a single row or column has dof 0 and p = 1.
ChiSquareResult chi_square(ContingencyTable table);

/// Saved partition closest (squared deviation) to the average co-clustering
/// matrix; ties go to the earliest iteration. Returns canonical labels.
std::vector<std::int32_t> dahl_partition(const AllocationTrace& trace);

/// Sum over i, j of (1{same cluster} - average co-clustering)^2 for one
/// partition, against the co-clustering matrix of `trace`.
double dahl_score(const AllocationTrace& trace, std::span<const std::int32_t> labels);

/// Restricts labels to `rows` and relabels by first appearance.
std::vector<std::int32_t> restrict_labels(std::span<const std::int32_t> labels, std::span<const std::size_t> rows);

}  // namespace dpmscreen

#pragma once

// All-pairs dependence screening. CT-BF fits one marginal DPM per variable
// (stage 1) and scores every pair from the stored traces (stage 2); MixMod,
// MI and chi-square work per pair on the rows where both variables are
// observed.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpmscreen/ctbf.hpp"
#include "dpmscreen/dataset.hpp"
#include "dpmscreen/dpm.hpp"
#include "dpmscreen/mi.hpp"
#include "dpmscreen/mixmod.hpp"

namespace dpmscreen {

struct MethodSet {
  bool ctbf = true;
  bool mixmod = false;
  bool mi = false;
  bool chisq = false;

  bool any() const { return ctbf || mixmod || mi || chisq; }
  /// Comma-separated list, e.g. "ctbf,mi".
  std::string to_string() const;
  /// Parses a comma-separated list; throws InputError on unknown names.
  static MethodSet parse(const std::string& text);
};

struct ScreenPlan {
  MethodSet methods;
  int min_complete = 10;
  McmcSettings mcmc;
  DpmConfig ctbf_marginal = DpmConfig::ctbf_marginal();
  CtbfConfig ctbf;
  DpmConfig mixmod_marginal = DpmConfig::mixmod(1);
  DpmConfig mixmod_joint = DpmConfig::mixmod(2);
  EnsembleConfig ensemble;
  MiConfig mi;
  int workers = 1;
  std::uint64_t seed = 0;
  /// Variable subset to screen; empty means all columns.
  std::vector<std::string> variables;

  void validate() const;
};

namespace status {
inline constexpr const char* kOk = "ok";
inline constexpr const char* kSkipped = "skipped-too-few-rows";
inline constexpr const char* kChainFailed = "chain-failed";
inline constexpr const char* kMixmodFailed = "mixmod-failed";
inline constexpr const char* kMiSkipped = "mi-skipped";
inline constexpr const char* kMiJittered = "mi-jittered";
inline constexpr const char* kChainWarning = "chain-warning";
inline constexpr const char* kDroppedMargins = "chisq-dropped-margins";
}  // namespace status

struct PairResult {
  int i = 0;
  int j = 0;
  std::string var_i;
  std::string var_j;
  long n_complete = 0;
  std::optional<double> p_dep;
  std::optional<double> pi_hat;
  std::optional<double> mi;
  std::optional<double> chi2_t;
  std::optional<double> chi2_p;
  std::vector<std::string> flags;

  bool skipped() const;
  /// True when a requested metric could not be computed.
  bool failed() const;
  /// "ok" or the flags joined by ';'.
  std::string status() const;

  bool operator==(const PairResult&) const = default;
};

struct ScreenStats {
  int stage1_chains = 0;
  int failed_variables = 0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Runs every method in plan.methods and merges the metrics per pair.
/// Results are sorted by (i, j) and do not depend on plan.workers.
std::vector<PairResult> screen(const Dataset& data, const ScreenPlan& plan, ScreenStats* stats = nullptr,
                               const ProgressFn& progress = {});

/// CT-BF only (plus chi-square if requested in the plan).
std::vector<PairResult> screen_ctbf(const Dataset& data, const ScreenPlan& plan, ScreenStats* stats = nullptr,
                                    const ProgressFn& progress = {});
/// MixMod-ensemble only.
std::vector<PairResult> screen_mixmod(const Dataset& data, const ScreenPlan& plan, ScreenStats* stats = nullptr,
                                      const ProgressFn& progress = {});

enum class ResultFormat { Tsv, Json };

/// TSV columns: var_i, var_j, n_complete, p_dep, pi_hat, mi, chi2_T, chi2_p,
/// status; missing metrics are empty fields. JSON adds the plan and seed.
void persist_results(const std::vector<PairResult>& results, const std::string& path, ResultFormat format,
                     const ScreenPlan* plan = nullptr);
std::string format_results_tsv(const std::vector<PairResult>& results);
std::string format_results_json(const std::vector<PairResult>& results, const ScreenPlan* plan = nullptr);

/// Reads either format (detected from the content). Variable indices are
/// restored from the JSON file; TSV results carry i = j = -1 unless
/// `names` is given.
std::vector<PairResult> load_results(const std::string& path, const std::vector<std::string>& names = {});
std::vector<PairResult> parse_results_tsv(const std::string& text, const std::vector<std::string>& names = {});

/// JSON description of a plan (used in result files and metadata sidecars).
std::string plan_to_json(const ScreenPlan& plan);

}  // namespace dpmscreen

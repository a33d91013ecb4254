#pragma once

// Synthetic dependence scenarios, permutation nulls, ROC summaries and the
// power / prior-sensitivity study drivers.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpmscreen/screen.hpp"
#include "dpmscreen/stats.hpp"

namespace dpmscreen {

enum class Scenario { Normal, Sinusoidal, Parabolic, Circular };

std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& name);

struct ScenarioConfig {
  Scenario kind = Scenario::Normal;
  double rho = 0.0;  // normal only
  double phi = 1.0;  // noise sd for the other scenarios
  int n = 250;
  int reps = 50;

  /// rho for the normal scenario, phi otherwise.
  double parameter() const { return kind == Scenario::Normal ? rho : phi; }
  void validate() const;
};

struct PairedSample {
  std::vector<double> x;
  std::vector<double> y;
};

/// Draws n pairs:
///   normal      (x, y) ~ N(0, [[1, rho], [rho, 1]])
///   sinusoidal  x ~ U[0, 5 pi],  y = 2 sin(x) + e
///   parabolic   x ~ N(0, 1),     y = 2 x^2 / 3 + e
///   circular    t ~ U[0, 2 pi],  x = 10 cos t + e1, y = 10 sin t + e2
/// with e ~ N(0, phi^2) independent per coordinate.
PairedSample generate(const ScenarioConfig& config, RngStream& rng);

/// Uniformly random permutation of 0..n-1.
std::vector<std::size_t> random_permutation(std::size_t n, RngStream& rng);

/// Returns (x, y reordered by a uniform random permutation).
PairedSample permute_null(std::span<const double> x, std::span<const double> y, RngStream& rng);

struct RocCurve {
  std::vector<double> thresholds;  // +inf first, then distinct scores descending
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auc = 0.5;
};

/// Classifies score >= threshold as dependent. AUC by the trapezoid rule,
/// which counts tied dependent/null scores as one half.
RocCurve roc(std::span<const double> dep_scores, std::span<const double> null_scores);

enum class Method { Ctbf, Mixmod, Mi, Chisq };
std::string method_name(Method m);
Method parse_method(const std::string& name);

/// One grid cell: a scenario plus the plan (priors, MCMC) used for it.
struct StudyCell {
  ScenarioConfig scenario;
  ScreenPlan plan;
  /// Free-form tag for sweeps (e.g. "c0=10"); empty for plain power runs.
  std::string setting;
};

struct CellResult {
  StudyCell cell;
  Method method = Method::Ctbf;
  std::vector<double> dep_scores;   // NaN marks a failed replication
  std::vector<double> null_scores;
  RocCurve curve;
  int failures = 0;
  double runtime_seconds = 0.0;
};

struct StudyOptions {
  std::vector<Method> methods;
  int workers = 1;
  std::uint64_t seed = 0;
  /// Score the permuted null of CT-BF/chi-square by permuting the columns of
  /// the already fitted y trace (and the fitted y marginal for MixMod)
  /// instead of refitting on the permuted sample.
  bool reuse_null_fits = true;
};

using StudyProgress = std::function<void(const std::string&)>;

/// Runs every method on `reps` dependent and `reps` permuted-null
/// replications per cell. Scores: CT-BF p_dep, MixMod pi_hat, MI estimate,
/// chi-square 1 - p-value. Output order: cell-major, then method.
std::vector<CellResult> power_study(const std::vector<StudyCell>& cells, const StudyOptions& options,
                                    const StudyProgress& progress = {});

/// Score of one method on one sample (used by the study and by tests).
double score_sample(Method method, std::span<const double> x, std::span<const double> y, const ScreenPlan& plan,
                    RngStream rng);

/// Reference power grid: normal rho in {0, .1, .3, .5, .9};
/// the other scenarios phi in {1, ..., 5}.
std::vector<StudyCell> reference_grid(int n, int reps, const ScreenPlan& plan);

struct SweepSpec {
  /// Parameter swept: "a" (cell prior), "c0" (CT-BF concentration) or
  /// "a0b0" (ensemble Beta prior, values given as pairs a0,b0).
  std::string parameter;
  std::vector<std::vector<double>> values;
  std::vector<double> phis = {1, 2, 3, 4, 5};
  int n = 250;
  int reps = 50;
};

/// Sinusoidal-scenario cells with per-cell plan overrides for a prior sweep.
std::vector<StudyCell> sensitivity_grid(const SweepSpec& spec, const ScreenPlan& base);
/// Default sweep values for "a", "c0" and "a0b0".
SweepSpec default_sweep(const std::string& parameter);

/// Per-replication scores: scenario, parameter, setting, method,
/// replication, score, label (1 dependent, 0 null).
void write_scores_tsv(std::ostream& out, const std::vector<CellResult>& results);
/// Summary: scenario, parameter, setting, method, auc, n_dep, n_null,
/// failures, runtime_seconds.
void write_summary_tsv(std::ostream& out, const std::vector<CellResult>& results);
/// ROC points: scenario, parameter, setting, method, threshold, fpr, tpr.
void write_roc_tsv(std::ostream& out, const std::vector<CellResult>& results);

}  // namespace dpmscreen

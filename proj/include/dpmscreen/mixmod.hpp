#pragma once

// MixMod dependence measures. The joint density is modelled as the ensemble
// pi * f1(x, y) + (1 - pi) * f0X(x) f0Y(y), with f1 a bivariate DPM and f0X,
// f0Y univariate DPMs; pi ~ Be(a0, b0) measures dependence.

#include <span>
#include <string>
#include <vector>

#include "dpmscreen/dpm.hpp"

namespace dpmscreen {

enum class PiQuadrature {
  // Prior mass and first moment of each grid cell are integrated exactly
  // (incomplete beta), the likelihood is held at the cell's grid node.
  CellIntegrated,
  // Plain sum over grid nodes weighted by likelihood times prior density.
  Node,
};

struct EnsembleConfig {
  double a0 = 0.5;
  double b0 = 0.5;
  double eta = 1e-4;
  PiQuadrature quadrature = PiQuadrature::CellIntegrated;

  void validate() const;
  /// Number of interior grid nodes eta, 2 eta, ..., 1 - eta.
  std::size_t grid_size() const;
};

/// Densities at the observed points: joint f1(x_i, y_i) and marginals.
struct PredictiveValues {
  std::vector<double> joint;
  std::vector<double> marginal_x;
  std::vector<double> marginal_y;

  std::size_t size() const { return joint.size(); }
  void validate() const;
};

struct PiGrid {
  EnsembleConfig config;
  std::vector<double> pi;        // grid nodes
  std::vector<double> log_lik;   // sum_i log(pi f1 + (1 - pi) f0X f0Y)
  std::vector<double> log_post;  // log_lik + log Beta density
};

/// Evaluates the log posterior of pi on the interior grid. Throws
/// DomainError("zero predictive support") when both components vanish at
/// an observation.
PiGrid pi_log_posterior_grid(const PredictiveValues& pv, const EnsembleConfig& config = {});

/// Grid from an explicit log-likelihood function of pi (used by tests and
/// by the sensitivity harness).
template <class F>
PiGrid pi_grid_from_log_lik(F&& log_lik, const EnsembleConfig& config) {
  config.validate();
  PiGrid g;
  g.config = config;
  const std::size_t m = config.grid_size();
  g.pi.resize(m);
  g.log_lik.resize(m);
  g.log_post.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    g.pi[j] = static_cast<double>(j + 1) * config.eta;
    g.log_lik[j] = log_lik(g.pi[j]);
    g.log_post[j] = g.log_lik[j] + log_beta_pdf(g.pi[j], config.a0, config.b0);
  }
  return g;
}

struct EnsembleResult {
  double pi_hat = 0.5;
  std::vector<double> pi;         // grid nodes
  std::vector<double> log_post;   // L_j
  std::vector<double> posterior;  // normalized grid weights
  /// Posterior mean of pi within each cell; equals the node under the Node
  /// rule. pi_hat = sum_j cell_mean_j * posterior_j.
  std::vector<double> cell_mean;
  std::vector<std::string> warnings;
};

/// Posterior mean of pi from the grid, computed with max-subtraction and
/// clamped to [eta, 1 - eta]. Throws DomainError when no L_j is finite.
EnsembleResult estimate_pi(const PiGrid& grid);

struct MixmodOptions {
  DpmConfig marginal = DpmConfig::mixmod(1);
  DpmConfig joint = DpmConfig::mixmod(2);
  McmcSettings mcmc;
  EnsembleConfig ensemble;
};

/// Centers and scales by the sample standard deviation. A constant input is
/// only centered; `constant` is set when that happens.
std::vector<double> standardize(std::span<const double> v, bool* constant = nullptr);

/// Averaged univariate DPM predictive at the (already standardized) points.
std::vector<double> fit_marginal_predictive(std::span<const double> v, const DpmConfig& config,
                                            const McmcSettings& mcmc, RngStream rng);
/// Averaged bivariate DPM predictive at the (already standardized) points.
std::vector<double> fit_joint_predictive(std::span<const double> x, std::span<const double> y,
                                         const DpmConfig& config, const McmcSettings& mcmc, RngStream rng);

/// Standardizes both samples, fits the three DPMs on the full sample
/// (substreams "x", "y", "xy"), evaluates them at the observations and runs
/// the grid estimator. Requires n >= 10.
EnsembleResult mixmod_ensemble(std::span<const double> x, std::span<const double> y, const MixmodOptions& options,
                               RngStream rng);

struct MixmodGibbsOptions {
  DpmConfig marginal = DpmConfig::mixmod(1);
  DpmConfig joint = DpmConfig::mixmod(2);
  EnsembleConfig ensemble;  // a0, b0
  int iterations = 100;
  int min_refit_sweeps = 50;
  int max_refit_sweeps = 100;
  int min_group = 5;
};

struct MixmodGibbsResult {
  double pi_hat = 0.5;
  std::vector<double> trajectory;  // pi^(1), ..., pi^(N + 1)
  std::vector<int> l0;             // independent-model count after each iteration
  int accepted = 0;
  int rejected = 0;
  int failed_refits = 0;
};

/// Iterative variant with per-observation indicators zeta (1 = dependent
/// model). pi_hat averages pi^(j) for j = N/10 .. N.
MixmodGibbsResult mixmod_gibbs(std::span<const double> x, std::span<const double> y,
                               const MixmodGibbsOptions& options, RngStream rng);

/// One allocation proposal of the iterative variant: draws zeta_i with
/// probability pi f1 / (pi f1 + (1 - pi) f0X f0Y) of being 1 and applies the
/// minimum-group guard. Returns true and overwrites `zeta` when accepted.
bool propose_allocation(const PredictiveValues& pv, double pi, int min_group, std::vector<int>& zeta,
                        RngStream& rng);

/// Conjugate update pi ~ Be(a0 + l0, b0 + n - l0).
double draw_pi(int l0, int n, const EnsembleConfig& config, RngStream& rng);

}  // namespace dpmscreen

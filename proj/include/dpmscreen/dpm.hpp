#pragma once

// Dirichlet process mixtures of Gaussians (d = 1 or 2) fitted by Gibbs
// sampling. Cluster allocations are updated with the cluster parameters
// integrated out against the Normal-Inverse-Wishart base (Student-t
// predictive weights); cluster parameters, base hyperparameters and the
// concentration are then redrawn from their conditionals.
//
// Base measure:  Sigma ~ IW(base_dof, S),  mu | Sigma ~ N(mu0, Sigma / k0).
// For d = 1 this is sigma^2 ~ IGa(base_dof / 2, S / 2).
// Hyperpriors:   mu0 ~ N(m, s I),  k0 ~ Ga(shape, rate),
//                S ~ Wishart(h, V I)   (for d = 1: Ga(h / 2, rate 1 / (2 V))),
//                c ~ Ga(shape, rate) or fixed.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpmscreen/stats.hpp"

namespace dpmscreen {

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};

/// Isotropic normal prior N(mean * 1, variance * I).
struct NormalPrior {
  double mean = 0.0;
  double variance = 1.0;
};

/// Wishart(dof, scale * I) prior on the base scale matrix.
struct WishartPrior {
  double dof = 1.0;
  double scale = 1.0;
};

/// Model specification for one DPM fit. A hyperparameter whose prior is
/// empty stays fixed at its value; otherwise the value is the starting point.
struct DpmConfig {
  int dim = 1;

  double concentration = 10.0;
  std::optional<GammaPrior> concentration_prior;

  double base_dof = 1.0;

  double mu0 = 0.0;
  std::optional<NormalPrior> mu0_prior;

  double k0 = 0.01;
  std::optional<GammaPrior> k0_prior;

  double scale = 0.1;
  std::optional<WishartPrior> scale_prior;

  double variance_floor = 1e-10;

  /// Marginal fits for the contingency-table test: c = 10 fixed,
  /// mu0 ~ N(0, 1), k0 ~ Ga(1/2, 50), nu = 3 so that
  /// sigma^2 ~ IGa(nu/2 - 1, psi/2), and 1/psi ~ IGa(1/2, 5).
  static DpmConfig ctbf_marginal();

  /// Fits for the ensemble test (dim 1 marginals, dim 2 joint):
  /// c ~ Ga(1, 1), mu0 ~ N(0, 100 I), k0 ~ Ga(1/2, 50), nu = d + 2,
  /// S ~ Wishart(nu, 0.1 I).
  static DpmConfig mixmod(int dim);

  /// Throws DomainError on out-of-range values.
  void validate() const;
};

struct McmcSettings {
  int n_burn = 1000;
  int n_save = 1800;
  int thin = 5;

  int total_sweeps() const { return n_burn + n_save * thin; }
};

/// Numerical failure inside a sweep (non-positive-definite posterior scale).
class IterationError : public std::runtime_error {
 public:
  IterationError(const std::string& what, int cluster) : std::runtime_error(what), cluster_(cluster) {}
  int cluster() const { return cluster_; }

 private:
  int cluster_;
};

/// Saved allocations of one chain: `saved()` rows of `n` labels, each row
/// canonicalized to 1..K by order of first appearance.
struct AllocationTrace {
  std::size_t n = 0;
  std::vector<std::int32_t> labels;
  std::vector<int> num_clusters;
  McmcSettings mcmc;
  std::vector<std::string> warnings;

  std::size_t saved() const { return num_clusters.size(); }
  std::span<const std::int32_t> iteration(std::size_t s) const {
    return {labels.data() + s * n, n};
  }
};

/// Posterior predictive density averaged over the saved iterations,
/// evaluated at `points` (row-major, `dim` columns).
struct PredictivePoints {
  int dim = 1;
  std::vector<double> points;
  std::vector<double> density;

  std::size_t size() const { return density.size(); }
};

template <int D>
struct ClusterParams {
  Vec<D> mean;
  SymMatrix<D> cov;
};

/// Snapshot of the sampler. `labels` are 1..K in canonical order;
/// `clusters[k-1]` holds the parameters of label k.
template <int D>
struct DpmState {
  std::vector<int> labels;
  std::vector<int> sizes;
  std::vector<ClusterParams<D>> clusters;
  Vec<D> mu0;
  double k0 = 0.0;
  SymMatrix<D> scale;
  double concentration = 0.0;
  long iteration = 0;

  int num_clusters() const { return static_cast<int>(clusters.size()); }
};

/// Relabels by order of first appearance (1-based). Idempotent.
std::vector<int> canonicalize_labels(std::span<const int> labels);

/// Polya-urn reallocation probabilities for one point: existing cluster k
/// gets weight proportional to sizes[k] * exp(log_kernel[k]) (sizes exclude
/// the point), a new cluster gets concentration * exp(log_kernel_new).
/// The result has sizes.size() + 1 entries and sums to one.
std::vector<double> polya_urn_weights(std::span<const int> sizes, std::span<const double> log_kernel,
                                      double concentration, double log_kernel_new);

template <int D>
class DpmSampler {
 public:
  /// `data` is row-major with D columns. `visit_order`, when given, is a
  /// permutation fixing the order in which points are reallocated.
  DpmSampler(std::span<const double> data, const DpmConfig& config, RngStream rng,
             std::span<const std::size_t> visit_order = {});
  ~DpmSampler();
  DpmSampler(DpmSampler&&) noexcept;
  DpmSampler& operator=(DpmSampler&&) noexcept;

  /// One full Gibbs sweep.
  void sweep();

  /// Reallocation probabilities for point i given all other allocations
  /// (existing clusters in canonical label order, then "new").
  std::vector<double> allocation_weights(std::size_t i) const;

  DpmState<D> state() const;
  std::vector<int> labels() const;
  std::size_t size() const;

  /// Current-iteration predictive density:
  /// sum_k n_k/(c+n) N(z | theta_k) + c/(c+n) * prior predictive(z).
  void add_predictive(std::span<const double> points, std::span<double> out) const;

  /// Student-t prior predictive of the base measure at the current
  /// hyperparameters.
  double log_prior_predictive(std::span<const double> point) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ChainOptions {
  std::span<const std::size_t> visit_order = {};
  /// Points at which to accumulate the averaged predictive (row-major).
  std::span<const double> eval_points = {};
};

struct ChainResult {
  AllocationTrace trace;
  PredictivePoints predictive;
};

/// Runs n_burn discarded sweeps, then saves every thin-th sweep until n_save
/// states are stored. Dispatches on config.dim.
ChainResult run_chain(std::span<const double> data, const DpmConfig& config, const McmcSettings& mcmc,
                      RngStream rng, const ChainOptions& options = {});

/// Tab-separated dump, one row per saved iteration; '#' header lines record
/// the configuration and seed.
void write_trace(std::ostream& out, const AllocationTrace& trace, const DpmConfig& config,
                 std::uint64_t seed);
AllocationTrace read_trace(std::istream& in);

}  // namespace dpmscreen

#pragma once

// k-nearest-neighbour mutual information estimators (Kraskov type) under the
// max-norm in the joint space.

#include <span>

#include "dpmscreen/stats.hpp"

namespace dpmscreen {

enum class MiVariant {
  Counting,    // psi(k) + psi(n) - <psi(n_x + 1) + psi(n_y + 1)>, strict ball
  Rectangle,   // psi(k) - 1/k + psi(n) - <psi(n_x) + psi(n_y)>, marginal extents
};

struct MiConfig {
  int k = 20;
  MiVariant variant = MiVariant::Counting;
  bool standardize = true;

  void validate() const;
};

/// Mutual information estimate in nats. Zero k-NN distances caused by
/// duplicate points are broken by a deterministic jitter of 1e-10 sd;
/// `jittered` reports whether that happened.
double knn_mi(std::span<const double> x, std::span<const double> y, const MiConfig& config = {},
              bool* jittered = nullptr);

/// (1 - level) empirical quantile of knn_mi over n_perm copies with y
/// randomly permuted. level = 0 gives the maximum, level = 1 the minimum.
double permutation_threshold(std::span<const double> x, std::span<const double> y, const MiConfig& config,
                             int n_perm, double level, RngStream rng);

}  // namespace dpmscreen

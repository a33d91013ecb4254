#pragma once

// Special functions, seeded random streams, samplers and log densities
// shared by the DPM engine and the dependence tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dpmscreen {

/// Invalid parameters passed to a special function, sampler or density.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed user input (mismatched lengths, bad files, bad flags).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;

/// Symmetric D x D matrix (D is 1 or 2 in this library).
template <int D>
using SymMatrix = Eigen::Matrix<double, D, D>;

template <int D>
bool is_symmetric(const SymMatrix<D>& m, double tol = 1e-12) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

// Cholesky factor of a symmetric positive definite matrix; throws DomainError
// when the matrix is not symmetric or not positive definite.
template <int D>
Eigen::LLT<SymMatrix<D>> checked_cholesky(const SymMatrix<D>& m, const char* what) {
  if (!m.allFinite() || !is_symmetric<D>(m, 1e-9 * (1.0 + m.cwiseAbs().maxCoeff()))) {
    throw DomainError(std::string(what) + ": matrix is not finite and symmetric");
  }
  Eigen::LLT<SymMatrix<D>> llt(m);
  if (llt.info() != Eigen::Success) {
    throw DomainError(std::string(what) + ": matrix is not positive definite");
  }
  return llt;
}

// ---------------------------------------------------------------------------
// Special functions

/// ln Gamma(x) for finite x > 0.
double log_gamma(double x);

/// Digamma function for finite x > 0.
double digamma(double x);

/// ln of the multivariate gamma function Gamma_d(x).
double log_multi_gamma(double x, int d);

/// Upper tail P(X > t) of a chi-square variable with `dof` degrees of freedom.
double chi_square_upper_tail(double t, int dof);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Beta(a, b) log density; -inf outside (0, 1).
double log_beta_pdf(double x, double a, double b);

/// 64-bit FNV-1a; stable across platforms, used to key substreams by name.
std::uint64_t stable_hash(std::string_view text);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// ---------------------------------------------------------------------------
// Random streams

/// Seeded random stream. Identical (seed, stream id) pairs produce identical
/// sequences; child streams are derived by hashing so any (pair, chain,
/// iteration) tuple can address its own reproducible substream.
class RngStream {
 public:
  using result_type = std::mt19937_64::result_type;

  RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Independent child stream addressed by `id`.
  RngStream substream(std::uint64_t id) const;
  RngStream substream(std::string_view key) const { return substream(stable_hash(key)); }

  result_type operator()() { return engine_(); }
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }

  /// Uniform on the open interval (0, 1).
  double uniform();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Samplers. Gamma and inverse-gamma use the shape-rate parameterization;
// the inverse-gamma density is proportional to x^(-shape-1) exp(-rate / x).
// Wishart(dof, V) has mean dof * V; inverse-Wishart(dof, S) has density
// proportional to |X|^(-(dof+d+1)/2) exp(-tr(S X^-1) / 2) and mean S/(dof-d-1).

double sample_normal(double mean, double variance, RngStream& rng);
double sample_gamma(double shape, double rate, RngStream& rng);
double sample_inverse_gamma(double shape, double rate, RngStream& rng);
double sample_beta(double a, double b, RngStream& rng);
std::vector<double> sample_dirichlet(std::span<const double> alpha, RngStream& rng);
/// Index drawn proportionally to non-negative `weights`.
std::size_t sample_categorical(std::span<const double> weights, RngStream& rng);
/// Index drawn from log-weights (max-subtracted before exponentiation).
std::size_t sample_categorical_log(std::span<const double> log_weights, RngStream& rng);

template <int D>
Vec<D> sample_mvnormal(const Vec<D>& mean, const SymMatrix<D>& cov, RngStream& rng) {
  auto llt = checked_cholesky<D>(cov, "mvnormal covariance");
  Vec<D> z;
  for (int i = 0; i < D; ++i) z(i) = sample_normal(0.0, 1.0, rng);
  return mean + llt.matrixL() * z;
}

/// Wishart draw via the Bartlett decomposition; requires dof > D - 1.
template <int D>
SymMatrix<D> sample_wishart(double dof, const SymMatrix<D>& scale, RngStream& rng) {
  if (!(dof > D - 1) || !std::isfinite(dof)) throw DomainError("wishart: dof must exceed d - 1");
  auto llt = checked_cholesky<D>(scale, "wishart scale");
  SymMatrix<D> a = SymMatrix<D>::Zero();
  for (int i = 0; i < D; ++i) {
    a(i, i) = std::sqrt(2.0 * sample_gamma(0.5 * (dof - i), 1.0, rng));
    for (int j = 0; j < i; ++j) a(i, j) = sample_normal(0.0, 1.0, rng);
  }
  SymMatrix<D> la = llt.matrixL() * a;
  SymMatrix<D> w = la * la.transpose();
  return 0.5 * (w + w.transpose());
}

template <int D>
SymMatrix<D> sample_inverse_wishart(double dof, const SymMatrix<D>& scale, RngStream& rng) {
  auto llt = checked_cholesky<D>(scale, "inverse-wishart scale");
  SymMatrix<D> inv_scale = llt.solve(SymMatrix<D>::Identity());
  inv_scale = 0.5 * (inv_scale + inv_scale.transpose());
  SymMatrix<D> w = sample_wishart<D>(dof, inv_scale, rng);
  SymMatrix<D> x = w.inverse();
  return 0.5 * (x + x.transpose());
}

// ---------------------------------------------------------------------------
// Log densities

template <int D>
double logpdf_mvnormal(const Vec<D>& x, const Vec<D>& mean, const SymMatrix<D>& cov) {
  auto llt = checked_cholesky<D>(cov, "mvnormal covariance");
  Vec<D> z = llt.matrixL().solve(x - mean);
  double log_det = 0.0;
  for (int i = 0; i < D; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (D * std::log(2.0 * M_PI) + log_det + z.squaredNorm());
}

/// Multivariate Student-t with location `mean`, scale matrix `scale` and
/// `dof` degrees of freedom.
template <int D>
double logpdf_student_t(const Vec<D>& x, const Vec<D>& mean, const SymMatrix<D>& scale, double dof) {
  if (!(dof > 0.0)) throw DomainError("student_t: degrees of freedom must be positive");
  auto llt = checked_cholesky<D>(scale, "student_t scale");
  Vec<D> z = llt.matrixL().solve(x - mean);
  double log_det = 0.0;
  for (int i = 0; i < D; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return log_gamma(0.5 * (dof + D)) - log_gamma(0.5 * dof) - 0.5 * D * std::log(dof * M_PI) -
         0.5 * log_det - 0.5 * (dof + D) * std::log1p(z.squaredNorm() / dof);
}

}  // namespace dpmscreen

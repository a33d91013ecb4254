#include "dpmscreen/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace dpmscreen {

namespace {

void require_positive(double x, const char* what) {
  if (!std::isfinite(x) || !(x > 0.0)) {
    throw DomainError(std::string(what) + ": argument must be finite and positive");
  }
}

}  // namespace

double log_gamma(double x) {
  require_positive(x, "log_gamma");
  return boost::math::lgamma(x);
}

double digamma(double x) {
  require_positive(x, "digamma");
  return boost::math::digamma(x);
}

double log_multi_gamma(double x, int d) {
  double out = 0.25 * d * (d - 1) * std::log(M_PI);
  for (int j = 0; j < d; ++j) out += log_gamma(x - 0.5 * j);
  return out;
}

double chi_square_upper_tail(double t, int dof) {
  if (dof <= 0) return 1.0;
  if (!(t > 0.0)) return 1.0;
  if (!std::isfinite(t)) return 0.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * t);
}

double incomplete_beta(double a, double b, double x) {
  require_positive(a, "incomplete_beta");
  require_positive(b, "incomplete_beta");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, x);
}

double log_beta_pdf(double x, double a, double b) {
  require_positive(a, "log_beta_pdf");
  require_positive(b, "log_beta_pdf");
  if (!(x > 0.0 && x < 1.0)) return -std::numeric_limits<double>::infinity();
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - (log_gamma(a) + log_gamma(b) - log_gamma(a + b));
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// ---------------------------------------------------------------------------

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
  const std::uint64_t a = mix64(seed);
  const std::uint64_t b = mix64(stream_id ^ 0x5851f42d4c957f2dULL);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  engine_.seed(seq);
}

RngStream RngStream::substream(std::uint64_t id) const {
  return RngStream(mix64(seed_ ^ mix64(stream_id_)), id);
}

double RngStream::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------

double sample_normal(double mean, double variance, RngStream& rng) {
  if (!std::isfinite(mean) || !std::isfinite(variance) || variance < 0.0) {
    throw DomainError("normal: variance must be finite and non-negative");
  }
  if (variance == 0.0) return mean;
  std::normal_distribution<double> dist(mean, std::sqrt(variance));
  return dist(rng);
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  double g = dist(rng);
  // Tiny shapes can underflow to exactly zero.
  return std::max(g, std::numeric_limits<double>::min());
}

double sample_inverse_gamma(double shape, double rate, RngStream& rng) {
  require_positive(shape, "inverse_gamma shape");
  require_positive(rate, "inverse_gamma rate");
  return 1.0 / sample_gamma(shape, rate, rng);
}

double sample_beta(double a, double b, RngStream& rng) {
  require_positive(a, "beta a");
  require_positive(b, "beta b");
  const double x = sample_gamma(a, 1.0, rng);
  const double y = sample_gamma(b, 1.0, rng);
  return x / (x + y);
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, RngStream& rng) {
  if (alpha.empty()) throw DomainError("dirichlet: empty parameter vector");
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    require_positive(alpha[i], "dirichlet weight");
    out[i] = sample_gamma(alpha[i], 1.0, rng);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::size_t sample_categorical(std::span<const double> weights, RngStream& rng) {
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw DomainError("categorical: weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("categorical: weights are not normalizable");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // Rounding: fall back to the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

std::size_t sample_categorical_log(std::span<const double> log_weights, RngStream& rng) {
  if (log_weights.empty()) throw DomainError("categorical: empty weights");
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(top)) throw DomainError("categorical: weights are not normalizable");
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - top);
  return sample_categorical(w, rng);
}

}  // namespace dpmscreen

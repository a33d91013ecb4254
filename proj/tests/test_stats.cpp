#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "dpmscreen/stats.hpp"

using namespace dpmscreen;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

// Checks the sample mean against `mean` within 4 standard errors.
void expect_mean(const std::vector<double>& draws, double mean, double variance) {
  const double se = std::sqrt(variance / draws.size());
  EXPECT_NEAR(mean_of(draws), mean, 4.0 * se);
}

}  // namespace

TEST(LogGamma, Examples) {
  EXPECT_EQ(log_gamma(1.0), 0.0);
  EXPECT_NEAR(log_gamma(5.0), std::log(24.0), 1e-12);
  EXPECT_NEAR(log_gamma(0.5), 0.5 * std::log(M_PI), 1e-12);
  EXPECT_NEAR(log_gamma(5.0), 3.17805383, 1e-8);
  EXPECT_NEAR(log_gamma(0.5), 0.57236494, 1e-8);
}

TEST(LogGamma, Recurrence) {
  for (double x = 0.1; x <= 100.0; x += 0.0731) {
    EXPECT_NEAR(log_gamma(x + 1.0), log_gamma(x) + std::log(x), 1e-10) << x;
  }
}

TEST(LogGamma, RejectsBadInput) {
  EXPECT_THROW(log_gamma(0.0), DomainError);
  EXPECT_THROW(log_gamma(-1.5), DomainError);
  EXPECT_THROW(log_gamma(std::nan("")), DomainError);
  EXPECT_THROW(log_gamma(INFINITY), DomainError);
}

TEST(SpecialFunctions, Digamma) {
  EXPECT_NEAR(digamma(1.0), -0.57721566490153286, 1e-12);
  for (double x = 0.3; x < 50.0; x += 0.37) EXPECT_NEAR(digamma(x + 1.0), digamma(x) + 1.0 / x, 1e-10);
}

TEST(SpecialFunctions, ChiSquareTail) {
  EXPECT_NEAR(chi_square_upper_tail(3.841458820694124, 1), 0.05, 1e-10);
  EXPECT_NEAR(chi_square_upper_tail(2.0, 2), std::exp(-1.0), 1e-12);
  EXPECT_EQ(chi_square_upper_tail(0.0, 3), 1.0);
}

TEST(SpecialFunctions, IncompleteBetaAndBetaPdf) {
  EXPECT_NEAR(incomplete_beta(1.0, 1.0, 0.3), 0.3, 1e-14);
  EXPECT_NEAR(incomplete_beta(0.5, 0.5, 0.5), 0.5, 1e-14);
  EXPECT_NEAR(log_beta_pdf(0.25, 1.0, 1.0), 0.0, 1e-14);
  EXPECT_NEAR(log_beta_pdf(0.5, 2.0, 2.0), std::log(1.5), 1e-12);
  EXPECT_EQ(log_beta_pdf(0.0, 0.5, 0.5), -INFINITY);
  EXPECT_EQ(log_beta_pdf(1.2, 0.5, 0.5), -INFINITY);
}

TEST(Rng, SameSeedSameSequence) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
  RngStream c = RngStream(5).substream("pair:a\x1f" "b");
  RngStream d = RngStream(5).substream("pair:a\x1f" "b");
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(c.uniform(), d.uniform());
}

TEST(Rng, DistinctStreamsUncorrelated) {
  const int n = 100000;
  RngStream a(1, 0), b(1, 1), c = RngStream(1).substream("x");
  std::vector<double> u(n), v(n), w(n);
  for (int i = 0; i < n; ++i) {
    u[i] = a.uniform();
    v[i] = b.uniform();
    w[i] = c.uniform();
  }
  auto corr = [&](const std::vector<double>& p, const std::vector<double>& q) {
    const double mp = mean_of(p), mq = mean_of(q);
    double s = 0, sp = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      s += (p[i] - mp) * (q[i] - mq);
      sp += (p[i] - mp) * (p[i] - mp);
      sq += (q[i] - mq) * (q[i] - mq);
    }
    return s / std::sqrt(sp * sq);
  };
  // 4 standard errors of a null correlation.
  EXPECT_LT(std::abs(corr(u, v)), 4.0 / std::sqrt(n));
  EXPECT_LT(std::abs(corr(u, w)), 4.0 / std::sqrt(n));
  EXPECT_LT(std::abs(corr(v, w)), 4.0 / std::sqrt(n));
  EXPECT_NE(u[0], v[0]);
}

TEST(Rng, UniformOpenInterval) {
  RngStream r(3);
  for (int i = 0; i < 100000; ++i) {
    const double x = r.uniform();
    ASSERT_GT(x, 0.0);
    ASSERT_LT(x, 1.0);
  }
}

TEST(Samplers, NormalDegenerate) {
  RngStream r(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_normal(3.5, 0.0, r), 3.5);
  EXPECT_THROW(sample_normal(0.0, -1.0, r), DomainError);
}

TEST(Samplers, ScalarMoments) {
  const int n = 100000;
  RngStream r(11);
  std::vector<double> d(n);

  for (auto& x : d) x = sample_normal(1.5, 4.0, r);
  expect_mean(d, 1.5, 4.0);
  EXPECT_NEAR(var_of(d), 4.0, 4.0 * 4.0 * std::sqrt(2.0 / n));

  for (auto& x : d) x = sample_gamma(2.5, 0.5, r);
  expect_mean(d, 5.0, 10.0);

  for (auto& x : d) x = sample_gamma(0.3, 2.0, r);
  expect_mean(d, 0.15, 0.075);

  // IGa(shape 5, rate 2): mean 0.5, variance 1/12.
  for (auto& x : d) x = sample_inverse_gamma(5.0, 2.0, r);
  expect_mean(d, 0.5, 1.0 / 12.0);

  for (auto& x : d) x = sample_beta(2.0, 3.0, r);
  expect_mean(d, 0.4, 0.04);

  for (auto& x : d) x = sample_beta(0.5, 0.5, r);
  expect_mean(d, 0.5, 0.125);
}

TEST(Samplers, Dirichlet) {
  const int n = 100000;
  RngStream r(5);
  std::vector<double> a(n), b(n);
  const std::vector<double> alpha = {1.0, 1.0};
  for (int i = 0; i < n; ++i) {
    auto p = sample_dirichlet(alpha, r);
    ASSERT_NEAR(p[0] + p[1], 1.0, 1e-12);
    a[i] = p[0];
    b[i] = p[1];
  }
  EXPECT_NEAR(mean_of(a), 0.5, 0.01);
  EXPECT_NEAR(mean_of(b), 0.5, 0.01);
  EXPECT_THROW(sample_dirichlet(std::vector<double>{1.0, 0.0}, r), DomainError);
}

TEST(Samplers, Categorical) {
  const int n = 100000;
  RngStream r(9);
  const std::vector<double> w = {1.0, 2.0, 7.0};
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) counts[sample_categorical(w, r)]++;
  for (int k = 0; k < 3; ++k) {
    const double p = w[k] / 10.0;
    EXPECT_NEAR(counts[k] / double(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
  }
  std::vector<double> lw = {std::log(1.0) + 1000.0, std::log(2.0) + 1000.0, std::log(7.0) + 1000.0};
  std::fill(counts.begin(), counts.end(), 0);
  for (int i = 0; i < n; ++i) counts[sample_categorical_log(lw, r)]++;
  for (int k = 0; k < 3; ++k) {
    const double p = w[k] / 10.0;
    EXPECT_NEAR(counts[k] / double(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
  }
  EXPECT_THROW(sample_categorical(std::vector<double>{0.0, 0.0}, r), DomainError);
  EXPECT_THROW(sample_categorical(std::vector<double>{1.0, -1.0}, r), DomainError);
}

TEST(Samplers, MvNormalMoments) {
  const int n = 100000;
  RngStream r(13);
  Vec<2> m(1.0, -2.0);
  SymMatrix<2> s;
  s << 2.0, 0.6, 0.6, 1.0;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Matrix2d ss = Eigen::Matrix2d::Zero();
  std::vector<Vec<2>> draws(n);
  for (int i = 0; i < n; ++i) {
    draws[i] = sample_mvnormal<2>(m, s, r);
    sum += draws[i];
  }
  const Eigen::Vector2d mean = sum / n;
  for (int i = 0; i < n; ++i) ss += (draws[i] - mean) * (draws[i] - mean).transpose();
  ss /= (n - 1);
  EXPECT_NEAR(mean(0), 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(mean(1), -2.0, 4.0 * std::sqrt(1.0 / n));
  EXPECT_NEAR(ss(0, 1), 0.6, 4.0 * std::sqrt((2.0 * 1.0 + 0.36) / n));
  SymMatrix<2> bad;
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(sample_mvnormal<2>(m, bad, r), DomainError);
}

TEST(Samplers, InverseWishartMean) {
  const int n = 100000;
  RngStream r(17);
  SymMatrix<2> psi = SymMatrix<2>::Identity();
  SymMatrix<2> sum = SymMatrix<2>::Zero();
  for (int i = 0; i < n; ++i) {
    SymMatrix<2> x = sample_inverse_wishart<2>(4.0, psi, r);
    ASSERT_TRUE(is_symmetric<2>(x));
    sum += x;
  }
  const SymMatrix<2> mean = sum / n;
  // Mean psi / (nu - d - 1) = I.
  EXPECT_NEAR(mean(0, 0), 1.0, 0.05);
  EXPECT_NEAR(mean(1, 1), 1.0, 0.05);
  EXPECT_NEAR(mean(0, 1), 0.0, 0.05);
}

TEST(Samplers, WishartMean) {
  const int n = 100000;
  RngStream r(19);
  SymMatrix<2> v;
  v << 0.5, 0.1, 0.1, 0.2;
  SymMatrix<2> sum = SymMatrix<2>::Zero();
  for (int i = 0; i < n; ++i) sum += sample_wishart<2>(4.0, v, r);
  const SymMatrix<2> mean = sum / n;
  // Var(W_11) = 2 dof v11^2.
  EXPECT_NEAR(mean(0, 0), 2.0, 4.0 * std::sqrt(2 * 4 * 0.25 / n));
  EXPECT_NEAR(mean(1, 1), 0.8, 4.0 * std::sqrt(2 * 4 * 0.04 / n));
  EXPECT_NEAR(mean(0, 1), 0.4, 4.0 * std::sqrt(4 * (0.01 + 0.1) / n));
  EXPECT_THROW(sample_wishart<2>(0.5, v, r), DomainError);
}

TEST(Samplers, SeededDeterminism) {
  RngStream a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(sample_gamma(0.7, 1.3, a), sample_gamma(0.7, 1.3, b));
    ASSERT_EQ(sample_beta(0.5, 2.0, a), sample_beta(0.5, 2.0, b));
  }
}

TEST(LogPdf, Examples) {
  Vec<2> mu(0.0, 0.0);
  SymMatrix<2> eye = SymMatrix<2>::Identity();
  EXPECT_NEAR(logpdf_mvnormal<2>(mu, mu, eye), std::log(1.0 / (2.0 * M_PI)), 1e-12);
  EXPECT_NEAR(logpdf_mvnormal<2>(mu, mu, eye), -1.83787707, 1e-8);

  SymMatrix<2> s;
  s << 1.5, 0.4, 0.4, 0.8;
  Vec<2> c(0.3, -1.0), d(0.7, 0.2);
  EXPECT_NEAR(logpdf_mvnormal<2>(c + d, c, s), logpdf_mvnormal<2>(c - d, c, s), 1e-14);
  EXPECT_NEAR(logpdf_student_t<2>(c + d, c, s, 3.0), logpdf_student_t<2>(c - d, c, s, 3.0), 1e-14);
}

TEST(LogPdf, StudentTNormalLimit) {
  // log t - log N = (Q^2 - 2 d Q + d (d - 2)) / (4 nu) + O(nu^-2), with Q the
  // squared Mahalanobis distance, so 1e-6 holds at nu = 1e6 while Q <= 2.
  SymMatrix<2> s;
  s << 1.5, 0.4, 0.4, 0.8;
  Vec<2> m(0.3, -1.0);
  const double nu = 1e6;
  const Eigen::Matrix2d inv = s.inverse();
  for (double x : {-3.0, -1.0, -0.5, 0.0, 0.3, 1.0, 2.5, 6.0}) {
    for (double dy : {-1.0, -0.2, 0.0, 0.4}) {
      Vec<2> p(x, m(1) + dy);
      const double q = (p - m).dot(inv * (p - m));
      const double gap = std::abs(logpdf_student_t<2>(p, m, s, nu) - logpdf_mvnormal<2>(p, m, s));
      if (q <= 2.0) EXPECT_LE(gap, 1e-6) << "Q " << q;
      EXPECT_LE(gap, (q * q + 4.0 * q) / (4.0 * nu) + 1e-9) << "Q " << q;
    }
    Vec<1> z(x);
    SymMatrix<1> v;
    v << 2.0;
    const double q1 = (x - 0.1) * (x - 0.1) / 2.0;
    const double gap1 = std::abs(logpdf_student_t<1>(z, Vec<1>(0.1), v, nu) - logpdf_mvnormal<1>(z, Vec<1>(0.1), v));
    if (q1 <= 2.0) EXPECT_LE(gap1, 1e-6) << "Q " << q1;
    EXPECT_LE(gap1, (q1 * q1 + 2.0 * q1 + 1.0) / (4.0 * nu) + 1e-9) << "Q " << q1;
  }
}

TEST(LogPdf, Errors) {
  SymMatrix<2> singular;
  singular << 1.0, 1.0, 1.0, 1.0;
  Vec<2> z = Vec<2>::Zero();
  EXPECT_THROW(logpdf_mvnormal<2>(z, z, singular), DomainError);
  EXPECT_THROW(logpdf_student_t<2>(z, z, SymMatrix<2>::Identity(), 0.0), DomainError);
  SymMatrix<2> asym;
  asym << 1.0, 0.5, 0.0, 1.0;
  EXPECT_THROW(logpdf_mvnormal<2>(z, z, asym), DomainError);
}

TEST(LogPdf, IntegratesToOne1d) {
  SymMatrix<1> v;
  v << 0.7;
  const double h = 1e-3;
  double a = 0.0, b = 0.0;
  for (double x = -60.0; x <= 60.0; x += h) {
    a += std::exp(logpdf_mvnormal<1>(Vec<1>(x), Vec<1>(0.4), v)) * h;
    b += std::exp(logpdf_student_t<1>(Vec<1>(x), Vec<1>(0.4), v, 5.0)) * h;
  }
  EXPECT_NEAR(a, 1.0, 1e-3);
  EXPECT_NEAR(b, 1.0, 1e-3);
}

TEST(LogPdf, IntegratesToOne2d) {
  SymMatrix<2> s;
  s << 1.0, 0.3, 0.3, 0.5;
  Vec<2> m(0.2, -0.1);
  const double h = 0.02;
  double a = 0.0, b = 0.0;
  for (double x = -12.0; x <= 12.0; x += h) {
    for (double y = -12.0; y <= 12.0; y += h) {
      Vec<2> p(x, y);
      a += std::exp(logpdf_mvnormal<2>(p, m, s)) * h * h;
      b += std::exp(logpdf_student_t<2>(p, m, s, 6.0)) * h * h;
    }
  }
  EXPECT_NEAR(a, 1.0, 1e-2);
  EXPECT_NEAR(b, 1.0, 1e-2);
}

TEST(Hashing, Stable) {
  // FNV-1a reference values.
  EXPECT_EQ(stable_hash(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(stable_hash("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_NE(mix64(1), mix64(2));
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dpmscreen/ctbf.hpp"
#include "oracles.hpp"

using namespace dpmscreen;
using namespace dpmscreen::testing;

namespace {

std::vector<std::vector<long>> random_table(RngStream& r, int maxk, int maxn) {
  const int R = 1 + static_cast<int>(r.uniform() * maxk);
  const int C = 1 + static_cast<int>(r.uniform() * maxk);
  const int n = static_cast<int>(r.uniform() * (maxn + 1));
  std::vector<std::vector<long>> m(R, std::vector<long>(C, 0));
  for (int t = 0; t < n; ++t) m[static_cast<int>(r.uniform() * R)][static_cast<int>(r.uniform() * C)]++;
  return m;
}

ContingencyTable to_table(const std::vector<std::vector<long>>& m) {
  std::vector<long> flat;
  for (const auto& row : m) flat.insert(flat.end(), row.begin(), row.end());
  return make_table(static_cast<int>(m.size()), static_cast<int>(m[0].size()), flat);
}

AllocationTrace make_trace(std::size_t n, const std::vector<std::vector<std::int32_t>>& rows) {
  AllocationTrace t;
  t.n = n;
  for (const auto& r : rows) {
    t.labels.insert(t.labels.end(), r.begin(), r.end());
    t.num_clusters.push_back(*std::max_element(r.begin(), r.end()));
  }
  return t;
}

ContingencyTable permute(const ContingencyTable& t, const std::vector<int>& rp, const std::vector<int>& cp) {
  std::vector<long> c(t.counts.size());
  for (int k = 0; k < t.rows; ++k)
    for (int l = 0; l < t.cols; ++l) c[k * t.cols + l] = t.at(rp[k], cp[l]);
  return make_table(t.rows, t.cols, c);
}

}  // namespace

TEST(OracleSelfCheck, StirlingLogGamma) {
  EXPECT_NEAR(oracle_lgamma(1.0), 0.0, 1e-14);
  EXPECT_NEAR(oracle_lgamma(0.5), 0.5 * std::log(M_PI), 1e-14);
  EXPECT_NEAR(oracle_lgamma(31.0), std::log(2.652528598121910586e32), 1e-12);
}

TEST(BuildTable, Examples) {
  const auto t = build_table(std::vector<std::int32_t>{1, 1, 2}, std::vector<std::int32_t>{1, 2, 2});
  EXPECT_EQ(t.rows, 2);
  EXPECT_EQ(t.cols, 2);
  EXPECT_EQ(t.counts, (std::vector<long>{1, 1, 0, 1}));
  const auto u = build_table(std::vector<std::int32_t>(7, 1), std::vector<std::int32_t>(7, 1));
  EXPECT_EQ(u.rows, 1);
  EXPECT_EQ(u.cols, 1);
  EXPECT_EQ(u.counts, std::vector<long>{7});
  EXPECT_THROW(build_table(std::vector<std::int32_t>{1, 2}, std::vector<std::int32_t>{1}), InputError);
}

TEST(BuildTable, MarginsAreHistograms) {
  RngStream r(3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(r.uniform() * 40);
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = 1 + static_cast<int>(r.uniform() * 4);
    for (auto& v : b) v = 1 + static_cast<int>(r.uniform() * 3);
    const auto ca = canonicalize_labels(a), cb = canonicalize_labels(b);
    std::vector<std::int32_t> x(ca.begin(), ca.end()), y(cb.begin(), cb.end());
    const auto tab = build_table(x, y);
    EXPECT_EQ(tab.total, static_cast<long>(n));
    for (int k = 0; k < tab.rows; ++k)
      EXPECT_EQ(tab.row_margin[k], std::count(x.begin(), x.end(), k + 1));
    for (int l = 0; l < tab.cols; ++l)
      EXPECT_EQ(tab.col_margin[l], std::count(y.begin(), y.end(), l + 1));
    EXPECT_EQ(std::accumulate(tab.counts.begin(), tab.counts.end(), 0L), tab.total);
  }
}

TEST(MakeTable, Validation) {
  EXPECT_THROW(make_table(2, 2, {1, 2, 3}), InputError);
  EXPECT_THROW(make_table(1, 2, {1, -1}), InputError);
}

TEST(LogBf, MatchesOracleOnRandomTables) {
  RngStream r(2024);
  for (int t = 0; t < 100; ++t) {
    const auto m = random_table(r, 4, 30);
    const auto tab = to_table(m);
    EXPECT_NEAR(log_bf(tab), oracle_log_bf(m, 0.5), 1e-9);
    CtbfConfig tm;
    tm.rule = CellPrior::TotalMass;
    tm.total_mass = 3.0;
    EXPECT_NEAR(log_bf(tab, tm), oracle_log_bf(m, 3.0 / (tab.rows * tab.cols)), 1e-9);
    CtbfConfig c2;
    c2.alpha = 1.7;
    EXPECT_NEAR(log_bf(tab, c2), oracle_log_bf(m, 1.7), 1e-9);
  }
}

TEST(LogBf, DifferenceOfMarginals) {
  RngStream r(7);
  for (int t = 0; t < 200; ++t) {
    const auto tab = to_table(random_table(r, 5, 60));
    EXPECT_NEAR(log_bf(tab), log_marginal_m0(tab) - log_marginal_m1(tab), 1e-10);
  }
}

TEST(LogBf, DiagonalExample) {
  const auto tab = make_table(2, 2, {10, 0, 0, 10});
  EXPECT_NEAR(log_bf(tab), -11.70, 0.01);
  EXPECT_NEAR(log_bf(tab), oracle_log_bf({{10, 0}, {0, 10}}, 0.5), 1e-9);
  EXPECT_NEAR(posterior_prob_dep(log_bf(tab)), 1.0 - 8.3e-6, 1e-7);
}

TEST(LogBf, SingleMarginCancels) {
  RngStream r(11);
  for (int t = 0; t < 1000; ++t) {
    const int C = 1 + static_cast<int>(r.uniform() * 5);
    std::vector<long> c(C);
    for (auto& v : c) v = static_cast<long>(r.uniform() * 20);
    const auto tab = make_table(1, C, c);
    EXPECT_EQ(log_bf(tab), 0.0);
    EXPECT_EQ(posterior_prob_dep(log_bf(tab.transposed())), 0.5);
  }
}

TEST(LogBf, PermutationInvariance) {
  RngStream r(13);
  for (int t = 0; t < 100; ++t) {
    const auto tab = to_table(random_table(r, 4, 40));
    std::vector<int> rp(tab.rows), cp(tab.cols);
    std::iota(rp.begin(), rp.end(), 0);
    std::iota(cp.begin(), cp.end(), 0);
    std::shuffle(rp.begin(), rp.end(), r);
    std::shuffle(cp.begin(), cp.end(), r);
    const auto p = permute(tab, rp, cp);
    EXPECT_NEAR(log_bf(p), log_bf(tab), 1e-10);
    EXPECT_NEAR(log_bf(tab.transposed()), log_bf(tab), 1e-10);
    const auto x = chi_square(tab), y = chi_square(p), z = chi_square(tab.transposed());
    EXPECT_NEAR(x.statistic, y.statistic, 1e-9 * (1 + x.statistic));
    EXPECT_NEAR(x.statistic, z.statistic, 1e-9 * (1 + x.statistic));
  }
}

TEST(LogBf, MonotoneResponse) {
  for (long m : {2L, 4L, 10L}) {
    const auto diag = make_table(2, 2, {2 * m, 0, 0, 2 * m});
    const auto prop = make_table(2, 2, {m, m, m, m});
    EXPECT_LT(log_bf(diag), log_bf(prop));
  }
}

TEST(Marginal, NormalizesOverTables) {
  for (long n = 0; n <= 5; ++n) {
    double total = 0.0;
    for (long a = 0; a <= n; ++a)
      for (long b = 0; a + b <= n; ++b)
        for (long c = 0; a + b + c <= n; ++c) total += std::exp(log_marginal_m1(make_table(2, 2, {a, b, c, n - a - b - c})));
    EXPECT_NEAR(total, 1.0, 1e-8) << "n = " << n;
  }
}

TEST(Marginal, MonteCarloOracle) {
  // exp(log_marginal_m1) = E_{p ~ Dir(alpha)} Multinomial(counts | p).
  const std::vector<long> m = {3, 1, 0, 2};
  const auto tab = make_table(2, 2, m);
  const double exact = std::exp(log_marginal_m1(tab));
  const std::vector<double> alpha(4, 0.5);
  RngStream r(99);
  const int draws = 10000000;
  const double coef = 720.0 / (6.0 * 1.0 * 1.0 * 2.0);
  double sum = 0.0, sum2 = 0.0;
  for (int t = 0; t < draws; ++t) {
    double g[4], tot = 0.0;
    for (int k = 0; k < 4; ++k) tot += (g[k] = sample_gamma(alpha[k], 1.0, r));
    double v = coef;
    for (int k = 0; k < 4; ++k) v *= std::pow(g[k] / tot, static_cast<double>(m[k]));
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sum2 / draws - mean * mean) / draws);
  EXPECT_NEAR(exact, mean, 3.0 * se);
}

TEST(PosteriorProb, Examples) {
  EXPECT_EQ(posterior_prob_dep(0.0), 0.5);
  const double p = posterior_prob_dep(700.0);
  EXPECT_TRUE(std::isfinite(p));
  EXPECT_LT(p, 1e-300);
  EXPECT_GE(p, 0.0);
  EXPECT_EQ(posterior_prob_dep(-800.0), 1.0);
  EXPECT_NEAR(posterior_prob_dep(-11.70), 0.9999917, 1e-7);
  EXPECT_THROW(posterior_prob_dep(std::nan("")), DomainError);
}

TEST(CtbfConfig, Validation) {
  CtbfConfig c;
  EXPECT_EQ(c.rule, CellPrior::Constant);
  EXPECT_EQ(c.alpha, 0.5);
  EXPECT_EQ(c.cell_alpha(3, 4), 0.5);
  c.rule = CellPrior::TotalMass;
  c.total_mass = 6.0;
  EXPECT_EQ(c.cell_alpha(2, 3), 1.0);
  c.total_mass = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
  CtbfConfig d;
  d.alpha = -1.0;
  EXPECT_THROW(d.validate(), DomainError);
}

TEST(Trace, ConstantTablesAverage) {
  const std::vector<std::int32_t> a = {1, 1, 2, 2, 1, 2}, b = {1, 1, 2, 2, 2, 1};
  const auto x = make_trace(6, {a, a, a});
  const auto y = make_trace(6, {b, b, b});
  const auto r = p_dep_over_trace(x, y);
  const double bf = std::exp(log_bf(build_table(a, b)));
  EXPECT_NEAR(r.p_dep, 1.0 / (1.0 + bf), 1e-14);
  EXPECT_EQ(r.iterations, 3u);
  ASSERT_EQ(r.probs.size(), 3u);
  for (double p : r.probs) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Trace, SingleClusterGivesHalf) {
  const auto x = make_trace(4, {{1, 1, 1, 1}, {1, 1, 1, 1}});
  const auto y = make_trace(4, {{1, 2, 1, 3}, {1, 1, 2, 2}});
  EXPECT_EQ(p_dep_over_trace(x, y).p_dep, 0.5);
  EXPECT_EQ(p_dep_over_trace(y, x).p_dep, 0.5);
}

TEST(Trace, Errors) {
  AllocationTrace empty;
  empty.n = 3;
  EXPECT_THROW(p_dep_over_trace(empty, empty), InputError);
  const auto x = make_trace(3, {{1, 1, 2}});
  const auto y = make_trace(3, {{1, 1, 2}, {1, 2, 2}});
  EXPECT_THROW(p_dep_over_trace(x, y), InputError);
  const auto z = make_trace(2, {{1, 2}});
  EXPECT_THROW(p_dep_over_trace(x, z), InputError);
}

TEST(Trace, RestrictionRelabels) {
  // Rows 1 and 3 of x: labels {2, 3} -> relabelled {1, 2}.
  const auto x = make_trace(4, {{1, 2, 1, 3}});
  const auto y = make_trace(5, {{1, 1, 2, 3, 3}});
  const std::vector<std::size_t> rx = {1, 3}, ry = {0, 4};
  const auto r = p_dep_over_trace(x, y, {}, rx, ry);
  const double expect = posterior_prob_dep(log_bf(make_table(2, 2, {1, 0, 0, 1})));
  EXPECT_NEAR(r.p_dep, expect, 1e-15);
  EXPECT_EQ(restrict_labels(std::vector<std::int32_t>{1, 2, 1, 3}, rx), (std::vector<std::int32_t>{1, 2}));
}

TEST(ChiSquare, Examples) {
  const auto a = chi_square(make_table(2, 2, {5, 5, 5, 5}));
  EXPECT_EQ(a.statistic, 0.0);
  EXPECT_EQ(a.p_value, 1.0);
  const auto b = chi_square(make_table(2, 2, {10, 0, 0, 10}));
  EXPECT_NEAR(b.statistic, 20.0, 1e-12);
  EXPECT_EQ(b.dof, 1);
  EXPECT_NEAR(b.p_value, 7.744216e-6, 1e-11);
  const auto c = chi_square(make_table(1, 1, {9}));
  EXPECT_EQ(c.dof, 0);
  EXPECT_EQ(c.p_value, 1.0);
}

TEST(ChiSquare, DropsEmptyMargins) {
  const auto r = chi_square(make_table(3, 2, {10, 0, 0, 0, 0, 10}));
  EXPECT_TRUE(r.dropped_margins);
  EXPECT_EQ(r.dof, 1);
  EXPECT_NEAR(r.statistic, 20.0, 1e-12);
  auto t = make_table(2, 3, {1, 0, 2, 3, 0, 4});
  EXPECT_TRUE(drop_empty_margins(t));
  EXPECT_EQ(t.cols, 2);
  EXPECT_EQ(t.counts, (std::vector<long>{1, 2, 3, 4}));
}

TEST(Dahl, IdenticalIterations) {
  const std::vector<std::int32_t> p = {1, 2, 2, 1, 3};
  EXPECT_EQ(dahl_partition(make_trace(5, {p, p, p})), p);
}

TEST(Dahl, TieGoesToEarliest) {
  const std::vector<std::int32_t> a = {1, 1, 2}, b = {1, 2, 2};
  const auto t = make_trace(3, {a, b});
  EXPECT_DOUBLE_EQ(dahl_score(t, a), dahl_score(t, b));
  EXPECT_EQ(dahl_partition(t), a);
}

TEST(Dahl, MinimizesOverSavedIterations) {
  RngStream r(5);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 12;
    std::vector<std::vector<std::int32_t>> rows;
    for (int s = 0; s < 15; ++s) {
      std::vector<int> v(n);
      for (auto& x : v) x = 1 + static_cast<int>(r.uniform() * 3);
      const auto c = canonicalize_labels(v);
      rows.emplace_back(c.begin(), c.end());
    }
    const auto tr = make_trace(n, rows);
    const auto best = dahl_partition(tr);
    const double s = dahl_score(tr, best);
    for (const auto& row : rows) EXPECT_LE(s, dahl_score(tr, row) + 1e-12);
  }
}

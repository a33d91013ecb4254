#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dpmscreen/dataset.hpp"
#include "dpmscreen/simbench.hpp"

using namespace dpmscreen;

namespace {

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double mann_whitney(const std::vector<double>& d, const std::vector<double>& n) {
  double s = 0.0;
  for (double a : d)
    for (double b : n) s += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return s / (d.size() * n.size());
}

std::vector<std::string> split_tab(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, '\t')) out.push_back(f);
  return out;
}

ScreenPlan quick_plan() {
  ScreenPlan p;
  p.mcmc = McmcSettings{20, 20, 1};
  p.mi.k = 5;
  return p;
}

}  // namespace

TEST(Generate, ZeroNoiseIdentities) {
  RngStream r(1);
  const auto s = generate(ScenarioConfig{Scenario::Sinusoidal, 0.0, 0.0, 500, 1}, r);
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    EXPECT_EQ(s.y[i], 2.0 * std::sin(s.x[i]));
    EXPECT_GE(s.x[i], 0.0);
    EXPECT_LE(s.x[i], 5.0 * M_PI);
  }
  const auto c = generate(ScenarioConfig{Scenario::Circular, 0.0, 0.0, 500, 1}, r);
  for (std::size_t i = 0; i < c.x.size(); ++i) EXPECT_NEAR(c.x[i] * c.x[i] + c.y[i] * c.y[i], 100.0, 1e-12);
  const auto p = generate(ScenarioConfig{Scenario::Parabolic, 0.0, 0.0, 500, 1}, r);
  for (std::size_t i = 0; i < p.x.size(); ++i) EXPECT_EQ(p.y[i], 2.0 * p.x[i] * p.x[i] / 3.0);
}

TEST(Generate, NormalCorrelation) {
  RngStream r(2);
  const auto a = generate(ScenarioConfig{Scenario::Normal, 0.0, 1.0, 100000, 1}, r);
  EXPECT_NEAR(correlation(a.x, a.y), 0.0, 0.02);
  const auto b = generate(ScenarioConfig{Scenario::Normal, 0.9, 1.0, 100000, 1}, r);
  EXPECT_NEAR(correlation(b.x, b.y), 0.9, 0.01);
}

TEST(Generate, NoiseLevel) {
  RngStream r(3);
  const auto s = generate(ScenarioConfig{Scenario::Sinusoidal, 0.0, 2.0, 100000, 1}, r);
  double ss = 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) ss += std::pow(s.y[i] - 2.0 * std::sin(s.x[i]), 2);
  EXPECT_NEAR(ss / s.x.size(), 4.0, 0.1);
}

TEST(Generate, Validation) {
  RngStream r(4);
  EXPECT_THROW(generate(ScenarioConfig{Scenario::Normal, 1.0, 1.0, 10, 1}, r), DomainError);
  EXPECT_THROW(generate(ScenarioConfig{Scenario::Circular, 0.0, -1.0, 10, 1}, r), DomainError);
  EXPECT_THROW(generate(ScenarioConfig{Scenario::Circular, 0.0, 1.0, 1, 1}, r), DomainError);
  EXPECT_EQ(parse_scenario("circular"), Scenario::Circular);
  EXPECT_EQ(scenario_name(Scenario::Parabolic), "parabolic");
  EXPECT_THROW(parse_scenario("spiral"), InputError);
}

TEST(Permute, Properties) {
  RngStream r(5);
  const std::vector<double> one = {3.0};
  const auto p1 = permute_null(one, one, r);
  EXPECT_EQ(p1.y, one);
  const auto s = generate(ScenarioConfig{Scenario::Normal, 0.9, 1.0, 250, 1}, r);
  const auto p = permute_null(s.x, s.y, r);
  EXPECT_EQ(p.x, s.x);
  auto a = s.y, b = p.y;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  EXPECT_NEAR(correlation(p.x, p.y), 0.0, 0.15);
  const auto perm = random_permutation(100, r);
  std::vector<std::size_t> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Roc, Examples) {
  const std::vector<double> ones(5, 1.0), zeros(5, 0.0);
  EXPECT_EQ(roc(ones, zeros).auc, 1.0);
  EXPECT_EQ(roc(ones, ones).auc, 0.5);
  EXPECT_EQ(roc(zeros, ones).auc, 0.0);
  EXPECT_THROW(roc(std::vector<double>{}, ones), InputError);
}

TEST(Roc, MannWhitneyAndComplement) {
  RngStream r(6);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> d(12), n(9);
    for (auto& v : d) v = std::round(r.uniform() * 8.0) / 8.0 + 0.1;
    for (auto& v : n) v = std::round(r.uniform() * 8.0) / 8.0;
    const auto c = roc(d, n);
    EXPECT_NEAR(c.auc, mann_whitney(d, n), 1e-12);
    EXPECT_NEAR(c.auc + roc(n, d).auc, 1.0, 1e-12);
    EXPECT_TRUE(std::isinf(c.thresholds.front()));
    EXPECT_EQ(c.tpr.back(), 1.0);
    EXPECT_EQ(c.fpr.back(), 1.0);
    for (std::size_t k = 1; k < c.tpr.size(); ++k) {
      EXPECT_GE(c.tpr[k], c.tpr[k - 1]);
      EXPECT_GE(c.fpr[k], c.fpr[k - 1]);
      EXPECT_LT(c.thresholds[k], c.thresholds[k - 1]);
    }
  }
}

TEST(Methods, Names) {
  for (Method m : {Method::Ctbf, Method::Mixmod, Method::Mi, Method::Chisq}) EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_THROW(parse_method("pearson"), InputError);
}

TEST(PowerStudy, PerfectMethodTwoReps) {
  StudyCell cell;
  cell.scenario = ScenarioConfig{Scenario::Circular, 0.0, 0.0, 100, 2};
  cell.plan = quick_plan();
  StudyOptions opt;
  opt.methods = {Method::Mi};
  const auto res = power_study({cell}, opt);
  ASSERT_EQ(res.size(), 1u);
  EXPECT_EQ(res[0].curve.auc, 1.0);
  EXPECT_EQ(res[0].dep_scores.size(), 2u);
  EXPECT_EQ(res[0].failures, 0);
}

TEST(PowerStudy, DeterministicAcrossWorkers) {
  std::vector<StudyCell> cells;
  for (double rho : {0.0, 0.9}) {
    StudyCell c;
    c.scenario = ScenarioConfig{Scenario::Normal, rho, 1.0, 30, 3};
    c.plan = quick_plan();
    cells.push_back(c);
  }
  StudyOptions opt;
  opt.methods = {Method::Ctbf, Method::Mixmod, Method::Mi, Method::Chisq};
  opt.seed = 4;
  opt.workers = 1;
  const auto a = power_study(cells, opt);
  opt.workers = 3;
  const auto b = power_study(cells, opt);
  ASSERT_EQ(a.size(), 8u);
  std::stringstream sa, sb;
  write_scores_tsv(sa, a);
  write_scores_tsv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  for (const auto& r : a) {
    EXPECT_GE(r.curve.auc, 0.0);
    EXPECT_LE(r.curve.auc, 1.0);
  }
  opt.reuse_null_fits = false;
  const auto c = power_study(cells, opt);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].dep_scores, c[k].dep_scores);
}

TEST(PowerStudy, Validation) {
  StudyCell c;
  c.scenario = ScenarioConfig{Scenario::Normal, 0.5, 1.0, 30, 1};
  c.plan = quick_plan();
  StudyOptions opt;
  opt.methods = {Method::Mi};
  EXPECT_THROW(power_study({c}, opt), InputError);
  c.scenario.reps = 2;
  opt.methods.clear();
  EXPECT_THROW(power_study({c}, opt), InputError);
}

TEST(Output, RocTsvIsLossless) {
  StudyCell cell;
  cell.scenario = ScenarioConfig{Scenario::Normal, 0.3, 1.0, 40, 6};
  cell.plan = quick_plan();
  StudyOptions opt;
  opt.methods = {Method::Mi};
  const auto res = power_study({cell}, opt);
  std::stringstream ss;
  write_roc_tsv(ss, res);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "scenario\tparameter\tsetting\tmethod\tthreshold\tfpr\ttpr");
  std::size_t k = 0;
  while (std::getline(ss, line)) {
    const auto f = split_tab(line);
    ASSERT_EQ(f.size(), 7u);
    const double t = f[4] == "inf" ? INFINITY : *parse_double(f[4]);
    EXPECT_EQ(t, res[0].curve.thresholds[k]);
    EXPECT_EQ(*parse_double(f[5]), res[0].curve.fpr[k]);
    EXPECT_EQ(*parse_double(f[6]), res[0].curve.tpr[k]);
    ++k;
  }
  EXPECT_EQ(k, res[0].curve.tpr.size());

  std::stringstream sc;
  write_scores_tsv(sc, res);
  std::getline(sc, line);
  std::vector<double> dep, null;
  while (std::getline(sc, line)) {
    const auto f = split_tab(line);
    (f[6] == "1" ? dep : null).push_back(*parse_double(f[5]));
  }
  EXPECT_EQ(dep, res[0].dep_scores);
  EXPECT_EQ(null, res[0].null_scores);
  EXPECT_EQ(roc(dep, null).auc, res[0].curve.auc);
}

TEST(Grid, ReferenceCardinality) {
  const auto g = reference_grid(100, 20, ScreenPlan{});
  ASSERT_EQ(g.size(), 20u);
  int normal = 0;
  for (const auto& c : g) {
    normal += c.scenario.kind == Scenario::Normal;
    EXPECT_EQ(c.scenario.n, 100);
    EXPECT_EQ(c.scenario.reps, 20);
  }
  EXPECT_EQ(normal, 5);
}

TEST(Grid, SensitivitySweeps) {
  const ScreenPlan base;
  const auto a = sensitivity_grid(default_sweep("a"), base);
  EXPECT_EQ(a.size(), 4u * 5u);
  EXPECT_EQ(a[0].plan.ctbf.alpha, 0.1);
  EXPECT_EQ(a[0].setting, "a=0.1");
  const auto c0 = sensitivity_grid(default_sweep("c0"), base);
  EXPECT_EQ(c0.back().plan.ctbf_marginal.concentration, 20.0);
  const auto ab = sensitivity_grid(default_sweep("a0b0"), base);
  EXPECT_EQ(ab.size(), 25u);
  EXPECT_EQ(ab.back().plan.ensemble.a0, 2.0);
  EXPECT_EQ(ab.back().plan.ensemble.b0, 0.5);
  for (const auto& c : ab) EXPECT_EQ(c.scenario.kind, Scenario::Sinusoidal);
  EXPECT_THROW(default_sweep("zeta"), InputError);
  SweepSpec bad = default_sweep("a0b0");
  bad.values = {{1.0}};
  EXPECT_THROW(sensitivity_grid(bad, base), InputError);
  SweepSpec neg = default_sweep("c0");
  neg.values = {{-1.0}};
  EXPECT_THROW(sensitivity_grid(neg, base), DomainError);
}

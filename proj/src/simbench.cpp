#include "dpmscreen/simbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>

#include "dpmscreen/parallel.hpp"

namespace dpmscreen {

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Normal: return "normal";
    case Scenario::Sinusoidal: return "sinusoidal";
    case Scenario::Parabolic: return "parabolic";
    case Scenario::Circular: return "circular";
  }
  return "unknown";
}

Scenario parse_scenario(const std::string& name) {
  if (name == "normal") return Scenario::Normal;
  if (name == "sinusoidal") return Scenario::Sinusoidal;
  if (name == "parabolic") return Scenario::Parabolic;
  if (name == "circular") return Scenario::Circular;
  throw InputError("unknown scenario '" + name + "' (expected normal, sinusoidal, parabolic, circular)");
}

void ScenarioConfig::validate() const {
  if (!(std::abs(rho) < 1.0)) throw DomainError("scenario: |rho| must be below 1");
  if (!(phi >= 0.0) || !std::isfinite(phi)) throw DomainError("scenario: phi must be non-negative");
  if (n < 2) throw DomainError("scenario: n must be at least 2");
  if (reps < 1) throw DomainError("scenario: replication count must be positive");
}

PairedSample generate(const ScenarioConfig& config, RngStream& rng) {
  config.validate();
  PairedSample s;
  const std::size_t n = static_cast<std::size_t>(config.n);
  s.x.resize(n);
  s.y.resize(n);
  const double v = config.phi * config.phi;
  for (std::size_t i = 0; i < n; ++i) {
    switch (config.kind) {
      case Scenario::Normal: {
        const double z1 = sample_normal(0.0, 1.0, rng);
        const double z2 = sample_normal(0.0, 1.0, rng);
        s.x[i] = z1;
        s.y[i] = config.rho * z1 + std::sqrt(1.0 - config.rho * config.rho) * z2;
        break;
      }
      case Scenario::Sinusoidal: {
        s.x[i] = 5.0 * M_PI * rng.uniform();
        s.y[i] = 2.0 * std::sin(s.x[i]) + sample_normal(0.0, v, rng);
        break;
      }
      case Scenario::Parabolic: {
        s.x[i] = sample_normal(0.0, 1.0, rng);
        s.y[i] = 2.0 * s.x[i] * s.x[i] / 3.0 + sample_normal(0.0, v, rng);
        break;
      }
      case Scenario::Circular: {
        const double t = 2.0 * M_PI * rng.uniform();
        s.x[i] = 10.0 * std::cos(t) + sample_normal(0.0, v, rng);
        s.y[i] = 10.0 * std::sin(t) + sample_normal(0.0, v, rng);
        break;
      }
    }
  }
  return s;
}

std::vector<std::size_t> random_permutation(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  // Fisher-Yates with explicit uniform draws so the sequence is platform
  // independent.
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(perm[i - 1], perm[std::min(j, i - 1)]);
  }
  return perm;
}

PairedSample permute_null(std::span<const double> x, std::span<const double> y, RngStream& rng) {
  if (x.size() != y.size()) throw InputError("permute_null: samples differ in length");
  const auto perm = random_permutation(y.size(), rng);
  PairedSample out;
  out.x.assign(x.begin(), x.end());
  out.y.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out.y[i] = y[perm[i]];
  return out;
}

RocCurve roc(std::span<const double> dep, std::span<const double> null) {
  if (dep.empty() || null.empty()) throw InputError("roc: score lists must be nonempty");
  std::vector<double> pooled(dep.begin(), dep.end());
  pooled.insert(pooled.end(), null.begin(), null.end());
  std::sort(pooled.begin(), pooled.end(), std::greater<>());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
  std::vector<double> ds(dep.begin(), dep.end());
  std::vector<double> ns(null.begin(), null.end());
  std::sort(ds.begin(), ds.end());
  std::sort(ns.begin(), ns.end());
  auto at_least = [](const std::vector<double>& v, double t) {
    return static_cast<double>(v.end() - std::lower_bound(v.begin(), v.end(), t));
  };
  RocCurve c;
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  c.tpr.push_back(0.0);
  c.fpr.push_back(0.0);
  for (double t : pooled) {
    c.thresholds.push_back(t);
    c.tpr.push_back(at_least(ds, t) / static_cast<double>(ds.size()));
    c.fpr.push_back(at_least(ns, t) / static_cast<double>(ns.size()));
  }
  double auc = 0.0;
  for (std::size_t k = 1; k < c.tpr.size(); ++k) auc += 0.5 * (c.fpr[k] - c.fpr[k - 1]) * (c.tpr[k] + c.tpr[k - 1]);
  c.auc = auc;
  return c;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Ctbf: return "ctbf";
    case Method::Mixmod: return "mixmod";
    case Method::Mi: return "mi";
    case Method::Chisq: return "chisq";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "ctbf") return Method::Ctbf;
  if (name == "mixmod") return Method::Mixmod;
  if (name == "mi") return Method::Mi;
  if (name == "chisq") return Method::Chisq;
  throw InputError("unknown method '" + name + "' (expected ctbf, mixmod, mi, chisq)");
}

namespace {

MixmodOptions mixmod_options(const ScreenPlan& plan) {
  MixmodOptions o;
  o.marginal = plan.mixmod_marginal;
  o.joint = plan.mixmod_joint;
  o.mcmc = plan.mcmc;
  o.ensemble = plan.ensemble;
  return o;
}

AllocationTrace fit_trace(std::span<const double> v, const ScreenPlan& plan, RngStream rng) {
  const auto z = standardize(v);
  return run_chain(z, plan.ctbf_marginal, plan.mcmc, std::move(rng)).trace;
}

double chisq_score(std::span<const std::int32_t> lx, std::span<const std::int32_t> ly) {
  return 1.0 - chi_square(build_table(lx, ly)).p_value;
}

std::vector<std::int32_t> identity_labels(std::span<const std::int32_t> lab) {
  std::vector<std::size_t> rows(lab.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return restrict_labels(lab, rows);
}

struct RepOutcome {
  std::vector<double> dep;
  std::vector<double> null;
  std::vector<double> seconds;
};

std::string cell_key(const ScenarioConfig& s) {
  return scenario_name(s.kind) + ":" + format_double(s.parameter()) + ":" + std::to_string(s.n);
}

RepOutcome run_replication(const StudyCell& cell, const StudyOptions& opt, int rep) {
  const std::size_t m = opt.methods.size();
  RepOutcome out{std::vector<double>(m, std::numeric_limits<double>::quiet_NaN()),
                 std::vector<double>(m, std::numeric_limits<double>::quiet_NaN()), std::vector<double>(m, 0.0)};
  const RngStream root(opt.seed);
  const RngStream data_rng = root.substream("cell:" + cell_key(cell.scenario)).substream(static_cast<std::uint64_t>(rep));
  RngStream gen = data_rng.substream("data");
  const PairedSample s = generate(cell.scenario, gen);
  RngStream perm_rng = data_rng.substream("perm");
  const auto perm = random_permutation(s.y.size(), perm_rng);
  std::vector<double> y_perm(s.y.size());
  for (std::size_t i = 0; i < s.y.size(); ++i) y_perm[i] = s.y[perm[i]];
  const RngStream fit_rng = data_rng.substream("fit:" + cell.setting);
  const ScreenPlan& plan = cell.plan;

  // Stage-1 traces shared between CT-BF and chi-square.
  bool have_traces = false;
  bool traces_failed = false;
  AllocationTrace tx;
  AllocationTrace ty;
  AllocationTrace ty_null;
  double trace_seconds = 0.0;
  auto ensure_traces = [&] {
    if (have_traces || traces_failed) return;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      tx = fit_trace(s.x, plan, fit_rng.substream("ctbf-x"));
      ty = fit_trace(s.y, plan, fit_rng.substream("ctbf-y"));
      if (!opt.reuse_null_fits) ty_null = fit_trace(y_perm, plan, fit_rng.substream("ctbf-y-null"));
      have_traces = true;
    } catch (const std::exception&) {
      traces_failed = true;
    }
    trace_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  bool traces_charged = false;

  std::vector<std::size_t> identity(s.x.size());
  std::iota(identity.begin(), identity.end(), std::size_t{0});

  for (std::size_t k = 0; k < m; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    double extra = 0.0;
    try {
      switch (opt.methods[k]) {
        case Method::Ctbf:
        case Method::Chisq: {
          ensure_traces();
          if (!traces_charged) {
            extra = trace_seconds;
            traces_charged = true;
          }
          if (!have_traces) break;
          if (opt.methods[k] == Method::Ctbf) {
            out.dep[k] = p_dep_over_trace(tx, ty, plan.ctbf).p_dep;
            out.null[k] = opt.reuse_null_fits ? p_dep_over_trace(tx, ty, plan.ctbf, identity, perm).p_dep
                                              : p_dep_over_trace(tx, ty_null, plan.ctbf).p_dep;
          } else {
            const auto dx = dahl_partition(tx);
            const auto dy = dahl_partition(ty);
            out.dep[k] = chisq_score(dx, dy);
            const auto dyn = opt.reuse_null_fits ? restrict_labels(dy, perm) : identity_labels(dahl_partition(ty_null));
            out.null[k] = chisq_score(dx, dyn);
          }
          break;
        }
        case Method::Mixmod: {
          const MixmodOptions mo = mixmod_options(plan);
          const RngStream r = fit_rng.substream("mixmod");
          if (opt.reuse_null_fits) {
            const auto sx = standardize(s.x);
            const auto sy = standardize(s.y);
            std::vector<double> sy_perm(sy.size());
            for (std::size_t i = 0; i < sy.size(); ++i) sy_perm[i] = sy[perm[i]];
            PredictiveValues pv;
            pv.marginal_x = fit_marginal_predictive(sx, mo.marginal, mo.mcmc, r.substream("x"));
            pv.marginal_y = fit_marginal_predictive(sy, mo.marginal, mo.mcmc, r.substream("y"));
            pv.joint = fit_joint_predictive(sx, sy, mo.joint, mo.mcmc, r.substream("xy"));
            out.dep[k] = estimate_pi(pi_log_posterior_grid(pv, mo.ensemble)).pi_hat;
            PredictiveValues pn;
            pn.marginal_x = pv.marginal_x;
            pn.marginal_y.resize(sy.size());
            for (std::size_t i = 0; i < sy.size(); ++i) pn.marginal_y[i] = pv.marginal_y[perm[i]];
            pn.joint = fit_joint_predictive(sx, sy_perm, mo.joint, mo.mcmc, r.substream("xy-null"));
            out.null[k] = estimate_pi(pi_log_posterior_grid(pn, mo.ensemble)).pi_hat;
          } else {
            out.dep[k] = mixmod_ensemble(s.x, s.y, mo, r).pi_hat;
            out.null[k] = mixmod_ensemble(s.x, y_perm, mo, r.substream("null")).pi_hat;
          }
          break;
        }
        case Method::Mi: {
          out.dep[k] = knn_mi(s.x, s.y, plan.mi);
          out.null[k] = knn_mi(s.x, y_perm, plan.mi);
          break;
        }
      }
    } catch (const std::exception&) {
      out.dep[k] = out.null[k] = std::numeric_limits<double>::quiet_NaN();
    }
    out.seconds[k] = extra + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return out;
}

std::vector<double> finite_only(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v)
    if (std::isfinite(x)) out.push_back(x);
  return out;
}

}  // namespace

double score_sample(Method method, std::span<const double> x, std::span<const double> y, const ScreenPlan& plan,
                    RngStream rng) {
  switch (method) {
    case Method::Ctbf: {
      const auto tx = fit_trace(x, plan, rng.substream("ctbf-x"));
      const auto ty = fit_trace(y, plan, rng.substream("ctbf-y"));
      return p_dep_over_trace(tx, ty, plan.ctbf).p_dep;
    }
    case Method::Chisq: {
      const auto tx = fit_trace(x, plan, rng.substream("ctbf-x"));
      const auto ty = fit_trace(y, plan, rng.substream("ctbf-y"));
      return chisq_score(dahl_partition(tx), dahl_partition(ty));
    }
    case Method::Mixmod: return mixmod_ensemble(x, y, mixmod_options(plan), rng.substream("mixmod")).pi_hat;
    case Method::Mi: return knn_mi(x, y, plan.mi);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::vector<CellResult> power_study(const std::vector<StudyCell>& cells, const StudyOptions& options,
                                    const StudyProgress& progress) {
  if (options.methods.empty()) throw InputError("power_study: no methods selected");
  for (const auto& c : cells) {
    c.scenario.validate();
    if (c.scenario.reps < 2) throw InputError("power_study: at least 2 replications per arm are required");
    c.plan.validate();
  }
  std::vector<std::pair<std::size_t, int>> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int r = 0; r < cells[c].scenario.reps; ++r) tasks.emplace_back(c, r);
  std::vector<RepOutcome> outcomes(tasks.size());
  std::mutex mu;
  std::size_t done = 0;
  const std::size_t step = std::max<std::size_t>(1, tasks.size() / 50);
  parallel_for(tasks.size(), options.workers, [&](std::size_t t) {
    outcomes[t] = run_replication(cells[tasks[t].first], options, tasks[t].second);
    if (progress) {
      std::lock_guard<std::mutex> lock(mu);
      ++done;
      if (done % step == 0 || done == tasks.size())
        progress("replications: " + std::to_string(done) + "/" + std::to_string(tasks.size()));
    }
  });

  std::vector<CellResult> results;
  std::size_t t = 0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const std::size_t first = t;
    t += static_cast<std::size_t>(cells[c].scenario.reps);
    for (std::size_t k = 0; k < options.methods.size(); ++k) {
      CellResult res;
      res.cell = cells[c];
      res.method = options.methods[k];
      for (std::size_t q = first; q < t; ++q) {
        res.dep_scores.push_back(outcomes[q].dep[k]);
        res.null_scores.push_back(outcomes[q].null[k]);
        res.runtime_seconds += outcomes[q].seconds[k];
        if (!std::isfinite(outcomes[q].dep[k]) || !std::isfinite(outcomes[q].null[k])) ++res.failures;
      }
      const auto d = finite_only(res.dep_scores);
      const auto n = finite_only(res.null_scores);
      if (!d.empty() && !n.empty()) {
        res.curve = roc(d, n);
      } else {
        res.curve.auc = std::numeric_limits<double>::quiet_NaN();
      }
      results.push_back(std::move(res));
    }
  }
  return results;
}

std::vector<StudyCell> reference_grid(int n, int reps, const ScreenPlan& plan) {
  std::vector<StudyCell> cells;
  for (double rho : {0.0, 0.1, 0.3, 0.5, 0.9}) {
    StudyCell c;
    c.scenario = ScenarioConfig{Scenario::Normal, rho, 1.0, n, reps};
    c.plan = plan;
    cells.push_back(c);
  }
  for (Scenario s : {Scenario::Sinusoidal, Scenario::Parabolic, Scenario::Circular}) {
    for (double phi : {1.0, 2.0, 3.0, 4.0, 5.0}) {
      StudyCell c;
      c.scenario = ScenarioConfig{s, 0.0, phi, n, reps};
      c.plan = plan;
      cells.push_back(c);
    }
  }
  return cells;
}

SweepSpec default_sweep(const std::string& parameter) {
  SweepSpec s;
  s.parameter = parameter;
  if (parameter == "a") {
    s.values = {{0.1}, {0.5}, {1.0}, {2.0}};
  } else if (parameter == "c0") {
    s.values = {{1.0}, {5.0}, {10.0}, {20.0}};
  } else if (parameter == "a0b0") {
    s.values = {{0.5, 0.5}, {1.0, 1.0}, {2.0, 2.0}, {0.5, 2.0}, {2.0, 0.5}};
  } else {
    throw InputError("unknown sweep parameter '" + parameter + "' (expected a, c0, a0b0)");
  }
  return s;
}

std::vector<StudyCell> sensitivity_grid(const SweepSpec& spec, const ScreenPlan& base) {
  std::vector<StudyCell> cells;
  for (const auto& v : spec.values) {
    ScreenPlan plan = base;
    std::string tag;
    if (spec.parameter == "a") {
      if (v.size() != 1) throw InputError("sweep a: one value per setting");
      plan.ctbf.rule = CellPrior::Constant;
      plan.ctbf.alpha = v[0];
      tag = "a=" + format_double(v[0]);
    } else if (spec.parameter == "c0") {
      if (v.size() != 1) throw InputError("sweep c0: one value per setting");
      plan.ctbf_marginal.concentration = v[0];
      plan.ctbf_marginal.concentration_prior.reset();
      tag = "c0=" + format_double(v[0]);
    } else if (spec.parameter == "a0b0") {
      if (v.size() != 2) throw InputError("sweep a0b0: two values (a0, b0) per setting");
      plan.ensemble.a0 = v[0];
      plan.ensemble.b0 = v[1];
      tag = "a0=" + format_double(v[0]) + ",b0=" + format_double(v[1]);
    } else {
      throw InputError("unknown sweep parameter '" + spec.parameter + "' (expected a, c0, a0b0)");
    }
    plan.validate();
    for (double phi : spec.phis) {
      StudyCell c;
      c.scenario = ScenarioConfig{Scenario::Sinusoidal, 0.0, phi, spec.n, spec.reps};
      c.plan = plan;
      c.setting = tag;
      cells.push_back(c);
    }
  }
  return cells;
}

namespace {

std::string cell_prefix(const CellResult& r) {
  return scenario_name(r.cell.scenario.kind) + '\t' + format_double(r.cell.scenario.parameter()) + '\t' +
         r.cell.setting + '\t' + method_name(r.method);
}

}  // namespace

void write_scores_tsv(std::ostream& out, const std::vector<CellResult>& results) {
  out << "scenario\tparameter\tsetting\tmethod\treplication\tscore\tlabel\n";
  for (const auto& r : results) {
    const std::string pre = cell_prefix(r);
    for (std::size_t q = 0; q < r.dep_scores.size(); ++q)
      out << pre << '\t' << q + 1 << '\t' << format_double(r.dep_scores[q]) << "\t1\n";
    for (std::size_t q = 0; q < r.null_scores.size(); ++q)
      out << pre << '\t' << q + 1 << '\t' << format_double(r.null_scores[q]) << "\t0\n";
  }
}

void write_summary_tsv(std::ostream& out, const std::vector<CellResult>& results) {
  out << "scenario\tparameter\tsetting\tmethod\tauc\tn_dep\tn_null\tfailures\truntime_seconds\n";
  for (const auto& r : results) {
    out << cell_prefix(r) << '\t' << format_double(r.curve.auc) << '\t' << finite_only(r.dep_scores).size() << '\t'
        << finite_only(r.null_scores).size() << '\t' << r.failures << '\t' << format_double(r.runtime_seconds)
        << '\n';
  }
}

void write_roc_tsv(std::ostream& out, const std::vector<CellResult>& results) {
  out << "scenario\tparameter\tsetting\tmethod\tthreshold\tfpr\ttpr\n";
  for (const auto& r : results) {
    const std::string pre = cell_prefix(r);
    for (std::size_t k = 0; k < r.curve.tpr.size(); ++k) {
      const double t = r.curve.thresholds[k];
      out << pre << '\t' << (std::isinf(t) ? std::string("inf") : format_double(t)) << '\t'
          << format_double(r.curve.fpr[k]) << '\t' << format_double(r.curve.tpr[k]) << '\n';
    }
  }
}

}  // namespace dpmscreen

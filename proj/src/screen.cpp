#include "dpmscreen/screen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "dpmscreen/parallel.hpp"

namespace dpmscreen {

using nlohmann::json;

std::string MethodSet::to_string() const {
  std::vector<std::string> parts;
  if (ctbf) parts.emplace_back("ctbf");
  if (mixmod) parts.emplace_back("mixmod");
  if (mi) parts.emplace_back("mi");
  if (chisq) parts.emplace_back("chisq");
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

MethodSet MethodSet::parse(const std::string& text) {
  MethodSet m{false, false, false, false};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    if (item.empty()) continue;
    if (item == "ctbf") {
      m.ctbf = true;
    } else if (item == "mixmod") {
      m.mixmod = true;
    } else if (item == "mi") {
      m.mi = true;
    } else if (item == "chisq") {
      m.chisq = true;
    } else if (item == "all") {
      m = MethodSet{true, true, true, true};
    } else {
      throw InputError("unknown method '" + item + "' (expected ctbf, mixmod, mi, chisq)");
    }
  }
  if (!m.any()) throw InputError("no methods selected");
  return m;
}

void ScreenPlan::validate() const {
  if (!methods.any()) throw InputError("screen: no methods selected");
  if (min_complete < 2) throw InputError("screen: minimum complete rows must be at least 2");
  if (mcmc.n_save < 1 || mcmc.n_burn < 0 || mcmc.thin < 1) throw InputError("screen: invalid MCMC settings");
  if (workers < 1) throw InputError("screen: workers must be at least 1");
  ctbf_marginal.validate();
  if (ctbf_marginal.dim != 1) throw InputError("screen: CT-BF marginal configuration must be one-dimensional");
  ctbf.validate();
  mixmod_marginal.validate();
  mixmod_joint.validate();
  if (mixmod_marginal.dim != 1 || mixmod_joint.dim != 2)
    throw InputError("screen: MixMod configurations must be one- and two-dimensional");
  ensemble.validate();
  mi.validate();
}

bool PairResult::skipped() const {
  return std::find(flags.begin(), flags.end(), status::kSkipped) != flags.end();
}

bool PairResult::failed() const {
  for (const auto& f : flags) {
    if (f == status::kChainFailed || f == status::kMixmodFailed) return true;
  }
  return false;
}

std::string PairResult::status() const {
  if (flags.empty()) return status::kOk;
  std::string out;
  for (std::size_t i = 0; i < flags.size(); ++i) out += (i ? ";" : "") + flags[i];
  return out;
}

namespace {

void add_flag(PairResult& r, const std::string& flag) {
  if (std::find(r.flags.begin(), r.flags.end(), flag) == r.flags.end()) r.flags.push_back(flag);
}

struct VariableFit {
  bool fitted = false;
  bool failed = false;
  std::string error;
  AllocationTrace trace;
  std::vector<std::int32_t> dahl;
};

std::string pair_key(const std::string& a, const std::string& b) { return "pair:" + a + '\x1f' + b; }

std::vector<PairResult> run_screen(const Dataset& input, const ScreenPlan& plan, ScreenStats* stats,
                                   const ProgressFn& progress) {
  plan.validate();
  input.validate();
  const Dataset data = (plan.variables.empty() ? input : input.select(plan.variables)).sorted_by_row_id();
  const std::size_t p = data.cols();
  const std::size_t n = data.rows();
  const RngStream root(plan.seed);

  std::mutex progress_mutex;
  auto report = [&](const std::string& msg) {
    if (!progress) return;
    std::lock_guard<std::mutex> lock(progress_mutex);
    progress(msg);
  };

  // Observed positions per variable in sorted row order; pos[v][r] is the
  // index of row r within the variable's stage-1 trace.
  std::vector<std::vector<std::size_t>> observed(p);
  std::vector<std::vector<long>> pos(p, std::vector<long>(n, -1));
  for (std::size_t v = 0; v < p; ++v) {
    for (std::size_t r = 0; r < n; ++r) {
      if (!data.is_missing(r, v)) {
        pos[v][r] = static_cast<long>(observed[v].size());
        observed[v].push_back(r);
      }
    }
  }

  std::vector<VariableFit> fits(p);
  const bool stage1 = plan.methods.ctbf || plan.methods.chisq;
  std::atomic<int> chains{0};
  if (stage1) {
    std::atomic<std::size_t> done{0};
    parallel_for(p, plan.workers, [&](std::size_t v) {
      VariableFit& fit = fits[v];
      if (observed[v].size() < static_cast<std::size_t>(plan.min_complete)) return;
      std::vector<double> vals;
      vals.reserve(observed[v].size());
      for (std::size_t r : observed[v]) vals.push_back(data.value(r, v));
      const auto z = standardize(vals);
      try {
        auto res = run_chain(z, plan.ctbf_marginal, plan.mcmc, root.substream("ctbf:" + data.names[v]));
        fit.trace = std::move(res.trace);
        if (plan.methods.chisq) fit.dahl = dahl_partition(fit.trace);
        fit.fitted = true;
      } catch (const std::exception& e) {
        fit.failed = true;
        fit.error = e.what();
      }
      ++chains;
      const std::size_t k = ++done;
      report("stage 1: " + std::to_string(k) + " chains done (" + data.names[v] + (fit.failed ? ", failed)" : ")"));
    });
  }

  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
  std::vector<PairResult> results(pairs.size());
  std::atomic<std::size_t> done_pairs{0};
  const std::size_t step = std::max<std::size_t>(1, pairs.size() / 20);

  parallel_for(pairs.size(), plan.workers, [&](std::size_t t) {
    const auto [i, j] = pairs[t];
    PairResult& res = results[t];
    res.i = i;
    res.j = j;
    res.var_i = data.names[i];
    res.var_j = data.names[j];
    std::vector<std::size_t> common;
    for (std::size_t r = 0; r < n; ++r) {
      if (!data.is_missing(r, i) && !data.is_missing(r, j)) common.push_back(r);
    }
    res.n_complete = static_cast<long>(common.size());
    if (res.n_complete < plan.min_complete) {
      add_flag(res, status::kSkipped);
    } else {
      if (stage1) {
        const VariableFit& fx = fits[i];
        const VariableFit& fy = fits[j];
        if (fx.failed || fy.failed || !fx.fitted || !fy.fitted) {
          add_flag(res, status::kChainFailed);
        } else {
          if (!fx.trace.warnings.empty() || !fy.trace.warnings.empty()) add_flag(res, status::kChainWarning);
          std::vector<std::size_t> rx;
          std::vector<std::size_t> ry;
          rx.reserve(common.size());
          ry.reserve(common.size());
          for (std::size_t r : common) {
            rx.push_back(static_cast<std::size_t>(pos[i][r]));
            ry.push_back(static_cast<std::size_t>(pos[j][r]));
          }
          if (plan.methods.ctbf) res.p_dep = p_dep_over_trace(fx.trace, fy.trace, plan.ctbf, rx, ry).p_dep;
          if (plan.methods.chisq) {
            const auto lx = restrict_labels(fx.dahl, rx);
            const auto ly = restrict_labels(fy.dahl, ry);
            const auto chi = chi_square(build_table(lx, ly));
            res.chi2_t = chi.statistic;
            res.chi2_p = chi.p_value;
            if (chi.dropped_margins) add_flag(res, status::kDroppedMargins);
          }
        }
      }
      if (plan.methods.mixmod || plan.methods.mi) {
        std::vector<double> xs;
        std::vector<double> ys;
        for (std::size_t r : common) {
          xs.push_back(data.value(r, i));
          ys.push_back(data.value(r, j));
        }
        if (plan.methods.mixmod) {
          MixmodOptions opt;
          opt.marginal = plan.mixmod_marginal;
          opt.joint = plan.mixmod_joint;
          opt.mcmc = plan.mcmc;
          opt.ensemble = plan.ensemble;
          try {
            const auto er = mixmod_ensemble(xs, ys, opt, root.substream(pair_key(res.var_i, res.var_j)).substream("mixmod"));
            res.pi_hat = er.pi_hat;
            if (!er.warnings.empty()) add_flag(res, status::kChainWarning);
          } catch (const std::exception&) {
            add_flag(res, status::kMixmodFailed);
          }
        }
        if (plan.methods.mi) {
          if (res.n_complete <= plan.mi.k) {
            add_flag(res, status::kMiSkipped);
          } else {
            bool jit = false;
            res.mi = knn_mi(xs, ys, plan.mi, &jit);
            if (jit) add_flag(res, status::kMiJittered);
          }
        }
      }
    }
    const std::size_t k = ++done_pairs;
    if (k % step == 0 || k == pairs.size())
      report("pairs: " + std::to_string(k) + "/" + std::to_string(pairs.size()));
  });

  if (stats) {
    stats->stage1_chains = chains.load();
    stats->failed_variables = static_cast<int>(std::count_if(fits.begin(), fits.end(), [](const VariableFit& f) { return f.failed; }));
    stats->pairs = results.size();
    stats->skipped = static_cast<std::size_t>(std::count_if(results.begin(), results.end(), [](const PairResult& r) { return r.skipped(); }));
  }
  return results;
}

std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> json_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> parse_status(const std::string& s) {
  if (s == status::kOk || s.empty()) return {};
  return split(s, ';');
}

json dpm_json(const DpmConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["concentration"] = c.concentration;
  if (c.concentration_prior) j["concentration_prior"] = {{"shape", c.concentration_prior->shape}, {"rate", c.concentration_prior->rate}};
  j["base_dof"] = c.base_dof;
  j["mu0"] = c.mu0;
  if (c.mu0_prior) j["mu0_prior"] = {{"mean", c.mu0_prior->mean}, {"variance", c.mu0_prior->variance}};
  j["k0"] = c.k0;
  if (c.k0_prior) j["k0_prior"] = {{"shape", c.k0_prior->shape}, {"rate", c.k0_prior->rate}};
  j["scale"] = c.scale;
  if (c.scale_prior) j["scale_prior"] = {{"dof", c.scale_prior->dof}, {"scale", c.scale_prior->scale}};
  j["variance_floor"] = c.variance_floor;
  return j;
}

json plan_json(const ScreenPlan& plan) {
  json j;
  j["methods"] = plan.methods.to_string();
  j["min_complete"] = plan.min_complete;
  j["mcmc"] = {{"n_burn", plan.mcmc.n_burn}, {"n_save", plan.mcmc.n_save}, {"thin", plan.mcmc.thin}};
  j["ctbf_marginal"] = dpm_json(plan.ctbf_marginal);
  j["ctbf"] = {{"rule", plan.ctbf.rule == CellPrior::Constant ? "constant" : "total-mass"},
               {"alpha", plan.ctbf.alpha},
               {"total_mass", plan.ctbf.total_mass}};
  j["mixmod_marginal"] = dpm_json(plan.mixmod_marginal);
  j["mixmod_joint"] = dpm_json(plan.mixmod_joint);
  j["ensemble"] = {{"a0", plan.ensemble.a0},
                   {"b0", plan.ensemble.b0},
                   {"eta", plan.ensemble.eta},
                   {"quadrature", plan.ensemble.quadrature == PiQuadrature::CellIntegrated ? "cell" : "node"}};
  j["mi"] = {{"k", plan.mi.k},
             {"variant", plan.mi.variant == MiVariant::Counting ? "counting" : "rectangle"},
             {"standardize", plan.mi.standardize}};
  j["seed"] = plan.seed;
  j["variables"] = plan.variables;
  return j;
}

}  // namespace

std::vector<PairResult> screen(const Dataset& data, const ScreenPlan& plan, ScreenStats* stats,
                               const ProgressFn& progress) {
  return run_screen(data, plan, stats, progress);
}

std::vector<PairResult> screen_ctbf(const Dataset& data, const ScreenPlan& plan, ScreenStats* stats,
                                    const ProgressFn& progress) {
  ScreenPlan p = plan;
  p.methods = MethodSet{true, false, false, plan.methods.chisq};
  return run_screen(data, p, stats, progress);
}

std::vector<PairResult> screen_mixmod(const Dataset& data, const ScreenPlan& plan, ScreenStats* stats,
                                      const ProgressFn& progress) {
  ScreenPlan p = plan;
  p.methods = MethodSet{false, true, false, false};
  return run_screen(data, p, stats, progress);
}

std::string plan_to_json(const ScreenPlan& plan) { return plan_json(plan).dump(2); }

std::string format_results_tsv(const std::vector<PairResult>& results) {
  std::string out = "var_i\tvar_j\tn_complete\tp_dep\tpi_hat\tmi\tchi2_T\tchi2_p\tstatus\n";
  for (const auto& r : results) {
    out += r.var_i + '\t' + r.var_j + '\t' + std::to_string(r.n_complete) + '\t' + opt_field(r.p_dep) + '\t' +
           opt_field(r.pi_hat) + '\t' + opt_field(r.mi) + '\t' + opt_field(r.chi2_t) + '\t' + opt_field(r.chi2_p) +
           '\t' + r.status() + '\n';
  }
  return out;
}

std::string format_results_json(const std::vector<PairResult>& results, const ScreenPlan* plan) {
  json j;
  j["format"] = "dpmscreen-results";
  j["version"] = DPMSCREEN_VERSION;
  if (plan) {
    j["plan"] = plan_json(*plan);
    j["seed"] = plan->seed;
  }
  json arr = json::array();
  for (const auto& r : results) {
    arr.push_back({{"i", r.i},
                   {"j", r.j},
                   {"var_i", r.var_i},
                   {"var_j", r.var_j},
                   {"n_complete", r.n_complete},
                   {"p_dep", opt_json(r.p_dep)},
                   {"pi_hat", opt_json(r.pi_hat)},
                   {"mi", opt_json(r.mi)},
                   {"chi2_T", opt_json(r.chi2_t)},
                   {"chi2_p", opt_json(r.chi2_p)},
                   {"status", r.status()}});
  }
  j["results"] = std::move(arr);
  return j.dump(2) + "\n";
}

void persist_results(const std::vector<PairResult>& results, const std::string& path, ResultFormat format,
                     const ScreenPlan* plan) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write results to " + path);
  out << (format == ResultFormat::Tsv ? format_results_tsv(results) : format_results_json(results, plan));
  out.flush();
  if (!out) throw InputError("write failed for " + path);
}

std::vector<PairResult> parse_results_tsv(const std::string& text, const std::vector<std::string>& names) {
  std::vector<PairResult> out;
  std::stringstream ss(text);
  std::string line;
  bool header = true;
  long lineno = 0;
  auto index_of = [&](const std::string& v) {
    const auto it = std::find(names.begin(), names.end(), v);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
  };
  auto number = [&](const std::string& f) -> std::optional<double> {
    if (f.empty()) return std::nullopt;
    const auto v = parse_double(f);
    if (!v) throw InputError("results: bad number '" + f + "' on line " + std::to_string(lineno));
    return v;
  };
  while (std::getline(ss, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header) {
      header = false;
      if (line.rfind("var_i\t", 0) != 0) throw InputError("results: missing TSV header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 9) throw InputError("results: line " + std::to_string(lineno) + " does not have 9 fields");
    PairResult r;
    r.var_i = f[0];
    r.var_j = f[1];
    r.i = index_of(r.var_i);
    r.j = index_of(r.var_j);
    r.n_complete = std::stol(f[2]);
    r.p_dep = number(f[3]);
    r.pi_hat = number(f[4]);
    r.mi = number(f[5]);
    r.chi2_t = number(f[6]);
    r.chi2_p = number(f[7]);
    r.flags = parse_status(f[8]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PairResult> load_results(const std::string& path, const std::vector<std::string>& names) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open results file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const std::exception& e) {
      throw InputError(path + ": " + e.what());
    }
    std::vector<PairResult> out;
    for (const auto& e : j.at("results")) {
      PairResult r;
      r.i = e.at("i").get<int>();
      r.j = e.at("j").get<int>();
      r.var_i = e.at("var_i").get<std::string>();
      r.var_j = e.at("var_j").get<std::string>();
      r.n_complete = e.at("n_complete").get<long>();
      r.p_dep = json_opt(e, "p_dep");
      r.pi_hat = json_opt(e, "pi_hat");
      r.mi = json_opt(e, "mi");
      r.chi2_t = json_opt(e, "chi2_T");
      r.chi2_p = json_opt(e, "chi2_p");
      r.flags = parse_status(e.at("status").get<std::string>());
      out.push_back(std::move(r));
    }
    return out;
  }
  try {
    return parse_results_tsv(text, names);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace dpmscreen

#include "dpmscreen/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpmscreen/parallel.hpp"
#include "dpmscreen/screen.hpp"
#include "dpmscreen/simbench.hpp"

namespace dpmscreen::cli {

namespace {

using nlohmann::json;

std::uint64_t env_seed() {
  const char* s = std::getenv(kSeedEnv);
  if (!s || !*s) return 0;
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw InputError(std::string(kSeedEnv) + " is not an unsigned integer: " + s);
  }
}

std::vector<std::string> split_list(const std::string& s, const std::string& delims) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (delims.find(c) != std::string::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_number(const std::string& s, const std::string& flag) {
  const auto v = parse_double(s);
  if (!v) throw InputError(flag + ": not a number: '" + s + "'");
  return *v;
}

// Flags shared by every subcommand that touches the priors or the sampler.
struct PlanFlags {
  ScreenPlan plan;
  std::string methods;
  std::string cell_rule = "constant";
  double c_shape = 1.0;
  double c_rate = 1.0;
  double c_fixed = 0.0;
  CLI::Option* o_c0 = nullptr;
  CLI::Option* o_alpha = nullptr;
  CLI::Option* o_rule = nullptr;
  CLI::Option* o_a = nullptr;
  CLI::Option* o_c_shape = nullptr;
  CLI::Option* o_c_rate = nullptr;
  CLI::Option* o_c_fixed = nullptr;
  CLI::Option* o_a0 = nullptr;
  CLI::Option* o_b0 = nullptr;
  CLI::Option* o_eta = nullptr;
  CLI::Option* o_k = nullptr;
  bool quiet = false;

  void add(CLI::App& app, const std::string& default_methods) {
    methods = default_methods;
    plan.workers = default_workers();
    plan.seed = env_seed();
    app.add_option("--methods", methods, "Comma-separated subset of ctbf, mixmod, mi, chisq")->capture_default_str();
    app.add_option("--seed", plan.seed, std::string("Random seed (default from ") + kSeedEnv + ", else 0)")
        ->capture_default_str();
    app.add_option("--workers", plan.workers, "Worker threads (default: logical cores)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--n-burn", plan.mcmc.n_burn, "Discarded Gibbs sweeps per chain (reference value: 1000)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    app.add_option("--n-save", plan.mcmc.n_save, "Saved Gibbs iterations per chain (reference value: 1800 = 9000 / 5)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--thin", plan.mcmc.thin, "Keep every thin-th sweep (reference value: 5)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    o_c0 = app.add_option("--c0", plan.ctbf_marginal.concentration,
                          "CT-BF marginal DPM concentration, fixed (reference value: 10)")
               ->capture_default_str()
               ->check(CLI::PositiveNumber);
    o_alpha = app.add_option("--alpha", plan.ctbf.alpha, "CT-BF cell prior alpha_kl under the constant rule (reference value: 1/2)")
                  ->capture_default_str()
                  ->check(CLI::PositiveNumber);
    o_rule = app.add_option("--cell-rule", cell_rule,
                            "CT-BF cell prior rule: constant (alpha_kl = alpha) or total-mass (alpha_kl = a/(KxKy))")
                 ->capture_default_str()
                 ->check(CLI::IsMember({"constant", "total-mass"}));
    o_a = app.add_option("--a", plan.ctbf.total_mass, "CT-BF total prior mass a under the total-mass rule")
              ->capture_default_str()
              ->check(CLI::PositiveNumber);
    o_c_shape = app.add_option("--c-shape", c_shape, "MixMod DPM concentration Gamma prior shape (reference value: 1)")
                    ->capture_default_str()
                    ->check(CLI::PositiveNumber);
    o_c_rate = app.add_option("--c-rate", c_rate, "MixMod DPM concentration Gamma prior rate (reference value: 1)")
                   ->capture_default_str()
                   ->check(CLI::PositiveNumber);
    o_c_fixed = app.add_option("--c-fixed", c_fixed, "Fix the MixMod DPM concentration at this value instead")
                    ->check(CLI::PositiveNumber);
    o_a0 = app.add_option("--a0", plan.ensemble.a0, "Beta prior a0 on the ensemble weight pi (reference value: 1/2)")
               ->capture_default_str()
               ->check(CLI::PositiveNumber);
    o_b0 = app.add_option("--b0", plan.ensemble.b0, "Beta prior b0 on the ensemble weight pi (reference value: 1/2)")
               ->capture_default_str()
               ->check(CLI::PositiveNumber);
    o_eta = app.add_option("--eta", plan.ensemble.eta, "Grid interval for the pi line search (reference value: 1e-4)")
                ->capture_default_str()
                ->check(CLI::Validator(
                    [](std::string& s) -> std::string {
                      const auto v = parse_double(s);
                      if (!v || !(*v > 0.0 && *v < 1.0)) return "grid interval must be in (0,1)";
                      return {};
                    },
                    "(0,1)"));
    o_k = app.add_option("--k", plan.mi.k, "Nearest neighbours for the MI estimator (reference value: 20)")
              ->capture_default_str()
              ->check(CLI::PositiveNumber);
    app.add_flag("-q,--quiet", quiet, "Suppress progress messages on standard error");
  }

  // Applies the parsed values and checks they fit the selected methods.
  void finalize() {
    plan.methods = MethodSet::parse(methods);
    plan.ctbf.rule = cell_rule == "constant" ? CellPrior::Constant : CellPrior::TotalMass;
    for (DpmConfig* c : {&plan.mixmod_marginal, &plan.mixmod_joint}) {
      if (o_c_fixed->count() > 0) {
        c->concentration = c_fixed;
        c->concentration_prior.reset();
      } else {
        c->concentration_prior = GammaPrior{c_shape, c_rate};
        c->concentration = c_shape / c_rate;
      }
    }
    const bool uses_ctbf = plan.methods.ctbf || plan.methods.chisq;
    for (CLI::Option* o : {o_c0, o_alpha, o_rule, o_a}) {
      if (o->count() > 0 && !uses_ctbf)
        throw InputError(o->get_name() + " applies to ctbf/chisq, which are not selected");
    }
    for (CLI::Option* o : {o_c_shape, o_c_rate, o_c_fixed, o_a0, o_b0, o_eta}) {
      if (o->count() > 0 && !plan.methods.mixmod)
        throw InputError(o->get_name() + " applies to mixmod, which is not selected");
    }
    if (o_k->count() > 0 && !plan.methods.mi) throw InputError("--k applies to mi, which is not selected");
    if (o_c_fixed->count() > 0 && (o_c_shape->count() > 0 || o_c_rate->count() > 0))
      throw InputError("--c-fixed cannot be combined with --c-shape/--c-rate");
    plan.validate();
  }
};

std::vector<Method> methods_of(const MethodSet& m) {
  std::vector<Method> out;
  if (m.ctbf) out.push_back(Method::Ctbf);
  if (m.mixmod) out.push_back(Method::Mixmod);
  if (m.mi) out.push_back(Method::Mi);
  if (m.chisq) out.push_back(Method::Chisq);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << text;
  if (!f) throw InputError("write failed for " + path);
}

json base_metadata(const std::string& command, const std::vector<std::string>& args, const ScreenPlan& plan,
                   double seconds) {
  json meta;
  meta["tool"] = "dpmscreen";
  meta["version"] = DPMSCREEN_VERSION;
  meta["command"] = command;
  meta["arguments"] = args;
  meta["seed"] = plan.seed;
  meta["config"] = json::parse(plan_to_json(plan));
  meta["wall_clock_seconds"] = seconds;
  return meta;
}

int study_exit(const std::vector<CellResult>& res) {
  for (const auto& r : res)
    if (r.failures > 0) return kExitPartial;
  return kExitOk;
}

json study_stats(const std::vector<CellResult>& res) {
  int failures = 0;
  for (const auto& r : res) failures += r.failures;
  return {{"cells", res.size()}, {"failed_replications", failures}};
}

void write_study(const std::string& prefix, const std::vector<CellResult>& res, std::ostream& out,
                 std::vector<std::string>& written) {
  std::ostringstream summary;
  std::ostringstream scores;
  std::ostringstream rocs;
  write_summary_tsv(summary, res);
  write_scores_tsv(scores, res);
  write_roc_tsv(rocs, res);
  for (const auto& [suffix, text] : std::vector<std::pair<std::string, std::string>>{
           {".summary.tsv", summary.str()}, {".scores.tsv", scores.str()}, {".roc.tsv", rocs.str()}}) {
    write_text(prefix + suffix, text);
    written.push_back(prefix + suffix);
    out << prefix + suffix << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dpmscreen: pairwise dependence screening with Dirichlet process mixtures", "dpmscreen"};
  app.set_version_flag("--version", DPMSCREEN_VERSION);
  app.require_subcommand(1);

  // screen
  CLI::App* screen_cmd = app.add_subcommand("screen", "Screen all variable pairs of a CSV file");
  PlanFlags screen_flags;
  std::string input;
  std::string output = "results.tsv";
  std::string format = "tsv";
  std::string id_column;
  std::string variables;
  std::string metadata;
  screen_cmd->add_option("-i,--input", input, "Input CSV (header row; empty, NA or NaN = missing)")->required();
  screen_cmd->add_option("-o,--output", output, "Output file")->capture_default_str();
  screen_cmd->add_option("--format", format, "Output format")->capture_default_str()->check(CLI::IsMember({"tsv", "json"}));
  screen_cmd->add_option("--id-column", id_column, "Column holding row ids (default: row ordinals)");
  screen_cmd->add_option("--variables", variables, "Comma-separated subset of variables to screen");
  screen_cmd->add_option("--min-rows", screen_flags.plan.min_complete,
                         "Minimum rows where both variables are observed (reference value: 10)")
      ->capture_default_str()
      ->check(CLI::Range(2, 1 << 30));
  screen_cmd->add_option("--metadata", metadata, "Metadata sidecar path (default: <output>.meta.json)");
  screen_flags.add(*screen_cmd, "ctbf");

  // simulate
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Power study on the synthetic scenarios");
  PlanFlags sim_flags;
  std::string preset = "paper-4.2-quick";
  std::string scenarios;
  std::string prefix = "simulation";
  int sim_n = 0;
  int sim_reps = 0;
  bool refit_null = false;
  sim_cmd->add_option("--preset", preset, "paper-4.2 (n = 250, R = 50) or paper-4.2-quick (n = 100, R = 20)")
      ->capture_default_str()
      ->check(CLI::IsMember({"paper-4.2", "paper-4.2-quick"}));
  sim_cmd->add_option("--scenarios", scenarios, "Comma-separated subset of normal, sinusoidal, parabolic, circular");
  sim_cmd->add_option("--n", sim_n, "Sample size (overrides the preset)")->check(CLI::Range(10, 1 << 30));
  sim_cmd->add_option("--reps", sim_reps, "Replications per arm (overrides the preset)")->check(CLI::Range(2, 1 << 30));
  sim_cmd->add_option("--output-prefix", prefix, "Prefix for the summary, scores, ROC and metadata files")
      ->capture_default_str();
  sim_cmd->add_flag("--refit-null", refit_null, "Refit the DPMs on each permuted null instead of reusing fits");
  sim_flags.add(*sim_cmd, "ctbf,mixmod,mi");

  // sensitivity
  CLI::App* sens_cmd = app.add_subcommand("sensitivity", "Prior sensitivity sweep on the sinusoidal scenario");
  PlanFlags sens_flags;
  std::string parameter;
  std::string values;
  std::string phis = "1,2,3,4,5";
  int sens_n = 100;
  int sens_reps = 20;
  std::string sens_prefix = "sensitivity";
  sens_cmd->add_option("--parameter", parameter, "a (cell prior), c0 (CT-BF concentration) or a0b0 (Beta prior)")
      ->required()
      ->check(CLI::IsMember({"a", "c0", "a0b0"}));
  sens_cmd->add_option("--values", values,
                       "Settings separated by ';' (a0b0 settings are 'a0,b0'); default: built-in sweep");
  sens_cmd->add_option("--phis", phis, "Noise levels of the sinusoidal scenario")->capture_default_str();
  sens_cmd->add_option("--n", sens_n, "Sample size")->capture_default_str()->check(CLI::Range(10, 1 << 30));
  sens_cmd->add_option("--reps", sens_reps, "Replications per arm")->capture_default_str()->check(CLI::Range(2, 1 << 30));
  sens_cmd->add_option("--output-prefix", sens_prefix, "Prefix for output files")->capture_default_str();
  sens_flags.add(*sens_cmd, "");

  if (args.empty()) {
    out << app.help();
    return kExitFatal;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run 'dpmscreen --help' for usage\n";
    return kExitFatal;
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  try {
    if (screen_cmd->parsed()) {
      screen_flags.finalize();
      ScreenPlan& plan = screen_flags.plan;
      if (!variables.empty()) plan.variables = split_list(variables, ",");
      CsvOptions csv;
      if (!id_column.empty()) csv.id_column = id_column;
      const Dataset data = load_csv(input, csv);
      ProgressFn progress;
      if (!screen_flags.quiet) progress = [&err](const std::string& m) { err << m << '\n'; };
      ScreenStats stats;
      const auto results = screen(data, plan, &stats, progress);
      persist_results(results, output, format == "json" ? ResultFormat::Json : ResultFormat::Tsv, &plan);
      out << output << '\n';
      const std::size_t failed =
          static_cast<std::size_t>(std::count_if(results.begin(), results.end(), [](const PairResult& r) { return r.failed(); }));
      const int code = failed > 0 ? kExitPartial : kExitOk;
      json meta = base_metadata("screen", args, plan, elapsed());
      meta["input"] = input;
      meta["outputs"] = {output};
      meta["stats"] = {{"variables", data.cols()},
                       {"rows", data.rows()},
                       {"pairs", stats.pairs},
                       {"skipped", stats.skipped},
                       {"failed", failed},
                       {"stage1_chains", stats.stage1_chains}};
      meta["exit_code"] = code;
      const std::string meta_path = metadata.empty() ? output + ".meta.json" : metadata;
      write_text(meta_path, meta.dump(2) + "\n");
      out << meta_path << '\n';
      return code;
    }
    if (sim_cmd->parsed()) {
      sim_flags.finalize();
      const ScreenPlan& plan = sim_flags.plan;
      const bool quick = preset == "paper-4.2-quick";
      const int n = sim_n > 0 ? sim_n : (quick ? 100 : 250);
      const int reps = sim_reps > 0 ? sim_reps : (quick ? 20 : 50);
      auto cells = reference_grid(n, reps, plan);
      if (!scenarios.empty()) {
        std::vector<Scenario> keep;
        for (const auto& s : split_list(scenarios, ",")) keep.push_back(parse_scenario(s));
        std::erase_if(cells, [&](const StudyCell& c) {
          return std::find(keep.begin(), keep.end(), c.scenario.kind) == keep.end();
        });
      }
      StudyOptions so;
      so.methods = methods_of(plan.methods);
      so.workers = plan.workers;
      so.seed = plan.seed;
      so.reuse_null_fits = !refit_null;
      StudyProgress progress;
      if (!sim_flags.quiet) progress = [&err](const std::string& m) { err << m << '\n'; };
      const auto res = power_study(cells, so, progress);
      std::vector<std::string> written;
      write_study(prefix, res, out, written);
      const int code = study_exit(res);
      json meta = base_metadata("simulate", args, plan, elapsed());
      meta["preset"] = preset;
      meta["n"] = n;
      meta["reps"] = reps;
      meta["reuse_null_fits"] = so.reuse_null_fits;
      meta["outputs"] = written;
      meta["stats"] = study_stats(res);
      meta["exit_code"] = code;
      write_text(prefix + ".meta.json", meta.dump(2) + "\n");
      out << prefix + ".meta.json" << '\n';
      return code;
    }
    if (sens_cmd->parsed()) {
      if (sens_flags.methods.empty()) sens_flags.methods = parameter == "a0b0" ? "mixmod" : "ctbf";
      sens_flags.finalize();
      const ScreenPlan& plan = sens_flags.plan;
      SweepSpec spec = default_sweep(parameter);
      spec.n = sens_n;
      spec.reps = sens_reps;
      spec.phis.clear();
      for (const auto& s : split_list(phis, ",;")) spec.phis.push_back(to_number(s, "--phis"));
      if (!values.empty()) {
        spec.values.clear();
        for (const auto& setting : split_list(values, ";")) {
          std::vector<double> v;
          for (const auto& s : split_list(setting, ",")) v.push_back(to_number(s, "--values"));
          spec.values.push_back(v);
        }
      }
      const auto cells = sensitivity_grid(spec, plan);
      StudyOptions so;
      so.methods = methods_of(plan.methods);
      so.workers = plan.workers;
      so.seed = plan.seed;
      StudyProgress progress;
      if (!sens_flags.quiet) progress = [&err](const std::string& m) { err << m << '\n'; };
      const auto res = power_study(cells, so, progress);
      std::vector<std::string> written;
      write_study(sens_prefix, res, out, written);
      const int code = study_exit(res);
      json meta = base_metadata("sensitivity", args, plan, elapsed());
      meta["parameter"] = parameter;
      meta["values"] = spec.values;
      meta["phis"] = spec.phis;
      meta["n"] = spec.n;
      meta["reps"] = spec.reps;
      meta["outputs"] = written;
      meta["stats"] = study_stats(res);
      meta["exit_code"] = code;
      write_text(sens_prefix + ".meta.json", meta.dump(2) + "\n");
      out << sens_prefix + ".meta.json" << '\n';
      return code;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFatal;
  }
  err << app.help();
  return kExitFatal;
}

}  // namespace dpmscreen::cli

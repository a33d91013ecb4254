#include "dpmscreen/mixmod.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dpmscreen {

void EnsembleConfig::validate() const {
  if (!(a0 > 0.0 && std::isfinite(a0)) || !(b0 > 0.0 && std::isfinite(b0)))
    throw DomainError("beta prior parameters a0 and b0 must be positive");
  if (!(eta > 0.0 && eta < 1.0)) throw DomainError("grid interval must be in (0,1)");
  if (grid_size() < 1) throw DomainError("grid interval too coarse: no interior grid points");
}

std::size_t EnsembleConfig::grid_size() const {
  const double cells = std::floor(1.0 / eta + 1e-9);
  return cells >= 2.0 ? static_cast<std::size_t>(cells) - 1 : 0;
}

void PredictiveValues::validate() const {
  if (joint.empty()) throw InputError("predictive values are empty");
  if (marginal_x.size() != joint.size() || marginal_y.size() != joint.size())
    throw InputError("predictive values differ in length");
  for (std::size_t i = 0; i < joint.size(); ++i) {
    for (double v : {joint[i], marginal_x[i], marginal_y[i]}) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("predictive densities must be finite and non-negative");
    }
  }
}

PiGrid pi_log_posterior_grid(const PredictiveValues& pv, const EnsembleConfig& config) {
  config.validate();
  pv.validate();
  const std::size_t n = pv.size();
  std::vector<double> lj(n);
  std::vector<double> li(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double prod = pv.marginal_x[i] * pv.marginal_y[i];
    if (pv.joint[i] == 0.0 && prod == 0.0) throw DomainError("zero predictive support");
    lj[i] = std::log(pv.joint[i]);
    li[i] = std::log(prod);
  }
  return pi_grid_from_log_lik(
      [&](double pi) {
        const double lp = std::log(pi);
        const double lq = std::log1p(-pi);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double a = lp + lj[i];
          const double b = lq + li[i];
          const double hi = std::max(a, b);
          s += hi + std::log1p(std::exp(std::min(a, b) - hi));
        }
        return s;
      },
      config);
}

EnsembleResult estimate_pi(const PiGrid& grid) {
  const EnsembleConfig& cfg = grid.config;
  cfg.validate();
  const std::size_t m = grid.pi.size();
  if (m == 0 || grid.log_lik.size() != m || grid.log_post.size() != m) throw InputError("estimate_pi: empty grid");

  EnsembleResult out;
  out.pi = grid.pi;
  out.log_post = grid.log_post;
  out.posterior.assign(m, 0.0);
  out.cell_mean.assign(m, 0.0);

  if (cfg.quadrature == PiQuadrature::Node) {
    double top = -std::numeric_limits<double>::infinity();
    for (double v : grid.log_post)
      if (std::isfinite(v)) top = std::max(top, v);
    if (!std::isfinite(top)) throw DomainError("estimate_pi: log posterior is not finite anywhere on the grid");
    for (std::size_t j = 0; j < m; ++j) {
      out.posterior[j] = std::isfinite(grid.log_post[j]) ? std::exp(grid.log_post[j] - top) : 0.0;
      out.cell_mean[j] = grid.pi[j];
    }
  } else {
    double top = -std::numeric_limits<double>::infinity();
    for (double v : grid.log_lik)
      if (std::isfinite(v)) top = std::max(top, v);
    if (!std::isfinite(top)) throw DomainError("estimate_pi: log posterior is not finite anywhere on the grid");
    const double a = cfg.a0;
    const double b = cfg.b0;
    const double mean_ab = a / (a + b);
    double lo0 = 0.0;  // I_lo(a, b)
    double lo1 = 0.0;  // I_lo(a + 1, b)
    for (std::size_t j = 0; j < m; ++j) {
      const double hi_edge = (j + 1 == m) ? 1.0 : 0.5 * (grid.pi[j] + grid.pi[j + 1]);
      const double hi0 = hi_edge >= 1.0 ? 1.0 : incomplete_beta(a, b, hi_edge);
      const double hi1 = hi_edge >= 1.0 ? 1.0 : incomplete_beta(a + 1.0, b, hi_edge);
      const double mass0 = std::max(hi0 - lo0, 0.0);
      const double mass1 = std::max(mean_ab * (hi1 - lo1), 0.0);
      const double lik = std::isfinite(grid.log_lik[j]) ? std::exp(grid.log_lik[j] - top) : 0.0;
      out.posterior[j] = lik * mass0;
      out.cell_mean[j] = mass0 > 0.0 ? mass1 / mass0 : grid.pi[j];
      lo0 = hi0;
      lo1 = hi1;
    }
  }
  double total = 0.0;
  for (double w : out.posterior) total += w;
  if (!(total > 0.0)) throw DomainError("estimate_pi: posterior weights vanish on the grid");
  double mean = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    out.posterior[j] /= total;
    mean += out.cell_mean[j] * out.posterior[j];
  }
  out.pi_hat = std::clamp(mean, grid.pi.front(), grid.pi.back());
  return out;
}

std::vector<double> standardize(std::span<const double> v, bool* constant) {
  const std::size_t n = v.size();
  std::vector<double> out(v.begin(), v.end());
  if (constant) *constant = false;
  if (n == 0) return out;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  const bool flat = !(sd > 0.0);
  if (constant) *constant = flat;
  for (double& x : out) x = flat ? x - mean : (x - mean) / sd;
  return out;
}

std::vector<double> fit_marginal_predictive(std::span<const double> v, const DpmConfig& config,
                                            const McmcSettings& mcmc, RngStream rng) {
  if (config.dim != 1) throw InputError("marginal fit needs a one-dimensional configuration");
  ChainOptions opt;
  opt.eval_points = v;
  return run_chain(v, config, mcmc, std::move(rng), opt).predictive.density;
}

std::vector<double> fit_joint_predictive(std::span<const double> x, std::span<const double> y,
                                         const DpmConfig& config, const McmcSettings& mcmc, RngStream rng) {
  if (config.dim != 2) throw InputError("joint fit needs a two-dimensional configuration");
  if (x.size() != y.size()) throw InputError("joint fit: samples differ in length");
  std::vector<double> xy(2 * x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy[2 * i] = x[i];
    xy[2 * i + 1] = y[i];
  }
  ChainOptions opt;
  opt.eval_points = xy;
  return run_chain(xy, config, mcmc, std::move(rng), opt).predictive.density;
}

EnsembleResult mixmod_ensemble(std::span<const double> x, std::span<const double> y, const MixmodOptions& options,
                               RngStream rng) {
  if (x.size() != y.size()) throw InputError("mixmod: samples differ in length");
  if (x.size() < 10) throw InputError("mixmod: at least 10 paired observations are required");
  options.ensemble.validate();
  bool flat_x = false;
  bool flat_y = false;
  const auto sx = standardize(x, &flat_x);
  const auto sy = standardize(y, &flat_y);
  PredictiveValues pv;
  pv.marginal_x = fit_marginal_predictive(sx, options.marginal, options.mcmc, rng.substream("x"));
  pv.marginal_y = fit_marginal_predictive(sy, options.marginal, options.mcmc, rng.substream("y"));
  pv.joint = fit_joint_predictive(sx, sy, options.joint, options.mcmc, rng.substream("xy"));
  auto res = estimate_pi(pi_log_posterior_grid(pv, options.ensemble));
  if (flat_x || flat_y) res.warnings.emplace_back("degenerate data: constant variable");
  return res;
}

bool propose_allocation(const PredictiveValues& pv, double pi, int min_group, std::vector<int>& zeta,
                        RngStream& rng) {
  const std::size_t n = pv.size();
  std::vector<int> prop(n);
  int l0 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = pi * pv.joint[i];
    const double b = (1.0 - pi) * pv.marginal_x[i] * pv.marginal_y[i];
    const double p = (a + b) > 0.0 ? a / (a + b) : pi;
    prop[i] = rng.uniform() < p ? 1 : 0;
    l0 += prop[i] == 0;
  }
  const int n_int = static_cast<int>(n);
  if (std::min(l0, n_int - l0) < min_group) return false;
  zeta = std::move(prop);
  return true;
}

double draw_pi(int l0, int n, const EnsembleConfig& config, RngStream& rng) {
  return sample_beta(config.a0 + l0, config.b0 + (n - l0), rng);
}

MixmodGibbsResult mixmod_gibbs(std::span<const double> x, std::span<const double> y,
                               const MixmodGibbsOptions& options, RngStream rng) {
  const std::size_t n = x.size();
  if (y.size() != n) throw InputError("mixmod_gibbs: samples differ in length");
  if (n < 10) throw InputError("mixmod_gibbs: at least 10 paired observations are required");
  if (options.iterations < 10) throw InputError("mixmod_gibbs: at least 10 iterations are required");
  if (options.min_refit_sweeps < 1 || options.max_refit_sweeps < options.min_refit_sweeps)
    throw InputError("mixmod_gibbs: invalid refit sweep range");
  options.ensemble.validate();

  const auto sx = standardize(x);
  const auto sy = standardize(y);
  const int n_int = static_cast<int>(n);

  RngStream main = rng.substream("mixmod-gibbs");
  // Balanced random start: floor(n/2) zeros, the rest ones, shuffled.
  std::vector<int> zeta(n, 1);
  for (std::size_t i = 0; i < n / 2; ++i) zeta[i] = 0;
  std::shuffle(zeta.begin(), zeta.end(), main);
  int l0 = static_cast<int>(n / 2);

  MixmodGibbsResult out;
  double pi = 0.5;
  out.trajectory.push_back(pi);
  std::vector<double> xy(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    xy[2 * i] = sx[i];
    xy[2 * i + 1] = sy[i];
  }
  std::uniform_int_distribution<int> sweeps(options.min_refit_sweeps, options.max_refit_sweeps);

  for (int it = 1; it <= options.iterations; ++it) {
    const int n_it = sweeps(main);
    McmcSettings single{n_it - 1, 1, 1};
    std::vector<double> fx0;
    std::vector<double> fy0;
    std::vector<double> fxy1;
    for (std::size_t i = 0; i < n; ++i) {
      if (zeta[i] == 0) {
        fx0.push_back(sx[i]);
        fy0.push_back(sy[i]);
      } else {
        fxy1.push_back(sx[i]);
        fxy1.push_back(sy[i]);
      }
    }
    RngStream it_rng = rng.substream(static_cast<std::uint64_t>(it));
    bool refit_ok = true;
    PredictiveValues pv;
    try {
      ChainOptions ox;
      ox.eval_points = sx;
      pv.marginal_x = run_chain(fx0, options.marginal, single, it_rng.substream("x"), ox).predictive.density;
      ChainOptions oy;
      oy.eval_points = sy;
      pv.marginal_y = run_chain(fy0, options.marginal, single, it_rng.substream("y"), oy).predictive.density;
      ChainOptions oj;
      oj.eval_points = xy;
      pv.joint = run_chain(fxy1, options.joint, single, it_rng.substream("xy"), oj).predictive.density;
    } catch (const IterationError&) {
      refit_ok = false;
      ++out.failed_refits;
    }
    if (refit_ok) {
      if (propose_allocation(pv, pi, options.min_group, zeta, main)) {
        ++out.accepted;
        l0 = static_cast<int>(std::count(zeta.begin(), zeta.end(), 0));
      } else {
        ++out.rejected;
      }
    }
    pi = draw_pi(l0, n_int, options.ensemble, main);
    out.trajectory.push_back(pi);
    out.l0.push_back(l0);
  }

  // Average pi^(j) for j = N/10 .. N (1-based trajectory index).
  const int first = std::max(1, options.iterations / 10);
  double sum = 0.0;
  for (int j = first; j <= options.iterations; ++j) sum += out.trajectory[j - 1];
  out.pi_hat = sum / static_cast<double>(options.iterations - first + 1);
  return out;
}

}  // namespace dpmscreen

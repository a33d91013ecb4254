#include "dpmscreen/dpm.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dpmscreen {

DpmConfig DpmConfig::ctbf_marginal() {
  DpmConfig c;
  c.dim = 1;
  c.concentration = 10.0;
  c.concentration_prior.reset();
  // nu = 3 with sigma^2 ~ IGa(nu/2 - 1, psi/2): inverse-Wishart dof nu - 2.
  c.base_dof = 1.0;
  c.mu0 = 0.0;
  c.mu0_prior = NormalPrior{0.0, 1.0};
  c.k0_prior = GammaPrior{0.5, 50.0};
  c.k0 = 0.5 / 50.0;
  // 1/psi ~ IGa(1/2, 5)  <=>  psi ~ Ga(1/2, rate 5) = Wishart_1(1, 0.1).
  c.scale_prior = WishartPrior{1.0, 0.1};
  c.scale = 0.1;
  return c;
}

DpmConfig DpmConfig::mixmod(int dim) {
  DpmConfig c;
  c.dim = dim;
  c.concentration_prior = GammaPrior{1.0, 1.0};
  c.concentration = 1.0;
  c.base_dof = dim + 2.0;
  c.mu0 = 0.0;
  c.mu0_prior = NormalPrior{0.0, 100.0};
  c.k0_prior = GammaPrior{0.5, 50.0};
  c.k0 = 0.5 / 50.0;
  c.scale_prior = WishartPrior{dim + 2.0, 0.1};
  c.scale = (dim + 2.0) * 0.1;
  return c;
}

void DpmConfig::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (dim != 1 && dim != 2) throw DomainError("dpm: dimension must be 1 or 2");
  if (!positive(concentration)) throw DomainError("dpm: concentration must be positive");
  if (concentration_prior && !(positive(concentration_prior->shape) && positive(concentration_prior->rate)))
    throw DomainError("dpm: concentration prior shape and rate must be positive");
  if (!std::isfinite(base_dof) || !(base_dof > dim - 1)) throw DomainError("dpm: base dof must exceed d - 1");
  if (!std::isfinite(mu0)) throw DomainError("dpm: mu0 must be finite");
  if (mu0_prior && !(std::isfinite(mu0_prior->mean) && positive(mu0_prior->variance)))
    throw DomainError("dpm: mu0 prior variance must be positive");
  if (!positive(k0)) throw DomainError("dpm: k0 must be positive");
  if (k0_prior && !(positive(k0_prior->shape) && positive(k0_prior->rate)))
    throw DomainError("dpm: k0 prior shape and rate must be positive");
  if (!positive(scale)) throw DomainError("dpm: base scale must be positive");
  if (scale_prior && !(positive(scale_prior->scale) && std::isfinite(scale_prior->dof) && scale_prior->dof > dim - 1))
    throw DomainError("dpm: scale prior needs dof > d - 1 and a positive scale");
  if (!positive(variance_floor)) throw DomainError("dpm: variance floor must be positive");
}

std::vector<int> canonicalize_labels(std::span<const int> labels) {
  std::vector<int> out(labels.size());
  std::vector<std::pair<int, int>> seen;  // (original, canonical)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& p) { return p.first == labels[i]; });
    if (it == seen.end()) {
      seen.emplace_back(labels[i], static_cast<int>(seen.size()) + 1);
      out[i] = static_cast<int>(seen.size());
    } else {
      out[i] = it->second;
    }
  }
  return out;
}

std::vector<double> polya_urn_weights(std::span<const int> sizes, std::span<const double> log_kernel,
                                      double concentration, double log_kernel_new) {
  if (sizes.size() != log_kernel.size()) throw InputError("polya_urn_weights: size mismatch");
  std::vector<double> w(sizes.size() + 1);
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    w[k] = sizes[k] > 0 ? std::log(static_cast<double>(sizes[k])) + log_kernel[k]
                        : -std::numeric_limits<double>::infinity();
  }
  w.back() = std::log(concentration) + log_kernel_new;
  const double top = *std::max_element(w.begin(), w.end());
  double total = 0.0;
  for (double& v : w) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

// ---------------------------------------------------------------------------

template <int D>
struct DpmSampler<D>::Impl {
  using V = Vec<D>;
  using M = SymMatrix<D>;

  struct Cluster {
    int n = 0;
    V sum = V::Zero();
    M outer = M::Zero();
    // Posterior of (mu, Sigma) given the members.
    double kn = 0.0;
    V mun = V::Zero();
    M Sn = M::Identity();
    // Student-t predictive.
    V loc = V::Zero();
    M prec = M::Identity();
    double dof = 1.0;
    double log_norm = 0.0;
    double half_pow = 1.0;
    double log_count = 0.0;
    // Drawn parameters.
    V mean = V::Zero();
    M cov = M::Identity();
  };

  std::vector<V> x;
  DpmConfig cfg;
  RngStream rng;
  std::vector<std::size_t> order;

  std::vector<int> slot_of;
  std::vector<Cluster> slots;
  std::vector<int> active;
  std::vector<int> pos_in_active;
  std::vector<int> free_slots;
  Cluster prior;

  V mu0;
  double k0;
  M S;
  double c;
  long iteration = 0;

  // Student-t normalizing terms and log counts, indexed by cluster size.
  std::vector<double> t_const;
  std::vector<double> log_count_of;
  std::vector<double> logw;

  Impl(std::span<const double> data, const DpmConfig& config, RngStream r, std::span<const std::size_t> visit)
      : cfg(config), rng(std::move(r)) {
    cfg.validate();
    if (cfg.dim != D) throw DomainError("dpm: config dimension does not match sampler");
    if (data.size() % D != 0) throw InputError("dpm: data length is not a multiple of the dimension");
    const std::size_t n = data.size() / D;
    x.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < D; ++j) {
        const double v = data[i * D + j];
        if (!std::isfinite(v)) throw InputError("dpm: data must be finite");
        x[i](j) = v;
      }
    }
    if (visit.empty()) {
      order.resize(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
    } else {
      if (visit.size() != n) throw InputError("dpm: visit order must be a permutation of the points");
      order.assign(visit.begin(), visit.end());
      std::vector<char> hit(n, 0);
      for (std::size_t i : order) {
        if (i >= n || hit[i]) throw InputError("dpm: visit order must be a permutation of the points");
        hit[i] = 1;
      }
    }

    mu0 = V::Constant(cfg.mu0);
    k0 = cfg.k0;
    S = cfg.scale * M::Identity();
    c = cfg.concentration;

    t_const.resize(n + 1);
    log_count_of.resize(n + 1);
    for (std::size_t m = 0; m <= n; ++m) {
      const double dof = cfg.base_dof + static_cast<double>(m) - D + 1.0;
      t_const[m] = log_gamma(0.5 * (dof + D)) - log_gamma(0.5 * dof) - 0.5 * D * std::log(dof * M_PI);
      log_count_of[m] = m > 0 ? std::log(static_cast<double>(m)) : 0.0;
    }

    slot_of.assign(n, 0);
    if (n > 0) {
      slots.emplace_back();
      active.push_back(0);
      pos_in_active.push_back(0);
    }
    recompute_stats();
    refresh_all();
    for (int s : active) draw_params(slots[s], s);
  }

  void recompute_stats() {
    for (int s : active) {
      slots[s].n = 0;
      slots[s].sum.setZero();
      slots[s].outer.setZero();
    }
    // Visit order keeps the floating-point sums invariant to relabelling rows.
    for (std::size_t i : order) add_point(slots[slot_of[i]], x[i]);
  }

  static void add_point(Cluster& cl, const V& xi) {
    ++cl.n;
    cl.sum += xi;
    cl.outer += xi * xi.transpose();
  }

  static void remove_point(Cluster& cl, const V& xi) {
    --cl.n;
    if (cl.n == 0) {
      cl.sum.setZero();
      cl.outer.setZero();
    } else {
      cl.sum -= xi;
      cl.outer -= xi * xi.transpose();
    }
  }

  void refresh(Cluster& cl, int id) const {
    const double n = cl.n;
    cl.kn = k0 + n;
    cl.mun = (k0 * mu0 + cl.sum) / cl.kn;
    M Sn = S;
    if (cl.n > 0) {
      const V xbar = cl.sum / n;
      M scatter = cl.outer - n * xbar * xbar.transpose();
      if constexpr (D == 1) scatter(0, 0) = std::max(scatter(0, 0), 0.0);
      const V dev = xbar - mu0;
      Sn += scatter + (k0 * n / cl.kn) * dev * dev.transpose();
    }
    cl.Sn = 0.5 * (Sn + Sn.transpose());
    cl.dof = cfg.base_dof + n - D + 1.0;
    const M scale = cl.Sn * ((cl.kn + 1.0) / (cl.kn * cl.dof));
    double log_det = 0.0;
    if constexpr (D == 1) {
      const double v = scale(0, 0);
      if (!(v > 0.0) || !std::isfinite(v)) throw IterationError("dpm: posterior scale is not positive", id);
      cl.prec(0, 0) = 1.0 / v;
      log_det = std::log(v);
    } else {
      Eigen::LLT<M> llt(scale);
      if (llt.info() != Eigen::Success || !scale.allFinite()) {
        throw IterationError("dpm: posterior scale is not positive definite", id);
      }
      for (int i = 0; i < D; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
      cl.prec = llt.solve(M::Identity());
    }
    cl.loc = cl.mun;
    cl.half_pow = 0.5 * (cl.dof + D);
    cl.log_count = log_count_of[cl.n];
    cl.log_norm = t_const[cl.n] - 0.5 * log_det;
  }

  static double log_kernel(const Cluster& cl, const V& xi) {
    if constexpr (D == 1) {
      const double d = xi(0) - cl.loc(0);
      return cl.log_norm - cl.half_pow * std::log(1.0 + cl.prec(0, 0) * d * d / cl.dof);
    } else {
      const V d = xi - cl.loc;
      const double q = d.dot(cl.prec * d);
      return cl.log_norm - cl.half_pow * std::log1p(q / cl.dof);
    }
  }

  // In-place draw from unnormalized log weights held in `logw`.
  std::size_t draw_from_logw() {
    double top = logw[0];
    for (double v : logw) top = std::max(top, v);
    double total = 0.0;
    for (double& v : logw) {
      // exp(-45) is below double resolution relative to the top weight.
      v = v - top > -45.0 ? std::exp(v - top) : 0.0;
      total += v;
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t k = 0; k < logw.size(); ++k) {
      acc += logw[k];
      if (u < acc) return k;
    }
    return logw.size() - 1;
  }

  void refresh_all() {
    for (int s : active) refresh(slots[s], s);
    refresh(prior, -1);
  }

  void deactivate(int s) {
    const int p = pos_in_active[s];
    const int last = active.back();
    active[p] = last;
    pos_in_active[last] = p;
    active.pop_back();
    free_slots.push_back(s);
  }

  int open_slot() {
    int s;
    if (!free_slots.empty()) {
      s = free_slots.back();
      free_slots.pop_back();
      slots[s] = Cluster{};
    } else {
      s = static_cast<int>(slots.size());
      slots.emplace_back();
      pos_in_active.push_back(0);
    }
    pos_in_active[s] = static_cast<int>(active.size());
    active.push_back(s);
    return s;
  }

  void floor_cov(M& cov) const {
    if constexpr (D == 1) {
      cov(0, 0) = std::max(cov(0, 0), cfg.variance_floor);
    } else {
      Eigen::SelfAdjointEigenSolver<M> es(cov);
      if (es.eigenvalues().minCoeff() < cfg.variance_floor) {
        V ev = es.eigenvalues().cwiseMax(cfg.variance_floor);
        cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        cov = 0.5 * (cov + cov.transpose());
      }
    }
  }

  void draw_params(Cluster& cl, int id) {
    refresh(cl, id);
    const double nun = cfg.base_dof + cl.n;
    try {
      M cov = sample_inverse_wishart<D>(nun, cl.Sn, rng);
      floor_cov(cov);
      cl.cov = cov;
      cl.mean = sample_mvnormal<D>(cl.mun, cov / cl.kn, rng);
    } catch (const DomainError& e) {
      throw IterationError(std::string("dpm: cluster parameter draw failed: ") + e.what(), id);
    }
  }

  // Structure-of-arrays copy of the active clusters' Student-t terms, kept
  // aligned with `active` during reallocation (d = 1 fast path).
  std::vector<double> t_loc, t_coef, t_pow, t_lw;

  void put_terms(int s) {
    if constexpr (D == 1) {
      const std::size_t p = pos_in_active[s];
      if (t_loc.size() <= p) {
        t_loc.resize(p + 1);
        t_coef.resize(p + 1);
        t_pow.resize(p + 1);
        t_lw.resize(p + 1);
      }
      const Cluster& cl = slots[s];
      t_loc[p] = cl.loc(0);
      t_coef[p] = cl.prec(0, 0) / cl.dof;
      t_pow[p] = cl.half_pow;
      t_lw[p] = cl.log_count + cl.log_norm;
    }
  }

  void drop_terms(std::size_t p) {
    if constexpr (D == 1) {
      const std::size_t last = t_loc.size() - 1;
      t_loc[p] = t_loc[last];
      t_coef[p] = t_coef[last];
      t_pow[p] = t_pow[last];
      t_lw[p] = t_lw[last];
      t_loc.pop_back();
      t_coef.pop_back();
      t_pow.pop_back();
      t_lw.pop_back();
    }
  }

  void reallocate() {
    const double log_c = std::log(c);
    t_loc.clear();
    t_coef.clear();
    t_pow.clear();
    t_lw.clear();
    for (int s : active) put_terms(s);
    for (std::size_t i : order) {
      const int s = slot_of[i];
      Cluster& old = slots[s];
      remove_point(old, x[i]);
      if (old.n == 0) {
        drop_terms(pos_in_active[s]);
        deactivate(s);
      } else {
        refresh(old, s);
        put_terms(s);
      }
      const std::size_t K = active.size();
      logw.resize(K + 1);
      if constexpr (D == 1) {
        const double xi = x[i](0);
        for (std::size_t k = 0; k < K; ++k) {
          const double d = xi - t_loc[k];
          logw[k] = t_lw[k] - t_pow[k] * std::log(1.0 + t_coef[k] * d * d);
        }
      } else {
        for (std::size_t k = 0; k < K; ++k) {
          const Cluster& cl = slots[active[k]];
          logw[k] = cl.log_count + log_kernel(cl, x[i]);
        }
      }
      logw[K] = log_c + log_kernel(prior, x[i]);
      const std::size_t pick = draw_from_logw();
      const int target = pick == K ? open_slot() : active[pick];
      add_point(slots[target], x[i]);
      refresh(slots[target], target);
      put_terms(target);
      slot_of[i] = target;
    }
  }

  void update_hyper() {
    const int K = static_cast<int>(active.size());
    std::vector<M> inv_cov(K);
    for (int k = 0; k < K; ++k) {
      inv_cov[k] = slots[active[k]].cov.inverse();
      inv_cov[k] = 0.5 * (inv_cov[k] + inv_cov[k].transpose());
    }
    if (cfg.mu0_prior) {
      M prec = M::Identity() / cfg.mu0_prior->variance;
      V lin = V::Constant(cfg.mu0_prior->mean / cfg.mu0_prior->variance);
      for (int k = 0; k < K; ++k) {
        prec += k0 * inv_cov[k];
        lin += k0 * inv_cov[k] * slots[active[k]].mean;
      }
      M cov = prec.inverse();
      cov = 0.5 * (cov + cov.transpose());
      mu0 = sample_mvnormal<D>(cov * lin, cov, rng);
    }
    if (cfg.k0_prior) {
      double quad = 0.0;
      for (int k = 0; k < K; ++k) {
        const V d = slots[active[k]].mean - mu0;
        quad += d.dot(inv_cov[k] * d);
      }
      k0 = sample_gamma(cfg.k0_prior->shape + 0.5 * K * D, cfg.k0_prior->rate + 0.5 * quad, rng);
    }
    if (cfg.scale_prior) {
      M inv = M::Identity() / cfg.scale_prior->scale;
      for (int k = 0; k < K; ++k) inv += inv_cov[k];
      M post = inv.inverse();
      post = 0.5 * (post + post.transpose());
      S = sample_wishart<D>(cfg.scale_prior->dof + K * cfg.base_dof, post, rng);
      floor_cov(S);
    }
  }

  // Escobar & West (1995) auxiliary-variable update.
  void update_concentration() {
    if (!cfg.concentration_prior) return;
    const double a = cfg.concentration_prior->shape;
    const double b = cfg.concentration_prior->rate;
    const double n = static_cast<double>(x.size());
    const double K = static_cast<double>(active.size());
    if (x.empty()) {
      c = sample_gamma(a, b, rng);
      return;
    }
    const double eta = sample_beta(c + 1.0, n, rng);
    const double rate = b - std::log(eta);
    const double odds = (a + K - 1.0) / (n * rate);
    const double p = odds / (1.0 + odds);
    const double shape = rng.uniform() < p ? a + K : a + K - 1.0;
    c = sample_gamma(shape, rate, rng);
  }

  void sweep() {
    recompute_stats();
    refresh_all();
    reallocate();
    for (int s : active) draw_params(slots[s], s);
    update_hyper();
    update_concentration();
    refresh(prior, -1);
    ++iteration;
  }

  // Active slots in order of first appearance along the points.
  std::vector<int> canonical_slots() const {
    std::vector<int> out;
    std::vector<char> seen(slots.size(), 0);
    for (int s : slot_of) {
      if (!seen[s]) {
        seen[s] = 1;
        out.push_back(s);
      }
    }
    return out;
  }

  void fill_labels(std::span<std::int32_t> dst) const {
    std::vector<int> code(slots.size(), 0);
    int next = 0;
    for (std::size_t i = 0; i < slot_of.size(); ++i) {
      int& cde = code[slot_of[i]];
      if (cde == 0) cde = ++next;
      dst[i] = cde;
    }
  }

  void add_predictive(std::span<const double> points, std::span<double> out) const {
    const std::size_t m = points.size() / D;
    const double n = static_cast<double>(x.size());
    const double denom = c + n;
    for (int s : active) {
      const Cluster& cl = slots[s];
      const double w = cl.n / denom;
      Eigen::LLT<M> llt(cl.cov);
      double log_det = 0.0;
      for (int i = 0; i < D; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
      const M inv = llt.solve(M::Identity());
      const double lw = std::log(w) - 0.5 * (D * std::log(2.0 * M_PI) + log_det);
      for (std::size_t j = 0; j < m; ++j) {
        const V z = Eigen::Map<const V>(points.data() + j * D) - cl.mean;
        out[j] += std::exp(lw - 0.5 * z.dot(inv * z));
      }
    }
    const double wp = c / denom;
    for (std::size_t j = 0; j < m; ++j) {
      const V z = Eigen::Map<const V>(points.data() + j * D);
      out[j] += wp * std::exp(log_kernel(prior, z));
    }
  }
};

template <int D>
DpmSampler<D>::DpmSampler(std::span<const double> data, const DpmConfig& config, RngStream rng,
                          std::span<const std::size_t> visit_order)
    : impl_(std::make_unique<Impl>(data, config, std::move(rng), visit_order)) {}

template <int D>
DpmSampler<D>::~DpmSampler() = default;
template <int D>
DpmSampler<D>::DpmSampler(DpmSampler&&) noexcept = default;
template <int D>
DpmSampler<D>& DpmSampler<D>::operator=(DpmSampler&&) noexcept = default;

template <int D>
void DpmSampler<D>::sweep() {
  impl_->sweep();
}

template <int D>
std::size_t DpmSampler<D>::size() const {
  return impl_->x.size();
}

template <int D>
std::vector<double> DpmSampler<D>::allocation_weights(std::size_t i) const {
  const Impl& im = *impl_;
  if (i >= im.x.size()) throw InputError("allocation_weights: point index out of range");
  std::vector<int> sizes;
  std::vector<double> logk;
  for (int s : im.canonical_slots()) {
    typename Impl::Cluster cl = im.slots[s];
    if (s == im.slot_of[i]) {
      Impl::remove_point(cl, im.x[i]);
      if (cl.n == 0) continue;
    }
    im.refresh(cl, s);
    sizes.push_back(cl.n);
    logk.push_back(Impl::log_kernel(cl, im.x[i]));
  }
  typename Impl::Cluster pr = im.prior;
  im.refresh(pr, -1);
  return polya_urn_weights(sizes, logk, im.c, Impl::log_kernel(pr, im.x[i]));
}

template <int D>
DpmState<D> DpmSampler<D>::state() const {
  const Impl& im = *impl_;
  DpmState<D> st;
  st.labels = labels();
  for (int s : im.canonical_slots()) {
    st.sizes.push_back(im.slots[s].n);
    st.clusters.push_back({im.slots[s].mean, im.slots[s].cov});
  }
  st.mu0 = im.mu0;
  st.k0 = im.k0;
  st.scale = im.S;
  st.concentration = im.c;
  st.iteration = im.iteration;
  return st;
}

template <int D>
std::vector<int> DpmSampler<D>::labels() const {
  std::vector<std::int32_t> out(impl_->x.size());
  impl_->fill_labels(out);
  return {out.begin(), out.end()};
}

template <int D>
void DpmSampler<D>::add_predictive(std::span<const double> points, std::span<double> out) const {
  if (points.size() % D != 0 || out.size() != points.size() / D)
    throw InputError("add_predictive: output length must match the number of points");
  impl_->add_predictive(points, out);
}

template <int D>
double DpmSampler<D>::log_prior_predictive(std::span<const double> point) const {
  if (point.size() != static_cast<std::size_t>(D)) throw InputError("log_prior_predictive: wrong dimension");
  typename Impl::Cluster pr = impl_->prior;
  impl_->refresh(pr, -1);
  return Impl::log_kernel(pr, Eigen::Map<const Vec<D>>(point.data()));
}

template class DpmSampler<1>;
template class DpmSampler<2>;

// ---------------------------------------------------------------------------

namespace {

template <int D>
ChainResult run_chain_impl(std::span<const double> data, const DpmConfig& config, const McmcSettings& mcmc,
                           RngStream rng, const ChainOptions& options) {
  DpmSampler<D> sampler(data, config, std::move(rng), options.visit_order);
  const std::size_t n = sampler.size();

  ChainResult out;
  out.trace.n = n;
  out.trace.mcmc = mcmc;
  out.trace.labels.reserve(static_cast<std::size_t>(mcmc.n_save) * n);
  out.trace.num_clusters.reserve(mcmc.n_save);
  if (n >= 2) {
    bool identical = true;
    for (std::size_t i = 1; i < n && identical; ++i) {
      for (int j = 0; j < D; ++j) identical = identical && data[i * D + j] == data[j];
    }
    if (identical) out.trace.warnings.emplace_back("degenerate data: all points identical");
  }

  out.predictive.dim = D;
  out.predictive.points.assign(options.eval_points.begin(), options.eval_points.end());
  out.predictive.density.assign(options.eval_points.size() / D, 0.0);

  for (int it = 0; it < mcmc.n_burn; ++it) sampler.sweep();
  std::vector<std::int32_t> row(n);
  for (int s = 0; s < mcmc.n_save; ++s) {
    for (int t = 0; t < mcmc.thin; ++t) sampler.sweep();
    const auto lab = sampler.labels();
    int K = 0;
    for (std::size_t i = 0; i < n; ++i) {
      row[i] = lab[i];
      K = std::max(K, lab[i]);
    }
    out.trace.labels.insert(out.trace.labels.end(), row.begin(), row.end());
    out.trace.num_clusters.push_back(K);
    if (!out.predictive.density.empty()) sampler.add_predictive(options.eval_points, out.predictive.density);
  }
  for (double& v : out.predictive.density) v /= mcmc.n_save;
  return out;
}

}  // namespace

ChainResult run_chain(std::span<const double> data, const DpmConfig& config, const McmcSettings& mcmc,
                      RngStream rng, const ChainOptions& options) {
  if (mcmc.n_save <= 0) throw InputError("no saved iterations");
  if (mcmc.n_burn < 0 || mcmc.thin < 1) throw InputError("mcmc: n_burn must be >= 0 and thin >= 1");
  config.validate();
  if (options.eval_points.size() % config.dim != 0)
    throw InputError("run_chain: evaluation points do not match the dimension");
  if (config.dim == 1) return run_chain_impl<1>(data, config, mcmc, std::move(rng), options);
  return run_chain_impl<2>(data, config, mcmc, std::move(rng), options);
}

// ---------------------------------------------------------------------------

void write_trace(std::ostream& out, const AllocationTrace& trace, const DpmConfig& config, std::uint64_t seed) {
  out << "# dpmscreen allocation trace\n";
  out << "# seed=" << seed << "\n";
  out << "# n=" << trace.n << " saved=" << trace.saved() << " n_burn=" << trace.mcmc.n_burn
      << " n_save=" << trace.mcmc.n_save << " thin=" << trace.mcmc.thin << "\n";
  out << "# dim=" << config.dim << " concentration=" << config.concentration;
  if (config.concentration_prior)
    out << " concentration_prior=Ga(" << config.concentration_prior->shape << "," << config.concentration_prior->rate
        << ")";
  out << " base_dof=" << config.base_dof << " mu0=" << config.mu0;
  if (config.mu0_prior) out << " mu0_prior=N(" << config.mu0_prior->mean << "," << config.mu0_prior->variance << ")";
  out << " k0=" << config.k0;
  if (config.k0_prior) out << " k0_prior=Ga(" << config.k0_prior->shape << "," << config.k0_prior->rate << ")";
  out << " scale=" << config.scale;
  if (config.scale_prior) out << " scale_prior=W(" << config.scale_prior->dof << "," << config.scale_prior->scale << ")";
  out << "\n";
  for (std::size_t s = 0; s < trace.saved(); ++s) {
    const auto row = trace.iteration(s);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << '\t';
      out << row[i];
    }
    out << '\n';
  }
}

AllocationTrace read_trace(std::istream& in) {
  AllocationTrace trace;
  std::string line;
  bool have_n = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "n") {
          trace.n = std::stoul(val);
          have_n = true;
        } else if (key == "n_burn") {
          trace.mcmc.n_burn = std::stoi(val);
        } else if (key == "n_save") {
          trace.mcmc.n_save = std::stoi(val);
        } else if (key == "thin") {
          trace.mcmc.thin = std::stoi(val);
        }
      }
      continue;
    }
    std::istringstream ss(line);
    std::vector<std::int32_t> row;
    std::int32_t v;
    while (ss >> v) row.push_back(v);
    if (!have_n) {
      trace.n = row.size();
      have_n = true;
    }
    if (row.size() != trace.n) throw InputError("read_trace: row length does not match n");
    trace.num_clusters.push_back(row.empty() ? 0 : *std::max_element(row.begin(), row.end()));
    trace.labels.insert(trace.labels.end(), row.begin(), row.end());
  }
  return trace;
}

}  // namespace dpmscreen

#include "dpmscreen/mi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

namespace dpmscreen {

void MiConfig::validate() const {
  if (k < 1) throw DomainError("mi: k must be at least 1");
}

namespace {

// Mean and sample sd from sorted values, so the result does not depend on order.
std::pair<double, double> moments(const std::vector<double>& v) {
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  std::vector<double> d(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) d[i] = (s[i] - mean) * (s[i] - mean);
  std::sort(d.begin(), d.end());
  const double ss = std::accumulate(d.begin(), d.end(), 0.0);
  return {mean, s.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

void scale_inplace(std::vector<double>& v) {
  const auto [mean, sd] = moments(v);
  for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : x - mean;
}

double sd_of(const std::vector<double>& v) { return moments(v).second; }

// Number of sorted values whose distance |v - c| is below r (or at most r
// when closed), excluding one copy of c itself. Distances are formed exactly
// as in the neighbour search so boundary points are classified consistently.
long count_near(const std::vector<double>& sorted, double c, double r, bool closed) {
  auto inside = [&](double v) {
    const double d = std::abs(v - c);
    return closed ? d <= r : d < r;
  };
  const auto at = std::lower_bound(sorted.begin(), sorted.end(), c);
  long count = 0;
  for (auto it = at; it != sorted.end() && inside(*it); ++it) ++count;
  for (auto it = at; it != sorted.begin() && inside(*(it - 1)); --it) ++count;
  return std::max<long>(0, count - 1);
}

// Returns false when some k-th neighbour distance is zero.
bool estimate(const std::vector<double>& x, const std::vector<double>& y, const MiConfig& cfg, double& result) {
  const std::size_t n = x.size();
  const int k = cfg.k;
  std::vector<double> sx = x;
  std::vector<double> sy = y;
  std::sort(sx.begin(), sx.end());
  std::sort(sy.begin(), sy.end());
  std::vector<double> terms(n);
  std::vector<double> dist(n - 1);
  std::vector<std::size_t> idx(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dist[m] = std::max(std::abs(x[j] - x[i]), std::abs(y[j] - y[i]));
      idx[m] = j;
      ++m;
    }
    if (cfg.variant == MiVariant::Counting) {
      std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
      const double eps = dist[k - 1];
      if (!(eps > 0.0)) return false;
      const long nx = count_near(sx, x[i], eps, false);
      const long ny = count_near(sy, y[i], eps, false);
      terms[i] = digamma(static_cast<double>(nx) + 1.0) + digamma(static_cast<double>(ny) + 1.0);
    } else {
      std::vector<std::size_t> order(n - 1);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                       [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
      double ex = 0.0;
      double ey = 0.0;
      for (int q = 0; q < k; ++q) {
        const std::size_t j = idx[order[q]];
        ex = std::max(ex, std::abs(x[j] - x[i]));
        ey = std::max(ey, std::abs(y[j] - y[i]));
      }
      if (!(ex > 0.0) || !(ey > 0.0)) return false;
      const long nx = std::max<long>(1, count_near(sx, x[i], ex, true));
      const long ny = std::max<long>(1, count_near(sy, y[i], ey, true));
      terms[i] = digamma(static_cast<double>(nx)) + digamma(static_cast<double>(ny));
    }
  }
  // Order-free summation keeps the estimate exactly invariant to reordering.
  std::sort(terms.begin(), terms.end());
  double mean = 0.0;
  for (double t : terms) mean += t;
  mean /= static_cast<double>(n);
  result = digamma(k) + digamma(static_cast<double>(n)) - mean;
  if (cfg.variant == MiVariant::Rectangle) result -= 1.0 / k;
  return true;
}

}  // namespace

double knn_mi(std::span<const double> x, std::span<const double> y, const MiConfig& config, bool* jittered) {
  config.validate();
  if (x.size() != y.size()) throw InputError("mi: samples differ in length");
  const std::size_t n = x.size();
  if (n <= static_cast<std::size_t>(config.k)) throw InputError("mi: sample size must exceed k");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InputError("mi: samples must be finite");
  }
  std::vector<double> vx(x.begin(), x.end());
  std::vector<double> vy(y.begin(), y.end());
  if (config.standardize) {
    scale_inplace(vx);
    scale_inplace(vy);
  }
  if (jittered) *jittered = false;
  double result = 0.0;
  if (estimate(vx, vy, config, result)) return result;

  if (jittered) *jittered = true;
  RngStream rng(0, stable_hash("mi-jitter"));
  const double jx = 1e-10 * std::max(sd_of(vx), 1.0);
  const double jy = 1e-10 * std::max(sd_of(vy), 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    vx[i] += jx * (rng.uniform() - 0.5);
    vy[i] += jy * (rng.uniform() - 0.5);
  }
  if (!estimate(vx, vy, config, result)) throw DomainError("mi: zero neighbour distance persists after jitter");
  return result;
}

double permutation_threshold(std::span<const double> x, std::span<const double> y, const MiConfig& config,
                             int n_perm, double level, RngStream rng) {
  if (n_perm < 20) throw InputError("mi: at least 20 permutations are required");
  if (!(level >= 0.0 && level <= 1.0)) throw DomainError("mi: level must lie in [0, 1]");
  if (x.size() != y.size()) throw InputError("mi: samples differ in length");
  std::vector<double> values(n_perm);
  std::vector<double> yp(y.begin(), y.end());
  for (int p = 0; p < n_perm; ++p) {
    std::copy(y.begin(), y.end(), yp.begin());
    RngStream r = rng.substream(static_cast<std::uint64_t>(p));
    std::shuffle(yp.begin(), yp.end(), r);
    values[p] = knn_mi(x, yp, config);
  }
  std::sort(values.begin(), values.end());
  const double pos = std::ceil((1.0 - level) * n_perm) - 1.0;
  const auto i = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(n_perm - 1)));
  return values[i];
}

}  // namespace dpmscreen

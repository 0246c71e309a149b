#pragma once

// Monte Carlo laws of X_t: ensembles with Malliavin matrices, kernel
// density estimates, positivity of det Gamma and a two-sample KS test.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>
#include <vector>

#include "wchaos/hermite_driver.hpp"
#include "wchaos/malliavin_engine.hpp"
#include "wchaos/sde_engine.hpp"

namespace wchaos {

/// Runs fn(i) for i in [0, count) on up to `workers` threads; the first
/// exception is rethrown after all threads join.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto body = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lk(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  for (std::size_t k = 0; k < n; ++k) pool.emplace_back(body);
  pool.clear();
  if (err) std::rethrow_exception(err);
}

struct EnsembleSetup {
  const KernelField* field = nullptr;
  SdeCoefficients coeffs;
  Vec x0;
  int steps = 0;
  std::uint64_t root_seed = 0;
  bool with_malliavin = true;
};

struct SampleEnsemble {
  double t = 0.0;
  int d = 1;
  std::size_t draws = 0;
  std::vector<double> x_samples;    ///< draws * d
  std::vector<double> det_samples;
  std::vector<double> min_eig;
  std::vector<double> trace;
  std::vector<std::uint64_t> seeds;
  std::vector<char> excluded;       ///< 1 when the sample failed numerically
  std::size_t excluded_count = 0;

  std::vector<double> coordinate(int k) const {
    std::vector<double> out;
    for (std::size_t i = 0; i < draws; ++i)
      if (!excluded[i]) out.push_back(x_samples[i * d + k]);
    return out;
  }
};

/// Seed of sample i under a root seed.
inline std::uint64_t sample_seed(std::uint64_t root, std::size_t i) { return stream_key(root, 0x5EED0000ULL + i); }

/// M independent samples of (X_T, Gamma_T). Each sample is a pure function of
/// (setup, i); samples whose solve blows up are flagged and excluded.
inline SampleEnsemble run_ensemble(const EnsembleSetup& setup, std::size_t M, int workers = 1) {
  require(setup.field != nullptr, ErrorKind::ConfigError, "ensemble needs a kernel field");
  require(M >= 2, ErrorKind::InvalidDimension, "ensemble needs M >= 2");
  const auto& field = *setup.field;
  const int d = setup.coeffs.d;
  SampleEnsemble e;
  e.t = field.times.back();
  e.d = d;
  e.draws = M;
  e.x_samples.assign(M * d, std::numeric_limits<double>::quiet_NaN());
  e.det_samples.assign(M, std::numeric_limits<double>::quiet_NaN());
  e.min_eig = e.det_samples;
  e.trace = e.det_samples;
  e.seeds.resize(M);
  e.excluded.assign(M, 0);
  parallel_for(M, workers, [&](std::size_t i) {
    const std::uint64_t seed = sample_seed(setup.root_seed, i);
    e.seeds[i] = seed;
    try {
      const auto w = sample_omega(field.spec.space, seed);
      auto sol = solve_euler(setup.coeffs, setup.x0, driver_grid(simulate_path(field, w), setup.steps));
      const int n = sol.steps();
      for (int k = 0; k < d; ++k) e.x_samples[i * d + k] = sol.X[static_cast<std::size_t>(n) * d + k];
      if (setup.with_malliavin) {
        solve_theta_all(setup.coeffs, sol);
        const auto dd = compute_driver_derivatives(field, w, setup.steps);
        const auto mf = solution_derivative(sol, dd, field.spec.space, {n});
        const auto M2 = malliavin_matrix(mf, 0);
        e.det_samples[i] = M2.det;
        e.min_eig[i] = M2.min_eig;
        e.trace[i] = M2.trace;
      }
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::Blowup) throw;
      e.excluded[i] = 1;
    }
  });
  e.excluded_count = static_cast<std::size_t>(std::count(e.excluded.begin(), e.excluded.end(), 1));
  return e;
}

struct DensityEstimate {
  std::vector<double> grid;
  std::vector<double> values;
  double bandwidth = 0.0;
  double mass = 0.0;        ///< trapezoid mass on the grid
  bool degenerate = false;  ///< zero-variance sample, no estimate produced

  double at(double x) const {
    if (grid.empty()) return 0.0;
    if (x <= grid.front() || x >= grid.back()) return 0.0;
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - grid.begin());
    const double a = (x - grid[j - 1]) / (grid[j] - grid[j - 1]);
    return (1 - a) * values[j - 1] + a * values[j];
  }
};

/// Gaussian KDE on `points` equispaced nodes covering the sample range
/// widened by 5 bandwidths. bandwidth <= 0 selects Silverman's rule
/// 0.9 min(sd, IQR / 1.34) n^{-1/5}.
inline DensityEstimate kde(const std::vector<double>& samples, double bandwidth = 0.0, int points = 256) {
  require(samples.size() >= 2, ErrorKind::InvalidDimension, "kde needs at least two samples");
  DensityEstimate out;
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var /= (n - 1);
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    out.degenerate = true;
    return out;
  }
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  auto quant = [&](double p) {
    const double pos = p * (n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = quant(0.75) - quant(0.25);
  double spread = sd;
  if (iqr > 0) spread = std::min(sd, iqr / 1.34);
  out.bandwidth = bandwidth > 0 ? bandwidth : 0.9 * spread * std::pow(n, -0.2);
  const double h = out.bandwidth;
  const double lo = sorted.front() - 5 * h, hi = sorted.back() + 5 * h;
  out.grid.resize(points);
  out.values.assign(points, 0.0);
  for (int j = 0; j < points; ++j) out.grid[j] = lo + (hi - lo) * j / (points - 1);
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
  // Samples are sorted, so each node only touches those within 8 bandwidths.
  for (int j = 0; j < points; ++j) {
    const double x = out.grid[j];
    auto a = std::lower_bound(sorted.begin(), sorted.end(), x - 8 * h);
    auto b = std::upper_bound(sorted.begin(), sorted.end(), x + 8 * h);
    double s = 0.0;
    for (auto it = a; it != b; ++it) {
      const double z = (x - *it) / h;
      s += std::exp(-0.5 * z * z);
    }
    out.values[j] = s * norm;
  }
  for (int j = 1; j < points; ++j)
    out.mass += 0.5 * (out.values[j] + out.values[j - 1]) * (out.grid[j] - out.grid[j - 1]);
  return out;
}

struct PositivityReport {
  std::size_t considered = 0;
  std::size_t excluded = 0;
  double fraction_positive = 0.0;
  double min_det = 0.0;
  double median_det = 0.0;
};

/// Fraction of non-excluded samples with det Gamma > eps_det. A negative
/// eps_det selects the per-sample scale 1e-12 (trace / d)^d.
inline PositivityReport positivity_report(const SampleEnsemble& e, double eps_det = -1.0) {
  PositivityReport r;
  r.excluded = e.excluded_count;
  std::vector<double> dets;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < e.draws; ++i) {
    if (e.excluded[i] || std::isnan(e.det_samples[i])) continue;
    const double det = e.det_samples[i];
    const double thr = eps_det >= 0 ? eps_det : 1e-12 * std::pow(e.trace[i] / e.d, e.d);
    if (det > thr) ++pos;
    dets.push_back(det);
  }
  r.considered = dets.size();
  if (dets.empty()) return r;
  r.fraction_positive = static_cast<double>(pos) / dets.size();
  std::sort(dets.begin(), dets.end());
  r.min_det = dets.front();
  const std::size_t mid = dets.size() / 2;
  r.median_det = dets.size() % 2 ? dets[mid] : 0.5 * (dets[mid - 1] + dets[mid]);
  return r;
}

struct KsResult {
  double statistic = 0.0;
  double critical_1pct = 0.0;
  double critical_5pct = 0.0;
  double p_value = 1.0;  ///< asymptotic Kolmogorov tail
};

inline double kolmogorov_tail(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    s += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorKind::InvalidDimension, "KS test needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  KsResult r;
  r.statistic = d;
  const double scale = std::sqrt((na + nb) / (na * nb));
  r.critical_1pct = 1.6276 * scale;
  r.critical_5pct = 1.3581 * scale;
  const double ne = na * nb / (na + nb);
  r.p_value = kolmogorov_tail((std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d);
  return r;
}

}  // namespace wchaos

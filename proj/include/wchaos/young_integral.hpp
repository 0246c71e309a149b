#pragma once

// Pathwise Riemann-Stieltjes (Young) integrals of sampled paths, with
// left-point sums on nested refinements of the sampling grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "wchaos/error.hpp"

namespace wchaos {

struct Partition {
  std::vector<double> points;

  explicit Partition(std::vector<double> p) : points(std::move(p)) {
    require(points.size() >= 2, ErrorKind::DegenerateGrid, "partition needs >= 2 points");
    for (std::size_t i = 1; i < points.size(); ++i)
      require(points[i] > points[i - 1], ErrorKind::DegenerateGrid,
              "partition points must increase strictly");
  }

  static Partition uniform(double a, double b, std::size_t intervals) {
    require(intervals >= 1 && b > a, ErrorKind::DegenerateGrid, "uniform partition needs b > a");
    std::vector<double> p(intervals + 1);
    for (std::size_t i = 0; i <= intervals; ++i) p[i] = a + (b - a) * i / intervals;
    p.back() = b;
    return Partition(std::move(p));
  }

  double mesh() const {
    double m = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) m = std::max(m, points[i] - points[i - 1]);
    return m;
  }
  std::size_t intervals() const noexcept { return points.size() - 1; }
};

struct YoungOptions {
  /// Stop once successive levels differ by less than tol * max(1, |value|).
  double tol = 1e-6;
  int max_levels = 14;
  /// Always refine down to the sampling grid.
  bool exhaust = false;
};

struct YoungResult {
  std::vector<double> value;  ///< one entry for scalar integrators
  int refinement_levels = 0;
  double last_delta = 0.0;
  bool converged = false;
  /// Estimated Holder exponents of integrand and integrator sum to <= 1.
  bool young_warning = false;
  double holder_g = 0.0;
  double holder_phi = 0.0;

  double scalar() const { return value.at(0); }
};

/// Sample indices of the level-k refinement of a grid with n intervals:
/// floor(j n / 2^k), j = 0..2^k; nested in k and equal to the full grid once
/// 2^k >= n.
inline std::vector<std::size_t> dyadic_level(std::size_t n, int k) {
  const std::size_t parts = std::size_t{1} << k;
  if (parts >= n) {
    std::vector<std::size_t> all(n + 1);
    for (std::size_t i = 0; i <= n; ++i) all[i] = i;
    return all;
  }
  std::vector<std::size_t> idx(parts + 1);
  for (std::size_t j = 0; j <= parts; ++j) idx[j] = j * n / parts;
  return idx;
}

/// Holder exponent estimate: slope of the log root-mean-square increment
/// against log lag over short dyadic lags, where many disjoint increments
/// keep the estimate stable.
inline double estimate_holder_exponent(std::span<const double> x, std::size_t dim, double dt) {
  const std::size_t npts = x.size() / dim;
  std::vector<double> lx, ly;
  for (std::size_t lag = 1; lag * 16 <= npts - 1 || lag <= 2; lag *= 2) {
    if (lag >= npts - 1) break;
    double ms = 0.0;
    for (std::size_t i = 0; i + lag < npts; ++i)
      for (std::size_t c = 0; c < dim; ++c) {
        const double d = x[(i + lag) * dim + c] - x[i * dim + c];
        ms += d * d;
      }
    if (ms <= 0.0) continue;
    lx.push_back(std::log(lag * dt));
    ly.push_back(0.5 * std::log(ms / static_cast<double>(npts - lag)));
  }
  if (lx.size() < 2) return 1.0;  // constant or too short to tell
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) mx += lx[k] / n, my += ly[k] / n;
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  return std::min(1.0, sxy / sxx);
}

/// Left-point sum of g against a dim-valued integrator on the given sample
/// indices; phi is row-major (point, component).
inline std::vector<double> left_point_sum(std::span<const double> g, std::span<const double> phi,
                                          std::size_t dim, const std::vector<std::size_t>& idx) {
  std::vector<double> acc(dim, 0.0);
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    const std::size_t u = idx[k], v = idx[k + 1];
    const double gu = g[u];
    for (std::size_t c = 0; c < dim; ++c) acc[c] += gu * (phi[v * dim + c] - phi[u * dim + c]);
  }
  return acc;
}

namespace detail {

inline YoungResult young_refine(std::span<const double> g, std::span<const double> phi,
                                std::size_t dim, double dt, const YoungOptions& opt) {
  const std::size_t npts = g.size();
  require(npts >= 2 && phi.size() == npts * dim, ErrorKind::DegenerateGrid,
          "integrand and integrator must share the sampling grid");
  const std::size_t n = npts - 1;
  YoungResult r;
  r.holder_g = estimate_holder_exponent(g, 1, dt);
  r.holder_phi = estimate_holder_exponent(phi, dim, dt);
  r.young_warning = r.holder_g + r.holder_phi <= 1.0;

  auto norm_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  std::vector<double> prev = left_point_sum(g, phi, dim, dyadic_level(n, 0));
  int level = 0;
  while (true) {
    const bool at_grid = (std::size_t{1} << level) >= n;
    if (at_grid || level >= opt.max_levels) break;
    ++level;
    std::vector<double> cur = left_point_sum(g, phi, dim, dyadic_level(n, level));
    std::vector<double> diff(dim);
    for (std::size_t c = 0; c < dim; ++c) diff[c] = cur[c] - prev[c];
    r.last_delta = norm_of(diff);
    prev = std::move(cur);
    if (!opt.exhaust && r.last_delta < opt.tol * std::max(1.0, norm_of(prev))) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged) r.converged = r.last_delta < opt.tol * std::max(1.0, norm_of(prev));
  r.value = std::move(prev);
  r.refinement_levels = level;
  return r;
}

}  // namespace detail

/// int g dphi for paths sampled on a common uniform grid with spacing dt.
inline YoungResult rs_integral(std::span<const double> g, std::span<const double> phi, double dt,
                               const YoungOptions& opt = {}) {
  return detail::young_refine(g, phi, 1, dt, opt);
}

/// int g dPhi for a Hilbert-valued integrator (rows of length dim).
inline YoungResult rs_integral_hvalued(std::span<const double> g, std::span<const double> Phi,
                                       std::size_t dim, double dt, const YoungOptions& opt = {}) {
  require(dim >= 1, ErrorKind::InvalidDimension, "integrator dimension must be >= 1");
  return detail::young_refine(g, Phi, dim, dt, opt);
}

struct SewingFit {
  double slope = 0.0;      ///< fitted exponent of the one-step defect
  double constant = 0.0;   ///< fitted C in defect <= C |t - s|^slope
  std::vector<double> lags, defects;
};

/// One-step sewing defect || int_s^t g dPhi - g(s)(Phi(t) - Phi(s)) || over
/// dyadic blocks, with the integral taken on the full sampling grid; the
/// maximum over blocks of each length is regressed on the length.
inline SewingFit sewing_defect_fit(std::span<const double> g, std::span<const double> Phi,
                                   std::size_t dim, double dt, std::size_t min_lag = 2) {
  const std::size_t npts = g.size();
  const std::size_t n = npts - 1;
  SewingFit fit;
  for (std::size_t lag = min_lag; lag <= n; lag *= 2) {
    double worst = 0.0;
    for (std::size_t s = 0; s + lag <= n; s += lag) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        double integral = 0.0;
        for (std::size_t u = s; u < s + lag; ++u)
          integral += g[u] * (Phi[(u + 1) * dim + c] - Phi[u * dim + c]);
        const double one_step = g[s] * (Phi[(s + lag) * dim + c] - Phi[s * dim + c]);
        d2 += (integral - one_step) * (integral - one_step);
      }
      worst = std::max(worst, std::sqrt(d2));
    }
    if (worst > 0.0) {
      fit.lags.push_back(lag * dt);
      fit.defects.push_back(worst);
    }
  }
  const std::size_t k = fit.lags.size();
  if (k < 2) return fit;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < k; ++i) mx += std::log(fit.lags[i]) / k, my += std::log(fit.defects[i]) / k;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double x = std::log(fit.lags[i]) - mx;
    sxy += x * (std::log(fit.defects[i]) - my);
    sxx += x * x;
  }
  fit.slope = sxy / sxx;
  fit.constant = std::exp(my - fit.slope * mx);
  return fit;
}

}  // namespace wchaos

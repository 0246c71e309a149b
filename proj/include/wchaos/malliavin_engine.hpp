#pragma once

// Malliavin derivatives of the driver and of the Euler solution, the
// Malliavin matrix, Cameron-Martin shifted drivers and difference-quotient
// checks of the derivative.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "wchaos/chaos_algebra.hpp"
#include "wchaos/hermite_driver.hpp"
#include "wchaos/sde_engine.hpp"
#include "wchaos/young_integral.hpp"

namespace wchaos {

/// D F_t^l on the full space: the block derivative placed in block l.
inline HilbertVec driver_derivative(const KernelField& field, const GaussianDraw& w, std::size_t ti,
                                    int component) {
  require_same(field.spec.space, w.space, "driver_derivative");
  require(ti < field.times.size() && component >= 0 && component < field.spec.m,
          ErrorKind::OutOfRange, "driver_derivative: bad time or component");
  HilbertVec out(field.spec.space);
  const auto blk = block_derivative(field.kernels[ti], field.block_of(w, component));
  const std::size_t shift = static_cast<std::size_t>(component) * field.block_dim();
  std::copy(blk.begin(), blk.end(), out.coords.begin() + shift);
  return out;
}

/// D F^l at the solver grid times k T / steps (k = 0..steps, D F_0 = 0),
/// kept per component as block rows: rows[l] is (steps + 1) * block_dim.
struct DriverDerivatives {
  int steps = 0;
  int m = 1;
  std::size_t block_dim = 0;
  std::vector<std::vector<double>> rows;

  std::span<const double> at(int l, int k) const {
    return std::span<const double>(rows[l]).subspan(static_cast<std::size_t>(k) * block_dim, block_dim);
  }
};

inline DriverDerivatives compute_driver_derivatives(const KernelField& field, const GaussianDraw& w,
                                                    int steps) {
  const auto N = static_cast<int>(field.times.size());
  require(steps >= 1 && N % steps == 0, ErrorKind::DegenerateGrid,
          "kernel times must refine the solver grid");
  DriverDerivatives dd;
  dd.steps = steps;
  dd.m = field.spec.m;
  dd.block_dim = field.block_dim();
  const int stride = N / steps;
  dd.rows.assign(dd.m, std::vector<double>(static_cast<std::size_t>(steps + 1) * dd.block_dim, 0.0));
  for (int l = 0; l < dd.m; ++l) {
    const auto xi = field.block_of(w, l);
    for (int k = 1; k <= steps; ++k) {
      const auto blk = block_derivative(field.kernels[k * stride - 1], xi);
      std::copy(blk.begin(), blk.end(), dd.rows[l].begin() + static_cast<std::size_t>(k) * dd.block_dim);
    }
  }
  return dd;
}

struct MalliavinField {
  SpacePtr space;
  int d = 1, m = 1;
  std::vector<int> steps_at;                 ///< solver grid indices
  std::vector<double> times;
  std::vector<std::vector<HilbertVec>> DX;   ///< DX[j][k] = D X^k at times[j]
  std::vector<std::vector<HilbertVec>> DF;   ///< DF[j][l]
  bool young_warning = false;
};

/// D X_t^k = sum_l int_0^t Theta_t^{k,l}(s) d DF^l(s), an h-valued left-point
/// integral on the solver grid.
inline MalliavinField solution_derivative(const SolutionBundle& s, const DriverDerivatives& dd,
                                          const SpacePtr& space, const std::vector<int>& at_steps) {
  require(dd.steps == s.steps() && dd.m == s.m, ErrorKind::DegenerateGrid,
          "driver derivatives must live on the solver grid");
  require(static_cast<int>(s.theta.size()) == s.steps() + 1, ErrorKind::OutOfRange, "theta not computed");
  require(space->m == s.m && static_cast<std::size_t>(space->n) == dd.block_dim,
          ErrorKind::SpaceMismatch, "space does not match the driver blocks");
  MalliavinField mf;
  mf.space = space;
  mf.d = s.d;
  mf.m = s.m;
  YoungOptions full;
  full.exhaust = true;
  const double dt = s.driver.dt();
  const std::size_t nb = dd.block_dim;
  std::vector<double> g;
  for (int n : at_steps) {
    require(n >= 0 && n <= s.steps(), ErrorKind::OutOfRange, "time index out of range");
    mf.steps_at.push_back(n);
    mf.times.push_back(s.times[n]);
    std::vector<HilbertVec> dx(s.d, HilbertVec(space));
    std::vector<HilbertVec> df(s.m, HilbertVec(space));
    for (int l = 0; l < s.m; ++l) {
      const auto cur = dd.at(l, n);
      std::copy(cur.begin(), cur.end(), df[l].coords.begin() + l * nb);
    }
    if (n > 0) {
      for (int l = 0; l < s.m; ++l) {
        const auto Phi = std::span<const double>(dd.rows[l]).subspan(0, static_cast<std::size_t>(n + 1) * nb);
        for (int k = 0; k < s.d; ++k) {
          g.resize(n + 1);
          for (int i = 0; i <= n; ++i)
            g[i] = s.theta[i][static_cast<std::size_t>(n - i) * s.d * s.m + k * s.m + l];
          const auto r = rs_integral_hvalued(g, Phi, nb, dt, full);
          mf.young_warning = mf.young_warning || r.young_warning;
          std::copy(r.value.begin(), r.value.end(), dx[k].coords.begin() + l * nb);
        }
      }
    }
    mf.DX.push_back(std::move(dx));
    mf.DF.push_back(std::move(df));
  }
  return mf;
}

/// Driver at omega + eps j(h) via the Taylor polynomial of each component.
inline DrivingPath shifted_driver(const KernelField& field, const GaussianDraw& w, const HilbertVec& h,
                                  double eps) {
  require_same(field.spec.space, w.space, "shifted_driver");
  require_same(field.spec.space, h.space, "shifted_driver");
  const std::size_t nb = field.block_dim();
  DrivingPath p{field.times, {}, w.seed};
  p.values.assign(field.times.size(), std::vector<double>(field.spec.m));
  for (int l = 0; l < field.spec.m; ++l) {
    const std::size_t off = static_cast<std::size_t>(l) * nb;
    GaussianDraw wb{field.block_space, {w.xi.begin() + off, w.xi.begin() + off + nb}, w.seed};
    HilbertVec hb(field.block_space, {h.coords.begin() + off, h.coords.begin() + off + nb});
    for (std::size_t ti = 0; ti < field.times.size(); ++ti)
      p.values[ti][l] = taylor_shift(field.kernels[ti], wb, hb, eps);
  }
  return p;
}

inline SolutionBundle shifted_solution(const SdeCoefficients& c, const Vec& x0, const KernelField& field,
                                       const GaussianDraw& w, const HilbertVec& h, double eps, int steps) {
  return solve_euler(c, x0, driver_grid(shifted_driver(field, w, h, eps), steps));
}

struct MalliavinMatrix {
  double t = 0.0;
  int d = 1;
  std::vector<double> gamma;  ///< d*d
  std::vector<double> eigenvalues;
  double det = 0.0;
  double min_eig = 0.0;
  double trace = 0.0;
};

inline MalliavinMatrix malliavin_matrix(const MalliavinField& mf, std::size_t j) {
  require(j < mf.DX.size(), ErrorKind::OutOfRange, "malliavin_matrix: bad time slot");
  const int d = mf.d;
  MalliavinMatrix M;
  M.t = mf.times[j];
  M.d = d;
  Eigen::MatrixXd G(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b <= a; ++b) G(a, b) = G(b, a) = inner(mf.DX[j][a], mf.DX[j][b]);
  M.gamma.assign(G.data(), G.data() + d * d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  M.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + d);
  M.min_eig = es.eigenvalues().minCoeff();
  M.det = G.determinant();
  M.trace = G.trace();
  return M;
}

struct HypothesisReport {
  double h3_min_singular = 0.0;
  bool h3_flag = false;            ///< min singular value below 1e-8
  double h4_max_cross = 0.0;       ///< max |<DF^l, DF^l'>|, l != l'
  double h2_slope = 0.0;           ///< kernel increment exponent
  std::vector<double> h5_premise;  ///< ||int_0^t Y dDF|| per test integrand
};

inline double min_singular_value(const SdeCoefficients& c, const Vec& x) {
  const Vec s = c.sigma(x);
  Eigen::MatrixXd S(c.d, c.m);
  for (int k = 0; k < c.d; ++k)
    for (int l = 0; l < c.m; ++l) S(k, l) = s[k * c.m + l];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);
  return svd.singularValues().minCoeff();
}

/// Dyadic time-index pairs (i, j) with |t_i - t_j| at least `min_gap`.
inline std::vector<std::pair<std::size_t, std::size_t>> dyadic_pairs(const std::vector<double>& times,
                                                                     double min_gap) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t last = times.size() - 1;
  for (std::size_t lag = 1; lag <= last; lag *= 2)
    if (times[last] - times[last - lag] >= min_gap) out.emplace_back(last, last - lag);
  return out;
}

/// Diagnostics of (H2)-(H5) over a set of solved samples. The (H5) entry is
/// the premise quantity ||int_0^T Y dDF^l|| summed in quadrature over l, for
/// scalar test integrands Y on the solver grid; no conclusion is drawn.
inline HypothesisReport hypothesis_checks(const KernelField& field, const SdeCoefficients& c,
                                          const std::vector<SolutionBundle>& sols,
                                          const std::vector<DriverDerivatives>& dfs,
                                          const std::vector<std::vector<double>>& test_integrands = {}) {
  HypothesisReport r;
  r.h3_min_singular = std::numeric_limits<double>::infinity();
  for (const auto& s : sols)
    for (int k = 0; k <= s.steps(); ++k) {
      const Vec x(s.state(k).begin(), s.state(k).end());
      r.h3_min_singular = std::min(r.h3_min_singular, min_singular_value(c, x));
    }
  r.h3_flag = r.h3_min_singular < 1e-8;

  for (const auto& dd : dfs)
    for (int k = 0; k <= dd.steps; ++k)
      for (int a = 0; a < dd.m; ++a)
        for (int b = 0; b < a; ++b) {
          // Full-space inner product of block-embedded vectors.
          HilbertVec u(field.spec.space), v(field.spec.space);
          const auto da = dd.at(a, k), db = dd.at(b, k);
          std::copy(da.begin(), da.end(), u.coords.begin() + a * dd.block_dim);
          std::copy(db.begin(), db.end(), v.coords.begin() + b * dd.block_dim);
          r.h4_max_cross = std::max(r.h4_max_cross, std::abs(inner(u, v)));
        }

  const double gap = 4.0 * field.spec.space->delta;
  const auto pairs = dyadic_pairs(field.times, gap);
  if (pairs.size() >= 2) r.h2_slope = kernel_increment_slope(field, pairs);

  if (!dfs.empty()) {
    const auto& dd = dfs.front();
    YoungOptions full;
    full.exhaust = true;
    const double dt = sols.empty() ? 1.0 / dd.steps : sols.front().driver.dt();
    for (const auto& y : test_integrands) {
      require(y.size() == static_cast<std::size_t>(dd.steps + 1), ErrorKind::InvalidDimension,
              "test integrand must be sampled on the solver grid");
      double sq = 0.0;
      for (int l = 0; l < dd.m; ++l) {
        const auto res = rs_integral_hvalued(y, dd.rows[l], dd.block_dim, dt, full);
        for (double v : res.value) sq += v * v;
      }
      r.h5_premise.push_back(std::sqrt(sq));
    }
  }
  return r;
}

struct DirectionalCheck {
  std::vector<double> eps;
  std::vector<double> quotients;
  std::vector<double> errors;
  double derivative = 0.0;  ///< <D X_t^k, h>
  double order = 0.0;       ///< log-log slope of error against eps
};

/// (X_t^k(omega + eps j(h)) - X_t^k(omega)) / eps against <D X_t^k, h>.
inline DirectionalCheck directional_check(const SdeCoefficients& c, const Vec& x0, const KernelField& field,
                                          const GaussianDraw& w, const HilbertVec& h, int steps, int at_step,
                                          int k, const std::vector<double>& eps_list) {
  const auto base_path = simulate_path(field, w);
  auto sol = solve_euler(c, x0, driver_grid(base_path, steps));
  solve_theta_all(c, sol);
  const auto dd = compute_driver_derivatives(field, w, steps);
  const auto mf = solution_derivative(sol, dd, field.spec.space, {at_step});
  DirectionalCheck out;
  out.derivative = inner(mf.DX[0][k], h);
  const double base = sol.X[static_cast<std::size_t>(at_step) * c.d + k];
  std::vector<double> lx, ly;
  for (double e : eps_list) {
    const auto shifted = shifted_solution(c, x0, field, w, h, e, steps);
    const double q = (shifted.X[static_cast<std::size_t>(at_step) * c.d + k] - base) / e;
    out.eps.push_back(e);
    out.quotients.push_back(q);
    out.errors.push_back(std::abs(q - out.derivative));
    if (out.errors.back() > 0) {
      lx.push_back(std::log(e));
      ly.push_back(std::log(out.errors.back()));
    }
  }
  if (lx.size() >= 2) {
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / n, my += ly[i] / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    out.order = sxy / sxx;
  }
  return out;
}

}  // namespace wchaos

#pragma once

// Explicit Euler for dX = b(X) dt + sigma(X) dF and the linear equation of
// its sensitivity Theta_t(s) = d X_t / d(dF_s).

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "wchaos/error.hpp"
#include "wchaos/hermite_driver.hpp"
#include "wchaos/random.hpp"
#include "wchaos/young_integral.hpp"

namespace wchaos {

using Vec = std::vector<double>;
using VecFn = std::function<Vec(const Vec&)>;

/// Coefficient callables. Layouts (row-major):
///   b: d;  sigma: d*m with [k*m + l] = sigma_{k,l};
///   db: d*d with [k*d + p] = d_p b_k;
///   dsigma: d*m*d with [(k*m + l)*d + p] = d_p sigma_{k,l}.
struct SdeCoefficients {
  std::string name;
  int d = 1;
  int m = 1;
  VecFn b, sigma, db, dsigma;
  /// Attested sup bounds of b, sigma and their derivatives.
  double bound = 1.0;
};

struct DerivativeCheck {
  double max_abs_gap = 0.0;
  double max_rel_gap = 0.0;
  bool ok = true;
};

/// Central differences with step 1e-6 (1 + |x_p|) at probe points drawn
/// around the origin; flags user derivatives that disagree.
inline DerivativeCheck validate_derivatives(const SdeCoefficients& c, int probes = 10,
                                            std::uint64_t seed = 7, double rel_tol = 1e-5,
                                            double radius = 2.0) {
  DerivativeCheck out;
  const std::uint64_t key = stream_key(seed, 77);
  std::uint64_t ctr = 0;
  for (int pr = 0; pr < probes; ++pr) {
    Vec x(c.d);
    for (double& v : x) v = radius * (2.0 * counter_uniform(key, ctr++) - 1.0);
    const Vec db = c.db(x), ds = c.dsigma(x);
    for (int p = 0; p < c.d; ++p) {
      const double h = 1e-6 * (1.0 + std::abs(x[p]));
      Vec xp = x, xm = x;
      xp[p] += h;
      xm[p] -= h;
      const Vec bp = c.b(xp), bm = c.b(xm), sp = c.sigma(xp), sm = c.sigma(xm);
      auto record = [&](double fd, double user) {
        const double gap = std::abs(fd - user);
        out.max_abs_gap = std::max(out.max_abs_gap, gap);
        const double rel = gap / std::max(1.0, std::abs(user));
        out.max_rel_gap = std::max(out.max_rel_gap, rel);
      };
      for (int k = 0; k < c.d; ++k) record((bp[k] - bm[k]) / (2 * h), db[k * c.d + p]);
      for (int k = 0; k < c.d; ++k)
        for (int l = 0; l < c.m; ++l)
          record((sp[k * c.m + l] - sm[k * c.m + l]) / (2 * h), ds[(k * c.m + l) * c.d + p]);
    }
  }
  out.ok = out.max_rel_gap < rel_tol;
  return out;
}

using PresetParams = std::map<std::string, double>;

namespace detail {
inline double param(const PresetParams& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}
}  // namespace detail

/// Named coefficient sets:
///   additive       d = m = 1, b = drift, sigma = vol (constants)
///   linear-scalar  d = m = 1, b = mu x, sigma = lambda x
///   elliptic-2d    d = m = 2, sigma = I + 0.1 P(x) with P orthogonal / sqrt(2),
///                  b = 0.5 (sin x_2, cos x_1)
///   rank1-2d       d = m = 2, b constant, sigma = v u^T (rank one)
inline SdeCoefficients make_preset(const std::string& name, const PresetParams& p = {}) {
  using detail::param;
  SdeCoefficients c;
  c.name = name;
  if (name == "additive") {
    const double drift = param(p, "drift", 0.0), vol = param(p, "vol", 1.0);
    c.d = c.m = 1;
    c.b = [drift](const Vec&) { return Vec{drift}; };
    c.sigma = [vol](const Vec&) { return Vec{vol}; };
    c.db = [](const Vec&) { return Vec{0.0}; };
    c.dsigma = [](const Vec&) { return Vec{0.0}; };
    c.bound = std::max({1.0, std::abs(drift), std::abs(vol)});
  } else if (name == "linear-scalar") {
    const double mu = param(p, "mu", 0.1), lam = param(p, "lambda", 0.2);
    c.d = c.m = 1;
    c.b = [mu](const Vec& x) { return Vec{mu * x[0]}; };
    c.sigma = [lam](const Vec& x) { return Vec{lam * x[0]}; };
    c.db = [mu](const Vec&) { return Vec{mu}; };
    c.dsigma = [lam](const Vec&) { return Vec{lam}; };
    // Not globally bounded; fine on the compact ranges visited in practice.
    c.bound = std::max({1.0, std::abs(mu), std::abs(lam)});
  } else if (name == "elliptic-2d") {
    const double a = param(p, "perturbation", 0.1), beta = param(p, "drift", 0.5);
    const double r = 1.0 / std::numbers::sqrt2;
    c.d = c.m = 2;
    c.b = [beta](const Vec& x) { return Vec{beta * std::sin(x[1]), beta * std::cos(x[0])}; };
    c.sigma = [a, r](const Vec& x) {
      const double s1 = std::sin(x[0]), c2 = std::cos(x[1]);
      return Vec{1.0 + a * r * s1, a * r * c2, -a * r * c2, 1.0 + a * r * s1};
    };
    c.db = [beta](const Vec& x) {
      return Vec{0.0, beta * std::cos(x[1]), -beta * std::sin(x[0]), 0.0};
    };
    c.dsigma = [a, r](const Vec& x) {
      const double c1 = std::cos(x[0]), s2 = std::sin(x[1]);
      // (k,l) blocks of (d_1, d_2)
      return Vec{a * r * c1, 0.0,  0.0, -a * r * s2,
                 0.0, a * r * s2,  a * r * c1, 0.0};
    };
    c.bound = 1.0 + a + beta;
  } else if (name == "rank1-2d") {
    const double b1 = param(p, "drift1", 0.1), b2 = param(p, "drift2", -0.2);
    const double v1 = param(p, "v1", 1.0), v2 = param(p, "v2", 0.5);
    const double u1 = param(p, "u1", 0.6), u2 = param(p, "u2", 0.8);
    c.d = c.m = 2;
    c.b = [b1, b2](const Vec&) { return Vec{b1, b2}; };
    c.sigma = [=](const Vec&) { return Vec{v1 * u1, v1 * u2, v2 * u1, v2 * u2}; };
    c.db = [](const Vec&) { return Vec(4, 0.0); };
    c.dsigma = [](const Vec&) { return Vec(8, 0.0); };
    c.bound = 1.0 + std::abs(v1) + std::abs(v2);
  } else {
    throw Error(ErrorKind::ConfigError, "unknown preset '" + name + "'");
  }
  return c;
}

/// Driver sampled on the uniform solver grid t_k = k T / steps, k = 0..steps.
struct DriverGrid {
  double T = 1.0;
  int steps = 0;
  int m = 1;
  std::vector<double> values;  ///< (steps + 1) * m, row k is F_{t_k}

  double dt() const noexcept { return T / steps; }
  std::span<const double> at(int k) const {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(k) * m, m);
  }
};

/// Subsamples a DrivingPath on a uniform grid (times k T / N, k = 1..N, with
/// F_0 = 0 prepended) to `steps` intervals; N must be a multiple of steps.
inline DriverGrid driver_grid(const DrivingPath& path, int steps) {
  const auto N = static_cast<int>(path.times.size());
  require(N >= 1 && steps >= 1 && N % steps == 0, ErrorKind::DegenerateGrid,
          "driver sample count must be a multiple of the solver steps");
  const double T = path.times.back();
  for (int k = 0; k < N; ++k)
    require(std::abs(path.times[k] - T * (k + 1) / N) < 1e-9 * std::max(1.0, T),
            ErrorKind::DegenerateGrid, "driver times must be the uniform grid k T / N");
  DriverGrid g;
  g.T = T;
  g.steps = steps;
  g.m = path.values.empty() ? 1 : static_cast<int>(path.values[0].size());
  g.values.assign(static_cast<std::size_t>(steps + 1) * g.m, 0.0);
  const int stride = N / steps;
  for (int k = 1; k <= steps; ++k)
    for (int l = 0; l < g.m; ++l) g.values[static_cast<std::size_t>(k) * g.m + l] = path.values[k * stride - 1][l];
  return g;
}

/// Output times k T / N, k = 1..N.
inline std::vector<double> uniform_times(double T, int N) {
  std::vector<double> t(N);
  for (int k = 0; k < N; ++k) t[k] = T * (k + 1) / N;
  return t;
}

struct SolutionBundle {
  std::vector<double> times;        ///< steps + 1 points from 0
  int d = 1, m = 1;
  std::vector<double> X;            ///< (steps + 1) * d
  /// theta[i] holds Theta_{t_n}(t_i) for n = i..steps, each a d*m block
  /// ([k*m + l]); empty until solve_theta_all.
  std::vector<std::vector<double>> theta;
  DriverGrid driver;
  Vec x0;
  double max_increment = 0.0;       ///< max |dF| over steps and components
  double quadratic_variation = 0.0; ///< sum of |dF|^2

  int steps() const noexcept { return static_cast<int>(times.size()) - 1; }
  std::span<const double> state(int k) const {
    return std::span<const double>(X).subspan(static_cast<std::size_t>(k) * d, d);
  }

  /// Theta_{t_n}(t_i); zero when i > n.
  Vec theta_at(int n, int i) const {
    Vec out(static_cast<std::size_t>(d) * m, 0.0);
    if (i > n) return out;
    require(i < static_cast<int>(theta.size()) && !theta[i].empty(), ErrorKind::OutOfRange,
            "theta row not computed");
    const auto* src = theta[i].data() + static_cast<std::size_t>(n - i) * d * m;
    std::copy(src, src + d * m, out.begin());
    return out;
  }
};

inline SolutionBundle solve_euler(const SdeCoefficients& c, const Vec& x0, const DriverGrid& F) {
  require(static_cast<int>(x0.size()) == c.d, ErrorKind::InvalidDimension, "x0 must have d entries");
  require(F.m == c.m, ErrorKind::InvalidDimension, "driver must have m components");
  SolutionBundle s;
  s.d = c.d;
  s.m = c.m;
  s.x0 = x0;
  s.driver = F;
  const int n = F.steps;
  const double dt = F.dt();
  s.times.resize(n + 1);
  for (int k = 0; k <= n; ++k) s.times[k] = F.T * k / n;
  s.X.assign(static_cast<std::size_t>(n + 1) * c.d, 0.0);
  std::copy(x0.begin(), x0.end(), s.X.begin());
  Vec x = x0;
  for (int k = 0; k < n; ++k) {
    const Vec bx = c.b(x), sx = c.sigma(x);
    const auto f0 = F.at(k), f1 = F.at(k + 1);
    Vec next = x;
    for (int j = 0; j < c.d; ++j) {
      next[j] += bx[j] * dt;
      for (int l = 0; l < c.m; ++l) next[j] += sx[j * c.m + l] * (f1[l] - f0[l]);
    }
    for (int l = 0; l < c.m; ++l) {
      const double inc = f1[l] - f0[l];
      s.max_increment = std::max(s.max_increment, std::abs(inc));
      s.quadratic_variation += inc * inc;
    }
    for (double v : next)
      require(std::isfinite(v), ErrorKind::Blowup, "non-finite state at step " + std::to_string(k + 1));
    x = std::move(next);
    std::copy(x.begin(), x.end(), s.X.begin() + static_cast<std::size_t>(k + 1) * c.d);
  }
  return s;
}

/// Theta_{t_n}(t_i) for n = i..steps as one flat row.
///
/// The row starts from sigma(X_{t_i}) at n = i and n = i + 1 and then follows
///   Theta_{n+1} = Theta_n + db(X_n) Theta_n dt + sum_q dsigma_q(X_n) Theta_n dF^q_n.
/// With this one-step lag Theta_{t_n}(t_i) is exactly dX_n / d(dF_i) for the
/// Euler map, so sums of Theta against increments of a direction reproduce
/// the derivative of the discrete solution.
inline std::vector<double> solve_theta(const SdeCoefficients& c, const SolutionBundle& s, int i) {
  const int n = s.steps();
  require(i >= 0 && i <= n, ErrorKind::OutOfRange, "theta start index out of range");
  const int d = c.d, m = c.m;
  const std::size_t blk = static_cast<std::size_t>(d) * m;
  const double dt = s.driver.dt();
  std::vector<double> row(static_cast<std::size_t>(n - i + 1) * blk);
  const Vec xi(s.state(i).begin(), s.state(i).end());
  const Vec sig = c.sigma(xi);
  std::copy(sig.begin(), sig.end(), row.begin());
  if (i == n) return row;
  std::copy(sig.begin(), sig.end(), row.begin() + blk);
  Vec th = sig, next(blk);
  for (int k = i + 1; k < n; ++k) {
    const Vec xk(s.state(k).begin(), s.state(k).end());
    const Vec db = c.db(xk), ds = c.dsigma(xk);
    const auto f0 = s.driver.at(k), f1 = s.driver.at(k + 1);
    for (int j = 0; j < d; ++j)
      for (int l = 0; l < m; ++l) {
        double v = th[j * m + l];
        for (int p = 0; p < d; ++p) {
          double coef = db[j * d + p] * dt;
          for (int q = 0; q < m; ++q) coef += ds[(j * m + q) * d + p] * (f1[q] - f0[q]);
          v += coef * th[p * m + l];
        }
        next[j * m + l] = v;
      }
    th.swap(next);
    for (double v : th)
      require(std::isfinite(v), ErrorKind::Blowup, "non-finite theta at step " + std::to_string(k + 1));
    std::copy(th.begin(), th.end(), row.begin() + static_cast<std::size_t>(k + 1 - i) * blk);
  }
  return row;
}

inline void solve_theta_all(const SdeCoefficients& c, SolutionBundle& s) {
  const int n = s.steps();
  s.theta.resize(n + 1);
  for (int i = 0; i <= n; ++i) s.theta[i] = solve_theta(c, s, i);
}

/// DPsi(F)[psi]_{t_n}^k = sum_l int_0^{t_n} Theta_{t_n}^{k,l}(s) dpsi_s^l for
/// every grid time; psi is (steps + 1) * m. Returns (steps + 1) * d.
inline std::vector<double> frechet_directional(const SolutionBundle& s, std::span<const double> psi) {
  const int n = s.steps(), d = s.d, m = s.m;
  require(psi.size() == static_cast<std::size_t>(n + 1) * m, ErrorKind::InvalidDimension,
          "direction must be sampled on the solver grid");
  require(static_cast<int>(s.theta.size()) == n + 1, ErrorKind::OutOfRange, "theta not computed");
  std::vector<double> out(static_cast<std::size_t>(n + 1) * d, 0.0);
  YoungOptions full;
  full.exhaust = true;
  const double dt = s.driver.dt();
  std::vector<double> g, phi;
  for (int t = 1; t <= n; ++t) {
    for (int k = 0; k < d; ++k) {
      double acc = 0.0;
      for (int l = 0; l < m; ++l) {
        g.resize(t + 1);
        phi.resize(t + 1);
        for (int i = 0; i <= t; ++i) {
          g[i] = s.theta[i][static_cast<std::size_t>(t - i) * d * m + k * m + l];
          phi[i] = psi[static_cast<std::size_t>(i) * m + l];
        }
        acc += rs_integral(g, phi, dt, full).scalar();
      }
      out[static_cast<std::size_t>(t) * d + k] = acc;
    }
  }
  return out;
}

}  // namespace wchaos

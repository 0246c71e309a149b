#pragma once

// Hermite processes Z^{H,q} as q-th chaos integrals of the kernels
//   L_t(xi) = c(H,q) int_0^t prod_j (s - xi_j)_+^{H0 - 3/2} ds,
// realized on the discrete Wiener space, with one block of the noise per
// component so that all m components share a single isonormal process.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "wchaos/chaos_algebra.hpp"
#include "wchaos/error.hpp"
#include "wchaos/wiener_core.hpp"

namespace wchaos {

struct HurstAux {
  double H0 = 0.0;
  double c = 0.0;
};

inline double beta_fn(double a, double b) {
  return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

/// H0 = 1 + (H-1)/q and c(H,q) = sqrt(H(2H-1) / (q! B(H0-1/2, 2-2H0)^q)).
inline HurstAux hurst_aux(double H, int q) {
  require(H > 0.5 && H < 1.0, ErrorKind::OutOfRange, "H must lie in (1/2, 1)");
  require(q >= 1, ErrorKind::OutOfRange, "order q must be >= 1");
  HurstAux r;
  r.H0 = 1.0 + (H - 1.0) / q;
  const double b = beta_fn(r.H0 - 0.5, 2.0 - 2.0 * r.H0);
  r.c = std::sqrt(H * (2.0 * H - 1.0) / (factorial(q) * std::pow(b, q)));
  return r;
}

struct HermiteSpec {
  int q = 1;
  double H = 0.7;
  int m = 1;
  SpacePtr space;
  /// Nodes of the pointwise s-quadrature in kernel_eval.
  int s_nodes = 64;
  std::vector<double> out_times;
  /// Cap on dense tensor entries per output time and component block.
  std::size_t max_entries = std::size_t{1} << 26;

  HurstAux aux() const { return hurst_aux(H, q); }

  void validate() const {
    require(q >= 1 && q <= kMaxProcessOrder, ErrorKind::UnsupportedOrder,
            "Hermite order must lie in [1, 3]");
    require(H > 0.5 && H < 1.0, ErrorKind::OutOfRange, "(H2) requires H in (1/2, 1)");
    require(space != nullptr && space->m == m, ErrorKind::InvalidDimension,
            "spec space must have m components");
    require(s_nodes >= 2, ErrorKind::InvalidDimension, "s_nodes must be >= 2");
    require(!out_times.empty(), ErrorKind::InvalidDimension, "out_times must be nonempty");
    for (std::size_t i = 0; i < out_times.size(); ++i) {
      require(out_times[i] > 0.0 && out_times[i] > space->lo && out_times[i] <= space->hi,
              ErrorKind::OutOfRange, "out_times must lie in (max(lo, 0), hi]");
      if (i) require(out_times[i] > out_times[i - 1], ErrorKind::OutOfRange,
                     "out_times must be strictly increasing");
    }
  }
};

/// L_t(xi) pointwise. q = 1 uses the closed antiderivative; q >= 2 a midpoint
/// rule in u on s = lo + (t - lo) u^p, which tames the integrable singularity
/// of (s - max xi)^{H0-3/2} at the lower limit.
inline double kernel_eval(const HermiteSpec& spec, double t, std::span<const double> xi) {
  require(t > 0.0, ErrorKind::OutOfRange, "kernel_eval needs t > 0");
  require(static_cast<int>(xi.size()) == spec.q, ErrorKind::InvalidDimension,
          "kernel_eval needs q arguments");
  const auto aux = spec.aux();
  const double a = aux.H0 - 1.5;
  double top = 0.0;
  for (double x : xi) {
    if (x >= t) return 0.0;
    top = std::max(top, x);
  }
  if (spec.q == 1) {
    const double e = spec.H - 0.5;
    const double x = xi[0];
    const double neg = x < 0.0 ? std::pow(-x, e) : 0.0;
    return aux.c / e * (std::pow(t - x, e) - neg);
  }
  const double lo = top;
  const double len = t - lo;
  const double p = 2.0 / (a + 1.0);
  const int n = spec.s_nodes;
  double s_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = (k + 0.5) / n;
    const double s = lo + len * std::pow(u, p);
    const double jac = len * p * std::pow(u, p - 1.0) / n;
    double prod = 1.0;
    for (double x : xi) prod *= std::pow(s - x, a);
    s_sum += prod * jac;
  }
  return aux.c * s_sum;
}

/// Per-time kernels of one component block; component l of the process is
/// I_q of the same block tensor placed on the l-th block of the noise.
struct KernelField {
  HermiteSpec spec;
  SpacePtr block_space;            ///< one-component copy of spec.space
  std::vector<double> times;       ///< equals spec.out_times
  std::vector<Tensor> kernels;     ///< order-q tensor over block_space per time

  std::size_t block_dim() const noexcept { return block_space->basis_dim(); }

  std::span<const double> block_of(const GaussianDraw& w, int component) const {
    const std::size_t n = block_dim();
    return std::span<const double>(w.xi).subspan(static_cast<std::size_t>(component) * n, n);
  }

  /// The component-l kernel as a tensor on the full m-component space.
  Tensor component_kernel(std::size_t ti, int component) const {
    const auto& full = spec.space;
    const int q = spec.q;
    Tensor out(full, q);
    const Tensor& k = kernels.at(ti);
    const std::size_t n = block_dim();
    const std::size_t shift = static_cast<std::size_t>(component) * n;
    std::array<std::size_t, kMaxTensorOrder> idx{}, fidx{};
    for (std::size_t off = 0; off < k.data.size(); ++off) {
      if (k.data[off] == 0.0) continue;
      unravel(off, n, q, idx.data());
      for (int a = 0; a < q; ++a) fidx[a] = idx[a] + shift;
      out.data[out.offset(std::span<const std::size_t>(fidx.data(), q))] = k.data[off];
    }
    return out;
  }
};

namespace detail {

// Gauss-Legendre nodes/weights on [0, 1].
inline void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (z * p1 - p0) / (z * z - 1.0);
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

// (y)_+^e with the convention 0 for y <= 0.
inline double ppow(double y, double e) { return y > 0.0 ? std::pow(y, e) : 0.0; }

// A(x) = (t - x)_+^p - (-x)_+^p without cancellation for x << 0.
inline double shifted_power_diff(double t, double x, double p) {
  if (x >= 0.0) return ppow(t - x, p);
  const double mx = -x;
  return std::pow(mx, p) * std::expm1(p * std::log1p(t / mx));
}

}  // namespace detail

/// Kernels as exact L^2 projections of L_t onto the cell-indicator tensors:
///   f_t(i_1..i_q) = c prod_k |cell i_k|^{-1/2} int_0^t prod_k G_{i_k}(s) ds,
///   G_i(s) = int_{cell i} (s - x)_+^{H0-3/2} dx.
/// I_q(f_t) is then the conditional expectation of Z_t given the cell noises,
/// so the discrete covariance is q! <P L_s, P L_t> and kernels stay finite on
/// the diagonal where L_t itself is singular. The s-integral runs over
/// subintervals split at every cell edge and output time, each with a graded
/// Gauss-Legendre rule that absorbs the (s - edge)^{H0-1/2} endpoint behavior.
inline KernelField build_kernels(const HermiteSpec& spec, int gl_nodes = 8) {
  spec.validate();
  const auto aux = spec.aux();
  const double a = aux.H0 - 1.5;
  const double p1 = a + 1.0;  // exponent of G
  const auto& sp = *spec.space;
  const int q = spec.q;
  const std::size_t n = static_cast<std::size_t>(sp.n);
  require(ipow(n, q) <= spec.max_entries, ErrorKind::MemoryBudgetExceeded,
          "kernel tensor of " + std::to_string(ipow(n, q)) + " entries exceeds budget");

  KernelField field;
  field.spec = spec;
  field.block_space = make_partition_hilbert(1, sp.edges);
  std::const_pointer_cast<HilbertDisc>(field.block_space)->delta = sp.delta;
  field.times = spec.out_times;

  std::vector<double> inv_sqrt_w(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt_w[i] = 1.0 / std::sqrt(sp.width(static_cast<int>(i)));

  if (q == 1) {
    // Closed form: int_0^t G_i(s) ds = [A(x0) - A(x1)] / ((a+1)(a+2)).
    const double p2 = a + 2.0;
    for (double t : spec.out_times) {
      Tensor k(field.block_space, 1);
      for (std::size_t i = 0; i < n; ++i) {
        const double x0 = sp.edges[i], x1 = sp.edges[i + 1];
        if (x0 >= t) break;
        const double v = detail::shifted_power_diff(t, x0, p2) - detail::shifted_power_diff(t, x1, p2);
        k.data[i] = aux.c * v / (p1 * p2) * inv_sqrt_w[i];
      }
      field.kernels.push_back(std::move(k));
    }
    return field;
  }

  std::vector<double> gx, gw;
  detail::gauss_legendre01(gl_nodes, gx, gw);
  const double grade = 3.0;

  Tensor acc(field.block_space, q);
  double s_prev = 0.0;
  std::vector<double> G(n);
  for (double t : spec.out_times) {
    // Breakpoints in (s_prev, t): cell edges.
    std::vector<double> bps{s_prev};
    for (double e : sp.edges)
      if (e > s_prev && e < t) bps.push_back(e);
    bps.push_back(t);
    for (std::size_t b = 0; b + 1 < bps.size(); ++b) {
      const double lo = bps[b], len = bps[b + 1] - bps[b];
      for (int g = 0; g < gl_nodes; ++g) {
        const double u = gx[g];
        const double s = lo + len * std::pow(u, grade);
        const double wq = aux.c * len * grade * std::pow(u, grade - 1.0) * gw[g];
        std::size_t active = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const double x0 = sp.edges[i], x1 = sp.edges[i + 1];
          if (x0 >= s) {
            G[i] = 0.0;
            continue;
          }
          G[i] = (std::pow(s - x0, p1) - detail::ppow(s - x1, p1)) / p1 * inv_sqrt_w[i];
          active = i + 1;
        }
        if (q == 2) {
          for (std::size_t i = 0; i < active; ++i) {
            const double gi = wq * G[i];
            double* row = acc.data.data() + i * n;
            for (std::size_t j = 0; j < active; ++j) row[j] += gi * G[j];
          }
        } else {
          for (std::size_t i = 0; i < active; ++i)
            for (std::size_t j = 0; j < active; ++j) {
              const double gij = wq * G[i] * G[j];
              double* row = acc.data.data() + (i * n + j) * n;
              for (std::size_t l = 0; l < active; ++l) row[l] += gij * G[l];
            }
        }
      }
    }
    // Accumulation order differs across permutations; mirror the sorted entry.
    Tensor out = acc;
    std::size_t idx[kMaxTensorOrder];
    for (std::size_t off = 0; off < out.data.size(); ++off) {
      unravel(off, n, q, idx);
      std::sort(idx, idx + q);
      out.data[off] = acc.data[out.offset(std::span<const std::size_t>(idx, q))];
    }
    field.kernels.push_back(std::move(out));
    s_prev = t;
  }
  return field;
}

/// Driving path F_t = (I_q(f_t^1), ..., I_q(f_t^m)) at the field's times.
struct DrivingPath {
  std::vector<double> times;
  std::vector<std::vector<double>> values;  ///< values[time][component]
  std::uint64_t seed = 0;
};

inline double component_value(const KernelField& field, std::size_t ti, int component,
                              const GaussianDraw& w) {
  return wick_eval(field.kernels[ti], field.block_of(w, component));
}

inline DrivingPath simulate_path(const KernelField& field, const GaussianDraw& w) {
  require_same(field.spec.space, w.space, "simulate_path");
  DrivingPath p{field.times, {}, w.seed};
  p.values.resize(field.times.size(), std::vector<double>(field.spec.m));
  for (std::size_t ti = 0; ti < field.times.size(); ++ti)
    for (int l = 0; l < field.spec.m; ++l) p.values[ti][l] = component_value(field, ti, l, w);
  return p;
}

/// D_r of I_q(f) on one block: entry r is q I_{q-1}(f(., r)).
inline std::vector<double> block_derivative(const Tensor& f, std::span<const double> xi) {
  const std::size_t n = f.dim();
  std::vector<double> out(n, 0.0);
  if (f.order == 1) return f.data;
  if (f.order == 2) {
    for (std::size_t r = 0; r < n; ++r) {
      const double* row = f.data.data() + r * n;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += row[i] * xi[i];
      out[r] = 2.0 * s;
    }
    return out;
  }
  for (std::size_t r = 0; r < n; ++r) {
    const std::array<std::size_t, 1> one{r};
    out[r] = f.order * wick_eval(slice_last(f, one), xi);
  }
  return out;
}

/// E[Z_s Z_t] = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2.
inline double covariance_theoretical(double s, double t, double H) {
  require(s >= 0.0 && t >= 0.0, ErrorKind::OutOfRange, "covariance needs s, t >= 0");
  return 0.5 * (std::pow(t, 2 * H) + std::pow(s, 2 * H) - std::pow(std::abs(t - s), 2 * H));
}

/// Independent approximation of the marginal laws by the non-central limit
/// theorem: normalized partial sums of H_q(eta_k) for a stationary Gaussian
/// sequence with correlation of fractional Gaussian noise at Hurst index H0.
/// Not pathwise coupled to the kernel construction.
class NcltSampler {
 public:
  NcltSampler(int q, double H, int resolution, double t_max) : q_(q), H_(H), res_(resolution) {
    require(q >= 1 && q <= kMaxProcessOrder, ErrorKind::UnsupportedOrder, "NCLT order in [1,3]");
    require(resolution >= 8 && t_max > 0, ErrorKind::InvalidDimension, "NCLT resolution >= 8");
    const double H0 = 1.0 + (H - 1.0) / q;
    len_ = static_cast<std::size_t>(std::ceil(t_max * resolution));
    std::vector<double> rho(len_);
    for (std::size_t k = 0; k < len_; ++k) {
      const double kk = static_cast<double>(k);
      rho[k] = 0.5 * (std::pow(kk + 1, 2 * H0) - 2 * std::pow(kk, 2 * H0) +
                      std::pow(std::abs(kk - 1), 2 * H0));
    }
    // Cholesky of the Toeplitz covariance.
    chol_.assign(len_ * len_, 0.0);
    for (std::size_t i = 0; i < len_; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = rho[i - j];
        for (std::size_t k = 0; k < j; ++k) s -= chol_[i * len_ + k] * chol_[j * len_ + k];
        if (i == j) {
          require(s > 0, ErrorKind::NoConvergence, "fGn covariance not positive definite");
          chol_[i * len_ + i] = std::sqrt(s);
        } else {
          chol_[i * len_ + j] = s / chol_[j * len_ + j];
        }
      }
    }
    // Var(sum_{k<res} H_q(eta_k)) = q! sum_{j,k} rho(j-k)^q.
    double v = 0.0;
    for (int j = 0; j < res_; ++j)
      for (int k = 0; k < res_; ++k) v += std::pow(rho[std::abs(j - k)], q_);
    norm_ = std::sqrt(factorial(q_) * v);
  }

  /// Path values at `times` (each <= t_max).
  std::vector<double> sample(const std::vector<double>& times, std::uint64_t seed) const {
    std::vector<double> z(len_), eta(len_, 0.0);
    const std::uint64_t key = stream_key(seed, 1);
    for (std::size_t i = 0; i < len_; ++i) z[i] = counter_normal(key, i);
    for (std::size_t i = 0; i < len_; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += chol_[i * len_ + k] * z[k];
      eta[i] = s;
    }
    std::vector<double> out;
    out.reserve(times.size());
    std::size_t k = 0;
    double partial = 0.0;
    for (double t : times) {
      const auto upto = std::min(len_, static_cast<std::size_t>(std::floor(t * res_ + 1e-9)));
      for (; k < upto; ++k) partial += hermite_poly(q_, eta[k]);
      out.push_back(partial / norm_);
    }
    return out;
  }

 private:
  int q_;
  double H_;
  int res_;
  std::size_t len_ = 0;
  std::vector<double> chol_;
  double norm_ = 1.0;
};

inline DrivingPath simulate_nclt(const HermiteSpec& spec, std::uint64_t seed, int resolution = 256) {
  require(spec.q <= kMaxProcessOrder, ErrorKind::UnsupportedOrder, "NCLT needs q <= 3");
  NcltSampler sampler(spec.q, spec.H, resolution, spec.out_times.back());
  DrivingPath p{spec.out_times, {}, seed};
  p.values.assign(spec.out_times.size(), std::vector<double>(spec.m));
  for (int l = 0; l < spec.m; ++l) {
    const auto v = sampler.sample(spec.out_times, stream_key(seed, 1000 + l));
    for (std::size_t i = 0; i < v.size(); ++i) p.values[i][l] = v[i];
  }
  return p;
}

/// The two sides of
///   int_{t-eps}^t |D_r Z_t - D_r Z_{t-eps}|^2 dr  =law=  eps^{2H} int_0^1 |D_r Z_1|^2 dr.
/// The right-hand grid is the affine image x -> (x - (t - eps)) / eps of the
/// left-hand grid, so the two discrete statistics have the same law up to
/// quadrature error.
class SelfSimilarityExperiment {
 public:
  SelfSimilarityExperiment(int q, double H, double t, double eps, SpacePtr lhs_space)
      : q_(q), H_(H), t_(t), eps_(eps) {
    require(eps > 0.0 && eps < t, ErrorKind::OutOfRange, "self-similarity needs 0 < eps < t");
    require(lhs_space->m == 1, ErrorKind::InvalidDimension, "self-similarity uses one component");
    HermiteSpec ls;
    ls.q = q;
    ls.H = H;
    ls.m = 1;
    ls.space = lhs_space;
    ls.out_times = {t - eps, t};
    const auto lk = build_kernels(ls);
    diff_ = lk.kernels[1] - lk.kernels[0];
    lhs_space_ = lhs_space;
    lhs_cells_ = window(*lhs_space, t - eps, t);

    rhs_space_ = affine_image(*lhs_space, t - eps, eps);
    HermiteSpec rs = ls;
    rs.space = rhs_space_;
    rs.out_times = {(t - (t - eps)) / eps};
    rhs_kernel_ = build_kernels(rs).kernels[0];
    rhs_cells_ = window(*rhs_space_, 0.0, 1.0);
  }

  const SpacePtr& lhs_space() const noexcept { return lhs_space_; }
  const SpacePtr& rhs_space() const noexcept { return rhs_space_; }

  double lhs(const GaussianDraw& w) const {
    require_same(w.space, lhs_space_, "self-similarity lhs");
    const auto d = block_derivative(diff_, w.xi);
    double s = 0.0;
    for (int i = lhs_cells_.first; i < lhs_cells_.second; ++i) s += d[i] * d[i];
    return s;
  }

  double rhs(const GaussianDraw& w) const {
    require_same(w.space, rhs_space_, "self-similarity rhs");
    const auto d = block_derivative(rhs_kernel_, w.xi);
    double s = 0.0;
    for (int i = rhs_cells_.first; i < rhs_cells_.second; ++i) s += d[i] * d[i];
    return std::pow(eps_, 2 * H_) * s;
  }

 private:
  static std::pair<int, int> window(const HilbertDisc& sp, double a, double b) {
    const int i0 = sp.first_cell_at_or_after(a - 1e-12);
    const int i1 = sp.first_cell_at_or_after(b - 1e-12);
    require(std::abs(sp.edges[i0] - a) < 1e-9 && std::abs(sp.edges[i1] - b) < 1e-9,
            ErrorKind::DegenerateGrid, "self-similarity window must align with cell edges");
    return {i0, i1};
  }

  int q_;
  double H_, t_, eps_;
  SpacePtr lhs_space_, rhs_space_;
  Tensor diff_, rhs_kernel_;
  std::pair<int, int> lhs_cells_, rhs_cells_;
};

inline std::pair<double, double> self_similarity_stat(const SelfSimilarityExperiment& exp,
                                                      const GaussianDraw& w_lhs,
                                                      const GaussianDraw& w_rhs) {
  return {exp.lhs(w_lhs), exp.rhs(w_rhs)};
}

struct HolderNorms {
  double c_theta = 0.0;
  double w1_alpha = 0.0;
  double w2_oneminusalpha = 0.0;
};

/// ||f||_theta = sup |f| + sup_{s<t} |f(t) - f(s)| / (t - s)^theta on the grid.
inline double holder_theta_norm(std::span<const double> values, double T, double theta) {
  const std::size_t n = values.size();
  require(n >= 8 && T > 0, ErrorKind::DegenerateGrid, "Holder norms need >= 8 grid points");
  const double dt = T / (n - 1);
  double sup = 0.0, quot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sup = std::max(sup, std::abs(values[i]));
    for (std::size_t j = 0; j < i; ++j)
      quot = std::max(quot, std::abs(values[i] - values[j]) / std::pow((i - j) * dt, theta));
  }
  return sup + quot;
}

/// Grid estimators of ||.||_theta with theta = H - beta + gamma, ||.||_{alpha,1}
/// and ||.||_{1-alpha,2} for a path sampled uniformly on [0, T]. The singular
/// integrals use the trapezoid rule away from the diagonal and a rectangle on
/// the cell touching it.
inline HolderNorms holder_norms(std::span<const double> values, double T, const HolderConfig& cfg) {
  cfg.validate();
  const std::size_t n = values.size();
  require(n >= 8 && T > 0, ErrorKind::DegenerateGrid, "Holder norms need >= 8 grid points");
  const double dt = T / (n - 1);
  const double alpha = cfg.alpha();
  HolderNorms out;
  out.c_theta = holder_theta_norm(values, T, cfg.H - cfg.beta + cfg.gamma);

  for (std::size_t i = 0; i < n; ++i) {
    double integral = 0.0;
    if (i >= 1) {
      auto g = [&](std::size_t j) {
        return std::abs(values[i] - values[j]) / std::pow((i - j) * dt, alpha + 1.0);
      };
      for (std::size_t j = 0; j + 1 < i; ++j) integral += 0.5 * (g(j) + g(j + 1)) * dt;
      integral += g(i - 1) * dt;
    }
    out.w1_alpha = std::max(out.w1_alpha, std::abs(values[i]) + integral);
  }

  for (std::size_t s = 0; s < n; ++s) {
    double cum = 0.0;
    auto g = [&](std::size_t k) {
      return std::abs(values[k] - values[s]) / std::pow((k - s) * dt, 2.0 - alpha);
    };
    for (std::size_t t = s + 1; t < n; ++t) {
      if (t == s + 1) cum += g(t) * dt;
      else cum += 0.5 * (g(t - 1) + g(t)) * dt;
      const double q = std::abs(values[t] - values[s]) / std::pow((t - s) * dt, 1.0 - alpha);
      out.w2_oneminusalpha = std::max(out.w2_oneminusalpha, q + cum);
    }
  }
  return out;
}

/// Least-squares slope of log ||f_t - f_s|| against log |t - s| over the
/// given time-index pairs of a field.
inline double kernel_increment_slope(const KernelField& field,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::vector<double> xs, ys;
  for (auto [i, j] : pairs) {
    const double dn = tensor_norm(field.kernels[i] - field.kernels[j]);
    xs.push_back(std::log(std::abs(field.times[i] - field.times[j])));
    ys.push_back(std::log(dn));
  }
  const double n = static_cast<double>(xs.size());
  require(n >= 2, ErrorKind::DegenerateGrid, "slope fit needs >= 2 pairs");
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) mx += xs[k] / n, my += ys[k] / n;
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  return sxy / sxx;
}

// Portable text table of a KernelField:
//   # wchaos-kernels 1
//   # q <q> H <H> m <m>
//   # edges <e_0> ... <e_n>
//   # times <t_0> ... <t_k>
//   <time index> <i_1> ... <i_q> <coefficient>
// One line per nonzero canonical (sorted) block multi-index; reals carry 17
// significant digits.
inline void export_kernels(const KernelField& field, std::ostream& os) {
  const auto old_prec = os.precision();
  os << std::setprecision(17);
  os << "# wchaos-kernels 1\n";
  os << "# q " << field.spec.q << " H " << field.spec.H << " m " << field.spec.m << "\n";
  os << "# edges";
  for (double e : field.spec.space->edges) os << ' ' << e;
  os << "\n# times";
  for (double t : field.times) os << ' ' << t;
  os << '\n';
  const int q = field.spec.q;
  const std::size_t n = field.block_dim();
  std::array<std::size_t, kMaxTensorOrder> idx{};
  for (std::size_t ti = 0; ti < field.kernels.size(); ++ti) {
    const auto& k = field.kernels[ti];
    for (std::size_t off = 0; off < k.data.size(); ++off) {
      unravel(off, n, q, idx.data());
      if (!std::is_sorted(idx.begin(), idx.begin() + q) || k.data[off] == 0.0) continue;
      os << ti;
      for (int a = 0; a < q; ++a) os << ' ' << idx[a];
      os << ' ' << k.data[off] << '\n';
    }
  }
  os.precision(old_prec);
}

inline KernelField import_kernels(std::istream& is) {
  std::string line;
  KernelField field;
  HermiteSpec spec;
  std::vector<double> edges;
  bool have_header = false;
  while (is.peek() == '#' && std::getline(is, line)) {
    std::istringstream ls(line.substr(1));
    std::string tag;
    ls >> tag;
    if (tag == "wchaos-kernels") {
      have_header = true;
    } else if (tag == "q") {
      std::string hk, mk;
      ls >> spec.q >> hk >> spec.H >> mk >> spec.m;
    } else if (tag == "edges") {
      for (double e; ls >> e;) edges.push_back(e);
    } else if (tag == "times") {
      for (double t; ls >> t;) spec.out_times.push_back(t);
    }
  }
  require(have_header && !edges.empty() && !spec.out_times.empty(), ErrorKind::IoError,
          "kernel table header incomplete");
  spec.space = make_partition_hilbert(spec.m, edges);
  field.spec = spec;
  field.block_space = make_partition_hilbert(1, edges);
  field.times = spec.out_times;
  field.kernels.assign(spec.out_times.size(), Tensor(field.block_space, spec.q));
  const std::size_t n = field.block_dim();
  std::array<std::size_t, kMaxTensorOrder> idx{};
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t ti;
    ls >> ti;
    for (int a = 0; a < spec.q; ++a) ls >> idx[a];
    double v;
    ls >> v;
    require(!ls.fail() && ti < field.kernels.size(), ErrorKind::IoError, "bad kernel line: " + line);
    std::sort(idx.begin(), idx.begin() + spec.q);
    do {
      std::size_t off = 0;
      for (int a = 0; a < spec.q; ++a) off = off * n + idx[a];
      field.kernels[ti].data[off] = v;
    } while (std::next_permutation(idx.begin(), idx.begin() + spec.q));
  }
  return field;
}

}  // namespace wchaos

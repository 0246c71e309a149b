#pragma once

// Symmetric tensors over the discrete Hilbert space and the calculus of
// multiple Wiener-Ito integrals on it.
//
// On a finite orthonormal basis the multiple integral of a symmetric tensor is
//   I_q(f) = sum_{i_1..i_q} f_{i_1..i_q} prod_j H_{n_j(i)}(xi_j),
// where n_j(i) counts the occurrences of j in the multi-index and H_n are the
// probabilists' Hermite polynomials. Diagonal-free tensors reduce to the
// off-diagonal polynomial sum. This is the exact restriction of I_q to the
// span of the basis, so isometry, the product formula, D I_q(f) =
// q I_{q-1}(f(., r)) and the Cameron-Martin Taylor expansion hold as
// polynomial identities, not only in law.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "wchaos/error.hpp"
#include "wchaos/wiener_core.hpp"

namespace wchaos {

/// Highest tensor order handled by the dense evaluators. Driving processes
/// use q <= 3; order 4 arises as f (x)_0 g in the product formula.
inline constexpr int kMaxTensorOrder = 4;
/// Highest chaos order accepted for a driving process.
inline constexpr int kMaxProcessOrder = 3;

inline std::size_t ipow(std::size_t b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

/// Dense order-q array over basis_dim^q entries, row-major (first index most
/// significant). Symmetric tensors are stored with all permutations filled.
struct Tensor {
  SpacePtr space;
  int order = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(SpacePtr s, int q) : space(std::move(s)), order(q) {
    require(q >= 0 && q <= kMaxTensorOrder, ErrorKind::UnsupportedOrder,
            "tensor order " + std::to_string(q) + " exceeds cap");
    data.assign(ipow(space->basis_dim(), q), 0.0);
  }

  static Tensor scalar(SpacePtr s, double v) {
    Tensor t(std::move(s), 0);
    t.data[0] = v;
    return t;
  }

  static Tensor from_vec(const HilbertVec& v) {
    Tensor t(v.space, 1);
    t.data = v.coords;
    return t;
  }

  std::size_t dim() const noexcept { return space->basis_dim(); }

  std::size_t offset(std::span<const std::size_t> idx) const noexcept {
    std::size_t off = 0;
    const std::size_t d = dim();
    for (std::size_t k : idx) off = off * d + k;
    return off;
  }
  double at(std::initializer_list<std::size_t> idx) const {
    return data[offset(std::span<const std::size_t>(idx.begin(), idx.size()))];
  }
  double& at(std::initializer_list<std::size_t> idx) {
    return data[offset(std::span<const std::size_t>(idx.begin(), idx.size()))];
  }
  double value() const { return data.at(0); }
};

inline void require_compatible(const Tensor& a, const Tensor& b, const char* where) {
  require_same(a.space, b.space, where);
  require(a.order == b.order, ErrorKind::SpaceMismatch, std::string(where) + ": order mismatch");
}

inline Tensor operator+(const Tensor& a, const Tensor& b) {
  require_compatible(a, b, "tensor +");
  Tensor r = a;
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] += b.data[i];
  return r;
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
  require_compatible(a, b, "tensor -");
  Tensor r = a;
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] -= b.data[i];
  return r;
}

inline Tensor operator*(double c, const Tensor& a) {
  Tensor r = a;
  for (double& x : r.data) x *= c;
  return r;
}

/// Multi-index of a flat offset.
inline void unravel(std::size_t off, std::size_t dim, int order, std::size_t* idx) {
  for (int k = order - 1; k >= 0; --k) {
    idx[k] = off % dim;
    off /= dim;
  }
}

/// Average over all q! permutations of the tensor axes.
inline Tensor symmetrize(const Tensor& raw) {
  const int q = raw.order;
  require(q <= kMaxTensorOrder, ErrorKind::UnsupportedOrder, "symmetrize: order too large");
  if (q <= 1) return raw;
  const std::size_t d = raw.dim();
  Tensor out(raw.space, q);
  std::array<int, kMaxTensorOrder> perm{};
  std::array<std::size_t, kMaxTensorOrder> idx{}, pidx{};
  double nperm = 1;
  for (int k = 2; k <= q; ++k) nperm *= k;
  for (std::size_t off = 0; off < raw.data.size(); ++off) {
    unravel(off, d, q, idx.data());
    std::iota(perm.begin(), perm.begin() + q, 0);
    double s = 0.0;
    do {
      std::size_t o = 0;
      for (int k = 0; k < q; ++k) {
        pidx[k] = idx[perm[k]];
        o = o * d + pidx[k];
      }
      s += raw.data[o];
    } while (std::next_permutation(perm.begin(), perm.begin() + q));
    out.data[off] = s / nperm;
  }
  return out;
}

inline bool is_symmetric(const Tensor& f, double tol = 1e-12) {
  const Tensor s = symmetrize(f);
  double scale = 0.0;
  for (double x : f.data) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < f.data.size(); ++i)
    if (std::abs(s.data[i] - f.data[i]) > tol * std::max(1.0, scale)) return false;
  return true;
}

/// Full q-fold Euclidean inner product.
inline double tensor_inner(const Tensor& f, const Tensor& g) {
  require_compatible(f, g, "tensor_inner");
  double s = 0.0;
  for (std::size_t i = 0; i < f.data.size(); ++i) s += f.data[i] * g.data[i];
  return s;
}

inline double tensor_norm(const Tensor& f) { return std::sqrt(tensor_inner(f, f)); }

/// r-th contraction: pairs the first r indices of f with the first r indices
/// of g. The result lists the free indices of f first, then those of g. For
/// r = p = q this is the scalar inner product; r = 0 is the tensor product.
inline Tensor contract(const Tensor& f, const Tensor& g, int r) {
  require_same(f.space, g.space, "contract");
  require(r >= 0 && r <= std::min(f.order, g.order), ErrorKind::OutOfRange,
          "contract: r must lie in [0, min(p, q)]");
  const std::size_t d = f.dim();
  const std::size_t nu = ipow(d, r);
  const std::size_t nf = ipow(d, f.order - r);
  const std::size_t ng = ipow(d, g.order - r);
  Tensor out(f.space, f.order + g.order - 2 * r);
  for (std::size_t u = 0; u < nu; ++u) {
    const double* fr = f.data.data() + u * nf;
    const double* gr = g.data.data() + u * ng;
    for (std::size_t a = 0; a < nf; ++a) {
      const double fa = fr[a];
      if (fa == 0.0) continue;
      double* orow = out.data.data() + a * ng;
      for (std::size_t b = 0; b < ng; ++b) orow[b] += fa * gr[b];
    }
  }
  return out;
}

inline Tensor sym_contract(const Tensor& f, const Tensor& g, int r) {
  return symmetrize(contract(f, g, r));
}

inline Tensor tensor_power(const HilbertVec& h, int k) {
  Tensor t = Tensor::scalar(h.space, 1.0);
  const Tensor hv = Tensor::from_vec(h);
  for (int i = 0; i < k; ++i) t = contract(t, hv, 0);
  return t;
}

/// Probabilists' Hermite polynomial by the three-term recurrence.
inline double hermite_poly(int n, double x) {
  require(n >= 0, ErrorKind::OutOfRange, "hermite_poly: n must be >= 0");
  if (n == 0) return 1.0;
  double hm1 = 1.0, h = x;
  for (int k = 1; k < n; ++k) {
    const double next = x * h - k * hm1;
    hm1 = h;
    h = next;
  }
  return h;
}

// Contracts the last index of t with the vector v.
inline Tensor contract_last(const Tensor& t, std::span<const double> v) {
  require(t.order >= 1, ErrorKind::OutOfRange, "contract_last on a scalar");
  const std::size_t d = t.dim();
  Tensor out(t.space, t.order - 1);
  for (std::size_t a = 0; a < out.data.size(); ++a) {
    const double* row = t.data.data() + a * d;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += row[j] * v[j];
    out.data[a] = s;
  }
  return out;
}

// Sums over the diagonal of the last two indices.
inline Tensor trace_last2(const Tensor& t) {
  require(t.order >= 2, ErrorKind::OutOfRange, "trace_last2 needs order >= 2");
  const std::size_t d = t.dim();
  Tensor out(t.space, t.order - 2);
  for (std::size_t a = 0; a < out.data.size(); ++a) {
    const double* blk = t.data.data() + a * d * d;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += blk[j * d + j];
    out.data[a] = s;
  }
  return out;
}

// Fixes the last k indices of t to `idx`, returning the order-(q-k) slice.
inline Tensor slice_last(const Tensor& t, std::span<const std::size_t> idx) {
  const int k = static_cast<int>(idx.size());
  const std::size_t d = t.dim();
  Tensor out(t.space, t.order - k);
  const std::size_t stride = ipow(d, k);
  std::size_t tail = 0;
  for (std::size_t j : idx) tail = tail * d + j;
  for (std::size_t a = 0; a < out.data.size(); ++a) out.data[a] = t.data[a * stride + tail];
  return out;
}

enum class DiagPolicy {
  /// Diagonal multi-indices contribute through Hermite polynomials.
  Wick,
  /// Diagonal multi-indices are dropped.
  OffDiagonal,
};

struct ChaosValue {
  double value = 0.0;
  int order = 0;
  DiagPolicy diag_policy = DiagPolicy::Wick;
};

/// Raw evaluator on a coordinate vector; f must be symmetric.
///   I_q(f) = sum_k (-1)^k q! / (k! 2^k (q-2k)!) <tr^k f, xi^(q-2k)>.
inline double wick_eval(const Tensor& f, std::span<const double> xi) {
  const int q = f.order;
  require(q <= kMaxTensorOrder, ErrorKind::UnsupportedOrder, "multiple_integral: order too large");
  if (q == 0) return f.data[0];
  double total = 0.0;
  Tensor tr = f;
  double fact_q = 1.0;
  for (int i = 2; i <= q; ++i) fact_q *= i;
  for (int k = 0; 2 * k <= q; ++k) {
    if (k > 0) tr = trace_last2(tr);
    Tensor v = tr;
    while (v.order > 0) v = contract_last(v, xi);
    double fk = 1.0, fq2k = 1.0;
    for (int i = 2; i <= k; ++i) fk *= i;
    for (int i = 2; i <= q - 2 * k; ++i) fq2k *= i;
    const double coef = (k % 2 ? -1.0 : 1.0) * fact_q / (fk * std::ldexp(1.0, k) * fq2k);
    total += coef * v.data[0];
  }
  return total;
}

/// I_q(f)(omega).
inline ChaosValue multiple_integral(const Tensor& f, const GaussianDraw& w) {
  require_same(f.space, w.space, "multiple_integral");
  return ChaosValue{wick_eval(f, w.xi), f.order, DiagPolicy::Wick};
}

/// Sum over multi-indices with pairwise distinct entries only. Coincides with
/// multiple_integral on diagonal-free tensors.
inline ChaosValue multiple_integral_offdiag(const Tensor& f, const GaussianDraw& w) {
  require_same(f.space, w.space, "multiple_integral_offdiag");
  const int q = f.order;
  const std::size_t d = f.dim();
  std::array<std::size_t, kMaxTensorOrder> idx{};
  double s = 0.0;
  for (std::size_t off = 0; off < f.data.size(); ++off) {
    if (f.data[off] == 0.0) continue;
    unravel(off, d, q, idx.data());
    bool distinct = true;
    double p = f.data[off];
    for (int a = 0; a < q && distinct; ++a) {
      for (int b = 0; b < a; ++b)
        if (idx[a] == idx[b]) distinct = false;
      p *= w.xi[idx[a]];
    }
    if (distinct) s += p;
  }
  return ChaosValue{s, q, DiagPolicy::OffDiagonal};
}

/// I_q(g^{(x)q}) = ||g||^q H_q(X_g / ||g||).
inline double hermite_power_integral(const HilbertVec& g, int q, const GaussianDraw& w) {
  const double ng = norm(g);
  if (ng == 0.0) return q == 0 ? 1.0 : 0.0;
  return std::pow(ng, q) * hermite_poly(q, iso_gaussian(g, w) / ng);
}

inline double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

/// I_p(f) I_q(g) - sum_r r! C(p,r) C(q,r) I_{p+q-2r}(f (x)~_r g).
inline double product_formula_check(const Tensor& f, const Tensor& g, const GaussianDraw& w) {
  require(f.order + g.order <= kMaxTensorOrder, ErrorKind::UnsupportedOrder,
          "product_formula_check needs p + q <= 4");
  const int p = f.order, q = g.order;
  double rhs = 0.0;
  for (int r = 0; r <= std::min(p, q); ++r)
    rhs += factorial(r) * binom(p, r) * binom(q, r) *
           multiple_integral(sym_contract(f, g, r), w).value;
  return multiple_integral(f, w).value * multiple_integral(g, w).value - rhs;
}

/// D^r I_q(f)(omega) as an order-r array: entry (j_1..j_r) equals
/// q!/(q-r)! I_{q-r}(f(., j_1, .., j_r)); zero when r > q.
inline Tensor malliavin_derivative(const Tensor& f, const GaussianDraw& w, int r) {
  require_same(f.space, w.space, "malliavin_derivative");
  require(r >= 0 && r <= kMaxTensorOrder, ErrorKind::OutOfRange, "malliavin_derivative: bad r");
  Tensor out(f.space, r);
  if (r > f.order) return out;
  const double c = factorial(f.order) / factorial(f.order - r);
  const std::size_t d = f.dim();
  std::array<std::size_t, kMaxTensorOrder> idx{};
  for (std::size_t off = 0; off < out.data.size(); ++off) {
    unravel(off, d, r, idx.data());
    const Tensor sl = slice_last(f, std::span<const std::size_t>(idx.data(), r));
    out.data[off] = c * wick_eval(sl, w.xi);
  }
  return out;
}

/// <D^k I_q(f), h^{(x)k}> = q!/(q-k)! I_{q-k}(f contracted k times with h).
inline double directional_derivative(const Tensor& f, const GaussianDraw& w, const HilbertVec& h,
                                     int k) {
  require_same(f.space, h.space, "directional_derivative");
  if (k > f.order) return 0.0;
  Tensor t = f;
  for (int i = 0; i < k; ++i) t = contract_last(t, h.coords);
  return factorial(f.order) / factorial(f.order - k) * wick_eval(t, w.xi);
}

/// sum_{k=0}^q eps^k / k! <D^k I_q(f)(omega), h^{(x)k}>; equals
/// I_q(f)(omega + eps j(h)) exactly in the discrete model.
inline double taylor_shift(const Tensor& f, const GaussianDraw& w, const HilbertVec& h,
                           double eps) {
  double s = 0.0, epow = 1.0;
  for (int k = 0; k <= f.order; ++k) {
    s += epow / factorial(k) * directional_derivative(f, w, h, k);
    epow *= eps;
  }
  return s;
}

namespace detail {

// Recursion through the divergence: I_q(f) = delta(u) with
// u_j = I_{q-1}(f(., j)) and delta(u) = sum_j u_j xi_j - sum_j D_j u_j,
// D_j u_j = (q-1) I_{q-2}(f(., j, j)).
inline double reintegrate_rec(const Tensor& f, std::span<const double> xi) {
  if (f.order == 0) return f.data[0];
  const std::size_t d = f.dim();
  if (f.order == 1) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += f.data[j] * xi[j];
    return s;
  }
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const std::array<std::size_t, 1> one{j};
    const Tensor u = slice_last(f, one);
    s += xi[j] * reintegrate_rec(u, xi);
    const std::array<std::size_t, 2> two{j, j};
    s -= (f.order - 1) * reintegrate_rec(slice_last(f, two), xi);
  }
  return s;
}

}  // namespace detail

/// I_q(f) evaluated as the divergence of u_j = I_{q-1}(f(., j)), using the
/// integration-by-parts identity recursively down to order 1.
inline double reintegrate(const Tensor& f, const GaussianDraw& w) {
  require_same(f.space, w.space, "reintegrate");
  require(f.order >= 1 && f.order <= kMaxTensorOrder, ErrorKind::UnsupportedOrder,
          "reintegrate needs 1 <= q <= 4");
  return detail::reintegrate_rec(f, w.xi);
}

// Applies the symmetric orthogonal matrix Q along every axis of t.
inline Tensor apply_along_axes(const Tensor& t, const std::vector<double>& Q) {
  const std::size_t d = t.dim();
  Tensor cur = t;
  for (int axis = 0; axis < t.order; ++axis) {
    Tensor next(t.space, t.order);
    const std::size_t inner_n = ipow(d, t.order - axis - 1);
    const std::size_t outer_n = ipow(d, axis);
    for (std::size_t o = 0; o < outer_n; ++o)
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
          const double qab = Q[a * d + b];
          if (qab == 0.0) continue;
          const double* src = cur.data.data() + (o * d + b) * inner_n;
          double* dst = next.data.data() + (o * d + a) * inner_n;
          for (std::size_t i = 0; i < inner_n; ++i) dst[i] += qab * src[i];
        }
    cur = std::move(next);
  }
  return cur;
}

struct DecompositionTerm {
  int k = 0;          ///< power of e0
  Tensor component;   ///< order q-k, supported on the orthocomplement of e0
};

namespace detail {

// Householder reflection exchanging basis vector 0 and e0.
inline std::vector<double> householder_to(const HilbertVec& e0) {
  const std::size_t d = e0.size();
  std::vector<double> v = e0.coords;
  v[0] -= 1.0;
  double vv = 0.0;
  for (double x : v) vv += x * x;
  std::vector<double> Q(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) Q[i * d + i] = 1.0;
  if (vv < 1e-300) return Q;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) Q[i * d + j] -= 2.0 * v[i] * v[j] / vv;
  return Q;
}

}  // namespace detail

/// Splits a symmetric f as f = sum_k e0^{(x)k} (.) f_{q-k}, each f_{q-k}
/// living in V^{(.)(q-k)} with V the orthogonal complement of e0. In a basis
/// (e0, e_1, ...) of which the first element is e0, f_{q-k} collects the
/// coefficients of f with exactly k indices equal to e0, scaled by C(q, k)
/// for the positions those indices may occupy.
inline std::vector<DecompositionTerm> decompose_along(const Tensor& f, const HilbertVec& e0) {
  require_same(f.space, e0.space, "decompose_along");
  require(std::abs(norm(e0) - 1.0) < 1e-10, ErrorKind::NonUnitVector,
          "decompose_along needs a unit vector");
  const int q = f.order;
  const std::size_t d = f.dim();
  const auto Q = detail::householder_to(e0);
  const Tensor rot = apply_along_axes(f, Q);  // coefficients in the rotated basis
  std::vector<DecompositionTerm> out;
  std::array<std::size_t, kMaxTensorOrder> idx{};
  for (int k = 0; k <= q; ++k) {
    Tensor comp(f.space, q - k);
    const std::size_t tail_stride = ipow(d, k);  // last k indices fixed at 0
    for (std::size_t off = 0; off < comp.data.size(); ++off) {
      unravel(off, d, q - k, idx.data());
      bool in_v = true;
      for (int a = 0; a < q - k; ++a)
        if (idx[a] == 0) in_v = false;
      if (in_v) comp.data[off] = binom(q, k) * rot.data[off * tail_stride];
    }
    out.push_back({k, apply_along_axes(comp, Q)});
  }
  return out;
}

inline Tensor recompose(const std::vector<DecompositionTerm>& terms, const HilbertVec& e0) {
  require(!terms.empty(), ErrorKind::InvalidDimension, "recompose: empty decomposition");
  const int q = terms.front().k + terms.front().component.order;
  Tensor f(e0.space, q);
  for (const auto& t : terms) f = f + sym_contract(tensor_power(e0, t.k), t.component, 0);
  return f;
}

}  // namespace wchaos

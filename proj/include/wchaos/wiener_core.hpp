#pragma once

// Finite model of the Wiener space over L^2([lo, hi], R^m).
//
// The Hilbert space is spanned by normalized cell indicators
// e_(l,i) = 1_{cell i} / sqrt(|cell i|) in component l, so the isonormal
// coordinates X_{e_(l,i)} are i.i.d. standard normals and a Cameron-Martin
// shift along h moves each coordinate by exactly h_(l,i).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wchaos/error.hpp"
#include "wchaos/random.hpp"

namespace wchaos {

/// Partition of [lo, hi] into cells, replicated across m components.
/// Basis index layout is component-major: index = component * n + cell.
struct HilbertDisc {
  int m = 1;
  double lo = 0.0;
  double hi = 1.0;
  int n = 2;
  /// Width of the uniform cells (all cells for a uniform grid; the cells on
  /// [0, hi] for a graded grid).
  double delta = 0.5;
  std::vector<double> edges;

  std::size_t basis_dim() const noexcept { return static_cast<std::size_t>(n) * m; }
  std::size_t index(int component, int cell) const noexcept {
    return static_cast<std::size_t>(component) * n + cell;
  }
  int component_of(std::size_t idx) const noexcept { return static_cast<int>(idx / n); }
  int cell_of_index(std::size_t idx) const noexcept { return static_cast<int>(idx % n); }
  double width(int cell) const noexcept { return edges[cell + 1] - edges[cell]; }
  double midpoint(int cell) const noexcept { return 0.5 * (edges[cell] + edges[cell + 1]); }

  /// First cell whose left edge is >= t (n when none).
  int first_cell_at_or_after(double t) const {
    auto it = std::lower_bound(edges.begin(), edges.end() - 1, t);
    return static_cast<int>(it - edges.begin());
  }

  bool same_as(const HilbertDisc& o) const noexcept {
    return this == &o || (m == o.m && n == o.n && edges == o.edges);
  }
};

using SpacePtr = std::shared_ptr<const HilbertDisc>;

inline void require_same(const SpacePtr& a, const SpacePtr& b, const char* where) {
  require(a && b && a->same_as(*b), ErrorKind::SpaceMismatch, where);
}

/// Uniform partition of [lo, hi] into n cells per component.
inline SpacePtr make_hilbert(int m, double lo, double hi, int n) {
  require(m >= 1 && n >= 2 && lo < hi && std::isfinite(lo) && std::isfinite(hi),
          ErrorKind::InvalidDimension, "make_hilbert requires m >= 1, n >= 2, lo < hi");
  auto s = std::make_shared<HilbertDisc>();
  s->m = m;
  s->lo = lo;
  s->hi = hi;
  s->n = n;
  s->delta = (hi - lo) / n;
  s->edges.resize(n + 1);
  for (int i = 0; i <= n; ++i) s->edges[i] = lo + (hi - lo) * i / n;
  s->edges.back() = hi;
  return s;
}

/// Arbitrary strictly increasing partition.
inline SpacePtr make_partition_hilbert(int m, std::vector<double> edges) {
  require(m >= 1 && edges.size() >= 3, ErrorKind::InvalidDimension,
          "partition needs m >= 1 and at least two cells");
  for (std::size_t i = 1; i < edges.size(); ++i)
    require(edges[i] > edges[i - 1] && std::isfinite(edges[i]), ErrorKind::InvalidDimension,
            "partition edges must be finite and strictly increasing");
  auto s = std::make_shared<HilbertDisc>();
  s->m = m;
  s->lo = edges.front();
  s->hi = edges.back();
  s->n = static_cast<int>(edges.size()) - 1;
  double min_w = edges[1] - edges[0];
  for (std::size_t i = 1; i + 1 < edges.size(); ++i) min_w = std::min(min_w, edges[i + 1] - edges[i]);
  s->delta = min_w;
  s->edges = std::move(edges);
  return s;
}

/// n_unit uniform cells on [0, T] and cells of geometrically growing width
/// (factor `ratio`, first width T / n_unit) on [-L, 0].
///
/// Kernels with power-law tails in the far past need a truncation point that
/// is many orders of magnitude away; a geometric grid reaches it with
/// O(log L) extra cells.
inline SpacePtr make_graded_hilbert(int m, double L, double T, int n_unit, double ratio) {
  require(m >= 1 && n_unit >= 2 && L > 0 && T > 0 && ratio >= 1.0, ErrorKind::InvalidDimension,
          "graded grid requires m >= 1, n_unit >= 2, L > 0, T > 0, ratio >= 1");
  const double d = T / n_unit;
  std::vector<double> past{0.0};
  double w = d;
  while (past.back() > -L) {
    double next = past.back() - w;
    // Absorb a short remainder into the last cell.
    if (next - w * ratio * 0.5 < -L || next <= -L) next = -L;
    past.push_back(next);
    w *= ratio;
  }
  std::vector<double> edges(past.rbegin(), past.rend());
  for (int i = 1; i <= n_unit; ++i) edges.push_back(T * i / n_unit);
  edges.back() = T;
  auto s = make_partition_hilbert(m, std::move(edges));
  auto mut = std::const_pointer_cast<HilbertDisc>(s);
  mut->delta = d;
  return s;
}

/// Image of the partition under x -> (x - shift) / scale.
inline SpacePtr affine_image(const HilbertDisc& space, double shift, double scale) {
  require(scale > 0, ErrorKind::InvalidDimension, "affine_image needs scale > 0");
  std::vector<double> e(space.edges.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = (space.edges[i] - shift) / scale;
  auto s = make_partition_hilbert(space.m, std::move(e));
  std::const_pointer_cast<HilbertDisc>(s)->delta = space.delta / scale;
  return s;
}

struct HilbertVec {
  SpacePtr space;
  std::vector<double> coords;

  HilbertVec() = default;
  explicit HilbertVec(SpacePtr s) : space(std::move(s)), coords(space->basis_dim(), 0.0) {}
  HilbertVec(SpacePtr s, std::vector<double> c) : space(std::move(s)), coords(std::move(c)) {
    require(coords.size() == space->basis_dim(), ErrorKind::InvalidDimension,
            "HilbertVec length must equal basis_dim");
  }

  static HilbertVec unit(SpacePtr s, std::size_t k) {
    HilbertVec v(std::move(s));
    v.coords.at(k) = 1.0;
    return v;
  }

  std::size_t size() const noexcept { return coords.size(); }
  double operator[](std::size_t i) const { return coords[i]; }
  double& operator[](std::size_t i) { return coords[i]; }
};

inline double inner(const HilbertVec& u, const HilbertVec& v) {
  require_same(u.space, v.space, "inner");
  double s = 0.0;
  for (std::size_t i = 0; i < u.coords.size(); ++i) s += u.coords[i] * v.coords[i];
  return s;
}

inline double norm(const HilbertVec& u) { return std::sqrt(inner(u, u)); }

inline HilbertVec operator+(const HilbertVec& a, const HilbertVec& b) {
  require_same(a.space, b.space, "operator+");
  HilbertVec r = a;
  for (std::size_t i = 0; i < r.coords.size(); ++i) r.coords[i] += b.coords[i];
  return r;
}

inline HilbertVec operator-(const HilbertVec& a, const HilbertVec& b) {
  require_same(a.space, b.space, "operator-");
  HilbertVec r = a;
  for (std::size_t i = 0; i < r.coords.size(); ++i) r.coords[i] -= b.coords[i];
  return r;
}

inline HilbertVec operator*(double c, const HilbertVec& a) {
  HilbertVec r = a;
  for (double& x : r.coords) x *= c;
  return r;
}

/// Coordinates of f against the normalized-indicator basis, sampled at cell
/// midpoints: coord (l, i) = f(l, mid_i) * sqrt(|cell i|).
inline HilbertVec embed_function(const SpacePtr& space,
                                 const std::function<double(int, double)>& f) {
  HilbertVec v(space);
  for (int l = 0; l < space->m; ++l) {
    for (int i = 0; i < space->n; ++i) {
      const double val = f(l, space->midpoint(i));
      require(std::isfinite(val), ErrorKind::EmbeddingError,
              "function is not finite at t = " + std::to_string(space->midpoint(i)));
      v.coords[space->index(l, i)] = val * std::sqrt(space->width(i));
    }
  }
  return v;
}

/// j(h)(t) = (int_0^t h^1, ..., int_0^t h^m); a partially covered cell
/// contributes in proportion to its covered length.
inline std::vector<double> cameron_martin_path(const HilbertDisc& space, const HilbertVec& h,
                                               double t) {
  require(h.coords.size() == space.basis_dim(), ErrorKind::SpaceMismatch, "cameron_martin_path");
  require(space.lo <= 0.0 && 0.0 <= t && t <= space.hi, ErrorKind::OutOfRange,
          "cameron_martin_path needs lo <= 0 <= t <= hi");
  std::vector<double> out(space.m, 0.0);
  for (int i = 0; i < space.n; ++i) {
    const double a = std::max(space.edges[i], 0.0);
    const double b = std::min(space.edges[i + 1], t);
    if (b <= a) continue;
    const double w = space.width(i);
    for (int l = 0; l < space.m; ++l)
      out[l] += h.coords[space.index(l, i)] / std::sqrt(w) * (b - a);
  }
  return out;
}

/// One realization of the noise: i.i.d. N(0,1) coordinates. A shifted draw
/// also keeps its unshifted coordinates and the accumulated shift, so that
/// xi = origin + offset and undoing a shift restores xi bit for bit.
struct GaussianDraw {
  SpacePtr space;
  std::vector<double> xi;
  std::uint64_t seed = 0;
  std::vector<double> origin;  ///< empty when never shifted
  std::vector<double> offset;
};

inline GaussianDraw sample_omega(const SpacePtr& space, std::uint64_t seed) {
  GaussianDraw w{space, std::vector<double>(space->basis_dim()), seed};
  const std::uint64_t key = stream_key(seed, 0);
  for (std::size_t i = 0; i < w.xi.size(); ++i) w.xi[i] = counter_normal(key, i);
  return w;
}

inline GaussianDraw zero_omega(const SpacePtr& space) {
  return GaussianDraw{space, std::vector<double>(space->basis_dim(), 0.0), 0};
}

/// X_g(omega) = <g, xi>.
inline double iso_gaussian(const HilbertVec& g, const GaussianDraw& w) {
  require_same(g.space, w.space, "iso_gaussian");
  double s = 0.0;
  for (std::size_t i = 0; i < w.xi.size(); ++i) s += g.coords[i] * w.xi[i];
  return s;
}

/// omega + eps * j(h).
inline GaussianDraw shift_omega(const GaussianDraw& w, double eps, const HilbertVec& h) {
  require_same(w.space, h.space, "shift_omega");
  GaussianDraw r = w;
  if (eps == 0.0) return r;
  if (r.origin.empty()) {
    r.origin = w.xi;
    r.offset.assign(w.xi.size(), 0.0);
  }
  for (std::size_t i = 0; i < r.xi.size(); ++i) {
    r.offset[i] += eps * h.coords[i];
    r.xi[i] = r.origin[i] + r.offset[i];
  }
  return r;
}

/// Exponents governing pathwise regularity: 1 - alpha = H - beta.
struct HolderConfig {
  double H = 0.7;
  double beta = 0.1;
  double gamma = 0.05;

  double alpha() const noexcept { return 1.0 - (H - beta); }

  void validate() const {
    require(H > 0.5 && H < 1.0, ErrorKind::OutOfRange, "H must lie in (1/2, 1)");
    require(beta > 0.0 && beta < H - 0.5, ErrorKind::OutOfRange, "beta must lie in (0, H - 1/2)");
    require(gamma > 0.0 && gamma < beta, ErrorKind::OutOfRange, "gamma must lie in (0, beta)");
  }
};

}  // namespace wchaos

#include <gtest/gtest.h>

#include <cmath>

#include "wchaos/wiener_core.hpp"

using namespace wchaos;

TEST(MakeHilbert, UniformLayout) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  EXPECT_EQ(s->basis_dim(), 4u);
  EXPECT_DOUBLE_EQ(s->delta, 0.25);
  auto s2 = make_hilbert(2, -2.0, 1.0, 6);
  EXPECT_EQ(s2->basis_dim(), 12u);
  EXPECT_DOUBLE_EQ(s2->delta, 0.5);
  EXPECT_EQ(s2->index(1, 2), 8u);
  EXPECT_EQ(s2->component_of(8), 1);
  EXPECT_EQ(s2->cell_of_index(8), 2);
}

TEST(MakeHilbert, RejectsBadInput) {
  try {
    make_hilbert(1, 1.0, 0.0, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidDimension);
  }
  EXPECT_THROW(make_hilbert(0, 0.0, 1.0, 4), Error);
  EXPECT_THROW(make_hilbert(1, 0.0, 1.0, 1), Error);
}

TEST(MakeHilbert, GradedGrid) {
  auto s = make_graded_hilbert(1, 1e6, 1.0, 16, 1.2);
  EXPECT_DOUBLE_EQ(s->lo, -1e6);
  EXPECT_DOUBLE_EQ(s->hi, 1.0);
  EXPECT_DOUBLE_EQ(s->delta, 1.0 / 16);
  const int i0 = s->first_cell_at_or_after(0.0);
  EXPECT_DOUBLE_EQ(s->edges[i0], 0.0);
  for (int i = i0; i < s->n; ++i) EXPECT_NEAR(s->width(i), 1.0 / 16, 1e-15);
  // Past widths grow away from 0.
  for (int i = 1; i < i0 - 1; ++i) EXPECT_GE(s->width(i) * 1.0000001, s->width(i + 1));
}

TEST(Inner, OrthonormalBasis) {
  auto s = make_hilbert(1, 0.0, 1.0, 8);
  auto e3 = HilbertVec::unit(s, 3), e5 = HilbertVec::unit(s, 5);
  EXPECT_EQ(inner(e3, e3), 1.0);
  EXPECT_EQ(inner(e3, e5), 0.0);
  auto s2 = make_hilbert(1, 0.0, 1.0, 2);
  EXPECT_EQ(inner(HilbertVec(s2, {1, 2}), HilbertVec(s2, {3, -1})), 1.0);
}

TEST(Inner, SpaceMismatch) {
  auto a = make_hilbert(1, 0.0, 1.0, 4), b = make_hilbert(1, 0.0, 1.0, 8);
  try {
    inner(HilbertVec(a), HilbertVec(b));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SpaceMismatch);
  }
}

TEST(Inner, BilinearSymmetric) {
  auto s = make_hilbert(2, -1.0, 1.0, 5);
  auto u = embed_function(s, [](int l, double t) { return std::sin(3 * t + l); });
  auto v = embed_function(s, [](int l, double t) { return t * t - l; });
  auto w = embed_function(s, [](int, double t) { return std::exp(t); });
  EXPECT_DOUBLE_EQ(inner(u, v), inner(v, u));
  EXPECT_NEAR(inner(2.0 * u + w, v), 2.0 * inner(u, v) + inner(w, v), 1e-13);
  EXPECT_GE(inner(u, u), 0.0);
  EXPECT_EQ(norm(HilbertVec(s)), 0.0);
}

TEST(EmbedFunction, MidpointConvention) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  auto z = embed_function(s, [](int, double) { return 0.0; });
  for (double c : z.coords) EXPECT_EQ(c, 0.0);
  auto one = embed_function(s, [](int, double) { return 1.0; });
  for (double c : one.coords) EXPECT_DOUBLE_EQ(c, 0.5);
  auto s2 = make_hilbert(1, 0.0, 1.0, 2);
  auto id = embed_function(s2, [](int, double t) { return t; });
  EXPECT_DOUBLE_EQ(id[0], 0.25 * std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(id[1], 0.75 * std::sqrt(0.5));
}

TEST(EmbedFunction, NonFinite) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  try {
    embed_function(s, [](int, double t) { return 1.0 / (t - 0.125); });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmbeddingError);
  }
}

TEST(CameronMartin, Examples) {
  auto s = make_hilbert(1, 0.0, 1.0, 16);
  auto zero = cameron_martin_path(*s, HilbertVec(s), 0.7);
  EXPECT_EQ(zero[0], 0.0);
  auto one = embed_function(s, [](int, double) { return 1.0; });
  EXPECT_NEAR(cameron_martin_path(*s, one, 1.0)[0], 1.0, 1e-14);
  EXPECT_EQ(cameron_martin_path(*s, one, 0.0)[0], 0.0);
  // Partial cell: linear fraction.
  EXPECT_NEAR(cameron_martin_path(*s, one, 0.5 + 0.5 / 16)[0], 0.5 + 0.5 / 16, 1e-14);
}

TEST(CameronMartin, NegativeSupportIgnored) {
  auto s = make_hilbert(2, -1.0, 1.0, 8);
  auto h = embed_function(s, [](int l, double) { return l + 1.0; });
  auto j = cameron_martin_path(*s, h, 1.0);
  EXPECT_NEAR(j[0], 1.0, 1e-14);
  EXPECT_NEAR(j[1], 2.0, 1e-14);
  EXPECT_THROW(cameron_martin_path(*s, h, 1.5), Error);
  auto pos = make_hilbert(1, 0.5, 1.0, 4);
  EXPECT_THROW(cameron_martin_path(*pos, HilbertVec(pos), 0.7), Error);
}

TEST(SampleOmega, Deterministic) {
  auto s = make_hilbert(2, -1.0, 1.0, 8);
  auto a = sample_omega(s, 12345), b = sample_omega(s, 12345);
  EXPECT_EQ(a.xi, b.xi);
  EXPECT_EQ(a.seed, 12345u);
}

TEST(SampleOmega, DistinctSeedsDiffer) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  for (std::uint64_t seed = 0; seed < 1000; ++seed)
    EXPECT_NE(sample_omega(s, seed).xi, sample_omega(s, seed + 1).xi);
}

TEST(SampleOmega, MeanNearZero) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  double sum = 0.0;
  const int M = 100000;
  for (int i = 0; i < M; ++i)
    for (double x : sample_omega(s, i).xi) sum += x;
  EXPECT_NEAR(sum / (M * 4.0), 0.0, 0.02);
}

TEST(IsoGaussian, Examples) {
  auto s = make_hilbert(1, 0.0, 1.0, 6);
  auto w = sample_omega(s, 3);
  EXPECT_EQ(iso_gaussian(HilbertVec::unit(s, 2), w), w.xi[2]);
  EXPECT_EQ(iso_gaussian(HilbertVec(s), w), 0.0);
}

TEST(IsoGaussian, IsonormalCovariance) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  HilbertVec g(s, {0.5, 0.5, 0.5, 0.5});
  HilbertVec g2(s, {0.5, -0.5, 0.5, 0.5});  // <g, g2> = 0.5
  const int M = 100000;
  double s1 = 0, s2 = 0, s11 = 0, s12 = 0;
  for (int i = 0; i < M; ++i) {
    auto w = sample_omega(s, 1000000 + i);
    const double a = iso_gaussian(g, w), b = iso_gaussian(g2, w);
    s1 += a;
    s2 += b;
    s11 += a * a;
    s12 += a * b;
  }
  const double var = s11 / M - (s1 / M) * (s1 / M);
  const double cov = s12 / M - (s1 / M) * (s2 / M);
  EXPECT_NEAR(var, 1.0, 0.03);
  EXPECT_NEAR(cov, 0.5, 3.0 / std::sqrt(M) * 1.5);
}

TEST(ShiftOmega, Examples) {
  auto s = make_hilbert(1, 0.0, 1.0, 5);
  auto w = sample_omega(s, 9);
  auto h = embed_function(s, [](int, double t) { return std::cos(t); });
  EXPECT_EQ(shift_omega(w, 0.0, h).xi, w.xi);
  auto sh = shift_omega(w, 2.0, HilbertVec::unit(s, 1));
  for (std::size_t i = 0; i < w.xi.size(); ++i) EXPECT_EQ(sh.xi[i], w.xi[i] + (i == 1 ? 2.0 : 0.0));
}

TEST(ShiftOmega, GroupProperty) {
  auto s = make_hilbert(1, 0.0, 1.0, 8);
  auto w = sample_omega(s, 4);
  auto h = embed_function(s, [](int, double t) { return std::sin(7 * t) + 0.3; });
  EXPECT_EQ(shift_omega(shift_omega(w, 0.37, h), -0.37, h).xi, w.xi);
  EXPECT_EQ(shift_omega(shift_omega(w, 2.0, h), -2.0, h).xi, w.xi);
}

TEST(ShiftOmega, ExactShiftIdentity) {
  auto s = make_hilbert(2, -1.0, 1.0, 10);
  for (int r = 0; r < 50; ++r) {
    auto w = sample_omega(s, 100 + r);
    HilbertVec g(s), h(s);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = counter_normal(r, i);
      h[i] = counter_normal(r + 1000, i);
    }
    const double eps = 0.1 * (r - 25);
    const double xg = iso_gaussian(g, w);
    const double gap = iso_gaussian(g, shift_omega(w, eps, h)) - xg - eps * inner(g, h);
    EXPECT_LE(std::abs(gap), 1e-12 * (norm(g) * norm(h) * std::abs(eps) + std::abs(xg)) + 1e-300);
  }
}

TEST(HolderConfig, Validation) {
  HolderConfig c{0.7, 0.1, 0.05};
  EXPECT_NO_THROW(c.validate());
  EXPECT_NEAR(c.alpha(), 0.4, 1e-15);
  EXPECT_THROW((HolderConfig{0.4, 0.1, 0.05}.validate()), Error);
  EXPECT_THROW((HolderConfig{0.7, 0.3, 0.05}.validate()), Error);
  EXPECT_THROW((HolderConfig{0.7, 0.1, 0.2}.validate()), Error);
}

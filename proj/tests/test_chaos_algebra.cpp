#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "wchaos/chaos_algebra.hpp"

using namespace wchaos;

namespace {

Tensor random_tensor(const SpacePtr& s, int q, std::uint64_t key) {
  Tensor t(s, q);
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = counter_normal(key, i);
  return t;
}

Tensor random_sym(const SpacePtr& s, int q, std::uint64_t key) { return symmetrize(random_tensor(s, q, key)); }

Tensor zero_diagonal(Tensor t) {
  std::array<std::size_t, kMaxTensorOrder> idx{};
  for (std::size_t off = 0; off < t.data.size(); ++off) {
    unravel(off, t.dim(), t.order, idx.data());
    for (int a = 0; a < t.order; ++a)
      for (int b = 0; b < a; ++b)
        if (idx[a] == idx[b]) t.data[off] = 0.0;
  }
  return t;
}

HilbertVec random_vec(const SpacePtr& s, std::uint64_t key) {
  HilbertVec v(s);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = counter_normal(key, i);
  return v;
}

// Independent oracle: sum over all multi-indices of f_i prod_j H_{n_j(i)}(xi_j).
double hermite_sum_oracle(const Tensor& f, const std::vector<double>& xi) {
  double s = 0.0;
  std::array<std::size_t, kMaxTensorOrder> idx{};
  for (std::size_t off = 0; off < f.data.size(); ++off) {
    unravel(off, f.dim(), f.order, idx.data());
    std::map<std::size_t, int> counts;
    for (int a = 0; a < f.order; ++a) counts[idx[a]]++;
    double p = f.data[off];
    for (auto [j, n] : counts) {
      // H_n by explicit polynomials.
      const double x = xi[j];
      const double h = n == 1 ? x : n == 2 ? x * x - 1 : n == 3 ? x * x * x - 3 * x : x * x * x * x - 6 * x * x + 3;
      p *= h;
    }
    s += p;
  }
  return s;
}

}  // namespace

TEST(Symmetrize, Examples) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  Tensor e12(s, 2);
  e12.at({1, 2}) = 1.0;
  auto sym = symmetrize(e12);
  EXPECT_DOUBLE_EQ(sym.at({1, 2}), 0.5);
  EXPECT_DOUBLE_EQ(sym.at({2, 1}), 0.5);
  EXPECT_EQ(symmetrize(sym).data, sym.data);

  Tensor e112(s, 3);
  e112.at({1, 1, 2}) = 1.0;
  auto s3 = symmetrize(e112);
  EXPECT_NEAR(s3.at({1, 1, 2}), 1.0 / 3, 1e-15);
  EXPECT_NEAR(s3.at({1, 2, 1}), 1.0 / 3, 1e-15);
  EXPECT_NEAR(s3.at({2, 1, 1}), 1.0 / 3, 1e-15);
  double total = 0;
  for (double v : s3.data) total += v;
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_TRUE(is_symmetric(s3));
}

TEST(Symmetrize, OrderCap) {
  auto s = make_hilbert(1, 0.0, 1.0, 2);
  EXPECT_THROW(Tensor(s, 5), Error);
}

TEST(TensorInner, Examples) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  Tensor e12(s, 2);
  e12.at({1, 2}) = 1.0;
  auto sym = symmetrize(e12);
  EXPECT_DOUBLE_EQ(tensor_inner(sym, sym), 0.5);
  Tensor e11(s, 2), e22(s, 2);
  e11.at({1, 1}) = 1;
  e22.at({2, 2}) = 1;
  EXPECT_EQ(tensor_inner(e11, e22), 0.0);
  EXPECT_EQ(tensor_norm(Tensor(s, 2)), 0.0);
  EXPECT_THROW(tensor_inner(e11, Tensor(s, 3)), Error);
}

TEST(Contract, Examples) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  Tensor a(s, 2), b(s, 2);
  a.at({1, 2}) = 1;
  b.at({1, 3}) = 1;
  auto c1 = contract(a, b, 1);
  ASSERT_EQ(c1.order, 2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(c1.at({i, j}), (i == 2 && j == 3) ? 1.0 : 0.0);
  auto full = contract(a, a, 2);
  EXPECT_EQ(full.order, 0);
  EXPECT_EQ(full.value(), 1.0);
  auto c0 = contract(a, b, 0);
  EXPECT_EQ(c0.order, 4);
  EXPECT_EQ(c0.at({1, 2, 1, 3}), 1.0);
  EXPECT_THROW(contract(a, b, 3), Error);
}

TEST(HermitePoly, Examples) {
  EXPECT_DOUBLE_EQ(hermite_poly(1, 1.7), 1.7);
  EXPECT_DOUBLE_EQ(hermite_poly(2, 2.0), 3.0);
  EXPECT_DOUBLE_EQ(hermite_poly(3, 1.0), -2.0);
  EXPECT_DOUBLE_EQ(hermite_poly(0, 5.0), 1.0);
  EXPECT_NEAR(hermite_poly(4, 0.3), std::pow(0.3, 4) - 6 * 0.09 + 3, 1e-14);
}

TEST(MultipleIntegral, Examples) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  auto w = sample_omega(s, 11);
  EXPECT_DOUBLE_EQ(multiple_integral(Tensor::from_vec(HilbertVec::unit(s, 2)), w).value, w.xi[2]);
  Tensor e11(s, 2);
  e11.at({1, 1}) = 1;
  EXPECT_NEAR(multiple_integral(e11, w).value, w.xi[1] * w.xi[1] - 1, 1e-14);
  EXPECT_NEAR(multiple_integral(e11, w).value, hermite_poly(2, w.xi[1]), 1e-14);
  Tensor e12(s, 2);
  e12.at({1, 2}) = 1;
  auto sym = symmetrize(e12);
  EXPECT_NEAR(multiple_integral(sym, w).value, w.xi[1] * w.xi[2], 1e-14);
  EXPECT_NEAR(multiple_integral_offdiag(sym, w).value, w.xi[1] * w.xi[2], 1e-14);
}

TEST(MultipleIntegral, ZeroDrawGivesMinusTrace) {
  auto s = make_hilbert(1, 0.0, 1.0, 5);
  auto f = random_sym(s, 2, 5);
  double tr = 0;
  for (std::size_t i = 0; i < 5; ++i) tr += f.at({i, i});
  EXPECT_NEAR(multiple_integral(f, zero_omega(s)).value, -tr, 1e-13);
  EXPECT_EQ(multiple_integral(zero_diagonal(f), zero_omega(s)).value, 0.0);
}

TEST(MultipleIntegral, MatchesHermiteOracle) {
  auto s = make_hilbert(1, 0.0, 1.0, 5);
  for (int q = 1; q <= 4; ++q)
    for (int r = 0; r < 5; ++r) {
      auto f = random_sym(s, q, 100 * q + r);
      auto w = sample_omega(s, 7 * r + q);
      const double o = hermite_sum_oracle(f, w.xi);
      EXPECT_NEAR(multiple_integral(f, w).value, o, 1e-11 * std::max(1.0, std::abs(o)));
    }
}

TEST(MultipleIntegral, OffDiagonalAgreesOnDiagonalFree) {
  auto s = make_hilbert(1, 0.0, 1.0, 6);
  for (int q = 2; q <= 3; ++q) {
    auto f = zero_diagonal(random_sym(s, q, 40 + q));
    auto w = sample_omega(s, 3);
    EXPECT_NEAR(multiple_integral(f, w).value, multiple_integral_offdiag(f, w).value, 1e-12);
  }
}

TEST(MultipleIntegral, HermitePowerOracle) {
  auto s = make_hilbert(1, 0.0, 1.0, 6);
  auto g = random_vec(s, 8);
  for (int q = 1; q <= 3; ++q) {
    auto f = tensor_power(g, q);
    for (int r = 0; r < 5; ++r) {
      auto w = sample_omega(s, r);
      const double o = hermite_power_integral(g, q, w);
      EXPECT_NEAR(multiple_integral(f, w).value, o, 1e-11 * std::max(1.0, std::abs(o)));
    }
  }
}

TEST(ProductFormula, Examples) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  auto w = sample_omega(s, 2);
  auto f = Tensor::from_vec(random_vec(s, 1)), g = Tensor::from_vec(random_vec(s, 2));
  EXPECT_NEAR(product_formula_check(f, g, w), 0.0, 1e-12);
  EXPECT_EQ(product_formula_check(Tensor(s, 1), g, w), 0.0);
  auto f2 = zero_diagonal(random_sym(s, 2, 3));
  EXPECT_LT(std::abs(product_formula_check(f2, g, w)), 1e-10);
  EXPECT_THROW(product_formula_check(random_sym(s, 3, 1), f2, w), Error);
}

TEST(ProductFormula, ExactWithDiagonalUnderWick) {
  auto s = make_hilbert(1, 0.0, 1.0, 5);
  for (int p = 1; p <= 3; ++p)
    for (int q = 1; p + q <= 4; ++q) {
      auto f = random_sym(s, p, 10 + p), g = random_sym(s, q, 20 + q);
      auto w = sample_omega(s, 31);
      const double scale = std::abs(multiple_integral(f, w).value * multiple_integral(g, w).value) + 1.0;
      EXPECT_LT(std::abs(product_formula_check(f, g, w)), 1e-10 * scale);
    }
}

TEST(MalliavinDerivative, Examples) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  auto w = sample_omega(s, 6);
  auto f1 = Tensor::from_vec(random_vec(s, 3));
  EXPECT_EQ(malliavin_derivative(f1, w, 1).data, f1.data);
  Tensor e11(s, 2);
  e11.at({1, 1}) = 1;
  auto d = malliavin_derivative(e11, w, 1);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(d.data[j], j == 1 ? 2 * w.xi[1] : 0.0, 1e-14);
  auto dz = malliavin_derivative(e11, w, 3);
  for (double v : dz.data) EXPECT_EQ(v, 0.0);
  auto d2 = malliavin_derivative(e11, w, 2);
  EXPECT_DOUBLE_EQ(d2.at({1, 1}), 2.0);
}

TEST(MalliavinDerivative, DifferenceQuotientOrder) {
  auto s = make_hilbert(1, 0.0, 1.0, 6);
  for (int q = 2; q <= 3; ++q) {
    auto f = random_sym(s, q, 70 + q);
    auto w = sample_omega(s, 5);
    auto h = random_vec(s, 9);
    const auto D = malliavin_derivative(f, w, 1);
    double dh = 0;
    for (std::size_t j = 0; j < h.size(); ++j) dh += D.data[j] * h[j];
    const double base = multiple_integral(f, w).value;
    std::vector<double> lx, ly;
    for (double eps : {1e-2, 1e-3}) {
      const double qt = (multiple_integral(f, shift_omega(w, eps, h)).value - base) / eps;
      lx.push_back(std::log(eps));
      ly.push_back(std::log(std::abs(qt - dh)));
    }
    EXPECT_GE((ly[0] - ly[1]) / (lx[0] - lx[1]), 0.9);
  }
}

TEST(TaylorShift, Examples) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  auto w = sample_omega(s, 1);
  auto f = random_sym(s, 2, 4);
  auto h = random_vec(s, 5);
  EXPECT_NEAR(taylor_shift(f, w, h, 0.0), multiple_integral(f, w).value, 1e-14);
  Tensor e11(s, 2);
  e11.at({1, 1}) = 1;
  const double eps = 0.3, x = w.xi[1];
  EXPECT_NEAR(taylor_shift(e11, w, HilbertVec::unit(s, 1), eps), (x * x - 1) + 2 * eps * x + eps * eps, 1e-14);
  auto f1 = Tensor::from_vec(random_vec(s, 6));
  EXPECT_NEAR(taylor_shift(f1, w, h, eps), multiple_integral(f1, w).value + eps * inner(random_vec(s, 6), h), 1e-13);
}

TEST(TaylorShift, MatchesShiftedEvaluation) {
  for (int r = 0; r < 100; ++r) {
    const int q = 1 + r % 3;
    auto s = make_hilbert(1, 0.0, 1.0, q == 3 ? 12 : 32);
    auto f = random_sym(s, q, 1000 + r);
    auto w = sample_omega(s, 2000 + r);
    auto h = random_vec(s, 3000 + r);
    const double eps = counter_uniform(r, 0) * 2 - 1;
    const double direct = multiple_integral(f, shift_omega(w, eps, h)).value;
    EXPECT_LE(std::abs(taylor_shift(f, w, h, eps) - direct), 1e-10 * std::max(1.0, std::abs(direct)));
  }
}

TEST(Reintegrate, Examples) {
  auto s = make_hilbert(1, 0.0, 1.0, 4);
  auto w = sample_omega(s, 3);
  auto g = random_vec(s, 3);
  EXPECT_NEAR(reintegrate(Tensor::from_vec(g), w), iso_gaussian(g, w), 1e-14);
  Tensor e12(s, 2);
  e12.at({1, 2}) = 1;
  EXPECT_NEAR(reintegrate(symmetrize(e12), w), w.xi[1] * w.xi[2], 1e-14);
  Tensor e11(s, 2);
  e11.at({1, 1}) = 1;
  EXPECT_NEAR(reintegrate(e11, w), w.xi[1] * w.xi[1] - 1, 1e-14);
}

TEST(Reintegrate, EqualsMultipleIntegral) {
  auto s = make_hilbert(1, 0.0, 1.0, 7);
  for (int q = 1; q <= 4; ++q)
    for (int r = 0; r < 4; ++r) {
      auto f = random_sym(s, q, 500 + 10 * q + r);
      auto w = sample_omega(s, r);
      const double v = multiple_integral(f, w).value;
      EXPECT_NEAR(reintegrate(f, w), v, 1e-10 * std::max(1.0, std::abs(v)));
    }
}

TEST(Decompose, PurePower) {
  auto s = make_hilbert(1, 0.0, 1.0, 3);
  HilbertVec e0(s, {0.6, 0.0, 0.8});
  auto terms = decompose_along(tensor_power(e0, 2), e0);
  ASSERT_EQ(terms.size(), 3u);
  EXPECT_NEAR(tensor_norm(terms[0].component), 0.0, 1e-14);
  EXPECT_NEAR(tensor_norm(terms[1].component), 0.0, 1e-14);
  EXPECT_EQ(terms[2].k, 2);
  EXPECT_NEAR(terms[2].component.value(), 1.0, 1e-14);
}

TEST(Decompose, MixedTerm) {
  auto s = make_hilbert(1, 0.0, 1.0, 3);
  auto e0 = HilbertVec::unit(s, 0), e1 = HilbertVec::unit(s, 1);
  auto f = symmetrize(contract(Tensor::from_vec(e0), Tensor::from_vec(e1), 0));
  auto terms = decompose_along(f, e0);
  EXPECT_NEAR(tensor_norm(terms[0].component), 0.0, 1e-14);
  EXPECT_NEAR(tensor_norm(terms[2].component), 0.0, 1e-14);
  const auto& c1 = terms[1].component;
  ASSERT_EQ(c1.order, 1);
  EXPECT_NEAR(c1.data[0], 0.0, 1e-14);
  EXPECT_NEAR(c1.data[2], 0.0, 1e-14);
  EXPECT_GT(std::abs(c1.data[1]), 0.1);
  EXPECT_NEAR(tensor_norm(recompose(terms, e0) - f), 0.0, 1e-14);
}

TEST(Decompose, RoundTripAndEvaluation) {
  auto s = make_hilbert(1, 0.0, 1.0, 6);
  for (int r = 0; r < 20; ++r) {
    const int q = 1 + r % 3;
    auto f = random_sym(s, q, 900 + r);
    auto g = random_vec(s, 950 + r);
    HilbertVec e0 = (1.0 / norm(g)) * g;
    auto terms = decompose_along(f, e0);
    EXPECT_LE(tensor_norm(recompose(terms, e0) - f), 1e-12 * tensor_norm(f));
    for (const auto& t : terms) {
      // Components live in the orthocomplement of e0.
      if (t.component.order >= 1) {
        auto c = contract_last(t.component, e0.coords);
        EXPECT_LE(tensor_norm(c), 1e-12 * std::max(1.0, tensor_norm(f)));
      }
    }
    auto w = sample_omega(s, r);
    double sum = 0;
    for (const auto& t : terms)
      sum += hermite_power_integral(e0, t.k, w) * multiple_integral(t.component, w).value;
    const double v = multiple_integral(f, w).value;
    EXPECT_LE(std::abs(sum - v), 1e-10 * std::max(1.0, std::abs(v)));
  }
}

TEST(Decompose, NonUnit) {
  auto s = make_hilbert(1, 0.0, 1.0, 3);
  try {
    decompose_along(random_sym(s, 2, 1), HilbertVec(s, {1.0, 1.0, 0.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonUnitVector);
  }
}

TEST(ChaosMonteCarlo, IsometryAndCentering) {
  auto s = make_hilbert(1, 0.0, 1.0, 8);
  const int M = 20000;
  for (int q = 1; q <= 3; ++q) {
    auto f = random_sym(s, q, 60 + q);
    double s1 = 0, s2 = 0, s4 = 0;
    for (int i = 0; i < M; ++i) {
      const double v = multiple_integral(f, sample_omega(s, 77000 + i)).value;
      s1 += v;
      s2 += v * v;
      s4 += v * v * v * v;
    }
    const double mean = s1 / M, m2 = s2 / M;
    const double sd = std::sqrt(m2 - mean * mean);
    EXPECT_LE(std::abs(mean), 3 * sd / std::sqrt(M));
    const double target = factorial(q) * tensor_inner(f, f);
    EXPECT_LE(std::abs(m2 - target), 3 * std::sqrt(s4 / M - m2 * m2) / std::sqrt(M));
  }
}

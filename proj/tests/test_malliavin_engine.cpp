#include <gtest/gtest.h>

#include <cmath>

#include "wchaos/malliavin_engine.hpp"

using namespace wchaos;

namespace {

KernelField make_field(int q, int m, int n_unit, double L, int steps, double ratio = 1.3) {
  HermiteSpec s;
  s.q = q;
  s.H = 0.7;
  s.m = m;
  s.space = make_graded_hilbert(m, L, 1.0, n_unit, ratio);
  s.out_times = uniform_times(1.0, steps);
  return build_kernels(s);
}

HilbertVec random_direction(const SpacePtr& sp, std::uint64_t seed) {
  HilbertVec h(sp);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = counter_normal(seed, i);
  return (1.0 / norm(h)) * h;
}

}  // namespace

TEST(DriverDerivative, FirstOrderIsKernel) {
  const auto f = make_field(1, 2, 16, 100.0, 16);
  const auto w = sample_omega(f.spec.space, 1);
  for (std::size_t ti : {3u, 15u})
    for (int l = 0; l < 2; ++l) EXPECT_EQ(driver_derivative(f, w, ti, l).coords, f.component_kernel(ti, l).data);
}

TEST(DriverDerivative, Adapted) {
  const auto f = make_field(2, 2, 16, 100.0, 16);
  const auto w = sample_omega(f.spec.space, 2);
  const auto& sp = *f.spec.space;
  for (std::size_t ti : {4u, 9u}) {
    const double t = f.times[ti];
    for (int l = 0; l < 2; ++l) {
      const auto df = driver_derivative(f, w, ti, l);
      for (std::size_t i = 0; i < df.size(); ++i) {
        const bool other_block = sp.component_of(i) != l;
        const bool after_t = sp.edges[sp.cell_of_index(i)] >= t - 1e-12;
        if (other_block || after_t) EXPECT_EQ(df[i], 0.0);
      }
    }
  }
}

TEST(DriverDerivative, SecondOrderDifferenceQuotient) {
  const auto f = make_field(2, 1, 8, 50.0, 8);
  const auto w = sample_omega(f.spec.space, 3);
  const auto df = driver_derivative(f, w, 7, 0);
  for (std::size_t r : {2u, 9u, 12u}) {
    const auto e = HilbertVec::unit(f.spec.space, r);
    const double base = simulate_path(f, w).values[7][0];
    std::vector<double> errs;
    for (double eps : {1e-2, 1e-3}) {
      const double q = (simulate_path(f, shift_omega(w, eps, e)).values[7][0] - base) / eps;
      errs.push_back(std::abs(q - df[r]));
    }
    // I_2 is quadratic in the draw, so the quotient error is exactly linear in eps.
    EXPECT_NEAR(errs[0] / errs[1], 10.0, 0.01) << r;
  }
}

TEST(ShiftedDriver, MatchesShiftedDraw) {
  for (int q : {1, 2}) {
    const auto f = make_field(q, 2, 8, 20.0, 8);
    for (int r = 0; r < 25; ++r) {
      const auto w = sample_omega(f.spec.space, 100 + r);
      const auto h = random_direction(f.spec.space, 200 + r);
      const double eps = 0.05 * (r - 12);
      const auto a = shifted_driver(f, w, h, eps);
      const auto b = simulate_path(f, shift_omega(w, eps, h));
      for (std::size_t ti = 0; ti < f.times.size(); ++ti)
        for (int l = 0; l < 2; ++l)
          EXPECT_NEAR(a.values[ti][l], b.values[ti][l], 1e-10 * (1 + std::abs(b.values[ti][l])));
    }
  }
}

TEST(SolutionDerivative, ConstantSigmaIsSigmaTimesDF) {
  const auto f = make_field(2, 2, 8, 50.0, 16);
  const auto c = make_preset("rank1-2d");
  const auto w = sample_omega(f.spec.space, 4);
  auto s = solve_euler(c, {0.0, 0.0}, driver_grid(simulate_path(f, w), 16));
  solve_theta_all(c, s);
  const auto dd = compute_driver_derivatives(f, w, 16);
  const auto mf = solution_derivative(s, dd, f.spec.space, {8, 16});
  const Vec sig = c.sigma({0.0, 0.0});
  for (std::size_t j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      const auto expect = sig[k * 2] * mf.DF[j][0] + sig[k * 2 + 1] * mf.DF[j][1];
      for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(mf.DX[j][k][i], expect[i], 1e-13);
    }
}

TEST(SolutionDerivative, AdditiveGammaIsKernelNorm) {
  const auto f = make_field(1, 1, 32, 1e6, 32, 1.2);
  const auto c = make_preset("additive", {{"vol", 1.5}});
  const auto w = sample_omega(f.spec.space, 5);
  auto s = solve_euler(c, {0.0}, driver_grid(simulate_path(f, w), 32));
  solve_theta_all(c, s);
  const auto mf = solution_derivative(s, compute_driver_derivatives(f, w, 32), f.spec.space, {32});
  const auto M = malliavin_matrix(mf, 0);
  EXPECT_NEAR(M.gamma[0], 2.25 * tensor_inner(f.kernels[31], f.kernels[31]), 1e-12);
  EXPECT_NEAR(M.gamma[0], 2.25, 0.05 * 2.25);
}

TEST(MalliavinMatrixTest, SymmetricPsdConsistent) {
  const auto f = make_field(2, 2, 8, 50.0, 16);
  const auto c = make_preset("elliptic-2d");
  for (int r = 0; r < 5; ++r) {
    const auto w = sample_omega(f.spec.space, 30 + r);
    auto s = solve_euler(c, {0.2, 0.1}, driver_grid(simulate_path(f, w), 16));
    solve_theta_all(c, s);
    const auto mf = solution_derivative(s, compute_driver_derivatives(f, w, 16), f.spec.space, {16});
    const auto M = malliavin_matrix(mf, 0);
    EXPECT_EQ(M.gamma[1], M.gamma[2]);
    EXPECT_GE(M.min_eig, -1e-10);
    EXPECT_NEAR(M.det, M.eigenvalues[0] * M.eigenvalues[1], 1e-12 * (1 + std::abs(M.det)));
    EXPECT_NEAR(M.trace, M.gamma[0] + M.gamma[3], 1e-15);
    EXPECT_GT(M.det, 0.0);
  }
}

TEST(MalliavinMatrixTest, RankOneSigmaIsSingular) {
  const auto f = make_field(1, 2, 16, 100.0, 16);
  const auto c = make_preset("rank1-2d");
  const auto w = sample_omega(f.spec.space, 6);
  auto s = solve_euler(c, {0.0, 0.0}, driver_grid(simulate_path(f, w), 16));
  solve_theta_all(c, s);
  const auto mf = solution_derivative(s, compute_driver_derivatives(f, w, 16), f.spec.space, {16});
  const auto M = malliavin_matrix(mf, 0);
  EXPECT_LE(std::abs(M.det), 1e-12 * M.trace * M.trace);
}

TEST(Hypotheses, EllipticPreset) {
  const auto f = make_field(1, 2, 16, 1e4, 64);
  const auto c = make_preset("elliptic-2d");
  std::vector<SolutionBundle> sols;
  std::vector<DriverDerivatives> dfs;
  for (int r = 0; r < 4; ++r) {
    const auto w = sample_omega(f.spec.space, 50 + r);
    sols.push_back(solve_euler(c, {0.0, 0.0}, driver_grid(simulate_path(f, w), 16)));
    dfs.push_back(compute_driver_derivatives(f, w, 16));
  }
  std::vector<double> zero(17, 0.0), ramp(17);
  for (int k = 0; k <= 16; ++k) ramp[k] = k / 16.0;
  const auto rep = hypothesis_checks(f, c, sols, dfs, {zero, ramp});
  EXPECT_EQ(rep.h4_max_cross, 0.0);
  EXPECT_GE(rep.h3_min_singular, 0.9);
  EXPECT_FALSE(rep.h3_flag);
  ASSERT_EQ(rep.h5_premise.size(), 2u);
  EXPECT_EQ(rep.h5_premise[0], 0.0);
  EXPECT_GT(rep.h5_premise[1], 0.0);
  EXPECT_NEAR(rep.h2_slope, 0.7, 0.15);

  const auto r1 = make_preset("rank1-2d");
  EXPECT_TRUE(hypothesis_checks(f, r1, sols, dfs).h3_flag);
}

TEST(Directional, FirstOrderDriver) {
  const auto f = make_field(1, 2, 16, 1e4, 32);
  const auto c = make_preset("elliptic-2d");
  for (int r = 0; r < 3; ++r) {
    const auto w = sample_omega(f.spec.space, 70 + r);
    const auto h = random_direction(f.spec.space, 80 + r);
    const auto chk = directional_check(c, {0.1, -0.1}, f, w, h, 32, 32, r % 2, {1e-1, 1e-2, 1e-3, 1e-4});
    EXPECT_GE(chk.order, 0.9) << r;
    EXPECT_GT(chk.errors.front(), 0.0);
    EXPECT_NE(chk.derivative, 0.0);
    EXPECT_LT(chk.errors.back(), 1e-3 * (1 + std::abs(chk.derivative)));
  }
}

TEST(Directional, SecondOrderDriver) {
  const auto f = make_field(2, 2, 8, 100.0, 16);
  const auto c = make_preset("elliptic-2d");
  for (int r = 0; r < 3; ++r) {
    const auto w = sample_omega(f.spec.space, 90 + r);
    const auto h = random_direction(f.spec.space, 95 + r);
    const auto chk = directional_check(c, {0.0, 0.3}, f, w, h, 16, 16, r % 2, {1e-1, 1e-2, 1e-3, 1e-4});
    EXPECT_GE(chk.order, 0.9) << r;
    EXPECT_GT(chk.errors.front(), 0.0);
    EXPECT_NE(chk.derivative, 0.0);
  }
}

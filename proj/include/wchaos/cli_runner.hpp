#pragma once

// Scenario configuration and the command implementations behind the
// `wchaos` executable. Commands return process exit codes:
//   0 success, 1 invariant failure, 2 configuration error, 3 numeric failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <locale>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wchaos/chaos_algebra.hpp"
#include "wchaos/density_lab.hpp"
#include "wchaos/hermite_driver.hpp"
#include "wchaos/malliavin_engine.hpp"
#include "wchaos/sde_engine.hpp"
#include "wchaos/wiener_core.hpp"

namespace wchaos {

inline constexpr const char* kVersion = "0.1.0";

struct ProcessConfig {
  int q = 1;
  double H = 0.7;
  int m = 1;
  int n = 64;             ///< uniform cells on [0, T]
  double L = 1e6;         ///< noise support starts at -L
  double grading = 1.15;  ///< growth factor of past cells (1 = uniform)
  int s_nodes = 64;
};

struct SdeConfig {
  std::string preset = "additive";
  Vec x0{0.0};
  int steps = 64;
  double T = 1.0;
  PresetParams params;
};

struct RunConfig {
  std::size_t M = 100;
  std::uint64_t seed = 1;
  std::vector<double> out_times;  ///< empty: the solver grid
  std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};
  double tolerance_scale = 1.0;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"csv"};
};

struct SelfSimConfig {
  double t = 1.0;
  double eps = 0.25;
};

struct ScenarioConfig {
  ProcessConfig process;
  SdeConfig sde;
  RunConfig run;
  OutputConfig output;
  SelfSimConfig selfsim;
  std::uint64_t hash = 0;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

using nlohmann::json;

inline void config_fail(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) config_fail(where + " must be an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) config_fail("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    config_fail(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

/// Strict parse: unknown keys, wrong types and out-of-range values are
/// configuration errors.
inline ScenarioConfig parse_config(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::config_fail;
  using detail::read;
  ScenarioConfig c;
  check_keys(j, {"process", "sde", "run", "output", "selfsim"}, "config");
  if (j.contains("process")) {
    const auto& p = j["process"];
    check_keys(p, {"q", "H", "m", "n", "L", "grading", "s_nodes"}, "process");
    read(p, "q", c.process.q, "process");
    read(p, "H", c.process.H, "process");
    read(p, "m", c.process.m, "process");
    read(p, "n", c.process.n, "process");
    read(p, "L", c.process.L, "process");
    read(p, "grading", c.process.grading, "process");
    read(p, "s_nodes", c.process.s_nodes, "process");
  }
  bool have_x0 = false;
  if (j.contains("sde")) {
    const auto& s = j["sde"];
    check_keys(s, {"preset", "x0", "steps", "T", "params"}, "sde");
    read(s, "preset", c.sde.preset, "sde");
    have_x0 = s.contains("x0");
    read(s, "x0", c.sde.x0, "sde");
    read(s, "steps", c.sde.steps, "sde");
    read(s, "T", c.sde.T, "sde");
    read(s, "params", c.sde.params, "sde");
  }
  if (j.contains("run")) {
    const auto& r = j["run"];
    check_keys(r, {"M", "seed", "out_times", "eps", "tolerance_scale"}, "run");
    read(r, "M", c.run.M, "run");
    read(r, "seed", c.run.seed, "run");
    read(r, "out_times", c.run.out_times, "run");
    read(r, "eps", c.run.eps, "run");
    read(r, "tolerance_scale", c.run.tolerance_scale, "run");
  }
  if (j.contains("output")) {
    const auto& o = j["output"];
    check_keys(o, {"directory", "formats"}, "output");
    read(o, "directory", c.output.directory, "output");
    read(o, "formats", c.output.formats, "output");
  }
  if (j.contains("selfsim")) {
    const auto& s = j["selfsim"];
    check_keys(s, {"t", "eps"}, "selfsim");
    read(s, "t", c.selfsim.t, "selfsim");
    read(s, "eps", c.selfsim.eps, "selfsim");
  }

  const auto& p = c.process;
  if (p.q < 1 || p.q > kMaxProcessOrder) config_fail("process.q must lie in [1, 3]");
  if (!(p.H > 0.5 && p.H < 1.0))
    config_fail("process.H = " + std::to_string(p.H) + " violates (H2): H must lie in (1/2, 1)");
  if (p.m < 1) config_fail("process.m must be >= 1");
  if (p.n < 2) config_fail("process.n must be >= 2");
  if (!(p.L > 0)) config_fail("process.L must be > 0");
  if (!(p.grading >= 1.0)) config_fail("process.grading must be >= 1");
  if (p.s_nodes < 2) config_fail("process.s_nodes must be >= 2");

  SdeCoefficients coeffs;
  try {
    coeffs = make_preset(c.sde.preset, c.sde.params);
  } catch (const Error& e) {
    config_fail(std::string("sde.preset: ") + e.what());
  }
  if (!have_x0) c.sde.x0.assign(coeffs.d, 0.0);
  if (static_cast<int>(c.sde.x0.size()) != coeffs.d)
    config_fail("sde.x0 must have " + std::to_string(coeffs.d) + " entries for preset " + c.sde.preset);
  if (coeffs.m != p.m)
    config_fail("preset " + c.sde.preset + " needs process.m = " + std::to_string(coeffs.m));
  if (c.sde.steps < 1 || c.sde.steps > 1024) config_fail("sde.steps must lie in [1, 1024]");
  if (!(c.sde.T > 0)) config_fail("sde.T must be > 0");

  if (c.run.M < 1) config_fail("run.M must be >= 1");
  for (double e : c.run.eps)
    if (!(e > 0)) config_fail("run.eps entries must be > 0");
  for (std::size_t i = 0; i < c.run.out_times.size(); ++i) {
    const double t = c.run.out_times[i];
    if (!(t > 0 && t <= c.sde.T)) config_fail("run.out_times must lie in (0, T]");
    if (i && !(t > c.run.out_times[i - 1])) config_fail("run.out_times must increase strictly");
  }
  if (!(c.run.tolerance_scale >= 0)) config_fail("run.tolerance_scale must be >= 0");
  for (const auto& f : c.output.formats)
    if (f != "csv" && f != "txt") config_fail("output.formats supports 'csv' and 'txt'");
  if (!(c.selfsim.eps > 0 && c.selfsim.eps < c.selfsim.t))
    config_fail("selfsim needs 0 < eps < t");
  return c;
}

inline void rehash(ScenarioConfig& c) {
  nlohmann::json j;
  j["process"] = {{"q", c.process.q}, {"H", c.process.H}, {"m", c.process.m}, {"n", c.process.n},
                  {"L", c.process.L}, {"grading", c.process.grading}, {"s_nodes", c.process.s_nodes}};
  j["sde"] = {{"preset", c.sde.preset}, {"x0", c.sde.x0}, {"steps", c.sde.steps}, {"T", c.sde.T},
              {"params", c.sde.params}};
  j["run"] = {{"M", c.run.M}, {"seed", c.run.seed}, {"out_times", c.run.out_times}, {"eps", c.run.eps},
              {"tolerance_scale", c.run.tolerance_scale}};
  j["selfsim"] = {{"t", c.selfsim.t}, {"eps", c.selfsim.eps}};
  c.hash = fnv1a(j.dump());
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed config: ") + e.what());
  }
  auto c = parse_config(j);
  rehash(c);
  return c;
}

struct RunOptions {
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out_dir;  ///< overrides output.directory when nonempty
  std::ostream* log = &std::cerr;
};

inline SpacePtr build_space(const ScenarioConfig& c, int m, double T) {
  return make_graded_hilbert(m, c.process.L, T, c.process.n, c.process.grading);
}

inline KernelField build_field(const ScenarioConfig& c, std::vector<double> times, int m, double T) {
  HermiteSpec spec;
  spec.q = c.process.q;
  spec.H = c.process.H;
  spec.m = m;
  spec.space = build_space(c, m, T);
  spec.s_nodes = c.process.s_nodes;
  spec.out_times = std::move(times);
  return build_kernels(spec);
}

inline KernelField solver_field(const ScenarioConfig& c) {
  return build_field(c, uniform_times(c.sde.T, c.sde.steps), c.process.m, c.sde.T);
}

/// Output file with the '#' provenance header, LF endings, '.' decimals and
/// 17 significant digits.
class OutputFile {
 public:
  OutputFile(const ScenarioConfig& c, const RunOptions& opt, const std::string& command, const std::string& name) {
    namespace fs = std::filesystem;
    const fs::path dir = opt.out_dir.empty() ? fs::path(c.output.directory) : fs::path(opt.out_dir);
    if (!fs::exists(dir)) {
      fs::create_directories(dir);
      if (opt.log) *opt.log << "created output directory " << dir.string() << '\n';
    }
    path_ = (dir / name).string();
    os_.open(path_, std::ios::binary | std::ios::trunc);
    if (!os_) throw Error(ErrorKind::IoError, "cannot write " + path_);
    os_.imbue(std::locale::classic());
    os_ << std::setprecision(17);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(c.hash));
    os_ << "# wchaos " << kVersion << " config " << hex << " command " << command << '\n';
  }
  std::ostream& stream() { return os_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream os_;
};

inline std::uint64_t root_seed(const ScenarioConfig& c, const RunOptions& opt) {
  return opt.seed.value_or(c.run.seed);
}

inline int cmd_simulate(const ScenarioConfig& c, const RunOptions& opt) {
  const double T = c.sde.T;
  auto times = c.run.out_times.empty() ? uniform_times(T, c.sde.steps) : c.run.out_times;
  const auto field = build_field(c, times, c.process.m, T);
  const std::uint64_t root = root_seed(c, opt);
  std::vector<DrivingPath> paths(c.run.M);
  parallel_for(c.run.M, opt.workers, [&](std::size_t i) {
    paths[i] = simulate_path(field, sample_omega(field.spec.space, sample_seed(root, i)));
  });
  OutputFile csv(c, opt, "simulate", "driver_paths.csv");
  auto& os = csv.stream();
  os << "seed,t";
  for (int l = 1; l <= c.process.m; ++l) os << ",F_" << l;
  os << '\n';
  for (const auto& p : paths)
    for (std::size_t k = 0; k < p.times.size(); ++k) {
      os << p.seed << ',' << p.times[k];
      for (double v : p.values[k]) os << ',' << v;
      os << '\n';
    }
  OutputFile kern(c, opt, "simulate", "kernels.txt");
  export_kernels(field, kern.stream());
  return 0;
}

struct CheckRecord {
  std::string name;
  double statistic = 0.0;
  double bound = 0.0;
  bool pass = false;
};

namespace detail {

inline Tensor random_sym(const SpacePtr& sp, int q, std::uint64_t key, bool diagonal_free) {
  Tensor t(sp, q);
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = counter_normal(key, i);
  t = symmetrize(t);
  if (diagonal_free && q >= 2) {
    std::array<std::size_t, kMaxTensorOrder> idx{};
    for (std::size_t off = 0; off < t.data.size(); ++off) {
      unravel(off, t.dim(), q, idx.data());
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < a; ++b)
          if (idx[a] == idx[b]) t.data[off] = 0.0;
    }
  }
  return t;
}

inline HilbertVec random_vec(const SpacePtr& sp, std::uint64_t key) {
  HilbertVec v(sp);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = counter_normal(key, i);
  return v;
}

}  // namespace detail

/// Desk-scale invariant suite over the configured process and preset.
inline std::vector<CheckRecord> run_checks(const ScenarioConfig& c, const RunOptions& opt) {
  using detail::random_sym;
  using detail::random_vec;
  const double scale = c.run.tolerance_scale;
  const std::uint64_t root = root_seed(c, opt);
  std::vector<CheckRecord> out;
  auto add = [&](std::string name, double stat, double bound) {
    out.push_back({std::move(name), stat, bound * scale, stat <= bound * scale});
  };

  // Exact identities of the discrete chaos calculus.
  {
    const auto sp = make_hilbert(1, 0.0, 1.0, 8);
    double shift = 0, taylor = 0, reint = 0, prod = 0, roundtrip = 0, evalid = 0;
    for (int r = 0; r < 20; ++r) {
      const std::uint64_t k = stream_key(root, 100 + r);
      const auto w = sample_omega(sp, k);
      const auto g = random_vec(sp, stream_key(k, 1)), h = random_vec(sp, stream_key(k, 2));
      const double eps = 2.0 * counter_uniform(k, 3) - 1.0;
      const double xg = iso_gaussian(g, w);
      shift = std::max(shift, std::abs(iso_gaussian(g, shift_omega(w, eps, h)) - xg - eps * inner(g, h)) /
                                  (norm(g) * norm(h) * std::abs(eps) + std::abs(xg)));
      for (int q = 1; q <= 3; ++q) {
        const auto f = random_sym(sp, q, stream_key(k, 10 + q), false);
        const double direct = multiple_integral(f, shift_omega(w, eps, h)).value;
        taylor = std::max(taylor, std::abs(taylor_shift(f, w, h, eps) - direct) / std::max(1.0, std::abs(direct)));
        const double iv = multiple_integral(f, w).value;
        reint = std::max(reint, std::abs(reintegrate(f, w) - iv) / std::max(1.0, std::abs(iv)));
        HilbertVec e0 = g;
        e0 = (1.0 / norm(g)) * e0;
        const auto terms = decompose_along(f, e0);
        roundtrip = std::max(roundtrip, tensor_norm(recompose(terms, e0) - f) / std::max(1.0, tensor_norm(f)));
        double sum = 0.0;
        for (const auto& t : terms)
          sum += hermite_power_integral(e0, t.k, w) * multiple_integral(t.component, w).value;
        evalid = std::max(evalid, std::abs(sum - iv) / std::max(1.0, std::abs(iv)));
      }
      for (int p = 1; p <= 2; ++p)
        for (int q = 1; p + q <= 4; ++q) {
          const auto f = random_sym(sp, p, stream_key(k, 20 + p), true);
          const auto gq = random_sym(sp, q, stream_key(k, 30 + q), true);
          const double scale_fg = std::max(1.0, tensor_norm(f) * tensor_norm(gq));
          prod = std::max(prod, std::abs(product_formula_check(f, gq, w)) / scale_fg);
        }
    }
    add("shift_identity", shift, 1e-12);
    add("taylor_identity", taylor, 1e-10);
    add("reintegration", reint, 1e-10);
    add("product_formula", prod, 1e-10);
    add("decomposition_roundtrip", roundtrip, 1e-12);
    add("decomposition_evaluation", evalid, 1e-10);
  }

  // Isometry of the configured order on basis_dim 16, as a z-score.
  {
    const auto sp = make_hilbert(1, 0.0, 1.0, 16);
    const int q = c.process.q;
    const auto f = random_sym(sp, q, stream_key(root, 7), false);
    const double target = factorial(q) * tensor_inner(f, f);
    const std::size_t M = std::max<std::size_t>(c.run.M, 100);
    double s1 = 0, s2 = 0;
    for (std::size_t i = 0; i < M; ++i) {
      const double v = multiple_integral(f, sample_omega(sp, sample_seed(stream_key(root, 8), i))).value;
      s1 += v * v;
      s2 += v * v * v * v;
    }
    const double mean = s1 / M, sd = std::sqrt(std::max(0.0, s2 / M - mean * mean));
    add("isometry_zscore", std::abs(mean - target) / (sd / std::sqrt(double(M))), 3.0);
  }

  // Kernel normalization and component independence on the configured grid.
  const auto field = solver_field(c);
  {
    const double v = factorial(c.process.q) * tensor_inner(field.kernels.back(), field.kernels.back());
    add("kernel_variance_rel_gap", std::abs(v / std::pow(c.sde.T, 2 * c.process.H) - 1.0), 0.05);
  }

  const auto coeffs = make_preset(c.sde.preset, c.sde.params);
  const auto w = sample_omega(field.spec.space, sample_seed(root, 0));
  const auto path = simulate_path(field, w);
  auto sol = solve_euler(coeffs, c.sde.x0, driver_grid(path, c.sde.steps));
  solve_theta_all(coeffs, sol);
  const auto dd = compute_driver_derivatives(field, w, c.sde.steps);
  {
    const auto rep = hypothesis_checks(field, coeffs, {sol}, {dd});
    add("malliavin_independence", rep.h4_max_cross, 0.0);
    if (rep.h2_slope != 0.0) add("kernel_holder_slope_gap", std::abs(rep.h2_slope - c.process.H), 0.1);
  }
  {
    double gap = 0.0;
    for (int i = 0; i <= sol.steps(); ++i) {
      const Vec x(sol.state(i).begin(), sol.state(i).end());
      const Vec sg = coeffs.sigma(x), th = sol.theta_at(i, i);
      for (std::size_t k = 0; k < sg.size(); ++k) gap = std::max(gap, std::abs(sg[k] - th[k]));
    }
    add("theta_initial_condition", gap, 0.0);
  }
  {
    const auto dcheck = validate_derivatives(coeffs);
    add("coefficient_derivatives", dcheck.max_rel_gap, 1e-5);
  }
  {
    // Constant coefficients integrate the driver exactly.
    const auto additive = make_preset("additive", {{"drift", 0.3}, {"vol", 1.7}});
    SdeCoefficients a = additive;
    if (c.process.m == 1) {
      const auto s = solve_euler(a, {0.5}, driver_grid(path, c.sde.steps));
      double gap = 0.0;
      for (int k = 0; k <= s.steps(); ++k) {
        const double exact = 0.5 + 0.3 * s.times[k] + 1.7 * s.driver.at(k)[0];
        gap = std::max(gap, std::abs(s.X[k] - exact) / std::max(1.0, std::abs(exact)));
      }
      add("additive_exactness", gap, 1e-12);
    }
  }
  {
    std::vector<double> psi1(static_cast<std::size_t>(sol.steps() + 1) * sol.m), psi2 = psi1, mix = psi1;
    for (std::size_t i = 0; i < psi1.size(); ++i) {
      psi1[i] = std::sin(0.7 * i);
      psi2[i] = std::cos(1.3 * i);
      mix[i] = 2.0 * psi1[i] - 0.5 * psi2[i];
    }
    const auto a = frechet_directional(sol, psi1), b = frechet_directional(sol, psi2),
               m = frechet_directional(sol, mix);
    double gap = 0.0, sz = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      gap = std::max(gap, std::abs(m[i] - (2.0 * a[i] - 0.5 * b[i])));
      sz = std::max(sz, std::abs(m[i]));
    }
    add("frechet_linearity", gap / sz, 1e-10);
  }
  {
    const auto mf = solution_derivative(sol, dd, field.spec.space, {sol.steps()});
    const auto M = malliavin_matrix(mf, 0);
    double asym = 0.0;
    for (int a = 0; a < M.d; ++a)
      for (int b = 0; b < M.d; ++b) asym = std::max(asym, std::abs(M.gamma[a * M.d + b] - M.gamma[b * M.d + a]));
    add("gamma_symmetry", asym, 1e-10 * std::max(1.0, M.trace));
    add("gamma_psd_deficit", std::max(0.0, -M.min_eig), 1e-10 * std::max(1.0, M.trace));
  }
  {
    // Shift exactness of the driver and the order of the directional quotient.
    const auto h = random_vec(field.spec.space, stream_key(root, 9));
    HilbertVec hn = (1.0 / norm(h)) * h;
    const auto shifted = shifted_driver(field, w, hn, 0.3);
    const auto direct = simulate_path(field, shift_omega(w, 0.3, hn));
    double gap = 0.0;
    for (std::size_t k = 0; k < direct.times.size(); ++k)
      for (int l = 0; l < c.process.m; ++l)
        gap = std::max(gap, std::abs(shifted.values[k][l] - direct.values[k][l]) /
                                std::max(1.0, std::abs(direct.values[k][l])));
    add("shifted_driver_exactness", gap, 1e-10);
    const auto dc = directional_check(coeffs, c.sde.x0, field, w, hn, c.sde.steps, c.sde.steps, 0, c.run.eps);
    if (dc.errors.size() >= 2 && dc.errors.front() > 1e-13)
      add("directional_order_deficit", std::max(0.0, 1.0 - dc.order), 0.1);
  }
  return out;
}

inline int cmd_check(const ScenarioConfig& c, const RunOptions& opt) {
  const auto recs = run_checks(c, opt);
  OutputFile f(c, opt, "check", "check_report.csv");
  auto& os = f.stream();
  os << "name,statistic,bound,pass\n";
  bool all = true;
  for (const auto& r : recs) {
    os << r.name << ',' << r.statistic << ',' << r.bound << ',' << (r.pass ? "pass" : "fail") << '\n';
    all = all && r.pass;
    if (opt.log) *opt.log << (r.pass ? "PASS " : "FAIL ") << r.name << " statistic=" << r.statistic
                          << " bound=" << r.bound << '\n';
  }
  return all ? 0 : 1;
}

inline int cmd_solve(const ScenarioConfig& c, const RunOptions& opt) {
  const auto field = solver_field(c);
  const auto coeffs = make_preset(c.sde.preset, c.sde.params);
  const std::uint64_t root = root_seed(c, opt);
  std::vector<SolutionBundle> sols(c.run.M);
  std::vector<char> failed(c.run.M, 0);
  parallel_for(c.run.M, opt.workers, [&](std::size_t i) {
    const auto w = sample_omega(field.spec.space, sample_seed(root, i));
    try {
      sols[i] = solve_euler(coeffs, c.sde.x0, driver_grid(simulate_path(field, w), c.sde.steps));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Blowup) throw;
      failed[i] = 1;
    }
  });
  OutputFile f(c, opt, "solve", "solution.csv");
  auto& os = f.stream();
  os << "seed,t";
  for (int k = 1; k <= coeffs.d; ++k) os << ",x_" << k;
  os << '\n';
  std::size_t n_failed = 0;
  for (std::size_t i = 0; i < sols.size(); ++i) {
    if (failed[i]) {
      ++n_failed;
      continue;
    }
    for (int k = 0; k <= sols[i].steps(); ++k) {
      os << sample_seed(root, i) << ',' << sols[i].times[k];
      for (double v : sols[i].state(k)) os << ',' << v;
      os << '\n';
    }
  }
  if (opt.log && n_failed) *opt.log << n_failed << " samples blew up and were excluded\n";
  return n_failed == sols.size() ? 3 : 0;
}

inline int cmd_malliavin(const ScenarioConfig& c, const RunOptions& opt) {
  const auto field = solver_field(c);
  const auto coeffs = make_preset(c.sde.preset, c.sde.params);
  const std::uint64_t root = root_seed(c, opt);
  EnsembleSetup setup{&field, coeffs, c.sde.x0, c.sde.steps, root, true};
  const auto ens = run_ensemble(setup, std::max<std::size_t>(c.run.M, 2), opt.workers);
  {
    OutputFile f(c, opt, "malliavin", "malliavin_matrix.csv");
    auto& os = f.stream();
    os << "seed,t,det_gamma,min_eig,trace_gamma,excluded_flag\n";
    for (std::size_t i = 0; i < ens.draws; ++i)
      os << ens.seeds[i] << ',' << ens.t << ',' << ens.det_samples[i] << ',' << ens.min_eig[i] << ','
         << ens.trace[i] << ',' << int(ens.excluded[i]) << '\n';
  }
  const auto w = sample_omega(field.spec.space, sample_seed(root, 0));
  const auto h = detail::random_vec(field.spec.space, stream_key(root, 9));
  const HilbertVec hn = (1.0 / norm(h)) * h;
  OutputFile f(c, opt, "malliavin", "directional.csv");
  auto& os = f.stream();
  os << "component,eps,quotient,derivative,abs_error\n";
  bool ok = true;
  for (int k = 0; k < coeffs.d; ++k) {
    const auto dc = directional_check(coeffs, c.sde.x0, field, w, hn, c.sde.steps, c.sde.steps, k, c.run.eps);
    for (std::size_t e = 0; e < dc.eps.size(); ++e)
      os << k + 1 << ',' << dc.eps[e] << ',' << dc.quotients[e] << ',' << dc.derivative << ',' << dc.errors[e]
         << '\n';
    if (opt.log) *opt.log << "component " << k + 1 << " observed order " << dc.order << '\n';
    if (dc.errors.size() >= 2 && dc.errors.front() > 1e-13) ok = ok && dc.order >= 0.9;
  }
  return ok ? 0 : 1;
}

inline int cmd_density(const ScenarioConfig& c, const RunOptions& opt) {
  const auto field = solver_field(c);
  const auto coeffs = make_preset(c.sde.preset, c.sde.params);
  EnsembleSetup setup{&field, coeffs, c.sde.x0, c.sde.steps, root_seed(c, opt), true};
  const auto ens = run_ensemble(setup, std::max<std::size_t>(c.run.M, 2), opt.workers);
  {
    OutputFile f(c, opt, "density", "ensemble.csv");
    auto& os = f.stream();
    os << "seed,t";
    for (int k = 1; k <= ens.d; ++k) os << ",x_" << k;
    os << ",det_gamma,min_eig,excluded_flag\n";
    for (std::size_t i = 0; i < ens.draws; ++i) {
      os << ens.seeds[i] << ',' << ens.t;
      for (int k = 0; k < ens.d; ++k) os << ',' << ens.x_samples[i * ens.d + k];
      os << ',' << ens.det_samples[i] << ',' << ens.min_eig[i] << ',' << int(ens.excluded[i]) << '\n';
    }
  }
  nlohmann::json report;
  {
    OutputFile f(c, opt, "density", "kde.csv");
    auto& os = f.stream();
    os << "coordinate,x,density\n";
    report["kde"] = nlohmann::json::array();
    for (int k = 0; k < ens.d; ++k) {
      const auto xs = ens.coordinate(k);
      nlohmann::json entry{{"coordinate", k + 1}};
      if (xs.size() < 2) {
        entry["degenerate_law"] = true;
      } else {
        const auto est = kde(xs);
        entry["degenerate_law"] = est.degenerate;
        if (!est.degenerate) {
          entry["bandwidth"] = est.bandwidth;
          entry["mass"] = est.mass;
          for (std::size_t j = 0; j < est.grid.size(); ++j)
            os << k + 1 << ',' << est.grid[j] << ',' << est.values[j] << '\n';
        }
      }
      report["kde"].push_back(entry);
    }
  }
  const auto pos = positivity_report(ens);
  report["positivity"] = {{"fraction_positive", pos.fraction_positive},
                          {"min_det", pos.min_det},
                          {"median_det", pos.median_det},
                          {"considered", pos.considered},
                          {"excluded", pos.excluded}};
  OutputFile f(c, opt, "density", "positivity.json");
  f.stream() << report.dump(2) << '\n';
  if (opt.log) *opt.log << "positivity fraction " << pos.fraction_positive << " over " << pos.considered
                        << " samples, " << pos.excluded << " excluded\n";
  return 0;
}

inline int cmd_selfsim(const ScenarioConfig& c, const RunOptions& opt) {
  const double t = c.selfsim.t, eps = c.selfsim.eps;
  const auto space = build_space(c, 1, t);
  const auto ratio = eps * c.process.n / t;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw Error(ErrorKind::ConfigError, "selfsim.eps must be a multiple of the cell width t / n");
  SelfSimilarityExperiment exp(c.process.q, c.process.H, t, eps, space);
  const std::uint64_t root = root_seed(c, opt);
  const std::size_t M = c.run.M;
  std::vector<double> lhs(M), rhs(M);
  parallel_for(M, opt.workers, [&](std::size_t i) {
    lhs[i] = exp.lhs(sample_omega(exp.lhs_space(), sample_seed(root, i)));
    rhs[i] = exp.rhs(sample_omega(exp.rhs_space(), sample_seed(stream_key(root, 0x55), i)));
  });
  {
    OutputFile f(c, opt, "selfsim", "selfsim.csv");
    auto& os = f.stream();
    os << "sample,lhs,rhs\n";
    for (std::size_t i = 0; i < M; ++i) os << i << ',' << lhs[i] << ',' << rhs[i] << '\n';
  }
  OutputFile f(c, opt, "selfsim", "selfsim_summary.txt");
  auto& os = f.stream();
  bool ok;
  if (c.process.q == 1) {
    const double gap = std::abs(lhs[0] - rhs[0]) / std::abs(rhs[0]);
    ok = gap <= 1e-3 * c.run.tolerance_scale;
    os << "deterministic_rel_gap " << gap << "\npass " << ok << '\n';
  } else {
    const auto ks = ks_two_sample(lhs, rhs);
    ok = ks.statistic < ks.critical_1pct;
    os << "ks_statistic " << ks.statistic << "\ncritical_1pct " << ks.critical_1pct << "\ncritical_5pct "
       << ks.critical_5pct << "\np_value " << ks.p_value << "\npass " << ok << '\n';
  }
  return ok ? 0 : 1;
}

/// Loads the config, applies overrides and runs one command, mapping errors
/// to exit codes.
inline int run_command(const std::string& command, const std::string& config_path, const RunOptions& opt) {
  std::ostream& log = opt.log ? *opt.log : std::cerr;
  try {
    auto c = load_config(config_path);
    if (opt.seed) c.run.seed = *opt.seed;
    rehash(c);
    if (command == "simulate") return cmd_simulate(c, opt);
    if (command == "check") return cmd_check(c, opt);
    if (command == "solve") return cmd_solve(c, opt);
    if (command == "malliavin") return cmd_malliavin(c, opt);
    if (command == "density") return cmd_density(c, opt);
    if (command == "selfsim") return cmd_selfsim(c, opt);
    log << "unknown command " << command << '\n';
    return 2;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::ConfigError ? 2 : 3;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace wchaos

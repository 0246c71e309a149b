#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "wchaos/cli_runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Simulation and Malliavin calculus for SDEs driven by Hermite processes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", wchaos::kVersion);

  std::string config;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out;

  const char* commands[][2] = {
      {"simulate", "sample driving paths and export kernels"},
      {"check", "run the invariant suite"},
      {"solve", "solve the SDE along sampled drivers"},
      {"malliavin", "Malliavin matrices and directional derivative checks"},
      {"density", "ensemble, density estimate and positivity report"},
      {"selfsim", "two-sample test of the self-similarity identity"},
  };
  std::vector<CLI::App*> subs;
  std::vector<CLI::Option*> seed_opts;
  for (auto& c : commands) {
    auto* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", config, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
    seed_opts.push_back(sub->add_option("--seed", seed, "root seed override"));
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory override");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  wchaos::RunOptions opt;
  opt.workers = workers;
  opt.out_dir = out;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    if (seed_opts[i]->count()) opt.seed = seed;
    return wchaos::run_command(subs[i]->get_name(), config, opt);
  }
  return 2;
}

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include "irlobs/irlobs.hpp"

namespace {

void print_matrix(const char* name, const irlobs::Matrix& M) {
  const Eigen::IOFormat fmt(Eigen::FullPrecision, 0, ", ", "\n", "  [", "]");
  std::cout << name << " =\n" << M.format(fmt) << "\n";
}

int cmd_run(const std::string& config, const std::string& out, const std::optional<std::string>& mode,
            const std::optional<std::uint64_t>& seed, bool full_rate) {
  using namespace irlobs::experiment;
  ExperimentConfig cfg = load_config(config);
  if (mode) cfg.mode = parse_mode(*mode);
  if (seed) cfg.seed = *seed;
  if (full_rate) cfg.full_rate = true;
  const RunReport rep = run_experiment(cfg);
  write_report(rep, cfg, out);
  std::printf("steps %zu  purges %zu  weight updates %zu  queries %zu\n", rep.steps, rep.purges,
              rep.weight_updates, rep.queries);
  std::printf("final |W~|/|W| = %.3e   kappa = %.3e   wall %.1f s\n", rep.w_relative_error(), rep.final_kappa,
              rep.wall_clock_seconds);
  if (!rep.failure.empty()) {
    std::fprintf(stderr, "irlobs: run aborted: %s\n", rep.failure.c_str());
    return 2;
  }
  return 0;
}

int cmd_are(const std::string& config) {
  using namespace irlobs;
  const experiment::ExperimentConfig cfg = experiment::load_config(config);
  const plant::Demonstrator d = experiment::make_demonstrator(cfg);
  print_matrix("P", d.riccati_P);
  print_matrix("K", d.feedback_gain);
  const Eigen::VectorXcd ev = numerics::eigenvalues(d.closed_loop());
  std::cout << "closed-loop eigenvalues =\n";
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    std::printf("  %.12g %+.12gi\n", ev(i).real(), ev(i).imag());
  }
  const double res = numerics::are_residual(d.plant.a_prime(), d.plant.b_prime(), d.cost.q_matrix(),
                                            d.cost.r_matrix(), d.riccati_P);
  std::printf("residual = %.3e\n", res);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Output-feedback inverse reinforcement learning experiments"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  bool full_rate = false;
  CLI::App* run = app.add_subcommand("run", "simulate, estimate, and write the report");
  run->add_option("--config", config, "YAML or JSON config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "output directory")->required();
  run->add_option("--mode", mode, "observed or query")->check(CLI::IsMember({"observed", "query"}));
  run->add_option("--seed", seed, "query RNG seed");
  run->add_flag("--full-rate", full_rate, "write every sample instead of every report interval");

  std::string are_config;
  CLI::App* are = app.add_subcommand("are", "print the Riccati solution and closed-loop eigenvalues");
  are->add_option("--config", are_config, "YAML or JSON config file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out, mode, seed, full_rate);
    if (*are) return cmd_are(are_config);
  } catch (const irlobs::ConfigError& e) {
    std::fprintf(stderr, "irlobs: config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "irlobs: %s\n", e.what());
    return 1;
  }
  return 0;
}

// Runs the reference experiment and prints the recovered cost weights.
#include <cstdio>

#include "irlobs/irlobs.hpp"

int main(int argc, char** argv) {
  using namespace irlobs::experiment;
  ExperimentConfig cfg = argc > 1 ? load_config(argv[1]) : ExperimentConfig{};
  if (argc > 2) cfg.duration = std::stod(argv[2]);
  const RunReport rep = run_experiment(cfg);
  const irlobs::Vector w_hat = rep.W_final.stacked();
  const irlobs::Vector w = rep.W_true.stacked();
  std::printf("%4s %14s %14s\n", "i", "W_hat", "W");
  for (Eigen::Index i = 0; i < w.size(); ++i) std::printf("%4ld %14.6f %14.6f\n", static_cast<long>(i), w_hat(i), w(i));
  std::printf("relative error %.3e after %zu purges (%.1f s)\n", rep.w_relative_error(), rep.purges,
              rep.wall_clock_seconds);
  if (!rep.failure.empty()) std::printf("aborted: %s\n", rep.failure.c_str());
  return rep.failure.empty() ? 0 : 1;
}

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "irlobs/experiment/config.hpp"
#include "irlobs/experiment/runner.hpp"

namespace irlobs::experiment {

namespace detail {

inline std::string format_double(double v, const char* fmt = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

inline void write_series(const std::filesystem::path& file, const std::string& prefix,
                         Eigen::Index width, const std::vector<double>& t, const std::vector<Vector>& values) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("write_report: cannot open " + file.string());
  out << 't';
  for (Eigen::Index i = 0; i < width; ++i) out << ',' << prefix << '_' << (i + 1);
  out << ",norm\r\n";
  for (std::size_t k = 0; k < t.size(); ++k) {
    out << format_double(t[k], "%.6f");
    for (Eigen::Index i = 0; i < width; ++i) out << ',' << format_double(values[k](i));
    out << ',' << format_double(values[k].norm()) << "\r\n";
  }
  if (!out) throw Error("write_report: write failed for " + file.string());
}

inline double last_norm(const std::vector<Vector>& v) {
  return v.empty() ? 0.0 : v.back().norm();
}

}  // namespace detail

/// Final numbers plus the config echo; config_from_json accepts it back.
inline json summary_json(const RunReport& rep, const ExperimentConfig& cfg) {
  using detail::to_json;
  json purges = json::array();
  for (const auto& e : rep.purge_events) {
    purges.push_back({{"t", e.t},
                      {"error_before", e.error_before},
                      {"error_after", std::isnan(e.error_after) ? json(nullptr) : json(e.error_after)}});
  }
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(rep.trajectory_digest));
  return {
      {"final",
       {{"p_tilde_norm", detail::last_norm(rep.p_tilde)},
        {"q_tilde_norm", detail::last_norm(rep.q_tilde)},
        {"theta_tilde_norm", (rep.theta_true.values() - rep.theta_final.values()).norm()},
        {"w_tilde_norm", (rep.W_true.stacked() - rep.W_final.stacked()).norm()},
        {"w_relative_error", rep.w_relative_error()}}},
      {"W_hat", to_json(rep.W_final.stacked())},
      {"W_true", to_json(rep.W_true.stacked())},
      {"purge_count", rep.purges},
      {"purge_events", purges},
      {"weight_updates", rep.weight_updates},
      {"queries", rep.queries},
      {"steps", rep.steps},
      {"kappa", rep.final_kappa},
      {"residual_norm", rep.final_residual},
      {"estimator_lambda_min", rep.estimator_lambda_min},
      {"gamma_eigenvalue_range", {rep.gamma_eig_min, rep.gamma_eig_max}},
      {"trajectory_digest", digest},
      {"wall_clock_seconds", rep.wall_clock_seconds},
      {"failure", rep.failure.empty() ? json(nullptr) : json(rep.failure)},
      {"seed", cfg.seed},
      {"config", config_to_json(cfg)},
  };
}

/// Writes ptilde.csv, qtilde.csv, thetatilde.csv, wtilde.csv and
/// summary.json into out_dir (created if missing).
inline void write_report(const RunReport& rep, const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("write_report: cannot create " + out_dir.string() + ": " + ec.message());
  const Eigen::Index n = cfg.n();
  detail::write_series(out_dir / "ptilde.csv", "p_tilde", n, rep.t, rep.p_tilde);
  detail::write_series(out_dir / "qtilde.csv", "q_tilde", n, rep.t, rep.q_tilde);
  detail::write_series(out_dir / "thetatilde.csv", "theta_tilde", rep.theta_true.size(), rep.t, rep.theta_tilde);
  detail::write_series(out_dir / "wtilde.csv", "w_tilde", rep.W_true.stacked().size(), rep.t, rep.w_tilde);
  std::ofstream out(out_dir / "summary.json");
  if (!out) throw Error("write_report: cannot open summary.json");
  out << summary_json(rep, cfg).dump(2) << '\n';
  if (!out) throw Error("write_report: write failed for summary.json");
}

}  // namespace irlobs::experiment

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "irlobs/experiment.hpp"

using namespace irlobs;
using namespace irlobs::experiment;

namespace {

namespace fs = std::filesystem;

const fs::path kSource = IRLOBS_SOURCE_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("irlobs_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig from_yaml(const std::string& text) {
  return config_from_json(parse_document(text, "inline", false));
}

std::string field_of(const std::string& yaml) {
  try {
    from_yaml(yaml);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

ExperimentConfig short_run(double duration) {
  ExperimentConfig c;
  c.duration = duration;
  c.explore_duration = 5.0;
  return c;
}

}  // namespace

TEST(Config, ShippedDefaultFileMatchesBuiltInDefaults) {
  const ExperimentConfig file = load_config(kSource / "configs" / "default.yaml");
  const ExperimentConfig builtin;
  EXPECT_EQ(config_to_json(file), config_to_json(builtin));
  EXPECT_EQ(file.estimator.gains.k, 100.0);
  EXPECT_EQ(file.estimator.gains.alpha, 20.0);
  EXPECT_EQ(file.estimator.gains.beta, 10.0);
  EXPECT_EQ(file.estimator.gains.beta1, 5.0);
  EXPECT_EQ(file.estimator.stack_capacity, 150u);
  EXPECT_EQ(file.estimator.gains.T1, 1.0);
  EXPECT_EQ(file.estimator.gains.T2, 0.8);
  EXPECT_EQ(file.A, (Matrix(2, 4) << 1, 1, -1, 1, 5, 1, 1, 1).finished());
  EXPECT_EQ(file.B, (Matrix(2, 2) << 1, 3, 0, 1).finished());
}

TEST(Config, EmptyDocumentGivesDefaultsIncludingInitialState) {
  const ExperimentConfig c = from_yaml("");
  EXPECT_EQ(c.x0, (Vector(4) << 2, -2, 1, -1).finished());
  EXPECT_EQ(c.mode, Mode::query);
  EXPECT_DOUBLE_EQ(c.estimator.gains.k_theta, 0.3 / 150.0);
  EXPECT_DOUBLE_EQ(from_yaml("estimator: {M: 60}").estimator.gains.k_theta, 0.3 / 60.0);
}

TEST(Config, RejectionsNameTheOffendingField) {
  EXPECT_EQ(field_of("estimator: {alpha: 0}"), "alpha");
  EXPECT_EQ(field_of("estimator: {k: -1}"), "k");
  EXPECT_EQ(field_of("estimator: {alpha: 20, gain: 3}"), "estimator.gain");
  EXPECT_EQ(field_of("plotting: {}"), "plotting");
  EXPECT_EQ(field_of("run: {x0: [1, 2, 3]}"), "run.x0");
  EXPECT_EQ(field_of("run: {dt: 0}"), "run.dt");
  EXPECT_EQ(field_of("run: {mode: sometimes}"), "run.mode");
  EXPECT_EQ(field_of("plant: {B: [[1, 3, 0]]}"), "plant.B");
  EXPECT_EQ(field_of("cost: {R: [20, 10], r1_known: 5}"), "cost.r1_known");
  EXPECT_EQ(field_of("purge: {S2: [[1, 2], [0, 1]]}"), "purge.S2");
  EXPECT_EQ(field_of("irl: {N: many}"), "irl.N");
  EXPECT_THROW(from_yaml("run: [unclosed"), ConfigError);
  EXPECT_THROW(load_config(kSource / "does-not-exist.yaml"), ConfigError);
}

TEST(Config, JsonFilesAndDiagonalShorthand) {
  const fs::path dir = scratch("json");
  std::ofstream(dir / "c.json") << R"({"purge": {"S1": [1, 2, 3, 4]}, "run": {"seed": 99, "mode": "observed"}})";
  const ExperimentConfig c = load_config(dir / "c.json");
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.mode, Mode::observed);
  EXPECT_EQ(c.quality().S1, Matrix(Vector((Vector(4) << 1, 2, 3, 4).finished()).asDiagonal()));
}

TEST(Config, JsonRoundTripIsLossless) {
  ExperimentConfig c;
  c.seed = 1234567890123ULL;
  c.mode = Mode::observed;
  c.selection.xi1 = 0.75;
  c.theta0 = Vector::LinSpaced(12, -1.0, 1.0);
  const json j = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
  EXPECT_EQ(config_to_json(config_from_json(json::parse(j.dump()))), j);
}

TEST(Runner, ZeroDurationRunIsEmpty) {
  const RunReport rep = run_experiment(short_run(0.0));
  EXPECT_TRUE(rep.failure.empty());
  EXPECT_TRUE(rep.t.empty());
  EXPECT_TRUE(rep.p_tilde.empty());
  EXPECT_TRUE(rep.w_tilde.empty());
  EXPECT_EQ(rep.steps, 0u);
  EXPECT_EQ(rep.purges, 0u);
  EXPECT_TRUE(rep.W_final.stacked().isZero(0.0));

  const fs::path dir = scratch("empty");
  write_report(rep, short_run(0.0), dir);
  EXPECT_EQ(slurp(dir / "ptilde.csv"), "t,p_tilde_1,p_tilde_2,norm\r\n");
  const std::string w = slurp(dir / "wtilde.csv");
  EXPECT_EQ(std::count(w.begin(), w.end(), '\n'), 1);
  EXPECT_EQ(w.rfind("t,w_tilde_1,", 0), 0u);
  EXPECT_NE(w.find("w_tilde_15,norm\r\n"), std::string::npos);
}

TEST(Runner, SameSeedGivesIdenticalBytes) {
  const ExperimentConfig cfg = short_run(2.5);
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  const RunReport ra = run_experiment(cfg);
  const RunReport rb = run_experiment(cfg);
  ASSERT_TRUE(ra.failure.empty()) << ra.failure;
  write_report(ra, cfg, a);
  write_report(rb, cfg, b);
  for (const char* f : {"ptilde.csv", "qtilde.csv", "thetatilde.csv", "wtilde.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(ra.trajectory_digest, rb.trajectory_digest);
  EXPECT_EQ(ra.W_final.stacked(), rb.W_final.stacked());

  ExperimentConfig other = cfg;
  other.seed = 2;
  const RunReport rc = run_experiment(other);
  EXPECT_EQ(rc.trajectory_digest, ra.trajectory_digest);  // queries differ, the demonstrator does not
  EXPECT_NE(rc.W_final.stacked(), ra.W_final.stacked());
}

TEST(Runner, QueryModeIssuesOneQueryPerStep) {
  ExperimentConfig cfg = short_run(2.0);
  const RunReport q = run_experiment(cfg);
  EXPECT_EQ(q.steps, 2000u);
  EXPECT_EQ(q.queries, q.steps);
  cfg.mode = Mode::observed;
  EXPECT_EQ(run_experiment(cfg).queries, 0u);
}

TEST(Runner, SeriesShareOneClockAndStayFinite) {
  ExperimentConfig cfg = short_run(2.0);
  cfg.report_interval = 0.1;
  const RunReport rep = run_experiment(cfg);
  EXPECT_EQ(rep.t.size(), 21u);
  EXPECT_EQ(rep.p_tilde.size(), rep.t.size());
  EXPECT_EQ(rep.q_tilde.size(), rep.t.size());
  EXPECT_EQ(rep.theta_tilde.size(), rep.t.size());
  EXPECT_EQ(rep.w_tilde.size(), rep.t.size());
  for (std::size_t k = 0; k < rep.t.size(); ++k) {
    EXPECT_TRUE(rep.p_tilde[k].allFinite() && rep.q_tilde[k].allFinite() && rep.theta_tilde[k].allFinite() &&
                rep.w_tilde[k].allFinite());
  }
  cfg.full_rate = true;
  EXPECT_EQ(run_experiment(cfg).t.size(), 2001u);
}

TEST(Report, SummaryRoundTripsThroughTheLoader) {
  ExperimentConfig cfg = short_run(2.0);
  cfg.seed = 77;
  const RunReport rep = run_experiment(cfg);
  const fs::path dir = scratch("summary");
  write_report(rep, cfg, dir);
  const ExperimentConfig back = load_config(dir / "summary.json");
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
  const json s = json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(s.at("seed").get<std::uint64_t>(), 77u);
  EXPECT_EQ(s.at("steps").get<std::size_t>(), 2000u);
  EXPECT_EQ(s.at("W_hat").size(), 15u);
  EXPECT_TRUE(s.at("failure").is_null());

  const std::string csv = slurp(dir / "ptilde.csv");
  const std::string first_row = csv.substr(csv.find("\r\n") + 2, csv.find("\r\n", csv.find("\r\n") + 2));
  EXPECT_EQ(first_row.rfind("0.000000,", 0), 0u);
}

// The estimator and IRL path may only see positions and inputs; the true
// state and model reach the runner's outputs as ground-truth columns only.
TEST(Runner, TrueVelocityAndModelOnlyFeedTheReport) {
  const std::string text = slurp(kSource / "include" / "irlobs" / "experiment" / "runner.hpp");
  const auto body = text.find("inline RunReport run_experiment(");
  ASSERT_NE(body, std::string::npos);
  std::istringstream src(text.substr(body));
  std::string line;
  int uses = 0;
  while (std::getline(src, line)) {
    for (const char* token : {"x.tail(", "theta_true", "riccati_P", "W_true"}) {
      if (line.find(token) == std::string::npos) continue;
      ++uses;
      EXPECT_NE(line.find("rep."), std::string::npos) << line;
    }
  }
  EXPECT_GT(uses, 0);
  EXPECT_EQ(slurp(kSource / "include" / "irlobs" / "estimator.hpp").find("riccati_P"), std::string::npos);
}

// Peaks over 5 s windows of each CSV norm column fall until they reach the
// numerical floor, where they may jitter.
TEST(Report, DefaultRunNormColumnsDecay) {
  const ExperimentConfig cfg;
  const RunReport rep = run_experiment(cfg);
  ASSERT_TRUE(rep.failure.empty()) << rep.failure;
  const fs::path dir = scratch("default");
  write_report(rep, cfg, dir);
  for (const char* f : {"ptilde.csv", "qtilde.csv", "thetatilde.csv", "wtilde.csv"}) {
    std::istringstream csv(slurp(dir / f));
    std::string line;
    std::getline(csv, line);
    std::vector<double> peaks(6, 0.0);
    while (std::getline(csv, line)) {
      const double t = std::stod(line.substr(0, line.find(',')));
      const double norm = std::stod(line.substr(line.rfind(',') + 1));
      const auto w = std::min<std::size_t>(5, static_cast<std::size_t>(t / 5.0));
      peaks[w] = std::max(peaks[w], norm);
    }
    for (std::size_t i = 1; i < peaks.size(); ++i) {
      EXPECT_TRUE(peaks[i] <= peaks[i - 1] || peaks[i] <= 1e-4 * peaks[0]) << f << " window " << i;
    }
    EXPECT_LT(peaks.back(), 1e-3 * peaks.front()) << f;
  }
}

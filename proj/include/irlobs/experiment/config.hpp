#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "irlobs/estimator.hpp"
#include "irlobs/irl.hpp"
#include "irlobs/monomials.hpp"
#include "irlobs/purge.hpp"

namespace irlobs::experiment {

using json = nlohmann::json;

enum class Mode { observed, query };

inline std::string to_string(Mode m) { return m == Mode::query ? "query" : "observed"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "query") return Mode::query;
  if (s == "observed") return Mode::observed;
  throw ConfigError("run.mode", "expected 'observed' or 'query', got '" + s + "'");
}

enum class StackSource { prerecorded, online };

/// Everything a run needs. Defaults reproduce the reference LQR experiment.
struct ExperimentConfig {
  // plant
  Matrix A = (Matrix(2, 4) << 1, 1, -1, 1, 5, 1, 1, 1).finished();
  Matrix B = (Matrix(2, 2) << 1, 3, 0, 1).finished();

  // cost
  std::string q_basis = "squares";
  Vector q_weights = (Vector(4) << 1, 2, 3, 6).finished();
  Vector r_diag = (Vector(2) << 20, 10).finished();

  // estimator
  estimator::EstimatorSettings estimator{};
  StackSource stack_source = StackSource::prerecorded;
  double explore_duration = 20.0;
  double explore_amplitude = 1.0;
  Vector theta0;  // empty: zeros

  // irl
  std::size_t N = 30;
  irl::SelectionThresholds selection{};
  std::string value_basis = "full";
  std::string cost_basis = "squares";

  // purge
  double T = 1.0;
  std::size_t w = 5;
  Matrix S1;  // empty: identity
  Matrix S2;  // empty: identity
  double kappa1 = 1e6;
  double kappa2 = 1e6;
  bool require_full_stack = true;

  // run
  Vector x0 = (Vector(4) << 2, -2, 1, -1).finished();
  double duration = 30.0;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  Mode mode = Mode::query;
  double query_low = -2.0;
  double query_high = 2.0;
  double report_interval = 0.01;
  bool full_rate = false;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  double r1() const { return r_diag(0); }

  QuadraticMonomials basis_named(const std::string& name, const char* field) const {
    if (name == "full") return QuadraticMonomials::full(2 * n());
    if (name == "squares") return QuadraticMonomials::squares(2 * n());
    throw ConfigError(field, "expected 'full' or 'squares', got '" + name + "'");
  }

  irl::FeatureBasis feature_basis() const {
    return {basis_named(value_basis, "irl.value_basis"), basis_named(cost_basis, "irl.cost_basis"), m()};
  }

  purge::QualityConfig quality() const {
    return {T, S1.size() ? S1 : Matrix::Identity(2 * n(), 2 * n()),
            S2.size() ? S2 : Matrix::Identity(n(), n()), w};
  }

  estimator::ThetaVector initial_theta() const {
    if (theta0.size() == 0) return {n(), m()};
    return {n(), m(), theta0};
  }

  void validate() const {
    if (A.rows() < 1 || A.cols() != 2 * A.rows()) throw ConfigError("plant.A", "must be n x 2n");
    if (B.rows() != A.rows() || B.cols() < 1) throw ConfigError("plant.B", "must be n x m");
    if (q_weights.size() != basis_named(q_basis, "cost.Q_basis").size()) {
      throw ConfigError("cost.Q_weights", "length must match cost.Q_basis");
    }
    if (r_diag.size() != m()) throw ConfigError("cost.R", "length must equal m");
    if ((r_diag.array() <= 0.0).any()) throw ConfigError("cost.R", "entries must be positive");
    estimator.gains.validate();
    if (estimator.stack_capacity == 0) throw ConfigError("estimator.M", "must be positive");
    if (!(estimator.g_lower > 0.0)) throw ConfigError("estimator.g_lower", "must be positive");
    if (!(estimator.gamma0 > 0.0)) throw ConfigError("estimator.gamma0", "must be positive");
    if (!(estimator.record_interval > 0.0)) throw ConfigError("estimator.record_interval", "must be positive");
    if (stack_source == StackSource::prerecorded &&
        !(explore_duration > estimator.gains.T1 + estimator.gains.T2)) {
      throw ConfigError("estimator.explore_duration", "must exceed T1 + T2");
    }
    if (!(explore_amplitude > 0.0)) throw ConfigError("estimator.explore_amplitude", "must be positive");
    if (theta0.size() != 0 && theta0.size() != estimator::ThetaVector::length(n(), m())) {
      throw ConfigError("estimator.theta0", "length must be 2n^2 + mn");
    }
    if (N == 0) throw ConfigError("irl.N", "must be positive");
    if (!(selection.xi1 >= 0.0)) throw ConfigError("irl.xi1", "must be nonnegative");
    if (!(selection.xi2 > 0.0)) throw ConfigError("irl.xi2", "must be positive");
    feature_basis();
    if (!(kappa1 > 0.0)) throw ConfigError("purge.kappa1", "must be positive");
    if (!(kappa2 > 0.0)) throw ConfigError("purge.kappa2", "must be positive");
    if (!(dt > 0.0)) throw ConfigError("run.dt", "must be positive");
    if (!(T > 0.0)) throw ConfigError("purge.T", "must be positive");
    quality().validate(n(), dt);
    if (x0.size() != 2 * n()) throw ConfigError("run.x0", "length must be 2n");
    if (!(duration >= 0.0)) throw ConfigError("run.duration", "must be nonnegative");
    if (duration > 0.0 && !(duration > estimator.gains.T1 + estimator.gains.T2)) {
      throw ConfigError("run.duration", "must exceed T1 + T2");
    }
    if (!(query_low < query_high)) throw ConfigError("run.query_box", "lower bound must be below upper bound");
    if (!(report_interval > 0.0)) throw ConfigError("run.report_interval", "must be positive");
  }
};

namespace detail {

inline json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& item : node) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
    case YAML::NodeType::Scalar: {
      const std::string s = node.Scalar();
      if (node.Tag() == "!") return s;  // quoted
      if (s == "true" || s == "True") return true;
      if (s == "false" || s == "False") return false;
      std::int64_t i;
      if (YAML::convert<std::int64_t>::decode(node, i) && s.find_first_of(".eE") == std::string::npos) {
        return i;
      }
      double d;
      if (YAML::convert<double>::decode(node, d)) return d;
      return s;
    }
  }
  return nullptr;
}

class Reader {
 public:
  Reader(json j, std::string section) : j_(std::move(j)), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError(section_, "must be a mapping");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  std::string field(const std::string& key) const { return section_ + "." + key; }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw ConfigError(field(key), "expected a nonnegative integer");
    }
    return v.get<std::size_t>();
  }

  std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  Vector vector(const std::string& key, const Vector& fallback) {
    if (!has(key)) return fallback;
    return to_vector(j_.at(key), field(key));
  }

  /// Nested list of rows; a flat list is accepted as a diagonal when
  /// `flat_is_diagonal` is set.
  Matrix matrix(const std::string& key, const Matrix& fallback, bool flat_is_diagonal = false) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    const std::string f = field(key);
    if (!v.is_array() || v.empty()) throw ConfigError(f, "expected a non-empty list");
    if (!v.front().is_array()) {
      if (!flat_is_diagonal) throw ConfigError(f, "expected a list of rows");
      return to_vector(v, f).asDiagonal();
    }
    const std::size_t cols = v.front().size();
    Matrix M(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_array() || v[i].size() != cols) throw ConfigError(f, "rows have unequal length");
      M.row(static_cast<Eigen::Index>(i)) = to_vector(v[i], f).transpose();
    }
    return M;
  }

  void reject_unknown() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown key");
    }
  }

 private:
  static Vector to_vector(const json& v, const std::string& f) {
    if (!v.is_array()) throw ConfigError(f, "expected a list of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(f, "expected a list of numbers");
      out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
  }

  json j_;
  std::string section_;
  std::set<std::string> seen_;
};

inline json section(const json& root, const std::string& key) {
  if (!root.contains(key) || root.at(key).is_null()) return json::object();
  return root.at(key);
}

inline json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) rows.push_back(to_json(Vector(M.row(i).transpose())));
  return rows;
}

}  // namespace detail

/// Builds a validated config from a JSON document. A document carrying a
/// "config" member (a run summary) is read through that member.
inline ExperimentConfig config_from_json(const json& doc) {
  const json& root = doc.contains("config") && doc.at("config").is_object() ? doc.at("config") : doc;
  if (!root.is_object()) throw ConfigError("config", "top level must be a mapping");
  for (const auto& [k, _] : root.items()) {
    static const std::set<std::string> known{"plant", "cost", "estimator", "irl", "purge", "run"};
    if (!known.count(k)) throw ConfigError(k, "unknown section");
  }
  ExperimentConfig c;

  detail::Reader plant(detail::section(root, "plant"), "plant");
  c.A = plant.matrix("A", c.A);
  c.B = plant.matrix("B", c.B);
  plant.reject_unknown();

  detail::Reader cost(detail::section(root, "cost"), "cost");
  c.q_basis = cost.text("Q_basis", c.q_basis);
  c.q_weights = cost.vector("Q_weights", c.q_weights);
  c.r_diag = cost.vector("R", c.r_diag);
  if (cost.has("r1_known")) {
    const double r1 = cost.number("r1_known", c.r_diag(0));
    if (c.r_diag.size() == 0 || r1 != c.r_diag(0)) {
      throw ConfigError("cost.r1_known", "must equal the first entry of cost.R");
    }
  }
  cost.reject_unknown();

  detail::Reader est(detail::section(root, "estimator"), "estimator");
  auto& g = c.estimator.gains;
  c.estimator.stack_capacity = est.count("M", c.estimator.stack_capacity);
  g.k_theta = est.number("k_theta", 0.3 / static_cast<double>(std::max<std::size_t>(1, c.estimator.stack_capacity)));
  g.beta1 = est.number("beta1", g.beta1);
  g.alpha = est.number("alpha", g.alpha);
  g.beta = est.number("beta", g.beta);
  g.k = est.number("k", g.k);
  g.T1 = est.number("T1", g.T1);
  g.T2 = est.number("T2", g.T2);
  c.estimator.g_lower = est.number("g_lower", c.estimator.g_lower);
  c.estimator.gamma0 = est.number("gamma0", c.estimator.gamma0);
  c.estimator.record_interval = est.number("record_interval", c.estimator.record_interval);
  const std::string source = est.text("stack_source", "prerecorded");
  if (source == "prerecorded") {
    c.stack_source = StackSource::prerecorded;
  } else if (source == "online") {
    c.stack_source = StackSource::online;
  } else {
    throw ConfigError("estimator.stack_source", "expected 'prerecorded' or 'online'");
  }
  c.explore_duration = est.number("explore_duration", c.explore_duration);
  c.explore_amplitude = est.number("explore_amplitude", c.explore_amplitude);
  c.theta0 = est.vector("theta0", c.theta0);
  est.reject_unknown();

  detail::Reader irl(detail::section(root, "irl"), "irl");
  c.N = irl.count("N", c.N);
  c.selection.xi1 = irl.number("xi1", c.selection.xi1);
  c.selection.xi2 = irl.number("xi2", c.selection.xi2);
  c.value_basis = irl.text("value_basis", c.value_basis);
  c.cost_basis = irl.text("cost_basis", c.cost_basis);
  irl.reject_unknown();

  detail::Reader pg(detail::section(root, "purge"), "purge");
  c.T = pg.number("T", c.T);
  c.w = pg.count("w", c.w);
  c.S1 = pg.matrix("S1", c.S1, true);
  c.S2 = pg.matrix("S2", c.S2, true);
  c.kappa1 = pg.number("kappa1", c.kappa1);
  c.kappa2 = pg.number("kappa2", c.kappa2);
  c.require_full_stack = pg.boolean("require_full_stack", c.require_full_stack);
  pg.reject_unknown();

  detail::Reader run(detail::section(root, "run"), "run");
  c.x0 = run.vector("x0", c.x0);
  c.duration = run.number("duration", c.duration);
  c.dt = run.number("dt", c.dt);
  c.seed = run.u64("seed", c.seed);
  c.mode = parse_mode(run.text("mode", to_string(c.mode)));
  const Vector box = run.vector("query_box", (Vector(2) << c.query_low, c.query_high).finished());
  if (box.size() != 2) throw ConfigError("run.query_box", "expected [low, high]");
  c.query_low = box(0);
  c.query_high = box(1);
  c.report_interval = run.number("report_interval", c.report_interval);
  c.full_rate = run.boolean("full_rate", c.full_rate);
  run.reject_unknown();

  c.validate();
  return c;
}

/// Canonical JSON form; config_from_json(config_to_json(c)) reproduces c.
inline json config_to_json(const ExperimentConfig& c) {
  using detail::to_json;
  json j;
  j["plant"] = {{"A", to_json(c.A)}, {"B", to_json(c.B)}};
  j["cost"] = {{"Q_basis", c.q_basis}, {"Q_weights", to_json(c.q_weights)}, {"R", to_json(c.r_diag)},
               {"r1_known", c.r_diag(0)}};
  const auto& g = c.estimator.gains;
  j["estimator"] = {{"k_theta", g.k_theta},
                    {"beta1", g.beta1},
                    {"alpha", g.alpha},
                    {"beta", g.beta},
                    {"k", g.k},
                    {"T1", g.T1},
                    {"T2", g.T2},
                    {"M", c.estimator.stack_capacity},
                    {"g_lower", c.estimator.g_lower},
                    {"gamma0", c.estimator.gamma0},
                    {"record_interval", c.estimator.record_interval},
                    {"stack_source", c.stack_source == StackSource::online ? "online" : "prerecorded"},
                    {"explore_duration", c.explore_duration},
                    {"explore_amplitude", c.explore_amplitude}};
  if (c.theta0.size()) j["estimator"]["theta0"] = to_json(c.theta0);
  j["irl"] = {{"N", c.N},
              {"xi1", c.selection.xi1},
              {"xi2", c.selection.xi2},
              {"value_basis", c.value_basis},
              {"cost_basis", c.cost_basis}};
  const purge::QualityConfig q = c.quality();
  j["purge"] = {{"T", c.T},
                {"w", c.w},
                {"S1", to_json(q.S1)},
                {"S2", to_json(q.S2)},
                {"kappa1", c.kappa1},
                {"kappa2", c.kappa2},
                {"require_full_stack", c.require_full_stack}};
  j["run"] = {{"x0", to_json(c.x0)},
              {"duration", c.duration},
              {"dt", c.dt},
              {"seed", c.seed},
              {"mode", to_string(c.mode)},
              {"query_box", {c.query_low, c.query_high}},
              {"report_interval", c.report_interval},
              {"full_rate", c.full_rate}};
  return j;
}

inline json parse_document(const std::string& text, const std::string& origin, bool as_json) {
  try {
    if (as_json) return json::parse(text);
    const YAML::Node node = YAML::Load(text);
    if (!node || node.IsNull()) return json::object();
    return detail::yaml_to_json(node);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin, std::string("parse error: ") + e.what());
  } catch (const YAML::Exception& e) {
    throw ConfigError(origin, std::string("parse error: ") + e.what());
  }
}

/// Loads a YAML (or, by .json extension, JSON) config file.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(parse_document(buf.str(), path.string(), path.extension() == ".json"));
}

}  // namespace irlobs::experiment

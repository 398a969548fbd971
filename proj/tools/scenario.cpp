#include "scenario.hpp"

#include <filesystem>
#include <random>
#include <set>

#include <wbc/random.hpp>

namespace wbc::cli {
namespace {

namespace fs = std::filesystem;

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
}

// Reads j[key] into `out` when present; type errors name the field.
template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_required(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + "." + key + ": missing");
  read(j, key, out, where);
}

// Runs `f`, rethrowing std::invalid_argument and JSON errors as ConfigError
// attributed to `where`.
template <typename F>
auto attributed(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const Json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

const std::set<std::string> kPresets{"gaussian_random", "discrete_random", "dirac_random", "inline"};

InitialSpec initial_from_json(const Json& j) {
  const std::string where = "initial";
  reject_unknown(j, {"preset", "seed", "mean_range", "eig_min", "eig_max", "atoms", "spread",
                     "measures"},
                 where);
  InitialSpec s;
  read_required(j, "preset", s.preset, where);
  if (!kPresets.count(s.preset))
    throw ConfigError(where + ".preset: unknown preset '" + s.preset + "'");
  if (s.preset == "inline") {
    if (!j.contains("measures") || !j["measures"].is_array())
      throw ConfigError(where + ".measures: inline preset needs a measure list");
    for (std::size_t k = 0; k < j["measures"].size(); ++k) {
      const std::string w = where + ".measures[" + std::to_string(k) + "]";
      s.measures.push_back(attributed(w, [&] { return measure_from_json(j["measures"][k]); }));
    }
  } else {
    read_required(j, "seed", s.seed, where);
  }
  read(j, "mean_range", s.mean_range, where);
  read(j, "eig_min", s.eig_min, where);
  read(j, "eig_max", s.eig_max, where);
  read(j, "atoms", s.atoms, where);
  read(j, "spread", s.spread, where);
  if (!(s.mean_range >= 0.0)) throw ConfigError(where + ".mean_range: must be >= 0");
  if (!(s.eig_min >= 0.0 && s.eig_max >= s.eig_min))
    throw ConfigError(where + ".eig_min/eig_max: need 0 <= eig_min <= eig_max");
  if (s.atoms < 1) throw ConfigError(where + ".atoms: must be >= 1");
  if (!(s.spread >= 0.0)) throw ConfigError(where + ".spread: must be >= 0");
  return s;
}

Json initial_to_json(const InitialSpec& s) {
  Json j{{"preset", s.preset}};
  if (s.preset == "inline") {
    Json m = Json::array();
    for (const auto& mu : s.measures) m.push_back(measure_to_json(mu));
    j["measures"] = std::move(m);
    return j;
  }
  j["seed"] = s.seed;
  j["mean_range"] = s.mean_range;
  if (s.preset == "gaussian_random") {
    j["eig_min"] = s.eig_min;
    j["eig_max"] = s.eig_max;
  }
  if (s.preset == "discrete_random") {
    j["atoms"] = s.atoms;
    j["spread"] = s.spread;
  }
  return j;
}

std::string resolve(const std::string& base, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(base) / p).string();
}

Matrix random_rotation(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix G = Matrix::NullaryExpr(d, d, [&] { return normal(rng); });
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  // Fix column signs so the factorization is unique.
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < d; ++k)
    if (R(k, k) < 0.0) Q.col(k) *= -1.0;
  return Q;
}

}  // namespace

ScenarioConfig scenario_from_json(const Json& j, const std::string& base_dir) {
  reject_unknown(j, {"dimension", "agents", "seed", "initial", "schedule", "solver", "stop",
                     "output", "force", "validation"},
                 "scenario");
  ScenarioConfig c;
  c.base_dir = base_dir;
  read_required(j, "dimension", c.dimension, "scenario");
  read_required(j, "agents", c.agents, "scenario");
  read_required(j, "seed", c.seed, "scenario");
  if (c.dimension < 1) throw ConfigError("scenario.dimension: must be >= 1");
  if (c.agents < 2) throw ConfigError("scenario.agents: must be >= 2");

  if (!j.contains("initial")) throw ConfigError("scenario.initial: missing");
  c.initial = initial_from_json(j["initial"]);
  if (c.initial.preset == "inline") {
    if (static_cast<int>(c.initial.measures.size()) != c.agents)
      throw ConfigError("initial.measures: " + std::to_string(c.initial.measures.size()) +
                        " measures for " + std::to_string(c.agents) + " agents");
    attributed("initial.measures", [&] { require_homogeneous(c.initial.measures); });
    if (c.initial.measures.front().dim() != c.dimension)
      throw ConfigError("initial.measures: dimension differs from scenario.dimension");
  }

  if (!j.contains("schedule")) throw ConfigError("scenario.schedule: missing");
  c.schedule = j["schedule"];
  if (!c.schedule.is_object()) throw ConfigError("schedule: expected an object");
  if (c.schedule.contains("file")) {
    reject_unknown(c.schedule, {"file"}, "schedule");
    if (!c.schedule["file"].is_string()) throw ConfigError("schedule.file: expected a path");
    const auto path = resolve(base_dir, c.schedule["file"].get<std::string>());
    if (!fs::exists(path)) throw ConfigError("schedule.file: '" + path + "' does not exist");
  }

  if (j.contains("solver"))
    c.solver = attributed("solver", [&] { return solver_config_from_json(j["solver"]); });

  if (j.contains("stop")) {
    const Json& s = j["stop"];
    reject_unknown(s, {"max_rounds", "diameter_threshold"}, "stop");
    read(s, "max_rounds", c.stop.max_rounds, "stop");
    read(s, "diameter_threshold", c.stop.diameter_threshold, "stop");
    attributed("stop", [&] { c.stop.validate(); });
  }

  if (j.contains("output")) {
    const Json& o = j["output"];
    reject_unknown(o, {"dir", "checkpoint_interval"}, "output");
    read(o, "dir", c.out_dir, "output");
    read(o, "checkpoint_interval", c.checkpoint_interval, "output");
    if (c.checkpoint_interval < 0) throw ConfigError("output.checkpoint_interval: must be >= 0");
  }
  read(j, "force", c.force, "scenario");
  if (j.contains("validation")) {
    const Json& v = j["validation"];
    reject_unknown(v, {"k_max"}, "validation");
    if (v.contains("k_max")) {
      std::int64_t k = 0;
      read(v, "k_max", k, "validation");
      if (k < 0) throw ConfigError("validation.k_max: must be >= 0");
      c.k_max = k;
    }
  }
  return c;
}

Json scenario_to_json(const ScenarioConfig& c) {
  Json j{{"dimension", c.dimension},
         {"agents", c.agents},
         {"seed", c.seed},
         {"initial", initial_to_json(c.initial)},
         {"schedule", c.schedule},
         {"solver", solver_config_to_json(c.solver)},
         {"stop", {{"max_rounds", c.stop.max_rounds},
                   {"diameter_threshold", c.stop.diameter_threshold}}},
         {"output", {{"dir", c.out_dir}, {"checkpoint_interval", c.checkpoint_interval}}},
         {"force", c.force}};
  if (c.k_max) j["validation"] = {{"k_max", *c.k_max}};
  return j;
}

ScenarioConfig load_scenario(const std::string& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  try {
    return scenario_from_json(j, fs::path(path).parent_path().string());
  } catch (const ConfigError& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

void apply_overrides(ScenarioConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.max_rounds) c.stop.max_rounds = *o.max_rounds;
  if (o.threshold) c.stop.diameter_threshold = *o.threshold;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.force) c.force = true;
  attributed("overrides", [&] { c.stop.validate(); });
}

std::vector<Measure> build_initial(const ScenarioConfig& c) {
  const InitialSpec& s = c.initial;
  if (s.preset == "inline") return s.measures;
  const int d = c.dimension;
  std::vector<Measure> out;
  out.reserve(static_cast<std::size_t>(c.agents));
  for (int i = 0; i < c.agents; ++i) {
    std::mt19937_64 rng(derive_seed(s.seed, {static_cast<std::uint64_t>(i)}));
    std::uniform_real_distribution<double> centre(-s.mean_range, s.mean_range);
    Vector m(d);
    for (int a = 0; a < d; ++a) m(a) = centre(rng);
    if (s.preset == "gaussian_random") {
      std::uniform_real_distribution<double> eig(s.eig_min, s.eig_max);
      Vector lambda(d);
      for (int a = 0; a < d; ++a) lambda(a) = eig(rng);
      const Matrix Q = random_rotation(d, rng);
      Matrix cov = Q * lambda.asDiagonal() * Q.transpose();
      out.emplace_back(GaussianMeasure(m, 0.5 * (cov + cov.transpose())));
    } else if (s.preset == "dirac_random") {
      out.emplace_back(DiscreteMeasure::dirac(m));
    } else {
      std::uniform_real_distribution<double> offset(-s.spread, s.spread);
      Matrix atoms(s.atoms, d);
      for (int k = 0; k < s.atoms; ++k)
        for (int a = 0; a < d; ++a) atoms(k, a) = m(a) + offset(rng);
      out.emplace_back(DiscreteMeasure::uniform(std::move(atoms)));
    }
  }
  return out;
}

std::int64_t horizon(const ScenarioConfig& c) { return c.stop.max_rounds; }

GraphSchedule build_schedule(const ScenarioConfig& c) {
  Json spec = c.schedule;
  std::string where = "schedule";
  if (spec.contains("file")) {
    const auto path = resolve(c.base_dir, spec["file"].get<std::string>());
    where = "'" + path + "'";
    try {
      spec = read_json_file(path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  if (spec.contains("generator") && spec["generator"].is_object() &&
      !spec["generator"].contains("horizon")) {
    spec["generator"]["horizon"] = horizon(c);
  }
  GraphSchedule s = attributed(where, [&] { return schedule_from_json(spec); });
  if (s.n() != c.agents)
    throw ConfigError(where + ": schedule has " + std::to_string(s.n()) + " agents, scenario has " +
                      std::to_string(c.agents));
  return s;
}

std::int64_t meeting_windows_within(const GraphSchedule& s, std::int64_t horizon) {
  const std::int64_t stride = std::max(1, s.n() - 1);
  const auto size = s.partition_size();
  std::int64_t k = -1;
  for (;;) {
    const std::int64_t idx = (k + 2) * stride;
    if (size && idx >= *size) break;
    if (s.tau(idx) > horizon) break;
    ++k;
  }
  return k;
}

}  // namespace wbc::cli

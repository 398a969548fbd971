#pragma once

// Scenario files: one JSON document describing the initial measures, the
// communication schedule, solver settings, stopping rule and outputs.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <wbc/consensus.hpp>
#include <wbc/network.hpp>
#include <wbc/serialization.hpp>
#include <wbc/transport.hpp>

namespace wbc::cli {

// A scenario file is malformed. The message names the file and field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InitialSpec {
  // gaussian_random | discrete_random | dirac_random | inline
  std::string preset = "gaussian_random";
  std::uint64_t seed = 0;
  // Means (or Dirac positions, or cloud centres) uniform in [-mean_range, mean_range]^d.
  double mean_range = 1.0;
  // gaussian_random: covariance eigenvalues uniform in [eig_min, eig_max],
  // eigenvectors from a random rotation.
  double eig_min = 0.5;
  double eig_max = 2.0;
  // discrete_random: `atoms` uniform-weight points per agent, uniform in a
  // cube of half-width `spread` around the centre.
  int atoms = 10;
  double spread = 0.5;
  // inline
  std::vector<Measure> measures;
};

struct ScenarioConfig {
  int dimension = 1;
  int agents = 2;
  InitialSpec initial;
  // {"generator": {...}} (horizon defaults to stop.max_rounds), an explicit
  // schedule, or {"file": "path"} relative to the scenario file.
  Json schedule = Json::object();
  SolverConfig solver;
  StopCriteria stop;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  // Checkpoint every this many rounds (0 = only the first and last round).
  std::int64_t checkpoint_interval = 1;
  // Skip schedule validation before a run.
  bool force = false;
  // Meeting-lemma windows checked by `validate`; default is every window
  // inside the horizon.
  std::optional<std::int64_t> k_max;

  // Directory that relative paths resolve against; not serialized.
  std::string base_dir = ".";
};

// Command-line values that override the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> max_rounds;
  std::optional<double> threshold;
  std::optional<std::string> out_dir;
  bool force = false;
};

ScenarioConfig scenario_from_json(const Json& j, const std::string& base_dir = ".");
Json scenario_to_json(const ScenarioConfig& cfg);
// Reads and parses; errors are rethrown as ConfigError prefixed with `path`.
ScenarioConfig load_scenario(const std::string& path);

void apply_overrides(ScenarioConfig& cfg, const Overrides& o);

// Initial agent measures for the configured preset; deterministic given the
// preset seed.
std::vector<Measure> build_initial(const ScenarioConfig& cfg);

// The schedule, with generator horizons defaulted to stop.max_rounds. Throws
// ConfigError when its agent count disagrees with the scenario.
GraphSchedule build_schedule(const ScenarioConfig& cfg);

// Rounds a run may touch: max_rounds.
std::int64_t horizon(const ScenarioConfig& cfg);

// Largest k whose meeting window [t_k, t_{k+1}] ends within `horizon`, or -1.
std::int64_t meeting_windows_within(const GraphSchedule& schedule, std::int64_t horizon);

}  // namespace wbc::cli

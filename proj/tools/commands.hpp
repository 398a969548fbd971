#pragma once

#include <iosfwd>
#include <string>

#include "scenario.hpp"

namespace wbc::cli {

// Exit codes of `run`.
inline constexpr int kExitConverged = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMaxRounds = 2;

// Output file names inside the output directory.
inline constexpr const char* kTraceFile = "trace.csv";
inline constexpr const char* kScenarioFile = "scenario.json";
std::string checkpoint_name(std::int64_t t);

// Runs the scenario, writing trace.csv, checkpoint_<t>.json files and the
// resolved scenario.json into cfg.out_dir. Unless cfg.force, the schedule
// must pass validation first.
int cmd_run(const ScenarioConfig& cfg, std::ostream& out, std::ostream& err);

// Schedule validation and the meeting lemma over the run horizon; exit 0 iff
// both are clean.
int cmd_validate(const ScenarioConfig& cfg, std::ostream& out, std::ostream& err);

// Offline re-verification of a trace and the checkpoints next to it.
int cmd_check(const ScenarioConfig& cfg, const std::string& trace_path, std::ostream& out,
              std::ostream& err);

// Writes the explicit schedule (schedule.json) and the per-window union
// edges (window_edges.csv) into cfg.out_dir.
int cmd_generate_schedule(const ScenarioConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace wbc::cli

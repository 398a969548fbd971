#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <regex>

#include <wbc/log.hpp>

namespace wbc::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::size_t kMaxListed = 20;

void print_violations(const ValidationReport& report, std::ostream& os) {
  const auto& vs = report.violations;
  for (std::size_t k = 0; k < vs.size() && k < kMaxListed; ++k) {
    os << "violation " << vs[k].kind << " t=" << vs[k].t << " i=" << vs[k].i << " j=" << vs[k].j
       << ": " << vs[k].message << '\n';
  }
  if (vs.size() > kMaxListed) os << "... " << vs.size() - kMaxListed << " more\n";
}

std::map<std::int64_t, std::vector<Measure>> load_checkpoints(const fs::path& dir,
                                                              std::ostream& err) {
  std::map<std::int64_t, std::vector<Measure>> snapshots;
  static const std::regex pattern(R"(checkpoint_(\d+)\.json)");
  if (!fs::is_directory(dir)) return snapshots;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    try {
      auto state = checkpoint_from_json(read_json_file(entry.path().string()));
      snapshots[state.t] = std::move(state.agents);
    } catch (const std::exception& e) {
      err << "warning: skipping " << entry.path().string() << ": " << e.what() << '\n';
    }
  }
  return snapshots;
}

}  // namespace

std::string checkpoint_name(std::int64_t t) {
  return "checkpoint_" + std::to_string(t) + ".json";
}

int cmd_run(const ScenarioConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto initial = build_initial(cfg);
  const auto schedule = build_schedule(cfg);
  if (!cfg.force) {
    const auto report = validate_schedule(schedule, horizon(cfg));
    if (!report.ok()) {
      print_violations(report, err);
      err << "schedule failed validation (" << report.violations.size()
          << " violations); use --force to run anyway\n";
      return kExitError;
    }
  } else {
    log(LogLevel::warn, "schedule validation bypassed");
  }

  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (std::regex_match(entry.path().filename().string(), std::regex(R"(checkpoint_\d+\.json)")))
      fs::remove(entry.path());
  }
  write_json_file((dir / kScenarioFile).string(), scenario_to_json(cfg));

  std::ofstream csv(dir / kTraceFile);
  if (!csv) throw std::runtime_error("cannot write '" + (dir / kTraceFile).string() + "'");
  write_trace_header(csv, cfg.agents);

  std::int64_t last_checkpoint = -1;
  std::optional<TraceEntry> last;
  auto checkpoint = [&](const TraceEntry& e) {
    write_json_file((dir / checkpoint_name(e.state.t)).string(),
                    checkpoint_to_json(e.state.t, e.state.agents));
    last_checkpoint = e.state.t;
  };
  auto observer = [&](const TraceEntry& e) {
    TraceRow row{e.metrics.t, e.metrics.v2, e.metrics.v2_max, e.metrics.diameter,
                 e.metrics.max_jensen_residual()};
    write_trace_row(csv, row);
    csv.flush();
    if (e.state.t == 0 || (cfg.checkpoint_interval > 0 && e.state.t % cfg.checkpoint_interval == 0))
      checkpoint(e);
    last = e;
  };

  ConsensusState state{0, initial};
  int code = kExitError;
  try {
    state.validate();
    const Trace trace = run(state, schedule, cfg.solver, cfg.stop, cfg.seed, observer);
    code = trace.converged ? kExitConverged : kExitMaxRounds;
    const auto& final_metrics = trace.entries.back().metrics;
    out << (trace.converged ? "converged" : "max_rounds reached") << " at t=" << final_metrics.t
        << " diameter=" << format_real(final_metrics.diameter) << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  if (last && last->state.t != last_checkpoint) checkpoint(*last);
  out << "trace: " << (dir / kTraceFile).string() << '\n';
  return code;
}

int cmd_validate(const ScenarioConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto schedule = build_schedule(cfg);
  const std::int64_t h = horizon(cfg);
  const auto report = validate_schedule(schedule, h);
  print_violations(report, out);
  out << "schedule: " << report.violations.size() << " violations over " << h << " rounds\n";

  std::int64_t k_max = cfg.k_max ? *cfg.k_max : meeting_windows_within(schedule, h);
  if (k_max < 0) {
    err << "horizon " << h << " holds no complete meeting window\n";
    return kExitError;
  }
  const auto lemma = verify_meeting_lemma(schedule, k_max);
  for (const auto& f : lemma.failures)
    out << "meeting failure k=" << f.k << " i=" << f.i << " j=" << f.j << '\n';
  for (const auto& note : lemma.notes) out << "note: " << note << '\n';
  out << "meeting lemma: " << lemma.failures.size() << " failures over " << lemma.windows_checked
      << " windows, M=" << lemma.M << " bound=" << lemma.M_bound
      << (lemma.M_ok ? "" : " (exceeded)") << '\n';
  return report.ok() && lemma.ok() ? kExitConverged : kExitError;
}

int cmd_check(const ScenarioConfig& cfg, const std::string& trace_path, std::ostream& out,
              std::ostream& err) {
  std::ifstream in(trace_path);
  if (!in) {
    err << "error: cannot open '" << trace_path << "'\n";
    return kExitError;
  }
  const auto rows = read_trace_csv(in);
  if (rows.empty()) {
    err << "error: trace has no rows\n";
    return kExitError;
  }
  if (static_cast<int>(rows.front().v2.size()) != cfg.agents) {
    err << "error: trace has " << rows.front().v2.size() << " agents, scenario has " << cfg.agents
        << '\n';
    return kExitError;
  }
  const auto schedule = build_schedule(cfg);
  const auto snapshots = load_checkpoints(fs::path(trace_path).parent_path(), err);
  if (snapshots.empty()) err << "warning: no checkpoints found; snapshot checks skipped\n";

  const MeasureKind kind =
      snapshots.empty() ? build_initial(cfg).front().kind() : snapshots.begin()->second.front().kind();
  TraceCheckOptions options;
  options.tolerances = tolerance_ladder(kind, cfg.solver.method);
  options.diameter_threshold = cfg.stop.diameter_threshold;
  const auto report = check_trace(rows, snapshots, schedule, cfg.solver, options);
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  for (const auto& v : report.violations) out << "violation: " << v << '\n';
  out << "checked " << report.rows_checked << " rows, " << report.snapshot_pairs_checked
      << " snapshot pairs: " << (report.ok() ? "ok" : "FAILED") << '\n';
  return report.ok() ? kExitConverged : kExitError;
}

int cmd_generate_schedule(const ScenarioConfig& cfg, std::ostream& out, std::ostream&) {
  const auto schedule = build_schedule(cfg);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  write_json_file((dir / "schedule.json").string(), schedule_to_json(schedule));
  std::ofstream edges(dir / "window_edges.csv");
  if (!edges) throw std::runtime_error("cannot write '" + (dir / "window_edges.csv").string() + "'");
  write_window_edges_csv(schedule, horizon(cfg), edges);
  out << "schedule: " << (dir / "schedule.json").string() << '\n'
      << "window edges: " << (dir / "window_edges.csv").string() << '\n';
  return kExitConverged;
}

}  // namespace wbc::cli

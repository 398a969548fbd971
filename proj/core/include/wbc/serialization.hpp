#pragma once

// JSON encodings of measures, solver settings, schedules and checkpoints,
// and the CSV trace format (t, v2_1..v2_n, v2_max, diameter,
// max_jensen_residual). Reals round-trip exactly.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wbc/consensus.hpp"
#include "wbc/measures.hpp"
#include "wbc/network.hpp"
#include "wbc/transport.hpp"

namespace wbc {

using Json = nlohmann::json;

// {"type": "gaussian", "mean": [...], "cov": [[...], ...]} or
// {"type": "discrete", "atoms": [[...], ...], "weights": [...]}.
Json measure_to_json(const Measure& mu);
Measure measure_from_json(const Json& j);

// Missing keys keep their defaults; unknown keys are rejected.
Json solver_config_to_json(const SolverConfig& cfg);
SolverConfig solver_config_from_json(const Json& j);

// With `as_descriptor` and a generated schedule, only the generator
// parameters are written: {"generator": {...}}. Otherwise the explicit form
// {"n", "L", "delta", "periodic", "partition", "rounds"} is used.
Json schedule_to_json(const GraphSchedule& schedule, bool as_descriptor = false);
GraphSchedule schedule_from_json(const Json& j);

Json descriptor_to_json(const GeneratorDescriptor& d);
GeneratorDescriptor descriptor_from_json(const Json& j);

// {"t": ..., "agents": [measure, ...]}.
Json checkpoint_to_json(std::int64_t t, const std::vector<Measure>& agents);
ConsensusState checkpoint_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

void write_trace_header(std::ostream& out, int n);
void write_trace_row(std::ostream& out, const TraceRow& row);
// Throws std::runtime_error on a malformed header or row.
std::vector<TraceRow> read_trace_csv(std::istream& in);

// %.17g
std::string format_real(double x);

}  // namespace wbc

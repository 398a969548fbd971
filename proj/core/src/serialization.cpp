#include "wbc/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace wbc {

namespace {

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json matrix_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

Vector vector_from(const Json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw std::invalid_argument(std::string(what) + " must hold numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

// `cols` is used when the array is empty.
Matrix matrix_from(const Json& j, const char* what, Eigen::Index cols = 0) {
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + " must be an array of rows");
  if (j.empty()) return Matrix(0, cols);
  const auto c = static_cast<Eigen::Index>(j[0].size());
  Matrix m(static_cast<Eigen::Index>(j.size()), c);
  for (std::size_t r = 0; r < j.size(); ++r) {
    Vector row = vector_from(j[r], what);
    if (row.size() != c) throw std::invalid_argument(std::string(what) + " rows differ in length");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be a JSON object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw std::invalid_argument(std::string(what) + ": unknown key '" + item.key() + "'");
}

const Json& require(const Json& j, const char* key, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string(what) + ": missing '" + key + "'");
  return *it;
}

}  // namespace

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Json measure_to_json(const Measure& mu) {
  if (mu.is_gaussian()) {
    const auto& g = mu.gaussian();
    return Json{{"type", "gaussian"}, {"mean", vector_json(g.mean())},
                {"cov", matrix_json(g.covariance())}};
  }
  const auto& d = mu.discrete();
  return Json{{"type", "discrete"}, {"atoms", matrix_json(d.atoms())},
              {"weights", vector_json(d.weights())}};
}

Measure measure_from_json(const Json& j) {
  if (!j.is_object()) throw std::invalid_argument("measure must be a JSON object");
  const std::string kind = require(j, "type", "measure").get<std::string>();
  if (kind == "gaussian") {
    reject_unknown(j, {"type", "mean", "cov"}, "gaussian measure");
    Vector mean = vector_from(require(j, "mean", "gaussian measure"), "mean");
    Matrix cov = matrix_from(require(j, "cov", "gaussian measure"), "cov", mean.size());
    return GaussianMeasure(std::move(mean), std::move(cov));
  }
  if (kind == "discrete") {
    reject_unknown(j, {"type", "atoms", "weights"}, "discrete measure");
    Matrix atoms = matrix_from(require(j, "atoms", "discrete measure"), "atoms");
    if (j.contains("weights"))
      return DiscreteMeasure(std::move(atoms), vector_from(j["weights"], "weights"));
    return DiscreteMeasure::uniform(std::move(atoms));
  }
  throw std::invalid_argument("unknown measure kind '" + kind + "'");
}

Json solver_config_to_json(const SolverConfig& cfg) {
  return Json{{"method", to_string(cfg.method)},
              {"sinkhorn_epsilon", cfg.sinkhorn_epsilon},
              {"sinkhorn_max_iters", cfg.sinkhorn_max_iters},
              {"sinkhorn_tolerance", cfg.sinkhorn_tolerance},
              {"fixed_point_tolerance", cfg.fixed_point_tolerance},
              {"fixed_point_max_iters", cfg.fixed_point_max_iters},
              {"max_plan_entries", cfg.max_plan_entries},
              {"support_size", cfg.support_size},
              {"free_support_max_iters", cfg.free_support_max_iters},
              {"free_support_tolerance", cfg.free_support_tolerance},
              {"threads", cfg.threads}};
}

SolverConfig solver_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"method", "sinkhorn_epsilon", "sinkhorn_max_iters", "sinkhorn_tolerance",
                  "fixed_point_tolerance", "fixed_point_max_iters", "max_plan_entries",
                  "support_size", "free_support_max_iters", "free_support_tolerance", "threads"},
                 "solver");
  SolverConfig cfg;
  if (j.contains("method")) cfg.method = transport_method_from_string(j["method"].get<std::string>());
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("sinkhorn_epsilon", cfg.sinkhorn_epsilon);
  get("sinkhorn_max_iters", cfg.sinkhorn_max_iters);
  get("sinkhorn_tolerance", cfg.sinkhorn_tolerance);
  get("fixed_point_tolerance", cfg.fixed_point_tolerance);
  get("fixed_point_max_iters", cfg.fixed_point_max_iters);
  get("max_plan_entries", cfg.max_plan_entries);
  get("support_size", cfg.support_size);
  get("free_support_max_iters", cfg.free_support_max_iters);
  get("free_support_tolerance", cfg.free_support_tolerance);
  get("threads", cfg.threads);
  cfg.validate();
  return cfg;
}

Json descriptor_to_json(const GeneratorDescriptor& d) {
  return Json{{"kind", to_string(d.kind)}, {"n", d.n},         {"L", d.L},
              {"delta", d.delta},          {"seed", d.seed},   {"horizon", d.horizon}};
}

GeneratorDescriptor descriptor_from_json(const Json& j) {
  reject_unknown(j, {"kind", "n", "L", "delta", "seed", "horizon"}, "generator");
  GeneratorDescriptor d;
  d.kind = schedule_kind_from_string(require(j, "kind", "generator").get<std::string>());
  d.n = require(j, "n", "generator").get<int>();
  d.L = require(j, "L", "generator").get<int>();
  d.delta = require(j, "delta", "generator").get<double>();
  d.seed = j.value("seed", std::uint64_t{0});
  d.horizon = require(j, "horizon", "generator").get<std::int64_t>();
  return d;
}

Json schedule_to_json(const GraphSchedule& schedule, bool as_descriptor) {
  if (as_descriptor && schedule.descriptor())
    return Json{{"generator", descriptor_to_json(*schedule.descriptor())}};
  Json rounds = Json::array();
  for (const auto& W : schedule.rounds()) rounds.push_back(matrix_json(W));
  return Json{{"n", schedule.n()},
              {"L", schedule.L()},
              {"delta", schedule.delta()},
              {"periodic", schedule.periodic()},
              {"partition", schedule.partition()},
              {"rounds", std::move(rounds)}};
}

GraphSchedule schedule_from_json(const Json& j) {
  if (!j.is_object()) throw std::invalid_argument("schedule must be a JSON object");
  if (j.contains("generator")) {
    reject_unknown(j, {"generator"}, "schedule");
    return generate_schedule(descriptor_from_json(j["generator"]));
  }
  reject_unknown(j, {"n", "L", "delta", "periodic", "partition", "rounds"}, "schedule");
  const int n = require(j, "n", "schedule").get<int>();
  std::vector<Matrix> rounds;
  for (const auto& r : require(j, "rounds", "schedule")) {
    Matrix W = matrix_from(r, "schedule round", n);
    if (W.rows() != n || W.cols() != n)
      throw std::invalid_argument("schedule round is not " + std::to_string(n) + "x" +
                                  std::to_string(n));
    rounds.push_back(std::move(W));
  }
  auto partition = require(j, "partition", "schedule").get<std::vector<std::int64_t>>();
  return GraphSchedule(n, std::move(rounds), std::move(partition),
                       require(j, "L", "schedule").get<int>(),
                       require(j, "delta", "schedule").get<double>(), j.value("periodic", false));
}

Json checkpoint_to_json(std::int64_t t, const std::vector<Measure>& agents) {
  Json a = Json::array();
  for (const auto& mu : agents) a.push_back(measure_to_json(mu));
  return Json{{"t", t}, {"agents", std::move(a)}};
}

ConsensusState checkpoint_from_json(const Json& j) {
  reject_unknown(j, {"t", "agents"}, "checkpoint");
  ConsensusState s;
  s.t = require(j, "t", "checkpoint").get<std::int64_t>();
  for (const auto& m : require(j, "agents", "checkpoint")) s.agents.push_back(measure_from_json(m));
  return s;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("'" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

void write_trace_header(std::ostream& out, int n) {
  out << 't';
  for (int i = 1; i <= n; ++i) out << ",v2_" << i;
  out << ",v2_max,diameter,max_jensen_residual\n";
}

void write_trace_row(std::ostream& out, const TraceRow& row) {
  out << row.t;
  for (double v : row.v2) out << ',' << format_real(v);
  out << ',' << format_real(row.v2_max) << ',' << format_real(row.diameter) << ','
      << format_real(row.max_jensen_residual) << '\n';
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace CSV is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const std::size_t cols = header.size();
  if (cols < 5 || header[0] != "t" || header[cols - 3] != "v2_max" ||
      header[cols - 2] != "diameter" || header[cols - 1] != "max_jensen_residual")
    throw std::runtime_error("trace CSV header is malformed");
  const std::size_t n = cols - 4;
  for (std::size_t i = 0; i < n; ++i)
    if (header[i + 1] != "v2_" + std::to_string(i + 1))
      throw std::runtime_error("trace CSV header is malformed at column " + header[i + 1]);

  std::vector<TraceRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("trace CSV line " + std::to_string(line_no) + ": bad value '" +
                                 cell + "'");
      }
    }
    if (vals.size() != cols)
      throw std::runtime_error("trace CSV line " + std::to_string(line_no) + ": expected " +
                               std::to_string(cols) + " fields");
    TraceRow row;
    row.t = static_cast<std::int64_t>(vals[0]);
    row.v2.assign(vals.begin() + 1, vals.begin() + 1 + static_cast<std::ptrdiff_t>(n));
    row.v2_max = vals[cols - 3];
    row.diameter = vals[cols - 2];
    row.max_jensen_residual = vals[cols - 1];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace wbc

#pragma once

// Time-varying communication graphs: row-stochastic weight schedules W(t),
// joint-connectivity windows [tau_k, tau_{k+1}), and joining sequences.
//
// Adjacency is the positivity pattern of W(t): j is a neighbour of i at
// round t iff w_ij(t) > 0. Self-loops are mandatory.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wbc/measures.hpp"

namespace wbc {

enum class ScheduleKind { complete, ring_rotating, random_jointly_connected, leaderless_neighbors };

const char* to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

struct GeneratorDescriptor {
  ScheduleKind kind = ScheduleKind::complete;
  int n = 2;
  int L = 1;
  double delta = 0.5;
  std::uint64_t seed = 0;
  std::int64_t horizon = 1;

  friend bool operator==(const GeneratorDescriptor&, const GeneratorDescriptor&) = default;
};

class GraphSchedule {
 public:
  // `rounds[t]` is W(t). `partition` is tau_0 = 0 < tau_1 < ... ; with
  // `periodic` the rounds repeat with period rounds.size() and the partition
  // (which must then end at rounds.size()) repeats with them.
  GraphSchedule(int n, std::vector<Matrix> rounds, std::vector<std::int64_t> partition, int L,
                double delta, bool periodic = false);

  int n() const { return n_; }
  int L() const { return L_; }
  double delta() const { return delta_; }
  bool periodic() const { return periodic_; }

  // Rounds stored explicitly (one period when periodic).
  std::int64_t stored_rounds() const { return static_cast<std::int64_t>(rounds_.size()); }
  // True when W(t) is defined (always for periodic schedules).
  bool defined_at(std::int64_t t) const;

  // W(t); throws std::out_of_range past the stored horizon.
  const Matrix& weights_at(std::int64_t t) const;
  bool adjacent(std::int64_t t, int i, int j) const { return weights_at(t)(i, j) > 0.0; }

  // tau_k; throws std::out_of_range when k is past the stored partition.
  std::int64_t tau(std::int64_t k) const;
  // Number of partition points available (unbounded for periodic schedules).
  std::optional<std::int64_t> partition_size() const;
  const std::vector<std::int64_t>& partition() const { return partition_; }
  const std::vector<Matrix>& rounds() const { return rounds_; }

  const std::optional<GeneratorDescriptor>& descriptor() const { return descriptor_; }
  void set_descriptor(GeneratorDescriptor d) { descriptor_ = d; }

 private:
  int n_;
  std::vector<Matrix> rounds_;
  std::vector<std::int64_t> partition_;
  int L_;
  double delta_;
  bool periodic_;
  std::optional<GeneratorDescriptor> descriptor_;
};

struct ScheduleViolation {
  std::string kind;  // row_sum, self_loop, asymmetric_pattern, delta_bound, value_asymmetry,
                     // window_length, disconnected_window, partition, horizon
  std::int64_t t = -1;  // round, or window index for window checks
  int i = -1;
  int j = -1;
  std::string message;
};

struct ValidationReport {
  std::vector<ScheduleViolation> violations;
  bool ok() const { return violations.empty(); }
};

struct ValidationOptions {
  // Also require w_ij == w_ji (doubly stochastic studies).
  bool strict_symmetric_values = false;
  double row_sum_tolerance = 1e-12;
};

// Checks rows, self-loops, symmetric positivity, the delta lower bound for
// every round t < horizon, window lengths <= L, and connectivity of the union
// graph of each window that ends within the horizon.
ValidationReport validate_schedule(const GraphSchedule& schedule, std::int64_t horizon,
                                   const ValidationOptions& options = {});

struct MeetingCertificate {
  int i = 0;
  int j = 0;
  std::int64_t m1 = 0;
  std::int64_t m2 = 0;
  std::vector<int> sequence;  // l_{m1}, ..., l_{m2}

  // l_{m1} = i, l_{m2} = j and w_{l_{s+1} l_s}(s) > 0 for every s.
  bool valid_for(const GraphSchedule& schedule) const;
};

// Joining sequence from i to j on [m1, m2] via forward reachability, or
// nullopt when none exists.
std::optional<MeetingCertificate> meets(const GraphSchedule& schedule, int i, int j,
                                        std::int64_t m1, std::int64_t m2);

// All agents reachable from i on [m1, m2] (indicator vector).
std::vector<char> reachable_from(const GraphSchedule& schedule, int i, std::int64_t m1,
                                 std::int64_t m2);

struct MeetingFailure {
  int i;
  int j;
  std::int64_t k;
};

struct MeetingLemmaReport {
  std::vector<MeetingFailure> failures;
  std::int64_t windows_checked = 0;
  std::int64_t M = 0;        // sup_k (t_{k+1} - t_{k-1}) over checked k >= 1
  std::int64_t M_bound = 0;  // 2 L (n - 1)
  bool M_ok = true;
  std::vector<std::string> notes;  // e.g. partition shorter than requested
  bool ok() const { return failures.empty() && M_ok && notes.empty(); }
};

// With t_k = tau_{k(n-1)}, checks that every pair meets on [t_k, t_{k+1}] for
// k = 0..k_max, and that M <= 2L(n-1).
MeetingLemmaReport verify_meeting_lemma(const GraphSchedule& schedule, std::int64_t k_max);

// Preset generators; the output passes validate_schedule over `horizon`.
// Throws std::invalid_argument when delta is infeasible for the preset.
GraphSchedule generate_schedule(ScheduleKind kind, int n, int L, double delta, std::uint64_t seed,
                                std::int64_t horizon);
GraphSchedule generate_schedule(const GeneratorDescriptor& d);

// Leaderless weights w_ij = 1/|N_i| from a symmetric 0/1 adjacency (self
// loops added).
Matrix leaderless_weights(const Eigen::MatrixXi& adjacency);

// Undirected union-graph edges (i < j) of each partition window within the
// horizon, as CSV: window,tau_start,tau_end,i,j.
void write_window_edges_csv(const GraphSchedule& schedule, std::int64_t horizon, std::ostream& out);

}  // namespace wbc

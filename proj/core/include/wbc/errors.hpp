#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace wbc {

// An iterative solver hit its iteration cap. `residual` is the last measured
// residual (marginal violation, fixed-point residual, ...).
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, std::int64_t iterations)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + " after " +
                           std::to_string(iterations) + " iterations)"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const { return residual_; }
  std::int64_t iterations() const { return iterations_; }

 private:
  double residual_;
  std::int64_t iterations_;
};

// A problem exceeds a configured size cap.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// A consensus round failed; carries the round and agent that failed.
class RoundError : public std::runtime_error {
 public:
  RoundError(const std::string& what, std::int64_t round, std::int64_t agent)
      : std::runtime_error("round " + std::to_string(round) + ", agent " + std::to_string(agent) +
                           ": " + what),
        round_(round),
        agent_(agent) {}

  std::int64_t round() const { return round_; }
  std::int64_t agent() const { return agent_; }

 private:
  std::int64_t round_;
  std::int64_t agent_;
};

}  // namespace wbc

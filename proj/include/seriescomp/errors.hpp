#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace seriescomp {

/// Scenario or configuration rejected during validation. Collects every
/// violation found, each prefixed with a path into the offending document.
class SpecError : public std::runtime_error {
 public:
  explicit SpecError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string all = "invalid scenario:";
    for (const auto& s : issues) {
      all += "\n  - ";
      all += s;
    }
    return all;
  }
  std::vector<std::string> issues_;
};

/// Numerical failure inside the network solver (singular or ill-conditioned
/// island, non-finite parameter).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (non-monotone time, wrong
/// device state). Programming error, not an input error.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Co-simulation link failure (timeout, protocol violation, remote fault).
class LinkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulation run aborted mid-way; carries the simulated time and step.
class RunError : public std::runtime_error {
 public:
  RunError(const std::string& what, double t_s, long step)
      : std::runtime_error(what + " (t=" + std::to_string(t_s) +
                           " s, step " + std::to_string(step) + ")"),
        t_s_(t_s),
        step_(step) {}
  double t_s() const { return t_s_; }
  long step() const { return step_; }

 private:
  double t_s_;
  long step_;
};

}  // namespace seriescomp

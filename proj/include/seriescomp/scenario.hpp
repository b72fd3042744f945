#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seriescomp/deployment.hpp"
#include "seriescomp/network.hpp"
#include "seriescomp/relay.hpp"

namespace seriescomp {

// ---------------------------------------------------------------------------
// Faults and scheduled events
// ---------------------------------------------------------------------------

enum class FaultKind {
  ThreePhase,
  PhaseGround,
  PhasePhase,
  PhasePhaseGround,
};

/// One stage of a (possibly evolving) fault. Single-type faults have exactly
/// one stage at offset zero; an evolving fault replaces its shunt set when
/// each later stage becomes due.
struct FaultStage {
  double offset_s = 0.0;
  FaultKind kind = FaultKind::ThreePhase;
  Phase phase_a = Phase::A;  // involved phase(s) for non-three-phase kinds
  Phase phase_b = Phase::B;

  bool operator==(const FaultStage&) const = default;
};

struct FaultSpec {
  std::string line_id;
  double position_p = 0.5;
  double r_fault_ohm = 0.0;
  double duration_s = 0.0;
  std::vector<FaultStage> stages{FaultStage{}};

  bool operator==(const FaultSpec&) const = default;
};

/// Shunt set for one stage; grounded kinds use per-phase resistances to
/// ground, the ungrounded phase-phase kind a single resistance between the
/// two phases.
FaultShunt fault_stage_shunt(const FaultSpec& fault, const FaultStage& stage);

enum class EventKind {
  ApplyFault,
  ClearFault,
  OpenBreaker,
  CloseBreaker,
  SetInjectionCommand,
  SetFeatureFlags,
};

struct ScheduledEvent {
  double t_s = 0.0;
  EventKind kind = EventKind::ApplyFault;
  std::optional<FaultSpec> fault;           // ApplyFault
  std::string target_id;                    // breaker / deployment / line id
  std::optional<Phase> phase;               // single-pole breaker scripting
  std::optional<InjectionCommand> command;  // SetInjectionCommand
  std::optional<FeatureFlags> flags;        // SetFeatureFlags

  bool operator==(const ScheduledEvent&) const = default;
};

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

struct ScenarioSpec {
  std::string name;
  NetworkModel network;
  std::vector<DeploymentConfig> deployments;
  std::vector<RelaySettings> relays;
  double dt_s = 250e-6;
  double t_end_s = 0.0;
  double summary_window_s = 1.0;
  std::vector<std::string> monitored_lines;
  FeatureFlags feature_flags;
  std::vector<ScheduledEvent> events;

  bool operator==(const ScenarioSpec&) const = default;

  /// Every structural and semantic check, batched. Empty means valid.
  std::vector<std::string> validate() const;
};

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

struct EventRecord {
  double t_s = 0.0;
  std::string source;
  std::string name;
  std::string detail;

  bool operator==(const EventRecord&) const = default;
};

/// Column-oriented trace: one row per step, fixed column schema derived from
/// the spec (monitored lines, relays, breakers, in that order).
struct Trace {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  bool operator==(const Trace&) const = default;
};

std::vector<std::string> trace_columns(const ScenarioSpec& spec);

struct LineSummary {
  double max_i_ka = 0.0;
  double final_window_mean_i_ka = 0.0;  // max over phases of per-phase mean
  bool overload = false;
  double thermal_limit_ka = 0.0;
};

struct RunSummary {
  std::string scenario_name;
  long steps = 0;
  double dt_s = 0.0;
  double t_end_s = 0.0;
  double max_kcl_residual = 0.0;
  bool complete = false;
  bool overload_any = false;
  std::map<std::string, LineSummary> lines;
  // "<deployment>.<phase>" -> mode name -> seconds
  std::map<std::string, std::map<std::string, double>> device_time_in_state;
  std::vector<EventRecord> relay_timeline;
};

struct RunResult {
  Trace trace;
  std::vector<EventRecord> events;
  RunSummary summary;
};

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

struct RunOptions {
  /// Path of the device-server executable for child-process co-simulation;
  /// empty resolves to "seriescomp-devserver" next to the running binary.
  std::string devserver_path;
  /// Scenario file handed to spawned device servers. Required when any
  /// deployment uses the child_process transport.
  std::string spec_file_path;
};

/// Execute the scenario start to finish. Deterministic: two runs of the same
/// spec produce identical results, including byte-identical serialized
/// artifacts. Throws SpecError for invalid specs and RunError when a solver
/// or link failure aborts the run.
RunResult run_scenario(const ScenarioSpec& spec, const RunOptions& opts = {});

}  // namespace seriescomp

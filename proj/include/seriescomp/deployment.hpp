#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "seriescomp/device.hpp"
#include "seriescomp/phasor.hpp"

namespace seriescomp {

/// Scenario-level switches realizing the study cases: devices absent,
/// devices without bypass features, or the full protection stack.
struct FeatureFlags {
  bool devices_enabled = true;
  bool oc_enabled = true;
  bool lor_enabled = true;
  bool ipb_enabled = true;
  bool backup_lor_enabled = true;

  bool operator==(const FeatureFlags&) const = default;
};

/// Signals a relay publishes each step, consumed by backup-LOR wiring and
/// the event log.
struct RelaySignals {
  std::vector<bool> zone_pickup;
  bool trip = false;
  std::array<bool, 3> pole_open{false, false, false};

  bool pole_discordance() const {
    int open = (pole_open[0] ? 1 : 0) + (pole_open[1] ? 1 : 0) +
               (pole_open[2] ? 1 : 0);
    return open > 0 && open < 3;
  }
};

using SignalMap = std::map<std::string, RelaySignals>;

/// One (relay, signal) condition in the backup-LOR OR-gate.
struct BackupLorCondition {
  std::string relay_id;
  std::string signal;  // zone<k>_pickup | trip | pole_open_{a,b,c} | pole_discordance

  bool operator==(const BackupLorCondition&) const = default;
};

/// Per-line stack of single-phase devices. All modeled devices of a phase
/// see the same line current and share one injection command; scale_factor
/// stands in for physical units not modeled individually.
struct DeploymentConfig {
  std::string id;
  std::string line_id;
  int devices_per_phase = 1;
  double scale_factor = 1.0;
  bool ipb_enabled = true;
  bool backup_lor_enabled = true;
  InjectionCommand command;
  DeviceRating rating;
  DeviceProtectionSettings protection;
  AngleTrackerSettings tracker;
  std::vector<BackupLorCondition> backup_lor_wiring;

  struct Cosim {
    std::string transport = "none";  // "none" | "child_process"
    int timeout_ms = 1000;
    bool operator==(const Cosim&) const = default;
  } cosim;

  bool operator==(const DeploymentConfig&) const = default;
};

struct DeploymentState {
  std::array<std::vector<DeviceState>, 3> devices;
  std::array<bool, 3> pending_ipb{false, false, false};
  bool backup_lor_active = false;
};

DeploymentState make_deployment_state(const DeploymentConfig& cfg);

/// Total series voltage per phase: scale_factor times the sum of the
/// injections of devices in Injection mode. Devices of one phase are exact
/// clones by construction, so a sum of bit-identical contributions is
/// computed as count * value; this keeps n-devices-at-scale-1 and
/// one-device-at-scale-n bit-identical.
ThreePhaseSet aggregate_injection(const DeploymentConfig& cfg,
                                  const DeploymentState& state,
                                  const ThreePhaseSet& i_line_ka);

/// Phases whose devices hold a primary (non-IPB) bypass right now.
std::array<bool, 3> primary_bypassed_phases(const DeploymentState& state,
                                            double t_now_s);

/// New IPB commands: one per healthy phase whenever any other phase holds a
/// primary bypass. Already-bypassed phases receive no new command.
std::array<bool, 3> ipb_coordinate(const DeploymentState& state,
                                   double t_now_s);

/// Level fed into the devices' step: keeps every phase's bypass pinned while
/// any other phase is primary-bypassed, so all three resume together.
std::array<bool, 3> ipb_hold_level(const DeploymentState& state,
                                   double t_now_s);

/// Three-phase backup-LOR command: OR over the configured relay-signal
/// conditions. Unknown names are rejected when the scenario loads, not here.
bool backup_lor_evaluate(const SignalMap& signals,
                         const DeploymentConfig& cfg);

/// Signal-name grammar check used by scenario validation.
bool is_known_relay_signal(const std::string& name, int zone_count);

std::vector<std::string> validate(const DeploymentConfig& cfg,
                                  const std::string& path);

/// Deployment config as seen through the scenario feature flags: a disabled
/// OC raises its threshold out of reach, a disabled LOR clears the enable
/// bit, and so on. The authored config is left untouched.
DeploymentConfig effective_config(DeploymentConfig cfg,
                                  const FeatureFlags& flags);

// ---------------------------------------------------------------------------
// Device core step
// ---------------------------------------------------------------------------
// One device, one simulation step: tracker, protection, injection. This is
// the exact code both the in-process path and the out-of-process device
// controller run, so a remote deployment reproduces the in-process trace
// bit for bit. Time is always derived as step_index * dt_s.

struct DeviceCoreInput {
  Phasor i_line_ka{0.0, 0.0};
  bool backup_lor = false;
  bool ipb_level = false;
  long step_index = 0;
  double dt_s = 250e-6;
};

struct DeviceCoreOutput {
  Phasor injection_kv{0.0, 0.0};
  DeviceMode mode = DeviceMode::Monitoring;
  bool primary = false;
};

DeviceCoreOutput step_device_core(DeviceState& st, const DeviceCoreInput& in,
                                  const DeploymentConfig& effective_cfg,
                                  std::vector<DeviceEvent>* events = nullptr,
                                  const std::string& source_id = {});

}  // namespace seriescomp

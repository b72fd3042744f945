#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seriescomp/errors.hpp"
#include "seriescomp/phasor.hpp"

namespace seriescomp {

// ---------------------------------------------------------------------------
// Ratings and commands
// ---------------------------------------------------------------------------

/// Converter stack rating of one single-phase device. The voltage cap is
/// derived from the MVA budget so the MVA-consistency invariant holds by
/// construction.
struct DeviceRating {
  int n_converters = 10;
  double s_per_converter_mvar = 1.0;
  double rated_current_ka = 1.0;
  double i_min_inject_ka = 0.05;

  double total_mva() const { return n_converters * s_per_converter_mvar; }
  double v_cap_kv() const { return total_mva() / rated_current_ka; }

  bool operator==(const DeviceRating&) const = default;
};

enum class InjectionMode { Off, FixedReactance, FixedVoltage };
enum class Polarity { Inductive, Capacitive };

struct InjectionCommand {
  InjectionMode mode = InjectionMode::Off;
  double x_set_ohm = 0.0;   // signed; > 0 inductive, < 0 capacitive
  double v_set_kv = 0.0;    // magnitude, FixedVoltage mode
  Polarity polarity = Polarity::Inductive;

  bool operator==(const InjectionCommand&) const = default;
};

struct DeviceProtectionSettings {
  double i_oc_ka = 3.8;
  double i_lor_ka = 1.1414;
  double t_bypass_ms = 1.0;      // detection-to-bypass latency budget
  double t_oc_lockout_s = 30.0;  // held after the fault is cleared
  double t_lor_hold_s = 1.0;     // after the last LOR trigger
  bool lor_enabled = true;
  double t_low_current_s = 1.0;  // dwell below i_min before Monitoring

  bool operator==(const DeviceProtectionSettings&) const = default;
};

struct AngleTrackerSettings {
  double tau_s = 0.02;  // first-order tracking time constant

  bool operator==(const AngleTrackerSettings&) const = default;
};

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

enum class DeviceMode : int {
  Monitoring = 1,
  Injection = 2,
  LorBypass = 3,
  OcBypass = 4,
};

/// Numeric code used in traces and on the co-sim wire.
inline int device_mode_code(DeviceMode m) { return static_cast<int>(m); }

inline const char* device_mode_name(DeviceMode m) {
  switch (m) {
    case DeviceMode::Monitoring: return "monitoring";
    case DeviceMode::Injection: return "injection";
    case DeviceMode::LorBypass: return "lor_bypass";
    case DeviceMode::OcBypass: return "oc_bypass";
  }
  return "?";
}

struct DeviceState {
  Phase phase = Phase::A;
  DeviceMode mode = DeviceMode::Monitoring;
  bool vsl_closed = true;  // VSLs are normally closed at rest
  std::optional<double> lockout_deadline_s;
  std::optional<double> lor_hold_deadline_s;
  double angle_tracker_rad = 0.0;
  Phasor last_injection_kv{0.0, 0.0};

  // bookkeeping
  std::optional<double> low_current_since_s;
  double last_step_time_s = -1.0;
  bool own_lor_trigger = false;  // current/backup trigger seen this step

  bool operator==(const DeviceState&) const = default;
};

struct DeviceEvent {
  double t_s = 0.0;
  std::string source;
  std::string name;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// First-order lag of the tracked line-current angle; the PLL surrogate.
/// Holds the last value while the line current is below the injection
/// minimum.
DeviceState update_angle_tracker(DeviceState state, Phasor i_line_ka,
                                 double dt_s, const AngleTrackerSettings& cfg,
                                 const DeviceRating& rating);

/// Maximum injectable voltage magnitude at a given line current: zero below
/// the injection minimum, the full cap up to rated current, constant MVA
/// above it.
double capability_limit(const DeviceRating& rating, double i_mag_ka);

/// Series voltage produced in Injection mode, drop convention. FixedReactance
/// uses the instantaneous current phasor; FixedVoltage rides the tracked
/// angle shifted +/-90 degrees. The result is clamped to capability_limit.
/// Throws ContractError when the device is not in Injection mode.
Phasor compute_injection(const InjectionCommand& cmd, Phasor i_line_ka,
                         const DeviceState& state, const DeviceRating& rating);

/// One step of the OC/LOR protection state machine.
///
/// Transition priorities per step: OC entry beats everything; in OcBypass the
/// lockout deadline re-arms while current stays above the LOR threshold and
/// expires back to Injection. LOR triggers are over-current in (i_lor, i_oc],
/// backup-LOR, or an interphase-balancing command; current/backup triggers
/// re-arm the hold deadline, an IPB command only blocks the exit so that all
/// phases of a deployment resume together.
DeviceState step_protection(DeviceState state, double i_mag_ka,
                            bool backup_lor, bool ipb_cmd, double t_now_s,
                            const DeviceProtectionSettings& cfg,
                            const DeviceRating& rating,
                            std::vector<DeviceEvent>* events = nullptr,
                            const std::string& source_id = {});

/// True while the device would keep a deployment's other phases bypassed:
/// OC bypass, or LOR bypass backed by its own (non-IPB) trigger or a still
/// running hold.
bool primary_bypass_active(const DeviceState& state, double t_now_s);

std::vector<std::string> validate(const DeviceRating& rating,
                                  const std::string& path);
std::vector<std::string> validate(const DeviceProtectionSettings& cfg,
                                  const std::string& path);

}  // namespace seriescomp

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "seriescomp/deployment.hpp"
#include "seriescomp/errors.hpp"
#include "seriescomp/phasor.hpp"

namespace seriescomp {

enum class ZoneDirection { Forward, Reverse, NonDirectional };

struct ZoneSettings {
  Phasor reach_ohm{0.0, 0.0};
  double delay_s = 0.0;
  ZoneDirection direction = ZoneDirection::Forward;

  bool operator==(const ZoneSettings&) const = default;
};

/// Distance relay protecting one line, measured at the line's from_bus and
/// commanding both end breakers three-pole.
struct RelaySettings {
  std::string id;
  std::string line_id;
  Phasor k0{0.0, 0.0};  // residual compensation for ground loops
  std::vector<ZoneSettings> zones;
  double breaker_operate_delay_s = 0.04;
  double reclose_dead_time_s = 0.9;
  double reclaim_time_s = 1.0;
  int reclose_attempts = 1;
  double min_current_ka = 0.05;  // loop supervision threshold

  bool operator==(const RelaySettings&) const = default;
};

enum class LoopId : int { AB = 0, BC = 1, CA = 2, AG = 3, BG = 4, CG = 5 };

inline const char* loop_name(LoopId id) {
  switch (id) {
    case LoopId::AB: return "AB";
    case LoopId::BC: return "BC";
    case LoopId::CA: return "CA";
    case LoopId::AG: return "AG";
    case LoopId::BG: return "BG";
    case LoopId::CG: return "CG";
  }
  return "?";
}

struct LoopMeasurement {
  LoopId loop = LoopId::AB;
  Phasor z_ohm{0.0, 0.0};
  bool valid = false;
};

enum class DirectionResult { Forward, Reverse, Indeterminate };

enum class RecloseState : int { Idle = 0, DeadTime = 1, Reclaim = 2, LockedOut = 3 };

struct RelayState {
  struct ZoneRt {
    bool pickup = false;
    std::optional<double> pickup_since_s;
  };
  std::vector<ZoneRt> zones;
  bool trip_asserted = false;
  RecloseState reclose = RecloseState::Idle;
  int attempt_count = 0;
  std::optional<double> dead_time_start_s;
  std::optional<double> reclaim_start_s;
  bool breakers_were_open = false;
  bool trip_pending_reclose = false;  // own trip caused the current opening
  double last_step_time_s = -1.0;
  RelaySignals signals;
};

struct BreakerCommand {
  std::string breaker_id;
  bool close = false;  // false = open, three-pole
};

struct RelayStepResult {
  std::vector<BreakerCommand> commands;
  std::vector<DeviceEvent> events;
};

/// Six impedance loops from the relay-point voltages and currents. Loops
/// whose driving current is under the supervision threshold come back
/// invalid instead of dividing by a vanishing denominator.
std::array<LoopMeasurement, 6> measure_loops(const ThreePhaseSet& v_kv,
                                             const ThreePhaseSet& i_ka,
                                             Phasor k0, double min_current_ka);

/// Self-polarized mho characteristic: inside iff |Z - reach/2| <= |reach/2|.
/// The origin is inside by convention; direction is supervised separately.
bool zone_check(const LoopMeasurement& m, const ZoneSettings& zone);

/// Forward iff the apparent impedance angle lies in (-30, 150] degrees.
DirectionResult directional(Phasor v, Phasor i, double min_current_ka);

/// One relay logic step: zone pickups and timers, three-pole trip, single
/// auto-reclose with dead time, definitive trip on re-pickup in reclaim.
/// `poles_open` is the observed per-phase open state of the line's breakers.
RelayStepResult step_relay(RelayState& state,
                           const std::array<LoopMeasurement, 6>& loops,
                           const std::array<bool, 3>& poles_open,
                           double t_now_s, const RelaySettings& cfg,
                           const std::array<std::string, 2>& breaker_ids);

RelayState make_relay_state(const RelaySettings& cfg);

std::vector<std::string> validate(const RelaySettings& cfg,
                                  const std::string& path);

}  // namespace seriescomp

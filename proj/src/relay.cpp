#include "seriescomp/relay.hpp"

#include <cmath>

namespace seriescomp {

namespace {

constexpr double kForwardLo = -M_PI / 6.0;       // -30 degrees, exclusive
constexpr double kForwardHi = 5.0 * M_PI / 6.0;  // 150 degrees, inclusive

bool forward_angle(double a) { return a > kForwardLo && a <= kForwardHi; }

bool direction_ok(const LoopMeasurement& m, const ZoneSettings& zone) {
  if (zone.direction == ZoneDirection::NonDirectional) return true;
  bool fwd = forward_angle(std::arg(m.z_ohm));
  return zone.direction == ZoneDirection::Forward ? fwd : !fwd;
}

void emit(std::vector<DeviceEvent>& events, const std::string& relay_id,
          double t, const std::string& name, std::string detail) {
  events.push_back({t, relay_id, name, std::move(detail)});
}

}  // namespace

std::array<LoopMeasurement, 6> measure_loops(const ThreePhaseSet& v_kv,
                                             const ThreePhaseSet& i_ka,
                                             Phasor k0,
                                             double min_current_ka) {
  std::array<LoopMeasurement, 6> out;
  const Phasor residual = i_ka.a + i_ka.b + i_ka.c;  // 3*I0

  auto phase_loop = [&](LoopId id, Phasor vx, Phasor vy, Phasor ix,
                        Phasor iy) {
    LoopMeasurement m;
    m.loop = id;
    Phasor den = ix - iy;
    if (std::abs(den) >= min_current_ka) {
      m.valid = true;
      m.z_ohm = (vx - vy) / den;
    }
    return m;
  };
  auto ground_loop = [&](LoopId id, Phasor vx, Phasor ix) {
    LoopMeasurement m;
    m.loop = id;
    Phasor den = ix + k0 * residual;
    if (std::abs(den) >= min_current_ka) {
      m.valid = true;
      m.z_ohm = vx / den;
    }
    return m;
  };

  out[0] = phase_loop(LoopId::AB, v_kv.a, v_kv.b, i_ka.a, i_ka.b);
  out[1] = phase_loop(LoopId::BC, v_kv.b, v_kv.c, i_ka.b, i_ka.c);
  out[2] = phase_loop(LoopId::CA, v_kv.c, v_kv.a, i_ka.c, i_ka.a);
  out[3] = ground_loop(LoopId::AG, v_kv.a, i_ka.a);
  out[4] = ground_loop(LoopId::BG, v_kv.b, i_ka.b);
  out[5] = ground_loop(LoopId::CG, v_kv.c, i_ka.c);
  return out;
}

bool zone_check(const LoopMeasurement& m, const ZoneSettings& zone) {
  if (!m.valid) return false;
  Phasor center = zone.reach_ohm * 0.5;
  return std::abs(m.z_ohm - center) <= std::abs(center);
}

DirectionResult directional(Phasor v, Phasor i, double min_current_ka) {
  if (std::abs(i) < min_current_ka) return DirectionResult::Indeterminate;
  return forward_angle(std::arg(v / i)) ? DirectionResult::Forward
                                        : DirectionResult::Reverse;
}

RelayState make_relay_state(const RelaySettings& cfg) {
  RelayState st;
  st.zones.resize(cfg.zones.size());
  st.signals.zone_pickup.assign(cfg.zones.size(), false);
  return st;
}

RelayStepResult step_relay(RelayState& state,
                           const std::array<LoopMeasurement, 6>& loops,
                           const std::array<bool, 3>& poles_open,
                           double t_now_s, const RelaySettings& cfg,
                           const std::array<std::string, 2>& breaker_ids) {
  if (t_now_s < state.last_step_time_s)
    throw ContractError("step_relay: time must be non-decreasing");
  state.last_step_time_s = t_now_s;

  RelayStepResult out;
  auto open_both = [&] {
    out.commands.push_back({breaker_ids[0], false});
    out.commands.push_back({breaker_ids[1], false});
  };

  // Zone pickups and timers.
  bool any_pickup = false;
  bool want_trip = false;
  for (std::size_t z = 0; z < cfg.zones.size(); ++z) {
    bool picked = false;
    for (const auto& m : loops)
      if (m.valid && zone_check(m, cfg.zones[z]) &&
          direction_ok(m, cfg.zones[z])) {
        picked = true;
        break;
      }
    auto& rt = state.zones[z];
    if (picked && !rt.pickup) {
      rt.pickup_since_s = t_now_s;
      emit(out.events, cfg.id, t_now_s,
           "zone" + std::to_string(z + 1) + "_pickup", "");
    } else if (!picked && rt.pickup) {
      rt.pickup_since_s.reset();
      emit(out.events, cfg.id, t_now_s,
           "zone" + std::to_string(z + 1) + "_drop", "");
    }
    rt.pickup = picked;
    state.signals.zone_pickup[z] = picked;
    any_pickup = any_pickup || picked;
    if (picked && t_now_s - *rt.pickup_since_s >= cfg.zones[z].delay_s)
      want_trip = true;
  }

  const bool all_open = poles_open[0] && poles_open[1] && poles_open[2];
  const bool open_edge = all_open && !state.breakers_were_open;

  // Definitive trip: zone-1 re-pickup while reclaiming.
  if (state.reclose == RecloseState::Reclaim && !state.zones.empty() &&
      state.zones[0].pickup) {
    if (!state.trip_asserted) {
      state.trip_asserted = true;
      emit(out.events, cfg.id, t_now_s, "trip", "definitive (reclaim)");
    }
    open_both();
    state.reclose = RecloseState::LockedOut;
    emit(out.events, cfg.id, t_now_s, "locked_out", "zone-1 pickup in reclaim");
  } else if (want_trip && !state.trip_asserted) {
    state.trip_asserted = true;
    state.trip_pending_reclose = true;
    open_both();
    emit(out.events, cfg.id, t_now_s, "trip", "");
  }

  // Trip resets once the fault is isolated: breakers open, pickups gone.
  if (state.trip_asserted && all_open && !any_pickup)
    state.trip_asserted = false;

  switch (state.reclose) {
    case RecloseState::Idle:
      // Reclose only openings this relay caused; a manually opened line
      // stays open.
      if (open_edge && state.trip_pending_reclose) {
        state.trip_pending_reclose = false;
        if (state.attempt_count < cfg.reclose_attempts) {
          state.reclose = RecloseState::DeadTime;
          state.dead_time_start_s = t_now_s;
          emit(out.events, cfg.id, t_now_s, "dead_time_start", "");
        } else {
          state.reclose = RecloseState::LockedOut;
          emit(out.events, cfg.id, t_now_s, "locked_out",
               "no reclose attempts remaining");
        }
      }
      break;
    case RecloseState::DeadTime:
      if (t_now_s - *state.dead_time_start_s >= cfg.reclose_dead_time_s) {
        out.commands.push_back({breaker_ids[0], true});
        out.commands.push_back({breaker_ids[1], true});
        state.attempt_count += 1;
        state.reclose = RecloseState::Reclaim;
        state.reclaim_start_s = t_now_s;
        emit(out.events, cfg.id, t_now_s, "reclose",
             "attempt " + std::to_string(state.attempt_count));
      }
      break;
    case RecloseState::Reclaim:
      if (open_edge) {
        // A timed re-trip finished opening during reclaim.
        state.trip_pending_reclose = false;
        if (state.attempt_count >= cfg.reclose_attempts) {
          state.reclose = RecloseState::LockedOut;
          emit(out.events, cfg.id, t_now_s, "locked_out",
               "re-trip with no attempts remaining");
        } else {
          state.reclose = RecloseState::DeadTime;
          state.dead_time_start_s = t_now_s;
          emit(out.events, cfg.id, t_now_s, "dead_time_start", "");
        }
      } else if (!state.trip_asserted && !any_pickup &&
                 t_now_s - *state.reclaim_start_s >= cfg.reclaim_time_s) {
        state.reclose = RecloseState::Idle;
        state.attempt_count = 0;
        emit(out.events, cfg.id, t_now_s, "reclaim_complete", "");
      }
      break;
    case RecloseState::LockedOut:
      break;  // absorbing until scenario end
  }

  state.breakers_were_open = all_open;
  state.signals.trip = state.trip_asserted;
  state.signals.pole_open = poles_open;
  return out;
}

std::vector<std::string> validate(const RelaySettings& cfg,
                                  const std::string& path) {
  std::vector<std::string> issues;
  if (cfg.zones.empty()) issues.push_back(path + ".zones: at least one zone");
  for (std::size_t z = 1; z < cfg.zones.size(); ++z) {
    if (!(std::abs(cfg.zones[z].reach_ohm) >
          std::abs(cfg.zones[z - 1].reach_ohm)))
      issues.push_back(path + ".zones: reaches must strictly increase");
    if (cfg.zones[z].delay_s < cfg.zones[z - 1].delay_s)
      issues.push_back(path + ".zones: delays must be non-decreasing");
  }
  for (std::size_t z = 0; z < cfg.zones.size(); ++z)
    if (!(std::abs(cfg.zones[z].reach_ohm) > 0.0))
      issues.push_back(path + ".zones[" + std::to_string(z) +
                       "].reach_ohm: must be non-zero");
  if (cfg.reclose_attempts < 0)
    issues.push_back(path + ".reclose_attempts: must be >= 0");
  if (!(cfg.breaker_operate_delay_s >= 0.0))
    issues.push_back(path + ".breaker_operate_delay_s: must be >= 0");
  if (!(cfg.reclose_dead_time_s > 0.0))
    issues.push_back(path + ".reclose_dead_time_s: must be > 0");
  if (!(cfg.reclaim_time_s > 0.0))
    issues.push_back(path + ".reclaim_time_s: must be > 0");
  if (!(cfg.min_current_ka > 0.0))
    issues.push_back(path + ".min_current_ka: must be > 0");
  return issues;
}

}  // namespace seriescomp

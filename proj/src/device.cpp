#include "seriescomp/device.hpp"

#include <cmath>

namespace seriescomp {

namespace {

void emit(std::vector<DeviceEvent>* events, const std::string& source,
          double t, const char* name, std::string detail) {
  if (events == nullptr) return;
  events->push_back({t, source, name, std::move(detail)});
}

std::string ka(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f kA", v);
  return buf;
}

}  // namespace

DeviceState update_angle_tracker(DeviceState state, Phasor i_line_ka,
                                 double dt_s, const AngleTrackerSettings& cfg,
                                 const DeviceRating& rating) {
  if (!(dt_s > 0.0)) throw ContractError("update_angle_tracker: dt must be > 0");
  if (std::abs(i_line_ka) < rating.i_min_inject_ka) return state;  // hold
  double err = wrap_angle(std::arg(i_line_ka) - state.angle_tracker_rad);
  state.angle_tracker_rad =
      wrap_angle(state.angle_tracker_rad + (dt_s / cfg.tau_s) * err);
  return state;
}

double capability_limit(const DeviceRating& rating, double i_mag_ka) {
  if (i_mag_ka < rating.i_min_inject_ka) return 0.0;
  if (i_mag_ka <= rating.rated_current_ka) return rating.v_cap_kv();
  return rating.total_mva() / i_mag_ka;
}

Phasor compute_injection(const InjectionCommand& cmd, Phasor i_line_ka,
                         const DeviceState& state, const DeviceRating& rating) {
  if (state.mode != DeviceMode::Injection)
    throw ContractError("compute_injection called outside Injection mode");

  Phasor v{0.0, 0.0};
  switch (cmd.mode) {
    case InjectionMode::Off:
      return v;
    case InjectionMode::FixedReactance:
      v = Phasor{0.0, cmd.x_set_ohm} * i_line_ka;
      break;
    case InjectionMode::FixedVoltage: {
      double shift = cmd.polarity == Polarity::Inductive ? M_PI / 2.0
                                                         : -M_PI / 2.0;
      v = from_polar(cmd.v_set_kv, state.angle_tracker_rad + shift);
      break;
    }
  }
  double cap = capability_limit(rating, std::abs(i_line_ka));
  double mag = std::abs(v);
  if (mag > cap) v = (cap == 0.0) ? Phasor{0.0, 0.0} : v * (cap / mag);
  return v;
}

bool primary_bypass_active(const DeviceState& state, double t_now_s) {
  if (state.mode == DeviceMode::OcBypass) return true;
  if (state.mode != DeviceMode::LorBypass) return false;
  if (state.own_lor_trigger) return true;
  return state.lor_hold_deadline_s && t_now_s < *state.lor_hold_deadline_s;
}

DeviceState step_protection(DeviceState state, double i_mag_ka,
                            bool backup_lor, bool ipb_cmd, double t_now_s,
                            const DeviceProtectionSettings& cfg,
                            const DeviceRating& rating,
                            std::vector<DeviceEvent>* events,
                            const std::string& source_id) {
  if (t_now_s < state.last_step_time_s)
    throw ContractError("step_protection: time must be non-decreasing");
  state.last_step_time_s = t_now_s;

  const bool oc_hit = i_mag_ka > cfg.i_oc_ka;
  const bool lor_current = i_mag_ka > cfg.i_lor_ka && i_mag_ka <= cfg.i_oc_ka;
  const bool own_trigger = lor_current || backup_lor;
  state.own_lor_trigger = false;

  // OC has absolute priority from every state except OcBypass itself.
  if (oc_hit && state.mode != DeviceMode::OcBypass) {
    state.mode = DeviceMode::OcBypass;
    state.vsl_closed = true;
    state.last_injection_kv = Phasor{0.0, 0.0};
    state.lockout_deadline_s = t_now_s + cfg.t_oc_lockout_s;
    state.lor_hold_deadline_s.reset();
    state.low_current_since_s.reset();
    emit(events, source_id, t_now_s, "oc_bypass_enter",
         ka(i_mag_ka) + " > " + ka(cfg.i_oc_ka));
    return state;
  }

  switch (state.mode) {
    case DeviceMode::OcBypass: {
      // "After the fault is cleared": the lockout re-arms while current
      // stays above the LOR threshold.
      if (i_mag_ka > cfg.i_lor_ka)
        state.lockout_deadline_s = t_now_s + cfg.t_oc_lockout_s;
      if (state.lockout_deadline_s && t_now_s >= *state.lockout_deadline_s) {
        state.mode = DeviceMode::Injection;
        state.vsl_closed = false;
        state.lockout_deadline_s.reset();
        emit(events, source_id, t_now_s, "oc_bypass_exit", "lockout expired");
      }
      break;
    }
    case DeviceMode::Injection: {
      if (cfg.lor_enabled && (own_trigger || ipb_cmd)) {
        state.mode = DeviceMode::LorBypass;
        state.last_injection_kv = Phasor{0.0, 0.0};
        state.own_lor_trigger = own_trigger;
        // An IPB-only entry follows the commanding phase instead of running
        // its own hold; see primary_bypass_active.
        state.lor_hold_deadline_s =
            own_trigger ? std::optional<double>(t_now_s + cfg.t_lor_hold_s)
                        : std::optional<double>(t_now_s);
        state.low_current_since_s.reset();
        emit(events, source_id, t_now_s, "lor_enter",
             lor_current ? ka(i_mag_ka) + " > " + ka(cfg.i_lor_ka)
                         : (backup_lor ? "backup_lor" : "ipb"));
        break;
      }
      if (i_mag_ka < rating.i_min_inject_ka) {
        if (!state.low_current_since_s) state.low_current_since_s = t_now_s;
        if (t_now_s - *state.low_current_since_s >= cfg.t_low_current_s) {
          state.mode = DeviceMode::Monitoring;
          state.vsl_closed = true;
          state.last_injection_kv = Phasor{0.0, 0.0};
          state.low_current_since_s.reset();
          emit(events, source_id, t_now_s, "monitoring_enter", "line current low");
        }
      } else {
        state.low_current_since_s.reset();
      }
      break;
    }
    case DeviceMode::LorBypass: {
      if (own_trigger) {
        state.own_lor_trigger = true;
        state.lor_hold_deadline_s = t_now_s + cfg.t_lor_hold_s;
      }
      bool hold_expired = !state.lor_hold_deadline_s ||
                          t_now_s >= *state.lor_hold_deadline_s;
      if (!own_trigger && !ipb_cmd && hold_expired) {
        state.mode = DeviceMode::Injection;
        state.vsl_closed = false;
        state.lor_hold_deadline_s.reset();
        emit(events, source_id, t_now_s, "lor_exit", "hold expired");
      }
      break;
    }
    case DeviceMode::Monitoring: {
      if (i_mag_ka >= rating.i_min_inject_ka && !state.lockout_deadline_s) {
        state.mode = DeviceMode::Injection;
        state.vsl_closed = false;
        emit(events, source_id, t_now_s, "injection_start",
             ka(i_mag_ka) + " above minimum");
      }
      break;
    }
  }
  return state;
}

std::vector<std::string> validate(const DeviceRating& rating,
                                  const std::string& path) {
  std::vector<std::string> issues;
  if (rating.n_converters <= 0)
    issues.push_back(path + ".n_converters: must be > 0");
  if (!(rating.s_per_converter_mvar > 0.0))
    issues.push_back(path + ".s_per_converter_mvar: must be > 0");
  if (!(rating.rated_current_ka > 0.0))
    issues.push_back(path + ".rated_current_ka: must be > 0");
  if (!(rating.i_min_inject_ka > 0.0))
    issues.push_back(path + ".i_min_inject_ka: must be > 0");
  return issues;
}

std::vector<std::string> validate(const DeviceProtectionSettings& cfg,
                                  const std::string& path) {
  std::vector<std::string> issues;
  if (!(cfg.i_lor_ka > 0.0) || !(cfg.i_lor_ka < cfg.i_oc_ka))
    issues.push_back(path + ": requires 0 < i_lor_ka (" +
                     std::to_string(cfg.i_lor_ka) + ") < i_oc_ka (" +
                     std::to_string(cfg.i_oc_ka) + ")");
  if (!(cfg.t_bypass_ms > 0.0) || cfg.t_bypass_ms > 1.0)
    issues.push_back(path + ".t_bypass_ms: must be in (0, 1]");
  if (cfg.t_oc_lockout_s < 30.0)
    issues.push_back(path + ".t_oc_lockout_s: must be >= 30");
  if (!(cfg.t_lor_hold_s > 0.0))
    issues.push_back(path + ".t_lor_hold_s: must be > 0");
  if (!(cfg.t_low_current_s > 0.0))
    issues.push_back(path + ".t_low_current_s: must be > 0");
  return issues;
}

}  // namespace seriescomp

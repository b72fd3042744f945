#include "seriescomp/deployment.hpp"

#include <limits>

namespace seriescomp {

DeploymentState make_deployment_state(const DeploymentConfig& cfg) {
  DeploymentState st;
  for (int ph = 0; ph < 3; ++ph) {
    st.devices[ph].resize(static_cast<std::size_t>(cfg.devices_per_phase));
    for (auto& d : st.devices[ph]) d.phase = static_cast<Phase>(ph);
  }
  return st;
}

ThreePhaseSet aggregate_injection(const DeploymentConfig& cfg,
                                  const DeploymentState& state,
                                  const ThreePhaseSet& i_line_ka) {
  ThreePhaseSet total;
  for (int ph = 0; ph < 3; ++ph) {
    const auto& devs = state.devices[ph];
    Phasor sum{0.0, 0.0};
    bool all_equal = true;
    Phasor first{0.0, 0.0};
    for (std::size_t d = 0; d < devs.size(); ++d) {
      Phasor v{0.0, 0.0};
      if (devs[d].mode == DeviceMode::Injection)
        v = compute_injection(cfg.command, i_line_ka[static_cast<Phase>(ph)],
                              devs[d], cfg.rating);
      if (d == 0)
        first = v;
      else if (v != first)
        all_equal = false;
      sum += v;
    }
    Phasor phase_total = all_equal
                             ? first * static_cast<double>(devs.size())
                             : sum;
    total[static_cast<Phase>(ph)] = phase_total * cfg.scale_factor;
  }
  return total;
}

std::array<bool, 3> primary_bypassed_phases(const DeploymentState& state,
                                            double t_now_s) {
  std::array<bool, 3> primary{false, false, false};
  for (int ph = 0; ph < 3; ++ph)
    for (const auto& d : state.devices[ph])
      if (primary_bypass_active(d, t_now_s)) primary[ph] = true;
  return primary;
}

namespace {

bool any_bypassed(const std::vector<DeviceState>& devs) {
  for (const auto& d : devs)
    if (d.mode == DeviceMode::LorBypass || d.mode == DeviceMode::OcBypass)
      return true;
  return false;
}

}  // namespace

std::array<bool, 3> ipb_coordinate(const DeploymentState& state,
                                   double t_now_s) {
  auto primary = primary_bypassed_phases(state, t_now_s);
  std::array<bool, 3> cmd{false, false, false};
  for (int ph = 0; ph < 3; ++ph) {
    if (any_bypassed(state.devices[ph])) continue;
    for (int other = 0; other < 3; ++other)
      if (other != ph && primary[other]) cmd[ph] = true;
  }
  return cmd;
}

std::array<bool, 3> ipb_hold_level(const DeploymentState& state,
                                   double t_now_s) {
  auto primary = primary_bypassed_phases(state, t_now_s);
  std::array<bool, 3> level{false, false, false};
  for (int ph = 0; ph < 3; ++ph)
    for (int other = 0; other < 3; ++other)
      if (other != ph && primary[other]) level[ph] = true;
  return level;
}

bool backup_lor_evaluate(const SignalMap& signals,
                         const DeploymentConfig& cfg) {
  if (!cfg.backup_lor_enabled) return false;
  for (const auto& cond : cfg.backup_lor_wiring) {
    auto it = signals.find(cond.relay_id);
    if (it == signals.end()) continue;
    const RelaySignals& s = it->second;
    if (cond.signal == "trip" && s.trip) return true;
    if (cond.signal == "pole_discordance" && s.pole_discordance()) return true;
    if (cond.signal.rfind("pole_open_", 0) == 0 && cond.signal.size() == 11) {
      int ph = cond.signal[10] - 'a';
      if (ph >= 0 && ph < 3 && s.pole_open[static_cast<std::size_t>(ph)])
        return true;
    }
    if (cond.signal.rfind("zone", 0) == 0) {
      auto us = cond.signal.find("_pickup");
      if (us != std::string::npos) {
        int zone = std::atoi(cond.signal.substr(4, us - 4).c_str());
        if (zone >= 1 &&
            static_cast<std::size_t>(zone) <= s.zone_pickup.size() &&
            s.zone_pickup[static_cast<std::size_t>(zone - 1)])
          return true;
      }
    }
  }
  return false;
}

bool is_known_relay_signal(const std::string& name, int zone_count) {
  if (name == "trip" || name == "pole_discordance") return true;
  if (name == "pole_open_a" || name == "pole_open_b" || name == "pole_open_c")
    return true;
  if (name.rfind("zone", 0) == 0) {
    auto us = name.find("_pickup");
    if (us == std::string::npos || us + 7 != name.size()) return false;
    const std::string num = name.substr(4, us - 4);
    if (num.empty()) return false;
    for (char c : num)
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    int zone = std::atoi(num.c_str());
    return zone >= 1 && zone <= zone_count;
  }
  return false;
}

DeploymentConfig effective_config(DeploymentConfig cfg,
                                  const FeatureFlags& flags) {
  if (!flags.oc_enabled)
    cfg.protection.i_oc_ka = std::numeric_limits<double>::infinity();
  cfg.protection.lor_enabled = cfg.protection.lor_enabled && flags.lor_enabled;
  cfg.ipb_enabled = cfg.ipb_enabled && flags.ipb_enabled;
  cfg.backup_lor_enabled = cfg.backup_lor_enabled && flags.backup_lor_enabled;
  return cfg;
}

DeviceCoreOutput step_device_core(DeviceState& st, const DeviceCoreInput& in,
                                  const DeploymentConfig& cfg,
                                  std::vector<DeviceEvent>* events,
                                  const std::string& source_id) {
  const double t_now = static_cast<double>(in.step_index) * in.dt_s;
  st = update_angle_tracker(st, in.i_line_ka, in.dt_s, cfg.tracker,
                            cfg.rating);
  st = step_protection(st, std::abs(in.i_line_ka), in.backup_lor, in.ipb_level,
                       t_now, cfg.protection, cfg.rating, events, source_id);
  DeviceCoreOutput out;
  if (st.mode == DeviceMode::Injection) {
    out.injection_kv = compute_injection(cfg.command, in.i_line_ka, st,
                                         cfg.rating);
    st.last_injection_kv = out.injection_kv;
  }
  out.mode = st.mode;
  out.primary = primary_bypass_active(st, t_now);
  return out;
}

std::vector<std::string> validate(const DeploymentConfig& cfg,
                                  const std::string& path) {
  std::vector<std::string> issues;
  if (cfg.devices_per_phase < 1)
    issues.push_back(path + ".devices_per_phase: must be >= 1");
  if (!(cfg.scale_factor >= 1.0))
    issues.push_back(path + ".scale_factor: must be >= 1");
  for (auto& i : validate(cfg.rating, path + ".rating")) issues.push_back(i);
  for (auto& i : validate(cfg.protection, path + ".protection"))
    issues.push_back(i);
  if (!(cfg.tracker.tau_s > 0.0))
    issues.push_back(path + ".tracker.tau_s: must be > 0");
  if (cfg.command.mode == InjectionMode::FixedVoltage &&
      !(cfg.command.v_set_kv >= 0.0))
    issues.push_back(path + ".command.v_set_kv: must be >= 0");
  if (!std::isfinite(cfg.command.x_set_ohm) ||
      !std::isfinite(cfg.command.v_set_kv))
    issues.push_back(path + ".command: set-points must be finite");
  if (cfg.cosim.transport != "none" && cfg.cosim.transport != "child_process")
    issues.push_back(path + ".cosim.transport: must be 'none' or 'child_process'");
  if (cfg.cosim.timeout_ms <= 0)
    issues.push_back(path + ".cosim.timeout_ms: must be > 0");
  return issues;
}

}  // namespace seriescomp

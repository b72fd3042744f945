#include "seriescomp/scenario_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace seriescomp {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Strict object reader: typed getters plus unknown-key detection, collecting
// every problem instead of stopping at the first.
// ---------------------------------------------------------------------------

struct Issues {
  std::vector<std::string> list;
  void add(const std::string& path, const std::string& msg) {
    list.push_back(path + ": " + msg);
  }
};

class Obj {
 public:
  Obj(const json& j, std::string path, Issues& issues)
      : j_(j), path_(std::move(path)), issues_(issues) {
    if (!j_.is_object()) issues_.add(path_, "expected an object");
  }

  ~Obj() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        issues_.add(path_ + "." + it.key(), "unknown key");
  }

  bool has(const std::string& key) {
    return j_.is_object() && j_.contains(key);
  }

  const json* get(const std::string& key, bool required = true) {
    seen_.insert(key);
    if (!j_.is_object()) return nullptr;
    auto it = j_.find(key);
    if (it == j_.end()) {
      if (required) issues_.add(path_ + "." + key, "missing required key");
      return nullptr;
    }
    return &*it;
  }

  double num(const std::string& key, double fallback, bool required = true) {
    const json* v = get(key, required);
    if (v == nullptr) return fallback;
    if (!v->is_number()) {
      issues_.add(path_ + "." + key, "expected a number");
      return fallback;
    }
    return v->get<double>();
  }

  int integer(const std::string& key, int fallback, bool required = true) {
    const json* v = get(key, required);
    if (v == nullptr) return fallback;
    if (!v->is_number_integer()) {
      issues_.add(path_ + "." + key, "expected an integer");
      return fallback;
    }
    return v->get<int>();
  }

  bool flag(const std::string& key, bool fallback, bool required = true) {
    const json* v = get(key, required);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) {
      issues_.add(path_ + "." + key, "expected a boolean");
      return fallback;
    }
    return v->get<bool>();
  }

  std::string str(const std::string& key, const std::string& fallback = {},
                  bool required = true) {
    const json* v = get(key, required);
    if (v == nullptr) return fallback;
    if (!v->is_string()) {
      issues_.add(path_ + "." + key, "expected a string");
      return fallback;
    }
    return v->get<std::string>();
  }

  const std::string& path() const { return path_; }
  Issues& issues() { return issues_; }

 private:
  const json& j_;
  std::string path_;
  Issues& issues_;
  std::set<std::string> seen_;
};

Phasor read_phasor(const json& j, const std::string& path, Issues& issues) {
  Obj o(j, path, issues);
  return Phasor{o.num("re", 0.0), o.num("im", 0.0)};
}

ThreePhaseSet read_tps(const json& j, const std::string& path,
                       Issues& issues) {
  Obj o(j, path, issues);
  ThreePhaseSet s;
  if (const json* a = o.get("a")) s.a = read_phasor(*a, path + ".a", issues);
  if (const json* b = o.get("b")) s.b = read_phasor(*b, path + ".b", issues);
  if (const json* c = o.get("c")) s.c = read_phasor(*c, path + ".c", issues);
  return s;
}

json phasor_json(Phasor p) { return json{{"re", p.real()}, {"im", p.imag()}}; }

json tps_json(const ThreePhaseSet& s) {
  return json{{"a", phasor_json(s.a)},
              {"b", phasor_json(s.b)},
              {"c", phasor_json(s.c)}};
}

std::optional<Phase> phase_from(const std::string& s) {
  if (s == "a") return Phase::A;
  if (s == "b") return Phase::B;
  if (s == "c") return Phase::C;
  return std::nullopt;
}

std::string phase_str(Phase p) { return std::string(1, phase_letter(p)); }

std::string pair_str(Phase a, Phase b) { return phase_str(a) + phase_str(b); }

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

NetworkModel read_network(const json& j, Issues& issues) {
  NetworkModel m;
  Obj o(j, "network", issues);
  m.system_frequency_hz = o.num("system_frequency_hz", 60.0, false);
  if (const json* buses = o.get("buses")) {
    for (std::size_t i = 0; i < buses->size(); ++i) {
      Obj b((*buses)[i], "network.buses[" + std::to_string(i) + "]", issues);
      m.buses.push_back({b.str("id"), b.str("name", "", false),
                         b.num("nominal_kv", 0.0)});
    }
  }
  if (const json* sources = o.get("sources")) {
    for (std::size_t i = 0; i < sources->size(); ++i) {
      const std::string p = "network.sources[" + std::to_string(i) + "]";
      Obj s((*sources)[i], p, issues);
      Source src;
      src.bus = s.str("bus");
      if (const json* emf = s.get("emf_kv"))
        src.emf_kv = read_tps(*emf, p + ".emf_kv", issues);
      if (const json* z = s.get("thevenin_ohm"))
        src.thevenin_ohm = read_phasor(*z, p + ".thevenin_ohm", issues);
      m.sources.push_back(src);
    }
  }
  if (const json* lines = o.get("lines")) {
    for (std::size_t i = 0; i < lines->size(); ++i) {
      const std::string p = "network.lines[" + std::to_string(i) + "]";
      Obj l((*lines)[i], p, issues);
      Line line;
      line.id = l.str("id");
      line.from_bus = l.str("from_bus");
      line.to_bus = l.str("to_bus");
      if (const json* z = l.get("series_ohm"))
        line.series_ohm = read_phasor(*z, p + ".series_ohm", issues);
      line.thermal_limit_a = l.num("thermal_limit_a", 0.0);
      line.breaker_from = l.str("breaker_from");
      line.breaker_to = l.str("breaker_to");
      m.lines.push_back(line);
    }
  }
  if (const json* loads = o.get("loads", false)) {
    for (std::size_t i = 0; i < loads->size(); ++i) {
      const std::string p = "network.loads[" + std::to_string(i) + "]";
      Obj l((*loads)[i], p, issues);
      Load load;
      load.bus = l.str("bus");
      if (const json* z = l.get("shunt_ohm"))
        load.shunt_ohm = read_phasor(*z, p + ".shunt_ohm", issues);
      m.loads.push_back(load);
    }
  }
  return m;
}

json network_json(const NetworkModel& m) {
  json buses = json::array();
  for (const auto& b : m.buses)
    buses.push_back(json{{"id", b.id},
                         {"name", b.name},
                         {"nominal_kv", b.nominal_kv}});
  json sources = json::array();
  for (const auto& s : m.sources)
    sources.push_back(json{{"bus", s.bus},
                           {"emf_kv", tps_json(s.emf_kv)},
                           {"thevenin_ohm", phasor_json(s.thevenin_ohm)}});
  json lines = json::array();
  for (const auto& l : m.lines)
    lines.push_back(json{{"id", l.id},
                         {"from_bus", l.from_bus},
                         {"to_bus", l.to_bus},
                         {"series_ohm", phasor_json(l.series_ohm)},
                         {"thermal_limit_a", l.thermal_limit_a},
                         {"breaker_from", l.breaker_from},
                         {"breaker_to", l.breaker_to}});
  json loads = json::array();
  for (const auto& l : m.loads)
    loads.push_back(
        json{{"bus", l.bus}, {"shunt_ohm", phasor_json(l.shunt_ohm)}});
  return json{{"system_frequency_hz", m.system_frequency_hz},
              {"buses", buses},
              {"sources", sources},
              {"lines", lines},
              {"loads", loads}};
}

// ---------------------------------------------------------------------------
// Deployments
// ---------------------------------------------------------------------------

InjectionCommand read_command(const json& j, const std::string& path,
                              Issues& issues) {
  InjectionCommand cmd;
  Obj o(j, path, issues);
  std::string mode = o.str("mode");
  if (mode == "off")
    cmd.mode = InjectionMode::Off;
  else if (mode == "fixed_reactance")
    cmd.mode = InjectionMode::FixedReactance;
  else if (mode == "fixed_voltage")
    cmd.mode = InjectionMode::FixedVoltage;
  else if (!mode.empty())
    issues.add(path + ".mode", "unknown mode '" + mode + "'");
  cmd.x_set_ohm = o.num("x_set_ohm", 0.0, false);
  cmd.v_set_kv = o.num("v_set_kv", 0.0, false);
  std::string pol = o.str("polarity", "inductive", false);
  if (pol == "inductive")
    cmd.polarity = Polarity::Inductive;
  else if (pol == "capacitive")
    cmd.polarity = Polarity::Capacitive;
  else
    issues.add(path + ".polarity", "unknown polarity '" + pol + "'");
  return cmd;
}

json command_json(const InjectionCommand& cmd) {
  const char* mode = cmd.mode == InjectionMode::Off ? "off"
                     : cmd.mode == InjectionMode::FixedReactance
                         ? "fixed_reactance"
                         : "fixed_voltage";
  return json{{"mode", mode},
              {"x_set_ohm", cmd.x_set_ohm},
              {"v_set_kv", cmd.v_set_kv},
              {"polarity", cmd.polarity == Polarity::Inductive
                               ? "inductive"
                               : "capacitive"}};
}

DeploymentConfig read_deployment(const json& j, const std::string& path,
                                 Issues& issues) {
  DeploymentConfig d;
  Obj o(j, path, issues);
  d.id = o.str("id");
  d.line_id = o.str("line_id");
  d.devices_per_phase = o.integer("devices_per_phase", 1, false);
  d.scale_factor = o.num("scale_factor", 1.0, false);
  d.ipb_enabled = o.flag("ipb_enabled", true, false);
  d.backup_lor_enabled = o.flag("backup_lor_enabled", true, false);
  if (const json* c = o.get("command"))
    d.command = read_command(*c, path + ".command", issues);
  if (const json* r = o.get("rating", false)) {
    Obj ro(*r, path + ".rating", issues);
    d.rating.n_converters = ro.integer("n_converters", 10, false);
    d.rating.s_per_converter_mvar =
        ro.num("s_per_converter_mvar", 1.0, false);
    d.rating.rated_current_ka = ro.num("rated_current_ka", 1.0, false);
    d.rating.i_min_inject_ka = ro.num("i_min_inject_ka", 0.05, false);
  }
  if (const json* p = o.get("protection", false)) {
    Obj po(*p, path + ".protection", issues);
    d.protection.i_oc_ka = po.num("i_oc_ka", 3.8, false);
    d.protection.i_lor_ka = po.num("i_lor_ka", 1.1414, false);
    d.protection.t_bypass_ms = po.num("t_bypass_ms", 1.0, false);
    d.protection.t_oc_lockout_s = po.num("t_oc_lockout_s", 30.0, false);
    d.protection.t_lor_hold_s = po.num("t_lor_hold_s", 1.0, false);
    d.protection.lor_enabled = po.flag("lor_enabled", true, false);
    d.protection.t_low_current_s = po.num("t_low_current_s", 1.0, false);
  }
  if (const json* tr = o.get("tracker", false)) {
    Obj to(*tr, path + ".tracker", issues);
    d.tracker.tau_s = to.num("tau_s", 0.02, false);
  }
  if (const json* w = o.get("backup_lor_wiring", false)) {
    for (std::size_t i = 0; i < w->size(); ++i) {
      Obj wo((*w)[i], path + ".backup_lor_wiring[" + std::to_string(i) + "]",
             issues);
      d.backup_lor_wiring.push_back({wo.str("relay"), wo.str("signal")});
    }
  }
  if (const json* c = o.get("cosim", false)) {
    Obj co(*c, path + ".cosim", issues);
    d.cosim.transport = co.str("transport", "none", false);
    d.cosim.timeout_ms = co.integer("timeout_ms", 1000, false);
  }
  return d;
}

json deployment_json(const DeploymentConfig& d) {
  json wiring = json::array();
  for (const auto& w : d.backup_lor_wiring)
    wiring.push_back(json{{"relay", w.relay_id}, {"signal", w.signal}});
  return json{
      {"id", d.id},
      {"line_id", d.line_id},
      {"devices_per_phase", d.devices_per_phase},
      {"scale_factor", d.scale_factor},
      {"ipb_enabled", d.ipb_enabled},
      {"backup_lor_enabled", d.backup_lor_enabled},
      {"command", command_json(d.command)},
      {"rating",
       json{{"n_converters", d.rating.n_converters},
            {"s_per_converter_mvar", d.rating.s_per_converter_mvar},
            {"rated_current_ka", d.rating.rated_current_ka},
            {"i_min_inject_ka", d.rating.i_min_inject_ka}}},
      {"protection",
       json{{"i_oc_ka", d.protection.i_oc_ka},
            {"i_lor_ka", d.protection.i_lor_ka},
            {"t_bypass_ms", d.protection.t_bypass_ms},
            {"t_oc_lockout_s", d.protection.t_oc_lockout_s},
            {"t_lor_hold_s", d.protection.t_lor_hold_s},
            {"lor_enabled", d.protection.lor_enabled},
            {"t_low_current_s", d.protection.t_low_current_s}}},
      {"tracker", json{{"tau_s", d.tracker.tau_s}}},
      {"backup_lor_wiring", wiring},
      {"cosim", json{{"transport", d.cosim.transport},
                     {"timeout_ms", d.cosim.timeout_ms}}}};
}

// ---------------------------------------------------------------------------
// Relays
// ---------------------------------------------------------------------------

RelaySettings read_relay(const json& j, const std::string& path,
                         Issues& issues) {
  RelaySettings r;
  Obj o(j, path, issues);
  r.id = o.str("id");
  r.line_id = o.str("line_id");
  if (const json* k0 = o.get("k0", false))
    r.k0 = read_phasor(*k0, path + ".k0", issues);
  if (const json* zones = o.get("zones")) {
    for (std::size_t z = 0; z < zones->size(); ++z) {
      const std::string zp = path + ".zones[" + std::to_string(z) + "]";
      Obj zo((*zones)[z], zp, issues);
      ZoneSettings zone;
      if (const json* reach = zo.get("reach_ohm"))
        zone.reach_ohm = read_phasor(*reach, zp + ".reach_ohm", issues);
      zone.delay_s = zo.num("delay_s", 0.0);
      std::string dir = zo.str("direction", "forward", false);
      if (dir == "forward")
        zone.direction = ZoneDirection::Forward;
      else if (dir == "reverse")
        zone.direction = ZoneDirection::Reverse;
      else if (dir == "non_directional")
        zone.direction = ZoneDirection::NonDirectional;
      else
        issues.add(zp + ".direction", "unknown direction '" + dir + "'");
      r.zones.push_back(zone);
    }
  }
  r.breaker_operate_delay_s = o.num("breaker_operate_delay_s", 0.04, false);
  r.reclose_dead_time_s = o.num("reclose_dead_time_s", 0.9, false);
  r.reclaim_time_s = o.num("reclaim_time_s", 1.0, false);
  r.reclose_attempts = o.integer("reclose_attempts", 1, false);
  r.min_current_ka = o.num("min_current_ka", 0.05, false);
  return r;
}

json relay_json(const RelaySettings& r) {
  json zones = json::array();
  for (const auto& z : r.zones)
    zones.push_back(json{
        {"reach_ohm", phasor_json(z.reach_ohm)},
        {"delay_s", z.delay_s},
        {"direction", z.direction == ZoneDirection::Forward ? "forward"
                      : z.direction == ZoneDirection::Reverse
                          ? "reverse"
                          : "non_directional"}});
  return json{{"id", r.id},
              {"line_id", r.line_id},
              {"k0", phasor_json(r.k0)},
              {"zones", zones},
              {"breaker_operate_delay_s", r.breaker_operate_delay_s},
              {"reclose_dead_time_s", r.reclose_dead_time_s},
              {"reclaim_time_s", r.reclaim_time_s},
              {"reclose_attempts", r.reclose_attempts},
              {"min_current_ka", r.min_current_ka}};
}

// ---------------------------------------------------------------------------
// Faults and events
// ---------------------------------------------------------------------------

FaultStage read_stage_kind(const std::string& type, const std::string& phases,
                           const std::string& path, Issues& issues) {
  FaultStage st;
  auto need_one = [&] {
    auto p = phase_from(phases);
    if (!p)
      issues.add(path + ".phases", "expected one of a/b/c");
    else
      st.phase_a = *p;
  };
  auto need_two = [&] {
    if (phases.size() != 2) {
      issues.add(path + ".phases", "expected a two-phase pair like 'ab'");
      return;
    }
    auto p1 = phase_from(phases.substr(0, 1));
    auto p2 = phase_from(phases.substr(1, 1));
    if (!p1 || !p2 || *p1 == *p2)
      issues.add(path + ".phases", "expected two distinct phases");
    else {
      st.phase_a = *p1;
      st.phase_b = *p2;
    }
  };
  if (type == "three_phase")
    st.kind = FaultKind::ThreePhase;
  else if (type == "phase_ground") {
    st.kind = FaultKind::PhaseGround;
    need_one();
  } else if (type == "phase_phase") {
    st.kind = FaultKind::PhasePhase;
    need_two();
  } else if (type == "phase_phase_ground") {
    st.kind = FaultKind::PhasePhaseGround;
    need_two();
  } else if (!type.empty()) {
    issues.add(path + ".type", "unknown fault type '" + type + "'");
  }
  return st;
}

FaultSpec read_fault(const json& j, const std::string& path, Issues& issues) {
  FaultSpec f;
  Obj o(j, path, issues);
  f.line_id = o.str("line_id");
  f.position_p = o.num("position_p", 0.5);
  f.r_fault_ohm = o.num("r_fault_ohm", 0.0);
  f.duration_s = o.num("duration_s", 0.0);
  std::string type = o.str("type");
  if (type == "evolving") {
    f.stages.clear();
    if (const json* stages = o.get("stages")) {
      for (std::size_t s = 0; s < stages->size(); ++s) {
        const std::string sp = path + ".stages[" + std::to_string(s) + "]";
        Obj so((*stages)[s], sp, issues);
        std::string st_type = so.str("type");
        std::string st_phases = so.str("phases", "", false);
        FaultStage st = read_stage_kind(st_type, st_phases, sp, issues);
        st.offset_s = so.num("offset_s", 0.0);
        f.stages.push_back(st);
      }
    }
  } else {
    std::string phases = o.str("phases", "", false);
    f.stages = {read_stage_kind(type, phases, path, issues)};
  }
  return f;
}

json fault_json(const FaultSpec& f) {
  auto stage_fields = [](const FaultStage& st, json& out) {
    switch (st.kind) {
      case FaultKind::ThreePhase:
        out["type"] = "three_phase";
        break;
      case FaultKind::PhaseGround:
        out["type"] = "phase_ground";
        out["phases"] = phase_str(st.phase_a);
        break;
      case FaultKind::PhasePhase:
        out["type"] = "phase_phase";
        out["phases"] = pair_str(st.phase_a, st.phase_b);
        break;
      case FaultKind::PhasePhaseGround:
        out["type"] = "phase_phase_ground";
        out["phases"] = pair_str(st.phase_a, st.phase_b);
        break;
    }
  };
  json out{{"line_id", f.line_id},
           {"position_p", f.position_p},
           {"r_fault_ohm", f.r_fault_ohm},
           {"duration_s", f.duration_s}};
  if (f.stages.size() == 1) {
    stage_fields(f.stages[0], out);
  } else {
    out["type"] = "evolving";
    json stages = json::array();
    for (const auto& st : f.stages) {
      json sj{{"offset_s", st.offset_s}};
      stage_fields(st, sj);
      stages.push_back(sj);
    }
    out["stages"] = stages;
  }
  return out;
}

FeatureFlags read_flags(const json& j, const std::string& path,
                        Issues& issues) {
  FeatureFlags f;
  Obj o(j, path, issues);
  f.devices_enabled = o.flag("devices_enabled", true, false);
  f.oc_enabled = o.flag("oc_enabled", true, false);
  f.lor_enabled = o.flag("lor_enabled", true, false);
  f.ipb_enabled = o.flag("ipb_enabled", true, false);
  f.backup_lor_enabled = o.flag("backup_lor_enabled", true, false);
  return f;
}

json flags_json(const FeatureFlags& f) {
  return json{{"devices_enabled", f.devices_enabled},
              {"oc_enabled", f.oc_enabled},
              {"lor_enabled", f.lor_enabled},
              {"ipb_enabled", f.ipb_enabled},
              {"backup_lor_enabled", f.backup_lor_enabled}};
}

ScheduledEvent read_event(const json& j, const std::string& path,
                          Issues& issues) {
  ScheduledEvent ev;
  Obj o(j, path, issues);
  ev.t_s = o.num("t_s", 0.0);
  std::string kind = o.str("kind");
  if (kind == "apply_fault") {
    ev.kind = EventKind::ApplyFault;
    if (const json* f = o.get("fault"))
      ev.fault = read_fault(*f, path + ".fault", issues);
  } else if (kind == "clear_fault") {
    ev.kind = EventKind::ClearFault;
    ev.target_id = o.str("line");
  } else if (kind == "open_breaker" || kind == "close_breaker") {
    ev.kind = kind == "open_breaker" ? EventKind::OpenBreaker
                                     : EventKind::CloseBreaker;
    ev.target_id = o.str("breaker");
    std::string ph = o.str("phase", "", false);
    if (!ph.empty()) {
      auto p = phase_from(ph);
      if (!p)
        issues.add(path + ".phase", "expected one of a/b/c");
      else
        ev.phase = *p;
    }
  } else if (kind == "set_injection_command") {
    ev.kind = EventKind::SetInjectionCommand;
    ev.target_id = o.str("deployment");
    if (const json* c = o.get("command"))
      ev.command = read_command(*c, path + ".command", issues);
  } else if (kind == "set_feature_flags") {
    ev.kind = EventKind::SetFeatureFlags;
    if (const json* f = o.get("flags"))
      ev.flags = read_flags(*f, path + ".flags", issues);
  } else {
    issues.add(path + ".kind", "unknown event kind '" + kind + "'");
  }
  return ev;
}

json event_json(const ScheduledEvent& ev) {
  json out{{"t_s", ev.t_s}};
  switch (ev.kind) {
    case EventKind::ApplyFault:
      out["kind"] = "apply_fault";
      if (ev.fault) out["fault"] = fault_json(*ev.fault);
      break;
    case EventKind::ClearFault:
      out["kind"] = "clear_fault";
      out["line"] = ev.target_id;
      break;
    case EventKind::OpenBreaker:
    case EventKind::CloseBreaker:
      out["kind"] = ev.kind == EventKind::OpenBreaker ? "open_breaker"
                                                      : "close_breaker";
      out["breaker"] = ev.target_id;
      if (ev.phase) out["phase"] = phase_str(*ev.phase);
      break;
    case EventKind::SetInjectionCommand:
      out["kind"] = "set_injection_command";
      out["deployment"] = ev.target_id;
      if (ev.command) out["command"] = command_json(*ev.command);
      break;
    case EventKind::SetFeatureFlags:
      out["kind"] = "set_feature_flags";
      if (ev.flags) out["flags"] = flags_json(*ev.flags);
      break;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Top level
// ---------------------------------------------------------------------------

ScenarioSpec parse_scenario(const std::string& json_text,
                            const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into line/column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < json_text.size(); ++i) {
      if (json_text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SpecError({origin + ":" + std::to_string(line) + ":" +
                     std::to_string(col) + ": " + e.what()});
  }

  Issues issues;
  ScenarioSpec spec;
  {
    Obj o(doc, origin, issues);
    spec.name = o.str("name", "", false);
    if (const json* n = o.get("network"))
      spec.network = read_network(*n, issues);
    if (const json* deps = o.get("deployments", false))
      for (std::size_t i = 0; i < deps->size(); ++i)
        spec.deployments.push_back(read_deployment(
            (*deps)[i], "deployments[" + std::to_string(i) + "]", issues));
    if (const json* relays = o.get("relays", false))
      for (std::size_t i = 0; i < relays->size(); ++i)
        spec.relays.push_back(read_relay(
            (*relays)[i], "relays[" + std::to_string(i) + "]", issues));
    spec.dt_s = o.num("dt_s", 250e-6, false);
    spec.t_end_s = o.num("t_end_s", 0.0);
    spec.summary_window_s = o.num("summary_window_s", 1.0, false);
    if (const json* mon = o.get("monitored_lines", false)) {
      if (!mon->is_array())
        issues.add("monitored_lines", "expected an array");
      else
        for (const auto& l : *mon)
          spec.monitored_lines.push_back(l.get<std::string>());
    }
    if (const json* f = o.get("feature_flags", false))
      spec.feature_flags = read_flags(*f, "feature_flags", issues);
    if (const json* evs = o.get("events", false))
      for (std::size_t i = 0; i < evs->size(); ++i)
        spec.events.push_back(read_event(
            (*evs)[i], "events[" + std::to_string(i) + "]", issues));
  }
  if (!issues.list.empty()) throw SpecError(std::move(issues.list));

  auto semantic = spec.validate();
  if (!semantic.empty()) throw SpecError(std::move(semantic));
  return spec;
}

ScenarioSpec load_scenario(const std::string& path) {
  return parse_scenario(read_file(path), path);
}

std::string write_scenario(const ScenarioSpec& spec) {
  json deps = json::array();
  for (const auto& d : spec.deployments) deps.push_back(deployment_json(d));
  json relays = json::array();
  for (const auto& r : spec.relays) relays.push_back(relay_json(r));
  json events = json::array();
  for (const auto& e : spec.events) events.push_back(event_json(e));
  json doc{{"name", spec.name},
           {"network", network_json(spec.network)},
           {"deployments", deps},
           {"relays", relays},
           {"dt_s", spec.dt_s},
           {"t_end_s", spec.t_end_s},
           {"summary_window_s", spec.summary_window_s},
           {"monitored_lines", spec.monitored_lines},
           {"feature_flags", flags_json(spec.feature_flags)},
           {"events", events}};
  return doc.dump(2) + "\n";
}

void save_scenario(const ScenarioSpec& spec, const std::string& path) {
  write_file(path, write_scenario(spec));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError({"cannot read file '" + path + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SpecError({"cannot write file '" + path + "'"});
  out << data;
  if (!out) throw SpecError({"write failed for '" + path + "'"});
}

}  // namespace seriescomp

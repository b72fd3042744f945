#include "seriescomp/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "seriescomp/cosim.hpp"

namespace seriescomp {

namespace {

long ceil_steps(double seconds, double dt_s) {
  return std::max(0L, static_cast<long>(std::ceil(seconds / dt_s - 1e-9)));
}

long event_step(double t_s, double dt_s) {
  return std::max(0L, static_cast<long>(std::ceil(t_s / dt_s - 1e-9)));
}

std::string phase_suffix(Phase p) { return std::string(1, phase_letter(p)); }

}  // namespace

FaultShunt fault_stage_shunt(const FaultSpec& fault, const FaultStage& stage) {
  FaultShunt shunt;
  shunt.line_id = fault.line_id;
  shunt.position_p = fault.position_p;
  Phasor r{fault.r_fault_ohm, 0.0};
  switch (stage.kind) {
    case FaultKind::ThreePhase:
      for (int ph = 0; ph < 3; ++ph) shunt.phase_ground_ohm[ph] = r;
      break;
    case FaultKind::PhaseGround:
      shunt.phase_ground_ohm[static_cast<int>(stage.phase_a)] = r;
      break;
    case FaultKind::PhasePhase:
      shunt.phase_pairs.push_back({stage.phase_a, stage.phase_b, r});
      break;
    case FaultKind::PhasePhaseGround:
      shunt.phase_ground_ohm[static_cast<int>(stage.phase_a)] = r;
      shunt.phase_ground_ohm[static_cast<int>(stage.phase_b)] = r;
      break;
  }
  return shunt;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<std::string> ScenarioSpec::validate() const {
  std::vector<std::string> issues = network.validate();

  if (!(dt_s > 0.0)) issues.push_back("dt_s: must be > 0");
  if (!(t_end_s >= 0.0)) issues.push_back("t_end_s: must be >= 0");
  if (!(summary_window_s > 0.0))
    issues.push_back("summary_window_s: must be > 0");

  std::set<std::string> breaker_ids;
  for (const auto& l : network.lines) {
    breaker_ids.insert(l.breaker_from);
    breaker_ids.insert(l.breaker_to);
  }

  for (const auto& id : monitored_lines)
    if (network.find_line(id) == nullptr)
      issues.push_back("monitored_lines: unknown line '" + id + "'");

  std::set<std::string> relay_ids;
  std::map<std::string, int> relay_zone_count;
  for (std::size_t i = 0; i < relays.size(); ++i) {
    const auto& r = relays[i];
    const std::string path = "relays[" + std::to_string(i) + "]";
    if (!relay_ids.insert(r.id).second)
      issues.push_back(path + ": duplicate relay id '" + r.id + "'");
    relay_zone_count[r.id] = static_cast<int>(r.zones.size());
    if (network.find_line(r.line_id) == nullptr)
      issues.push_back(path + ": unknown line '" + r.line_id + "'");
    for (auto& msg : seriescomp::validate(r, path)) issues.push_back(msg);
  }

  std::set<std::string> dep_ids;
  bool any_cosim = false;
  for (std::size_t i = 0; i < deployments.size(); ++i) {
    const auto& d = deployments[i];
    const std::string path = "deployments[" + std::to_string(i) + "]";
    if (!dep_ids.insert(d.id).second)
      issues.push_back(path + ": duplicate deployment id '" + d.id + "'");
    if (network.find_line(d.line_id) == nullptr)
      issues.push_back(path + ": unknown line '" + d.line_id + "'");
    for (auto& msg : seriescomp::validate(d, path)) issues.push_back(msg);
    for (const auto& cond : d.backup_lor_wiring) {
      if (!relay_ids.count(cond.relay_id))
        issues.push_back(path + ".backup_lor_wiring: unknown relay '" +
                         cond.relay_id + "'");
      else if (!is_known_relay_signal(cond.signal,
                                      relay_zone_count[cond.relay_id]))
        issues.push_back(path + ".backup_lor_wiring: unknown signal '" +
                         cond.signal + "'");
    }
    any_cosim = any_cosim || d.cosim.transport == "child_process";
  }

  double prev_t = -1.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    const std::string path = "events[" + std::to_string(i) + "]";
    if (ev.t_s < prev_t)
      issues.push_back(path + ": events must be time-sorted");
    prev_t = ev.t_s;
    if (!(ev.t_s >= 0.0)) issues.push_back(path + ".t_s: must be >= 0");
    switch (ev.kind) {
      case EventKind::ApplyFault: {
        if (!ev.fault) {
          issues.push_back(path + ": apply_fault requires a fault");
          break;
        }
        const auto& f = *ev.fault;
        if (network.find_line(f.line_id) == nullptr)
          issues.push_back(path + ".fault.line_id: unknown line '" +
                           f.line_id + "'");
        if (!(f.position_p >= 0.0 && f.position_p <= 1.0))
          issues.push_back(path + ".fault.position_p: must be in [0, 1]");
        if (!(f.r_fault_ohm >= 0.0))
          issues.push_back(path + ".fault.r_fault_ohm: must be >= 0");
        if (!(f.duration_s > 0.0))
          issues.push_back(path + ".fault.duration_s: must be > 0");
        if (f.stages.empty())
          issues.push_back(path + ".fault.stages: at least one stage");
        for (std::size_t s = 0; s < f.stages.size(); ++s) {
          if (s == 0 && f.stages[0].offset_s != 0.0)
            issues.push_back(path + ".fault.stages[0].offset_s: must be 0");
          if (s > 0 && f.stages[s].offset_s <= f.stages[s - 1].offset_s)
            issues.push_back(path +
                             ".fault.stages: offsets must strictly increase");
        }
        break;
      }
      case EventKind::ClearFault:
        if (network.find_line(ev.target_id) == nullptr)
          issues.push_back(path + ".target_id: unknown line '" +
                           ev.target_id + "'");
        break;
      case EventKind::OpenBreaker:
      case EventKind::CloseBreaker:
        if (!breaker_ids.count(ev.target_id))
          issues.push_back(path + ".target_id: unknown breaker '" +
                           ev.target_id + "'");
        break;
      case EventKind::SetInjectionCommand:
        if (!dep_ids.count(ev.target_id))
          issues.push_back(path + ".target_id: unknown deployment '" +
                           ev.target_id + "'");
        if (!ev.command)
          issues.push_back(path + ": set_injection_command requires a command");
        if (any_cosim)
          issues.push_back(path +
                           ": set_injection_command cannot target runs with "
                           "child_process co-simulation (the remote "
                           "controller reads a static config)");
        break;
      case EventKind::SetFeatureFlags:
        if (!ev.flags)
          issues.push_back(path + ": set_feature_flags requires flags");
        if (any_cosim)
          issues.push_back(path +
                           ": set_feature_flags cannot target runs with "
                           "child_process co-simulation (the remote "
                           "controller reads a static config)");
        break;
    }
  }
  return issues;
}

// ---------------------------------------------------------------------------
// Trace schema
// ---------------------------------------------------------------------------

std::vector<std::string> trace_columns(const ScenarioSpec& spec) {
  std::vector<std::string> cols{"t_s"};
  for (const auto& line : spec.monitored_lines)
    for (Phase p : kPhases) {
      const std::string ph = phase_suffix(p);
      cols.push_back(line + ".i_mag_ka." + ph);
      cols.push_back(line + ".i_ang_rad." + ph);
      cols.push_back(line + ".vinj_mag_kv." + ph);
      cols.push_back(line + ".dev_state." + ph);
    }
  for (const auto& r : spec.relays) {
    for (std::size_t z = 0; z < r.zones.size(); ++z)
      cols.push_back(r.id + ".zone" + std::to_string(z + 1) + "_pickup");
    cols.push_back(r.id + ".trip");
    cols.push_back(r.id + ".recloser");
  }
  for (const auto& l : spec.network.lines) {
    cols.push_back(l.breaker_from + ".position");
    cols.push_back(l.breaker_to + ".position");
  }
  return cols;
}

// ---------------------------------------------------------------------------
// World
// ---------------------------------------------------------------------------

namespace {

struct Action {
  enum class Kind {
    SetBreaker,
    FaultStage,
    FaultClear,
    FaultClearLine,
    SetCommand,
    SetFlags,
  };
  Kind kind = Kind::SetBreaker;
  std::string breaker_id;
  std::optional<Phase> phase;
  bool close = false;
  std::size_t fault_slot = 0;
  std::size_t stage_index = 0;
  std::string line_id;
  std::string deployment_id;
  InjectionCommand command;
  FeatureFlags flags;
  bool log = false;  // scenario-authored actions get an event record
};

struct ActiveFault {
  FaultSpec spec;
  bool on = false;
  FaultShunt shunt;
};

struct DeviceSnap {
  DeviceMode mode = DeviceMode::Monitoring;
  bool primary = false;
};

class World {
 public:
  World(const ScenarioSpec& spec, const RunOptions& opts)
      : spec_(spec), opts_(opts), solver_(spec.network) {}

  RunResult run();

 private:
  struct DepRt {
    DeploymentConfig cfg;
    DeploymentConfig eff;
    DeploymentState st;
    std::array<std::vector<DeviceSnap>, 3> snapshot;
    ThreePhaseSet injection_next;
    std::unique_ptr<ChildProcess> child;
    std::unique_ptr<CosimLink> link;
    bool remote = false;
  };
  struct RelayRt {
    RelaySettings cfg;
    RelayState st;
    const Line* line = nullptr;
    std::array<std::string, 2> breakers;
  };

  void setup();
  void schedule_spec_events();
  /// Returns false when a co-simulation link failure aborts the run; the
  /// abort event is already recorded.
  bool step(long k);
  void apply_actions(long k);
  void apply_breaker(const Action& a, double t);
  void rebuild_fault_shunts();
  void commit_injections();
  void finalize_summary(long executed_steps, bool complete);
  std::array<bool, 3> observed_poles_open(const Line& line) const;

  const ScenarioSpec& spec_;
  RunOptions opts_;
  NetworkSolver solver_;
  NetworkState state_;
  FeatureFlags flags_;
  std::vector<DepRt> deps_;
  std::vector<RelayRt> relays_;
  std::vector<ActiveFault> faults_;
  std::multimap<long, Action> actions_;
  std::map<std::string, ThreePhaseSet> injection_in_effect_;
  std::map<std::string, std::size_t> dep_of_line_;

  Trace trace_;
  std::vector<EventRecord> events_;
  RunSummary summary_;

  // accumulators
  std::map<std::string, double> line_max_i_;
  std::map<std::string, std::array<double, 3>> window_sum_;
  long window_count_ = 0;
  long window_first_step_ = 0;
};

void World::setup() {
  flags_ = spec_.feature_flags;
  for (const auto& cfg : spec_.deployments) {
    DepRt rt;
    rt.cfg = cfg;
    rt.eff = effective_config(cfg, flags_);
    rt.st = make_deployment_state(cfg);
    for (int ph = 0; ph < 3; ++ph)
      rt.snapshot[ph].assign(static_cast<std::size_t>(cfg.devices_per_phase),
                             DeviceSnap{});
    rt.remote = cfg.cosim.transport == "child_process" &&
                flags_.devices_enabled;
    if (rt.remote) {
      if (opts_.spec_file_path.empty())
        throw RunError(
            "deployment '" + cfg.id +
                "' uses child_process co-simulation but no scenario file "
                "path was provided to spawn the device server",
            0.0, 0);
      std::string server = opts_.devserver_path.empty()
                               ? executable_directory() +
                                     "/seriescomp-devserver"
                               : opts_.devserver_path;
      rt.child = std::make_unique<ChildProcess>(std::vector<std::string>{
          server, "--spec", opts_.spec_file_path, "--deployment", cfg.id});
      rt.link = std::make_unique<CosimLink>(rt.child->take_stream(),
                                            cfg.cosim.timeout_ms);
      rt.link->handshake();
      events_.push_back({0.0, "cosim." + cfg.id, "link_up",
                         "device server handshake complete"});
    }
    deps_.push_back(std::move(rt));
    if (!dep_of_line_.count(cfg.line_id))
      dep_of_line_[cfg.line_id] = deps_.size() - 1;
  }
  for (const auto& cfg : spec_.relays) {
    RelayRt rt;
    rt.cfg = cfg;
    rt.st = make_relay_state(cfg);
    rt.line = spec_.network.find_line(cfg.line_id);
    rt.breakers = {rt.line->breaker_from, rt.line->breaker_to};
    relays_.push_back(std::move(rt));
  }
  trace_.columns = trace_columns(spec_);
  window_first_step_ =
      std::max(0L, ceil_steps(spec_.t_end_s - spec_.summary_window_s,
                              spec_.dt_s));
}

void World::schedule_spec_events() {
  for (const auto& ev : spec_.events) {
    long due = event_step(ev.t_s, spec_.dt_s);
    switch (ev.kind) {
      case EventKind::ApplyFault: {
        std::size_t slot = faults_.size();
        faults_.push_back({*ev.fault, false, FaultShunt{}});
        const auto& f = *ev.fault;
        for (std::size_t s = 0; s < f.stages.size(); ++s) {
          Action a;
          a.kind = Action::Kind::FaultStage;
          a.fault_slot = slot;
          a.stage_index = s;
          a.log = true;
          actions_.insert({due + ceil_steps(f.stages[s].offset_s, spec_.dt_s),
                           a});
        }
        Action clear;
        clear.kind = Action::Kind::FaultClear;
        clear.fault_slot = slot;
        clear.log = true;
        actions_.insert({due + ceil_steps(f.duration_s, spec_.dt_s), clear});
        break;
      }
      case EventKind::ClearFault: {
        Action a;
        a.kind = Action::Kind::FaultClearLine;
        a.line_id = ev.target_id;
        a.log = true;
        actions_.insert({due, a});
        break;
      }
      case EventKind::OpenBreaker:
      case EventKind::CloseBreaker: {
        Action a;
        a.kind = Action::Kind::SetBreaker;
        a.breaker_id = ev.target_id;
        a.phase = ev.phase;
        a.close = ev.kind == EventKind::CloseBreaker;
        a.log = true;
        actions_.insert({due, a});
        break;
      }
      case EventKind::SetInjectionCommand: {
        Action a;
        a.kind = Action::Kind::SetCommand;
        a.deployment_id = ev.target_id;
        a.command = *ev.command;
        a.log = true;
        actions_.insert({due, a});
        break;
      }
      case EventKind::SetFeatureFlags: {
        Action a;
        a.kind = Action::Kind::SetFlags;
        a.flags = *ev.flags;
        a.log = true;
        actions_.insert({due, a});
        break;
      }
    }
  }
}

std::array<bool, 3> World::observed_poles_open(const Line& line) const {
  std::array<bool, 3> open{};
  for (Phase p : kPhases)
    open[static_cast<int>(p)] =
        !(state_.breaker_phase_closed(line.breaker_from, p) &&
          state_.breaker_phase_closed(line.breaker_to, p));
  return open;
}

void World::rebuild_fault_shunts() {
  state_.fault_shunts.clear();
  for (const auto& f : faults_)
    if (f.on) state_.fault_shunts.push_back(f.shunt);
}

void World::commit_injections() {
  injection_in_effect_.clear();
  state_.series_injections_kv.clear();
  for (const auto& rt : deps_) {
    auto& total = injection_in_effect_[rt.cfg.line_id];
    for (Phase p : kPhases) total[p] += rt.injection_next[p];
  }
  for (const auto& [line, v3] : injection_in_effect_)
    for (Phase p : kPhases)
      if (v3[p] != Phasor{0.0, 0.0})
        state_.series_injections_kv[{line, static_cast<int>(p)}] = v3[p];
}

void World::apply_breaker(const Action& a, double t) {
  PhaseFlags flags;  // default closed
  auto it = state_.breaker_closed.find(a.breaker_id);
  if (it != state_.breaker_closed.end()) flags = it->second;
  PhaseFlags before = flags;
  if (a.phase)
    flags[*a.phase] = a.close;
  else
    flags = PhaseFlags{a.close, a.close, a.close};
  if (!(flags == before)) {
    state_.breaker_closed[a.breaker_id] = flags;
    events_.push_back({t, a.breaker_id,
                       a.close ? "breaker_close" : "breaker_open",
                       a.phase ? "pole " + phase_suffix(*a.phase)
                               : "three-pole"});
  }
}

void World::apply_actions(long k) {
  auto range = actions_.equal_range(k);
  const double t = static_cast<double>(k) * spec_.dt_s;
  for (auto it = range.first; it != range.second; ++it) {
    const Action& a = it->second;
    switch (a.kind) {
      case Action::Kind::SetBreaker:
        apply_breaker(a, t);
        break;
      case Action::Kind::FaultStage: {
        auto& f = faults_[a.fault_slot];
        f.shunt = fault_stage_shunt(f.spec, f.spec.stages[a.stage_index]);
        f.on = true;
        rebuild_fault_shunts();
        events_.push_back({t, "scenario",
                           a.stage_index == 0 ? "apply_fault" : "fault_stage",
                           f.spec.line_id + " p=" +
                               std::to_string(f.spec.position_p)});
        break;
      }
      case Action::Kind::FaultClear: {
        auto& f = faults_[a.fault_slot];
        if (f.on) {
          f.on = false;
          rebuild_fault_shunts();
          events_.push_back({t, "scenario", "clear_fault", f.spec.line_id});
        }
        break;
      }
      case Action::Kind::FaultClearLine: {
        bool any = false;
        for (auto& f : faults_)
          if (f.on && f.spec.line_id == a.line_id) {
            f.on = false;
            any = true;
          }
        if (any) {
          rebuild_fault_shunts();
          events_.push_back({t, "scenario", "clear_fault", a.line_id});
        }
        break;
      }
      case Action::Kind::SetCommand:
        for (auto& rt : deps_)
          if (rt.cfg.id == a.deployment_id) {
            rt.cfg.command = a.command;
            rt.eff = effective_config(rt.cfg, flags_);
          }
        events_.push_back({t, "scenario", "set_injection_command",
                           a.deployment_id});
        break;
      case Action::Kind::SetFlags:
        flags_ = a.flags;
        for (auto& rt : deps_) rt.eff = effective_config(rt.cfg, flags_);
        events_.push_back({t, "scenario", "set_feature_flags", ""});
        break;
    }
  }
  actions_.erase(range.first, range.second);
}

bool World::step(long k) {
  const double t = static_cast<double>(k) * spec_.dt_s;
  Solution sol;
  try {
    sol = solver_.solve_step(state_);
  } catch (const SolverError& e) {
    events_.push_back({t, "scenario", "solver_failure", e.what()});
    throw RunError(e.what(), t, k);
  }
  summary_.max_kcl_residual =
      std::max(summary_.max_kcl_residual, sol.kcl_residual_max);

  // Relays first: pickups, trips, breaker commands, published signals.
  SignalMap signals;
  for (auto& rt : relays_) {
    const ThreePhaseSet v = sol.bus_voltages_kv.at(rt.line->from_bus);
    const ThreePhaseSet i = branch_current(sol, rt.line->id);
    auto loops = measure_loops(v, i, rt.cfg.k0, rt.cfg.min_current_ka);
    auto poles = observed_poles_open(*rt.line);
    auto res = step_relay(rt.st, loops, poles, t, rt.cfg, rt.breakers);
    for (const auto& e : res.events) events_.push_back({t, e.source, e.name, e.detail});
    for (const auto& cmd : res.commands) {
      Action a;
      a.kind = Action::Kind::SetBreaker;
      a.breaker_id = cmd.breaker_id;
      a.close = cmd.close;
      long delay = cmd.close
                       ? 0
                       : ceil_steps(rt.cfg.breaker_operate_delay_s, spec_.dt_s);
      actions_.insert({k + delay, a});
    }
    signals[rt.cfg.id] = rt.st.signals;
  }

  // Deployments and devices on the frozen samples.
  if (flags_.devices_enabled) {
    for (auto& rt : deps_) {
      const ThreePhaseSet i3 = branch_current(sol, rt.cfg.line_id);
      const bool backup = backup_lor_evaluate(signals, rt.eff);

      std::array<bool, 3> prev_primary{false, false, false};
      for (int ph = 0; ph < 3; ++ph)
        for (const auto& snap : rt.snapshot[ph])
          if (snap.primary) prev_primary[ph] = true;
      std::array<bool, 3> level{false, false, false};
      if (rt.eff.ipb_enabled)
        for (int ph = 0; ph < 3; ++ph)
          for (int other = 0; other < 3; ++other)
            if (other != ph && prev_primary[other]) level[ph] = true;

      std::array<RemotePhaseReply, 3> remote_replies;
      if (rt.remote) {
        try {
          remote_replies = rt.link->lockstep_exchange(
              k, spec_.dt_s, {i3.a, i3.b, i3.c}, level, backup);
        } catch (const LinkError& e) {
          bool bye = rt.link->state().phase == LinkState::Phase::Closed;
          events_.push_back({t, "cosim." + rt.cfg.id,
                             bye ? "link_bye" : "link_fault", e.what()});
          return false;
        }
      }

      for (int ph = 0; ph < 3; ++ph) {
        const Phase phase = static_cast<Phase>(ph);
        auto& devs = rt.st.devices[ph];
        std::vector<Phasor> contributions;
        contributions.reserve(devs.size());
        for (std::size_t d = 0; d < devs.size(); ++d) {
          if (rt.remote && d == 0) {
            const auto& rr = remote_replies[ph];
            if (rr.mode != rt.snapshot[ph][0].mode) {
              const char* name = nullptr;
              switch (rr.mode) {
                case DeviceMode::OcBypass: name = "oc_bypass_enter"; break;
                case DeviceMode::LorBypass: name = "lor_enter"; break;
                case DeviceMode::Monitoring: name = "monitoring_enter"; break;
                case DeviceMode::Injection:
                  name = rt.snapshot[ph][0].mode == DeviceMode::OcBypass
                             ? "oc_bypass_exit"
                             : (rt.snapshot[ph][0].mode == DeviceMode::LorBypass
                                    ? "lor_exit"
                                    : "injection_start");
                  break;
              }
              events_.push_back(
                  {t, rt.cfg.id + "." + phase_suffix(phase) + "0", name,
                   "remote"});
            }
            contributions.push_back(rr.injection_kv);
            rt.snapshot[ph][0] = {rr.mode, rr.primary};
            continue;
          }
          DeviceCoreInput in;
          in.i_line_ka = i3[phase];
          in.backup_lor = backup;
          in.ipb_level = level[ph];
          in.step_index = k;
          in.dt_s = spec_.dt_s;
          std::vector<DeviceEvent> dev_events;
          auto out = step_device_core(
              devs[d], in, rt.eff, &dev_events,
              rt.cfg.id + "." + phase_suffix(phase) + std::to_string(d));
          for (const auto& e : dev_events)
            events_.push_back({e.t_s, e.source, e.name, e.detail});
          contributions.push_back(out.injection_kv);
          rt.snapshot[ph][d] = {out.mode, out.primary};
        }
        // Devices of a phase are clones; a sum of identical values is taken
        // as count * value so replication count and scale factor commute.
        bool all_equal = true;
        for (const auto& c : contributions)
          if (c != contributions.front()) all_equal = false;
        Phasor sum{0.0, 0.0};
        if (all_equal)
          sum = contributions.front() *
                static_cast<double>(contributions.size());
        else
          for (const auto& c : contributions) sum += c;
        rt.injection_next[phase] = sum * rt.cfg.scale_factor;
      }
    }
  } else {
    for (auto& rt : deps_) rt.injection_next = ThreePhaseSet{};
  }

  // Trace row reflects this step's electrical state and post-logic flags.
  std::vector<double> row;
  row.reserve(trace_.columns.size());
  row.push_back(t);
  for (const auto& line_id : spec_.monitored_lines) {
    const ThreePhaseSet i3 = branch_current(sol, line_id);
    auto inj_it = injection_in_effect_.find(line_id);
    auto dep_it = dep_of_line_.find(line_id);
    for (Phase p : kPhases) {
      row.push_back(std::abs(i3[p]));
      row.push_back(std::arg(i3[p]));
      row.push_back(inj_it == injection_in_effect_.end()
                        ? 0.0
                        : std::abs(inj_it->second[p]));
      int code = 0;
      if (dep_it != dep_of_line_.end())
        code = device_mode_code(
            deps_[dep_it->second].snapshot[static_cast<int>(p)][0].mode);
      row.push_back(static_cast<double>(code));
    }
  }
  for (const auto& rt : relays_) {
    for (std::size_t z = 0; z < rt.cfg.zones.size(); ++z)
      row.push_back(rt.st.signals.zone_pickup[z] ? 1.0 : 0.0);
    row.push_back(rt.st.signals.trip ? 1.0 : 0.0);
    row.push_back(static_cast<double>(static_cast<int>(rt.st.reclose)));
  }
  for (const auto& l : spec_.network.lines) {
    for (const auto& br : {l.breaker_from, l.breaker_to}) {
      int mask = 0;
      for (Phase p : kPhases)
        if (state_.breaker_phase_closed(br, p))
          mask |= 1 << static_cast<int>(p);
      row.push_back(static_cast<double>(mask));
    }
  }
  trace_.rows.push_back(std::move(row));

  // Summary accumulators.
  for (const auto& line_id : spec_.monitored_lines) {
    const ThreePhaseSet i3 = branch_current(sol, line_id);
    double mx = std::max({std::abs(i3.a), std::abs(i3.b), std::abs(i3.c)});
    auto& cur = line_max_i_[line_id];
    cur = std::max(cur, mx);
    if (k >= window_first_step_) {
      auto& sums = window_sum_[line_id];
      for (Phase p : kPhases) sums[static_cast<int>(p)] += std::abs(i3[p]);
    }
  }
  if (k >= window_first_step_ &&
      spec_.monitored_lines.size() == window_sum_.size())
    ++window_count_;
  for (const auto& rt : deps_)
    for (int ph = 0; ph < 3; ++ph) {
      const std::string key =
          rt.cfg.id + "." + phase_suffix(static_cast<Phase>(ph));
      summary_.device_time_in_state[key]
                                   [device_mode_name(rt.snapshot[ph][0].mode)] +=
          spec_.dt_s;
    }

  // Commit this step's decisions; they take electrical effect next step.
  commit_injections();
  apply_actions(k);
  return true;
}

void World::finalize_summary(long executed_steps, bool complete) {
  summary_.scenario_name = spec_.name;
  summary_.steps = executed_steps;
  summary_.dt_s = spec_.dt_s;
  summary_.t_end_s = spec_.t_end_s;
  summary_.complete = complete;
  for (const auto& line_id : spec_.monitored_lines) {
    const Line* line = spec_.network.find_line(line_id);
    LineSummary ls;
    ls.thermal_limit_ka = line->thermal_limit_a / 1000.0;
    ls.max_i_ka = line_max_i_[line_id];
    if (window_count_ > 0) {
      const auto& sums = window_sum_[line_id];
      double mean = 0.0;
      for (int ph = 0; ph < 3; ++ph)
        mean = std::max(mean, sums[ph] / static_cast<double>(window_count_));
      ls.final_window_mean_i_ka = mean;
    }
    ls.overload = ls.final_window_mean_i_ka > ls.thermal_limit_ka;
    summary_.overload_any = summary_.overload_any || ls.overload;
    summary_.lines[line_id] = ls;
  }
  std::set<std::string> relay_ids;
  for (const auto& rt : relays_) relay_ids.insert(rt.cfg.id);
  for (const auto& ev : events_)
    if (relay_ids.count(ev.source)) summary_.relay_timeline.push_back(ev);
}

RunResult World::run() {
  auto issues = spec_.validate();
  if (!issues.empty()) throw SpecError(std::move(issues));
  setup();
  schedule_spec_events();

  const long n_steps = ceil_steps(spec_.t_end_s, spec_.dt_s);
  long executed = 0;
  bool complete = true;
  try {
    for (long k = 0; k < n_steps; ++k) {
      if (!step(k)) {
        complete = false;
        break;
      }
      ++executed;
    }
  } catch (const RunError&) {
    for (auto& rt : deps_)
      if (rt.link) rt.link->bye();
    throw;
  }
  for (auto& rt : deps_)
    if (rt.link) {
      rt.link->bye();
      rt.child->wait();
    }
  finalize_summary(executed, complete);
  return RunResult{std::move(trace_), std::move(events_),
                   std::move(summary_)};
}

}  // namespace

RunResult run_scenario(const ScenarioSpec& spec, const RunOptions& opts) {
  World world(spec, opts);
  return world.run();
}

}  // namespace seriescomp

#include "seriescomp/calibrate.hpp"

#include <cmath>

#include <json.hpp>

#include "seriescomp/scenario_io.hpp"

namespace seriescomp {

using nlohmann::json;

namespace {

// Fixture constants. Per-phase EMF magnitude of a 220 kV system and the
// series chain Termoguajira -> Termocol -> Santa Marta -> equivalent.
const double kEmfKv = 220.0 / std::sqrt(3.0);
const Phasor kZthTg{1.0, 6.0};
const Phasor kZthEq{1.0, 6.0};
const Phasor kZSmGj{2.0, 25.0};
const Phasor kZSmTc{0.56, 7.0};
const Phasor kZTgTc{0.72, 9.0};
const Phasor kZSmEq{0.6, 6.0};

const double kXSetPerDeviceOhm = 4.0;
const int kSmTcPhysicalPerPhase = 5;  // 15 units, 5 per phase
const int kSmGjPhysicalPerPhase = 3;  // 9 units, 3 per phase

const double kZone2DelayS = 0.2;

double smtc_line_current_ka(const NetworkModel& model,
                            const NetworkState& state, int fixed_point_iters,
                            double x_per_phase_ohm) {
  NetworkSolver solver(model);
  NetworkState st = state;
  Solution sol = solver.solve_step(st);
  for (int it = 0; it < fixed_point_iters; ++it) {
    auto i3 = branch_current(sol, kLineSmTc);
    for (Phase p : kPhases)
      st.series_injections_kv[{kLineSmTc, static_cast<int>(p)}] =
          Phasor{0.0, x_per_phase_ohm} * i3[p];
    sol = solver.solve_step(st);
  }
  return std::abs(branch_current(sol, kLineSmTc).a);
}

}  // namespace

double smtc_deployment_reactance_ohm() {
  return kSmTcPhysicalPerPhase * kXSetPerDeviceOhm;
}

NetworkModel gcm_base_topology(double delta_rad) {
  NetworkModel m;
  m.system_frequency_hz = 60.0;
  m.buses = {{kBusSantaMarta, "Santa Marta 220 kV", 220.0},
             {kBusTermoguajira, "Termoguajira 220 kV", 220.0},
             {kBusTermocol, "Termocol 220 kV", 220.0},
             {kBusEquivalent, "GCM equivalent", 220.0}};
  m.sources = {{kBusTermoguajira, balanced_set(kEmfKv, delta_rad), kZthTg},
               {kBusEquivalent, balanced_set(kEmfKv, 0.0), kZthEq}};
  m.lines = {
      {kLineSmGj, kBusSantaMarta, kBusTermoguajira, kZSmGj, 1500.0,
       std::string(kLineSmGj) + ".br1", std::string(kLineSmGj) + ".br2"},
      {kLineSmTc, kBusSantaMarta, kBusTermocol, kZSmTc, 787.0,
       std::string(kLineSmTc) + ".br1", std::string(kLineSmTc) + ".br2"},
      {kLineTgTc, kBusTermoguajira, kBusTermocol, kZTgTc, 1200.0,
       std::string(kLineTgTc) + ".br1", std::string(kLineTgTc) + ".br2"},
      {kLineSmEq, kBusSantaMarta, kBusEquivalent, kZSmEq, 3000.0,
       std::string(kLineSmEq) + ".br1", std::string(kLineSmEq) + ".br2"},
  };
  return m;
}

double chain_current_ka(double delta_rad, double x_extra_ohm) {
  Phasor chain = kZthTg + kZTgTc + kZSmTc + kZSmEq + kZthEq +
                 Phasor{0.0, x_extra_ohm};
  double emf_diff = 2.0 * kEmfKv * std::sin(delta_rad / 2.0);
  return emf_diff / std::abs(chain);
}

std::vector<std::string> validate(const CalibrationTargets& t) {
  std::vector<std::string> issues;
  if (!(t.postcontingency_lo_ka < t.postcontingency_hi_ka))
    issues.push_back("targets: post-contingency band must be a proper range");
  if (!(t.mitigated_max_ka < t.thermal_limit_ka))
    issues.push_back("targets: mitigated current must sit below the thermal "
                     "limit");
  if (!(t.thermal_limit_ka < t.postcontingency_lo_ka))
    issues.push_back("targets: the unmitigated band must exceed the thermal "
                     "limit");
  for (const auto& [line, band] : t.prefault_bands_ka)
    if (!(band.first <= band.second))
      issues.push_back("targets: pre-fault band for '" + line +
                       "' is inverted");
  return issues;
}

CalibrationTargets load_targets(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SpecError({path + ": " + e.what()});
  }
  CalibrationTargets t;
  std::vector<std::string> issues;
  if (!doc.is_object()) {
    throw SpecError({path + ": expected an object"});
  }
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() == "postcontingency_band_ka") {
      auto arr = it.value();
      if (!arr.is_array() || arr.size() != 2)
        issues.push_back("postcontingency_band_ka: expected [lo, hi]");
      else {
        t.postcontingency_lo_ka = arr[0].get<double>();
        t.postcontingency_hi_ka = arr[1].get<double>();
      }
    } else if (it.key() == "mitigated_max_ka") {
      t.mitigated_max_ka = it.value().get<double>();
    } else if (it.key() == "thermal_limit_ka") {
      t.thermal_limit_ka = it.value().get<double>();
    } else if (it.key() == "prefault_bands_ka") {
      for (auto b = it.value().begin(); b != it.value().end(); ++b) {
        auto arr = b.value();
        if (!arr.is_array() || arr.size() != 2)
          issues.push_back("prefault_bands_ka." + b.key() +
                           ": expected [lo, hi]");
        else
          t.prefault_bands_ka[b.key()] = {arr[0].get<double>(),
                                          arr[1].get<double>()};
      }
    } else {
      issues.push_back(it.key() + ": unknown key");
    }
  }
  for (auto& i : validate(t)) issues.push_back(i);
  if (!issues.empty()) throw SpecError(std::move(issues));
  return t;
}

std::string write_targets(const CalibrationTargets& t) {
  json bands = json::object();
  for (const auto& [line, band] : t.prefault_bands_ka)
    bands[line] = json::array({band.first, band.second});
  json doc{{"postcontingency_band_ka",
            json::array({t.postcontingency_lo_ka, t.postcontingency_hi_ka})},
           {"mitigated_max_ka", t.mitigated_max_ka},
           {"thermal_limit_ka", t.thermal_limit_ka},
           {"prefault_bands_ka", bands}};
  return doc.dump(2) + "\n";
}

CalibrationResult calibrate(const CalibrationTargets& targets) {
  auto issues = validate(targets);
  if (!issues.empty()) throw SpecError(std::move(issues));

  const double target =
      0.5 * (targets.postcontingency_lo_ka + targets.postcontingency_hi_ka);
  const double delta_max = M_PI / 2.0;
  const double reachable_hi = chain_current_ka(delta_max, 0.0);
  if (!(target > 0.0))
    throw CalibrationError(
        "zero transfer target requires zero angle spread; nothing to "
        "calibrate",
        0.0, reachable_hi);
  if (target > reachable_hi)
    throw CalibrationError(
        "post-contingency target " + std::to_string(target) +
            " kA exceeds the achievable range of this topology",
        0.0, reachable_hi);

  // Bisection on the closed-form chain current; monotone in the spread.
  double lo = 0.0, hi = delta_max;
  while (hi - lo > 1e-13) {
    double mid = 0.5 * (lo + hi);
    if (chain_current_ka(mid, 0.0) < target)
      lo = mid;
    else
      hi = mid;
  }
  const double delta = 0.5 * (lo + hi);

  CalibrationResult result;
  result.delta_rad = delta;
  result.network = gcm_base_topology(delta);

  // Confirmation on the solver. Post-contingency: Santa Marta - Guajira out.
  NetworkState n1;
  n1.breaker_closed[std::string(kLineSmGj) + ".br1"] =
      PhaseFlags{false, false, false};
  n1.breaker_closed[std::string(kLineSmGj) + ".br2"] =
      PhaseFlags{false, false, false};
  result.postn1_smtc_ka = smtc_line_current_ka(result.network, n1, 0, 0.0);
  result.mitigated_smtc_ka = smtc_line_current_ka(
      result.network, n1, 200, smtc_deployment_reactance_ohm());

  NetworkState prefault;
  {
    NetworkSolver solver(result.network);
    Solution sol = solver.solve_step(prefault);
    result.prefault_smtc_ka = std::abs(branch_current(sol, kLineSmTc).a);
    result.prefault_smgj_ka = std::abs(branch_current(sol, kLineSmGj).a);
  }

  if (result.postn1_smtc_ka < targets.postcontingency_lo_ka ||
      result.postn1_smtc_ka > targets.postcontingency_hi_ka)
    throw CalibrationError(
        "solver confirmation missed the post-contingency band: " +
            std::to_string(result.postn1_smtc_ka) + " kA",
        0.0, reachable_hi);
  if (result.mitigated_smtc_ka >= targets.mitigated_max_ka)
    throw CalibrationError(
        "configured reactance set-point cannot reach the mitigated target: " +
            std::to_string(result.mitigated_smtc_ka) + " kA",
        result.mitigated_smtc_ka, result.postn1_smtc_ka);
  for (const auto& [line, band] : targets.prefault_bands_ka) {
    double i = line == kLineSmTc   ? result.prefault_smtc_ka
               : line == kLineSmGj ? result.prefault_smgj_ka
                                   : -1.0;
    if (i < 0.0) continue;
    if (i < band.first || i > band.second)
      throw CalibrationError("pre-fault current on " + line + " (" +
                                 std::to_string(i) +
                                 " kA) falls outside the target band",
                             band.first, band.second);
  }
  return result;
}

ScenarioSpec gcm_case_spec(int case_number, const NetworkModel& network) {
  ScenarioSpec spec;
  spec.name = "gcm-case" + std::to_string(case_number);
  spec.network = network;
  spec.dt_s = 250e-6;
  spec.t_end_s = 40.0;
  spec.summary_window_s = 1.0;
  spec.monitored_lines = {kLineSmTc, kLineSmGj};

  auto make_relay = [&](const std::string& id, const char* line_id) {
    const Line* line = network.find_line(line_id);
    RelaySettings r;
    r.id = id;
    r.line_id = line_id;
    r.k0 = Phasor{0.0, 0.0};
    r.zones = {{line->series_ohm * 0.8, 0.0, ZoneDirection::Forward},
               {line->series_ohm * 1.2, kZone2DelayS, ZoneDirection::Forward}};
    r.breaker_operate_delay_s = 0.04;
    r.reclose_dead_time_s = 0.9;
    r.reclaim_time_s = 1.0;
    r.reclose_attempts = 1;
    r.min_current_ka = 0.05;
    return r;
  };
  spec.relays = {make_relay("relay-smgj", kLineSmGj),
                 make_relay("relay-smtc", kLineSmTc)};

  auto make_deployment = [&](const std::string& id, const char* line_id,
                             double scale, const std::string& relay_id) {
    DeploymentConfig d;
    d.id = id;
    d.line_id = line_id;
    d.devices_per_phase = 1;
    d.scale_factor = scale;
    d.command = {InjectionMode::FixedReactance, kXSetPerDeviceOhm, 0.0,
                 Polarity::Inductive};
    d.rating = DeviceRating{};
    d.protection = DeviceProtectionSettings{};
    d.tracker = AngleTrackerSettings{0.02};
    d.backup_lor_wiring = {{relay_id, "zone1_pickup"},
                           {relay_id, "zone2_pickup"},
                           {relay_id, "trip"},
                           {relay_id, "pole_discordance"}};
    return d;
  };
  spec.deployments = {
      make_deployment("dep-smtc", kLineSmTc,
                      static_cast<double>(kSmTcPhysicalPerPhase),
                      "relay-smtc"),
      make_deployment("dep-smgj", kLineSmGj,
                      static_cast<double>(kSmGjPhysicalPerPhase),
                      "relay-smgj")};

  switch (case_number) {
    case 1:
      spec.feature_flags = {false, true, true, true, true};
      break;
    case 2:
      spec.feature_flags = {true, false, false, false, false};
      for (auto& d : spec.deployments) {
        d.tracker.tau_s = 0.5;
        d.command = {InjectionMode::FixedVoltage, 0.0, 2.0,
                     Polarity::Inductive};
      }
      break;
    case 3:
      spec.feature_flags = {true, true, true, true, true};
      break;
    default:
      throw SpecError({"gcm_case_spec: case must be 1, 2 or 3"});
  }

  ScheduledEvent fault;
  fault.t_s = 1.0;
  fault.kind = EventKind::ApplyFault;
  FaultSpec f;
  f.line_id = kLineSmGj;
  f.position_p = 0.5;
  f.r_fault_ohm = 5.0;
  f.duration_s = 1.5;
  f.stages = {FaultStage{0.0, FaultKind::ThreePhase, Phase::A, Phase::B}};
  fault.fault = f;
  spec.events = {fault};
  return spec;
}

}  // namespace seriescomp

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "seriescomp/deployment.hpp"

using namespace seriescomp;

namespace {

DeploymentConfig base_config(int devices_per_phase, double scale) {
  DeploymentConfig cfg;
  cfg.id = "dep";
  cfg.line_id = "L1";
  cfg.devices_per_phase = devices_per_phase;
  cfg.scale_factor = scale;
  cfg.command = {InjectionMode::FixedVoltage, 0.0, 2.0, Polarity::Inductive};
  return cfg;
}

DeploymentState all_injecting(const DeploymentConfig& cfg) {
  auto st = make_deployment_state(cfg);
  for (int ph = 0; ph < 3; ++ph)
    for (auto& d : st.devices[ph]) {
      d.mode = DeviceMode::Injection;
      d.vsl_closed = false;
      d.angle_tracker_rad = 0.0;
    }
  return st;
}

const ThreePhaseSet kHalfKiloamp = balanced_set(0.5, 0.0);

}  // namespace

TEST_CASE("aggregate: bypassed devices contribute nothing") {
  auto cfg = base_config(3, 1.0);
  auto st = make_deployment_state(cfg);
  for (int ph = 0; ph < 3; ++ph)
    for (auto& d : st.devices[ph]) d.mode = DeviceMode::OcBypass;
  auto v = aggregate_injection(cfg, st, kHalfKiloamp);
  for (Phase p : kPhases) CHECK(v[p] == Phasor{0.0, 0.0});
}

TEST_CASE("aggregate: three devices of 2 kV sum to 6 kV") {
  auto cfg = base_config(3, 1.0);
  auto st = all_injecting(cfg);
  auto v = aggregate_injection(cfg, st, kHalfKiloamp);
  CHECK(std::abs(v.a) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(std::arg(v.a) == doctest::Approx(M_PI / 2.0).epsilon(1e-12));
}

TEST_CASE("aggregate: one device scaled by five equals 10 kV") {
  auto cfg = base_config(1, 5.0);
  auto st = all_injecting(cfg);
  auto v = aggregate_injection(cfg, st, kHalfKiloamp);
  CHECK(std::abs(v.a) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("scaling equivalence is exact, not approximate") {
  auto cfg_n = base_config(5, 1.0);
  auto cfg_1 = base_config(1, 5.0);
  // Both fixed-voltage and fixed-reactance commands, odd angles included.
  for (auto cmd : {InjectionCommand{InjectionMode::FixedVoltage, 0.0, 1.7,
                                    Polarity::Inductive},
                   InjectionCommand{InjectionMode::FixedReactance, 7.3, 0.0,
                                    Polarity::Inductive}}) {
    cfg_n.command = cmd;
    cfg_1.command = cmd;
    auto st_n = all_injecting(cfg_n);
    auto st_1 = all_injecting(cfg_1);
    ThreePhaseSet i = {from_polar(0.37, 0.21), from_polar(0.91, -1.9),
                       from_polar(1.44, 2.6)};
    auto vn = aggregate_injection(cfg_n, st_n, i);
    auto v1 = aggregate_injection(cfg_1, st_1, i);
    for (Phase p : kPhases) CHECK(vn[p] == v1[p]);
  }
}

TEST_CASE("ipb: quiet deployment issues no commands") {
  auto cfg = base_config(1, 1.0);
  auto st = all_injecting(cfg);
  auto cmd = ipb_coordinate(st, 0.0);
  CHECK(!cmd[0]);
  CHECK(!cmd[1]);
  CHECK(!cmd[2]);
}

TEST_CASE("ipb: phase B in OcBypass commands A and C") {
  auto cfg = base_config(1, 1.0);
  auto st = all_injecting(cfg);
  st.devices[1][0].mode = DeviceMode::OcBypass;
  auto cmd = ipb_coordinate(st, 0.0);
  CHECK(cmd[0]);
  CHECK(!cmd[1]);
  CHECK(cmd[2]);
}

TEST_CASE("ipb: with A and B bypassed only C gets a command") {
  auto cfg = base_config(1, 1.0);
  auto st = all_injecting(cfg);
  st.devices[0][0].mode = DeviceMode::OcBypass;
  st.devices[1][0].mode = DeviceMode::OcBypass;
  auto cmd = ipb_coordinate(st, 0.0);
  CHECK(!cmd[0]);
  CHECK(!cmd[1]);
  CHECK(cmd[2]);
}

TEST_CASE("ipb: full grid of bypass combinations") {
  auto cfg = base_config(1, 1.0);
  for (int mask = 0; mask < 8; ++mask) {
    auto st = all_injecting(cfg);
    for (int ph = 0; ph < 3; ++ph)
      if (mask & (1 << ph)) st.devices[ph][0].mode = DeviceMode::OcBypass;
    auto cmd = ipb_coordinate(st, 0.0);
    for (int ph = 0; ph < 3; ++ph) {
      bool others = (mask & ~(1 << ph)) != 0;
      bool self = (mask & (1 << ph)) != 0;
      CHECK(cmd[ph] == (others && !self));
    }
  }
}

TEST_CASE("ipb: hold level pins bypassed phases while another is primary") {
  auto cfg = base_config(1, 1.0);
  auto st = all_injecting(cfg);
  st.devices[1][0].mode = DeviceMode::OcBypass;          // primary
  st.devices[0][0].mode = DeviceMode::LorBypass;         // ipb-induced
  st.devices[0][0].lor_hold_deadline_s = 0.0;            // entry-time deadline
  auto level = ipb_hold_level(st, 5.0);
  CHECK(level[0]);   // held by B
  CHECK(!level[1]);  // nothing else is primary
  CHECK(level[2]);

  // Once B resumes, nothing is primary and the level collapses.
  st.devices[1][0].mode = DeviceMode::Injection;
  level = ipb_hold_level(st, 5.0);
  CHECK(!level[0]);
  CHECK(!level[1]);
  CHECK(!level[2]);
}

TEST_CASE("backup LOR: OR over the wired conditions, monotone in signals") {
  auto cfg = base_config(1, 1.0);
  cfg.backup_lor_wiring = {{"relay1", "zone2_pickup"},
                           {"relay1", "trip"},
                           {"relay1", "pole_discordance"}};
  SignalMap signals;
  signals["relay1"].zone_pickup = {false, false};
  CHECK(!backup_lor_evaluate(signals, cfg));

  signals["relay1"].zone_pickup[1] = true;
  CHECK(backup_lor_evaluate(signals, cfg));

  // Asserting more signals never deasserts the command.
  signals["relay1"].trip = true;
  signals["relay1"].pole_open = {true, false, false};
  CHECK(backup_lor_evaluate(signals, cfg));

  SignalMap pole_only;
  pole_only["relay1"].zone_pickup = {false, false};
  pole_only["relay1"].pole_open = {true, false, false};
  CHECK(backup_lor_evaluate(pole_only, cfg));  // discordance

  cfg.backup_lor_enabled = false;
  CHECK(!backup_lor_evaluate(signals, cfg));
}

TEST_CASE("signal grammar accepts the published names only") {
  CHECK(is_known_relay_signal("zone1_pickup", 2));
  CHECK(is_known_relay_signal("zone2_pickup", 2));
  CHECK(!is_known_relay_signal("zone3_pickup", 2));
  CHECK(is_known_relay_signal("trip", 2));
  CHECK(is_known_relay_signal("pole_open_b", 2));
  CHECK(is_known_relay_signal("pole_discordance", 2));
  CHECK(!is_known_relay_signal("zone_pickup", 2));
  CHECK(!is_known_relay_signal("frobnicate", 2));
}

TEST_CASE("deployment validation") {
  auto cfg = base_config(0, 0.5);
  auto issues = validate(cfg, "deployments[0]");
  CHECK(issues.size() >= 2);
}

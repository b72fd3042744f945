#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "seriescomp/network.hpp"
#include "seriescomp/relay.hpp"
#include "support/testnets.hpp"

using namespace seriescomp;

namespace {

RelaySettings two_zone_settings() {
  RelaySettings cfg;
  cfg.id = "relay1";
  cfg.line_id = "L1";
  cfg.zones = {{{0.0, 32.0}, 0.0, ZoneDirection::Forward},
               {{0.0, 48.0}, 0.3, ZoneDirection::Forward}};
  return cfg;
}

std::array<LoopMeasurement, 6> loops_at(Phasor z, bool valid = true) {
  std::array<LoopMeasurement, 6> loops;
  for (int i = 0; i < 6; ++i) {
    loops[i].loop = static_cast<LoopId>(i);
    loops[i].z_ohm = z;
    loops[i].valid = valid;
  }
  return loops;
}

const std::array<std::string, 2> kBreakers{"L1.bf", "L1.bt"};

}  // namespace

TEST_CASE("loops: balanced load reads the apparent impedance on all loops") {
  Phasor z_load{10.0, 5.0};
  ThreePhaseSet i = balanced_set(0.5, -0.3);
  ThreePhaseSet v;
  for (Phase p : kPhases) v[p] = z_load * i[p];
  auto loops = measure_loops(v, i, Phasor{0.0, 0.0}, 0.05);
  for (const auto& m : loops) {
    REQUIRE(m.valid);
    CHECK(std::abs(m.z_ohm - z_load) < 1e-9);
  }
}

TEST_CASE("loops: mid-line bolted three-phase fault reads half the line") {
  // Strong source at the relay bus, fault at p = 0.5 on a j40 line.
  auto model = testnets::two_bus(from_polar(127.0, 0.0), Phasor{1e-3, 0.0},
                                 Phasor{0.0, 40.0});
  NetworkSolver solver(model);
  NetworkState state;
  state.fault_shunts.push_back(testnets::three_phase_fault("L1", 0.5, 0.0));
  auto sol = solver.solve_step(state);
  auto loops = measure_loops(sol.bus_voltages_kv.at("s"),
                             branch_current(sol, "L1"), {0.0, 0.0}, 0.05);
  for (const auto& m : loops) {
    REQUIRE(m.valid);
    CHECK(std::abs(m.z_ohm - Phasor{0.0, 20.0}) < 0.01);
  }
}

TEST_CASE("loops: a dead line leaves every loop invalid") {
  ThreePhaseSet zero;
  auto loops = measure_loops(zero, zero, {0.0, 0.0}, 0.05);
  for (const auto& m : loops) CHECK(!m.valid);
}

TEST_CASE("mho: membership against a j32 reach") {
  ZoneSettings zone{{0.0, 32.0}, 0.0, ZoneDirection::Forward};
  LoopMeasurement m;
  m.valid = true;
  m.z_ohm = {0.0, 20.0};
  CHECK(zone_check(m, zone));
  m.z_ohm = {0.0, 36.0};
  CHECK(!zone_check(m, zone));
  m.z_ohm = {0.0, 0.0};
  CHECK(zone_check(m, zone));  // origin is inside by convention
}

TEST_CASE("zone nesting: anything inside zone 1 is inside zone 2") {
  auto cfg = two_zone_settings();
  for (double re = -40.0; re <= 40.0; re += 2.5)
    for (double im = -40.0; im <= 60.0; im += 2.5) {
      LoopMeasurement m;
      m.valid = true;
      m.z_ohm = {re, im};
      if (zone_check(m, cfg.zones[0])) CHECK(zone_check(m, cfg.zones[1]));
    }
}

TEST_CASE("directional: impedance angle window") {
  CHECK(directional({0.0, 20.0}, {1.0, 0.0}, 0.05) ==
        DirectionResult::Forward);
  CHECK(directional({0.0, -20.0}, {1.0, 0.0}, 0.05) ==
        DirectionResult::Reverse);
  CHECK(directional({20.0, 0.0}, {1.0, 0.0}, 0.05) ==
        DirectionResult::Forward);
  CHECK(directional({0.0, 20.0}, {0.001, 0.0}, 0.05) ==
        DirectionResult::Indeterminate);
}

TEST_CASE("relay timeline: trip, dead time, reclose onto fault, lockout") {
  auto cfg = two_zone_settings();
  auto st = make_relay_state(cfg);
  double dt = 0.01;
  auto quiet = loops_at({}, false);
  auto faulted = loops_at({0.0, 20.0});

  int reclose_ops = 0;
  bool tripped_at = false;
  double trip_t = 0.0, reclose_t = 0.0, open_t = -1.0;
  std::array<bool, 3> open{false, false, false};

  for (int k = 0; k <= 400; ++k) {
    double t = k * dt;
    bool fault_on = t >= 1.0 && t < 2.5;  // persists through the reclose
    auto& loops = (fault_on && !open[0]) ? faulted : quiet;
    auto res = step_relay(st, loops, open, t, cfg, kBreakers);
    bool any_close = false;
    for (const auto& c : res.commands) {
      if (!c.close) {
        open = {true, true, true};  // instantaneous breaker for this test
        if (open_t < 0.0) open_t = t;
      } else {
        any_close = true;
      }
    }
    if (any_close) {
      open = {false, false, false};
      ++reclose_ops;
      reclose_t = t;
    }
    for (const auto& e : res.events)
      if (e.source == "relay1" && e.name == "trip" && !tripped_at) {
        tripped_at = true;
        trip_t = t;
      }
    // No trip without a pickup behind it.
    if (st.trip_asserted) {
      bool any = false;
      for (auto& z : st.zones) any = any || z.pickup;
      CHECK((any || open[0]));
    }
  }

  CHECK(tripped_at);
  CHECK(trip_t == doctest::Approx(1.0).epsilon(0.05));
  CHECK(reclose_t == doctest::Approx(open_t + 0.9).epsilon(0.02));
  CHECK(reclose_ops == 1);  // bounded by reclose_attempts
  CHECK(st.reclose == RecloseState::LockedOut);
  CHECK(open[0]);  // breakers stay open
}

TEST_CASE("relay timeline: zone-2 delay times out before tripping") {
  auto cfg = two_zone_settings();
  auto st = make_relay_state(cfg);
  auto z2_only = loops_at({0.0, 40.0});  // inside zone 2, outside zone 1
  std::array<bool, 3> closed{false, false, false};
  double trip_t = -1.0;
  for (int k = 0; k <= 100; ++k) {
    double t = k * 0.01;
    auto res = step_relay(st, z2_only, closed, t, cfg, kBreakers);
    for (const auto& e : res.events)
      if (e.source == "relay1" && e.name == "trip" && trip_t < 0) trip_t = t;
  }
  CHECK(trip_t == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("relay ignores manually opened breakers (no self reclose)") {
  auto cfg = two_zone_settings();
  auto st = make_relay_state(cfg);
  auto quiet = loops_at({}, false);
  std::array<bool, 3> open{true, true, true};
  for (int k = 0; k < 50; ++k) {
    auto res = step_relay(st, quiet, open, k * 0.01, cfg, kBreakers);
    CHECK(res.commands.empty());
  }
  CHECK(st.reclose == RecloseState::Idle);
}

TEST_CASE("reach proportionality: bolted fault reads p times the line") {
  Phasor z_line{3.0, 30.0};
  auto model = testnets::two_bus(from_polar(127.0, 0.0), Phasor{1e-3, 0.0},
                                 z_line);
  for (double p = 0.1; p < 0.95; p += 0.1) {
    NetworkSolver solver(model);
    NetworkState state;
    state.fault_shunts.push_back(testnets::three_phase_fault("L1", p, 0.0));
    auto sol = solver.solve_step(state);
    auto loops = measure_loops(sol.bus_voltages_kv.at("s"),
                               branch_current(sol, "L1"), {0.0, 0.0}, 0.05);
    for (const auto& m : loops) {
      REQUIRE(m.valid);
      CHECK(std::abs(m.z_ohm - z_line * p) / std::abs(z_line * p) < 0.01);
    }
  }
}

TEST_CASE("series injection shifts the measured impedance by +jX") {
  Phasor z_line{3.0, 30.0};
  double x_set = 10.0;
  auto model = testnets::two_bus(from_polar(127.0, 0.0), Phasor{1e-3, 0.0},
                                 z_line);

  auto measure = [&](bool with_injection) {
    NetworkSolver solver(model);
    NetworkState state;
    state.fault_shunts.push_back(testnets::three_phase_fault("L1", 0.5, 0.0));
    Solution sol = solver.solve_step(state);
    if (with_injection) {
      for (int it = 0; it < 40; ++it) {
        auto i3 = branch_current(sol, "L1");
        for (Phase p : kPhases)
          state.series_injections_kv[{"L1", static_cast<int>(p)}] =
              Phasor{0.0, x_set} * i3[p];
        sol = solver.solve_step(state);
      }
    }
    auto loops = measure_loops(sol.bus_voltages_kv.at("s"),
                               branch_current(sol, "L1"), {0.0, 0.0}, 0.05);
    return loops[0].z_ohm;  // AB loop
  };

  Phasor base = measure(false);
  Phasor shifted = measure(true);
  Phasor delta = shifted - base;
  CHECK(std::abs(delta - Phasor{0.0, x_set}) / x_set < 0.02);
}

TEST_CASE("relay settings validation") {
  auto cfg = two_zone_settings();
  cfg.zones[1].reach_ohm = {0.0, 10.0};  // not increasing
  cfg.zones[1].delay_s = -0.1;
  auto issues = validate(cfg, "relays[0]");
  CHECK(issues.size() >= 2);

  auto st = make_relay_state(two_zone_settings());
  auto quiet = loops_at({}, false);
  step_relay(st, quiet, {false, false, false}, 1.0, two_zone_settings(),
             kBreakers);
  CHECK_THROWS_AS(step_relay(st, quiet, {false, false, false}, 0.5,
                             two_zone_settings(), kBreakers),
                  ContractError);
}

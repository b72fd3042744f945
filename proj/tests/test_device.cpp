#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "seriescomp/device.hpp"

using namespace seriescomp;

namespace {

DeviceState injecting_state() {
  DeviceState st;
  st.mode = DeviceMode::Injection;
  st.vsl_closed = false;
  return st;
}

const DeviceRating kRating{};               // 10 x 1 MVAr, 1.0 kA, 0.05 kA min
const DeviceProtectionSettings kProtection{};  // 3.8 / 1.1414 / 30 s / 1 s

}  // namespace

TEST_CASE("tracker: already on the reference stays put") {
  DeviceState st;
  st.angle_tracker_rad = 0.25;
  auto next = update_angle_tracker(st, from_polar(0.5, 0.25), 0.001,
                                   {0.1}, kRating);
  CHECK(next.angle_tracker_rad == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("tracker: first-order lag moves by dt/tau of the error") {
  DeviceState st;
  st.angle_tracker_rad = 0.0;
  auto next = update_angle_tracker(st, from_polar(0.5, 0.5), 0.001, {0.1},
                                   kRating);
  CHECK(next.angle_tracker_rad == doctest::Approx(0.005).epsilon(1e-12));
}

TEST_CASE("tracker: converges within 1% of a step after five time constants") {
  DeviceState st;
  st.angle_tracker_rad = 0.0;
  const double tau = 0.1, dt = 0.001, target = 1.0;
  int steps = static_cast<int>(5.0 * tau / dt);
  for (int k = 0; k < steps; ++k)
    st = update_angle_tracker(st, from_polar(0.5, target), dt, {tau}, kRating);
  CHECK(std::abs(st.angle_tracker_rad - target) < 0.01 * target);
}

TEST_CASE("tracker: holds below the injection minimum and rejects bad dt") {
  DeviceState st;
  st.angle_tracker_rad = 0.3;
  auto next = update_angle_tracker(st, from_polar(0.01, 1.0), 0.001, {0.1},
                                   kRating);
  CHECK(next.angle_tracker_rad == 0.3);
  CHECK_THROWS_AS(
      update_angle_tracker(st, from_polar(0.5, 1.0), 0.0, {0.1}, kRating),
      ContractError);
}

TEST_CASE("capability: flat to rated current, constant MVA above") {
  CHECK(kRating.v_cap_kv() == doctest::Approx(10.0));
  CHECK(capability_limit(kRating, 2.0) == doctest::Approx(5.0));
  CHECK(capability_limit(kRating, 0.0) == 0.0);
  CHECK(capability_limit(kRating, 0.04) == 0.0);  // below minimum
  CHECK(capability_limit(kRating, 1.0) == doctest::Approx(10.0));  // knee
  CHECK(capability_limit(kRating, 0.5) == doctest::Approx(10.0));
}

TEST_CASE("injection: fixed reactance is jX times the current phasor") {
  InjectionCommand cmd{InjectionMode::FixedReactance, 12.0, 0.0,
                       Polarity::Inductive};
  Phasor i = from_polar(0.7, -M_PI / 6.0);
  Phasor v = compute_injection(cmd, i, injecting_state(), kRating);
  CHECK(std::abs(v) == doctest::Approx(8.4).epsilon(1e-12));
  CHECK(std::arg(v) == doctest::Approx(M_PI / 3.0).epsilon(1e-12));
}

TEST_CASE("injection: zero current gives zero voltage") {
  InjectionCommand cmd{InjectionMode::FixedReactance, 12.0, 0.0,
                       Polarity::Inductive};
  Phasor v = compute_injection(cmd, Phasor{0.0, 0.0}, injecting_state(),
                               kRating);
  CHECK(v == Phasor{0.0, 0.0});
}

TEST_CASE("injection: fixed voltage rides the tracker at +90 degrees") {
  InjectionCommand cmd{InjectionMode::FixedVoltage, 0.0, 5.0,
                       Polarity::Inductive};
  Phasor i = from_polar(0.6, 0.4);
  DeviceState st = injecting_state();
  st.angle_tracker_rad = std::arg(i);
  Phasor v = compute_injection(cmd, i, st, kRating);
  CHECK(std::abs(v) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(wrap_angle(std::arg(v) - std::arg(i)) ==
        doctest::Approx(M_PI / 2.0).epsilon(1e-12));

  cmd.polarity = Polarity::Capacitive;
  v = compute_injection(cmd, i, st, kRating);
  CHECK(wrap_angle(std::arg(v) - std::arg(i)) ==
        doctest::Approx(-M_PI / 2.0).epsilon(1e-12));
}

TEST_CASE("injection: quadrature holds to 1e-9 and the clamp always binds") {
  for (double x_set : {-15.0, -3.0, 4.0, 25.0}) {
    InjectionCommand cmd{InjectionMode::FixedReactance, x_set, 0.0,
                         Polarity::Inductive};
    for (double mag : {0.06, 0.4, 1.0, 2.5}) {
      for (double ang : {-2.0, 0.0, 1.3}) {
        Phasor i = from_polar(mag, ang);
        Phasor v = compute_injection(cmd, i, injecting_state(), kRating);
        CHECK(std::abs(v) <= capability_limit(kRating, mag) + 1e-12);
        if (std::abs(v) > 0.0) {
          double sign = x_set > 0 ? 1.0 : -1.0;
          CHECK(std::abs(wrap_angle(std::arg(v) - std::arg(i) -
                                    sign * M_PI / 2.0)) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("injection: calling outside Injection mode is a contract error") {
  InjectionCommand cmd{InjectionMode::FixedReactance, 12.0, 0.0,
                       Polarity::Inductive};
  DeviceState st;  // Monitoring
  CHECK_THROWS_AS(compute_injection(cmd, from_polar(0.5, 0.0), st, kRating),
                  ContractError);
}

TEST_CASE("protection: over-current forces OcBypass with VSLs closed") {
  DeviceState st = injecting_state();
  st.last_injection_kv = from_polar(5.0, 1.0);
  auto next = step_protection(st, 4.0, false, false, 0.0, kProtection,
                              kRating);
  CHECK(next.mode == DeviceMode::OcBypass);
  CHECK(next.vsl_closed);
  CHECK(next.last_injection_kv == Phasor{0.0, 0.0});
  CHECK(next.lockout_deadline_s == 30.0);
}

TEST_CASE("protection: moderate over-current rides through as LOR") {
  DeviceState st = injecting_state();
  auto next = step_protection(st, 1.2, false, false, 0.0, kProtection,
                              kRating);
  CHECK(next.mode == DeviceMode::LorBypass);
  CHECK(!next.vsl_closed);  // no VSL closure on LOR
  CHECK(next.lor_hold_deadline_s == 1.0);
}

TEST_CASE("protection: LOR resumes exactly after the one-second hold") {
  DeviceState st = injecting_state();
  st = step_protection(st, 1.2, false, false, 0.0, kProtection, kRating);
  st = step_protection(st, 0.5, false, false, 0.5, kProtection, kRating);
  CHECK(st.mode == DeviceMode::LorBypass);
  st = step_protection(st, 0.5, false, false, 0.999, kProtection, kRating);
  CHECK(st.mode == DeviceMode::LorBypass);
  st = step_protection(st, 0.5, false, false, 1.0, kProtection, kRating);
  CHECK(st.mode == DeviceMode::Injection);
}

TEST_CASE("protection: below every threshold nothing changes") {
  DeviceState st = injecting_state();
  auto next = step_protection(st, 1.0, false, false, 0.0, kProtection,
                              kRating);
  CHECK(next.mode == DeviceMode::Injection);
  CHECK(!next.vsl_closed);
}

TEST_CASE("protection: lockout re-arms while current stays above i_lor") {
  DeviceState st = injecting_state();
  st = step_protection(st, 4.0, false, false, 0.0, kProtection, kRating);
  // Fault current persists for 2 s, then the line goes quiet.
  double t = 0.0;
  for (; t < 2.0; t += 0.1)
    st = step_protection(st, 4.0, false, false, t, kProtection, kRating);
  double last_above = t - 0.1;
  for (; t < 40.0; t += 0.1) {
    st = step_protection(st, 0.2, false, false, t, kProtection, kRating);
    if (st.mode == DeviceMode::Injection) break;
  }
  CHECK(st.mode == DeviceMode::Injection);
  CHECK(t >= last_above + 30.0);
  CHECK(t <= last_above + 30.0 + 0.2);
}

TEST_CASE("protection: low current dwell drops to Monitoring and back") {
  DeviceState st = injecting_state();
  double t = 0.0;
  for (; t <= 1.05; t += 0.05)
    st = step_protection(st, 0.01, false, false, t, kProtection, kRating);
  CHECK(st.mode == DeviceMode::Monitoring);
  CHECK(st.vsl_closed);
  st = step_protection(st, 0.5, false, false, t, kProtection, kRating);
  CHECK(st.mode == DeviceMode::Injection);
}

TEST_CASE("protection: backup-LOR and IPB trigger entry; IPB does not re-arm") {
  DeviceState st = injecting_state();
  st = step_protection(st, 0.5, true, false, 0.0, kProtection, kRating);
  CHECK(st.mode == DeviceMode::LorBypass);
  CHECK(st.own_lor_trigger);

  DeviceState ipb = injecting_state();
  ipb = step_protection(ipb, 0.5, false, true, 0.0, kProtection, kRating);
  CHECK(ipb.mode == DeviceMode::LorBypass);
  CHECK(!ipb.own_lor_trigger);
  CHECK(!primary_bypass_active(ipb, 0.5));
  // Command drop releases it immediately, no one-second tail.
  ipb = step_protection(ipb, 0.5, false, true, 0.2, kProtection, kRating);
  ipb = step_protection(ipb, 0.5, false, false, 0.3, kProtection, kRating);
  CHECK(ipb.mode == DeviceMode::Injection);
}

TEST_CASE("protection: lor_enabled gates every LOR path") {
  DeviceProtectionSettings cfg = kProtection;
  cfg.lor_enabled = false;
  DeviceState st = injecting_state();
  st = step_protection(st, 1.5, true, true, 0.0, cfg, kRating);
  CHECK(st.mode == DeviceMode::Injection);  // keeps injecting through the fault
  st = step_protection(st, 4.2, false, false, 0.1, cfg, kRating);
  CHECK(st.mode == DeviceMode::OcBypass);   // OC is independent of LOR
}

TEST_CASE("protection: every quantized input maps to exactly one successor") {
  const double currents[] = {0.0, 0.01, 0.5, 1.2, 2.0, 3.9, 6.0};
  const DeviceMode modes[] = {DeviceMode::Monitoring, DeviceMode::Injection,
                              DeviceMode::LorBypass, DeviceMode::OcBypass};
  for (DeviceMode m : modes)
    for (double i : currents)
      for (bool backup : {false, true})
        for (bool ipb : {false, true})
          for (bool armed : {false, true}) {
            DeviceState st;
            st.mode = m;
            st.vsl_closed = (m != DeviceMode::Injection);
            if (m == DeviceMode::OcBypass)
              st.lockout_deadline_s = armed ? 100.0 : 0.5;
            if (m == DeviceMode::LorBypass)
              st.lor_hold_deadline_s = armed ? 100.0 : 0.5;
            auto next = step_protection(st, i, backup, ipb, 1.0, kProtection,
                                        kRating);
            bool valid_mode = next.mode == DeviceMode::Monitoring ||
                              next.mode == DeviceMode::Injection ||
                              next.mode == DeviceMode::LorBypass ||
                              next.mode == DeviceMode::OcBypass;
            CHECK(valid_mode);
            if (next.mode == DeviceMode::OcBypass) CHECK(next.vsl_closed);
            if (next.mode == DeviceMode::Injection) CHECK(!next.vsl_closed);
          }
}

TEST_CASE("protection: time must not run backwards") {
  DeviceState st = injecting_state();
  st = step_protection(st, 0.5, false, false, 1.0, kProtection, kRating);
  CHECK_THROWS_AS(
      step_protection(st, 0.5, false, false, 0.5, kProtection, kRating),
      ContractError);
}

TEST_CASE("settings validation catches inverted thresholds") {
  DeviceProtectionSettings bad;
  bad.i_lor_ka = 4.0;
  bad.i_oc_ka = 3.8;
  auto issues = validate(bad, "protection");
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].find("i_lor_ka") != std::string::npos);
  CHECK(issues[0].find("i_oc_ka") != std::string::npos);
}

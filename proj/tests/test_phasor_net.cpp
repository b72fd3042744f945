#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "seriescomp/network.hpp"
#include "support/dense_oracle.hpp"
#include "support/testnets.hpp"

using namespace seriescomp;
using namespace testnets;

namespace {

// Quantities are kV / kA; differences below one volt or one ampere are
// compared on that absolute floor rather than a vanishing denominator.
double rel_err(Phasor got, Phasor want) {
  double scale = std::max(std::abs(want), 1e-3);
  return std::abs(got - want) / scale;
}

double max_rel_vs_oracle(const Solution& sol, const oracle::OracleResult& ref) {
  double worst = 0.0;
  for (const auto& [id, vs] : ref.bus_voltages_kv) {
    const auto& got = sol.bus_voltages_kv.at(id);
    for (Phase p : kPhases) worst = std::max(worst, rel_err(got[p], vs[p]));
  }
  for (const auto& [id, is] : ref.branch_currents_ka) {
    const auto& got = sol.branch_currents_ka.at(id);
    for (Phase p : kPhases) worst = std::max(worst, rel_err(got[p], is[p]));
  }
  return worst;
}

}  // namespace

TEST_CASE("build_system: zero injection leaves only source terms") {
  auto model = two_bus(from_polar(127.0, 0.0), Phasor{0.0, 5.0}, {0.0, 10.0});
  NetworkSolver solver(model);
  NetworkState state;
  auto sys = solver.build_system(state);
  // Source contributions only: EMF/Zth at the source vertex, zero elsewhere.
  for (Phase p : kPhases) {
    Phasor want = model.sources[0].emf_kv[p] / Phasor{0.0, 5.0};
    CHECK(std::abs(sys.I(sys.vertex("s", p)) - want) < 1e-12);
    CHECK(std::abs(sys.I(sys.vertex("r", p))) == 0.0);
  }
}

TEST_CASE("build_system: series injection stamps the Norton pair") {
  auto model = two_bus(from_polar(127.0, 0.0), Phasor{0.0, 5.0}, {0.0, 10.0});
  NetworkSolver solver(model);
  NetworkState plain;
  NetworkState injected;
  for (int ph = 0; ph < 3; ++ph)
    injected.series_injections_kv[{"L1", ph}] = from_polar(1.0, M_PI / 2.0);

  auto sys0 = solver.build_system(plain);
  auto sys1 = solver.build_system(injected);
  // V/Z = 1∠90° / 10∠90° = 0.1∠0°, leaving +V/Z at the sending vertex and
  // -V/Z at the receiving vertex on top of the source terms.
  Phasor want = from_polar(1.0, M_PI / 2.0) / Phasor{0.0, 10.0};
  CHECK(std::abs(want - Phasor{0.1, 0.0}) < 1e-15);
  for (Phase p : kPhases) {
    Phasor ds = sys1.I(sys1.vertex("s", p)) - sys0.I(sys0.vertex("s", p));
    Phasor dr = sys1.I(sys1.vertex("r", p)) - sys0.I(sys0.vertex("r", p));
    CHECK(std::abs(ds - want) < 1e-12);
    CHECK(std::abs(dr + want) < 1e-12);
  }
}

TEST_CASE("build_system: open breaker removes the branch, far bus dead") {
  auto model = two_bus(from_polar(127.0, 0.0), Phasor{0.0, 5.0}, {0.0, 10.0});
  NetworkSolver solver(model);
  NetworkState state;
  state.breaker_closed["L1.bs"] = PhaseFlags{false, false, false};

  auto sys = solver.build_system(state);
  for (int ph = 0; ph < 3; ++ph) CHECK(sys.dim_per_phase[ph] == 1);
  for (Phase p : kPhases) CHECK(sys.vertex("r", p) == -1);

  auto sol = solver.solve_step(state);
  for (Phase p : kPhases) {
    CHECK(std::abs(sol.bus_voltages_kv.at("s")[p] -
                   model.sources[0].emf_kv[p]) < 1e-9);
    CHECK(sol.bus_voltages_kv.at("r")[p] == Phasor{0.0, 0.0});
    CHECK(sol.branch_currents_ka.at("L1")[p] == Phasor{0.0, 0.0});
  }
}

TEST_CASE("solve_step: bolted fault at line end draws E/(Xth+Xline)") {
  auto model = two_bus(from_polar(127.0, 0.0), Phasor{0.0, 5.0}, {0.0, 10.0});
  NetworkSolver solver(model);
  NetworkState state;
  state.fault_shunts.push_back(three_phase_fault("L1", 1.0, 0.0));

  auto sol = solver.solve_step(state);
  auto ref = oracle::solve(model, state);
  CHECK(max_rel_vs_oracle(sol, ref) < 1e-9);
  for (Phase p : kPhases) {
    double mag = std::abs(branch_current(sol, "L1")[p]);
    CHECK(mag == doctest::Approx(127.0 / 15.0).epsilon(1e-6));
  }
}

TEST_CASE("solve_step: no fault, no load, zero current everywhere") {
  auto model = two_bus(from_polar(127.0, 0.0), Phasor{0.0, 5.0}, {0.0, 10.0});
  NetworkSolver solver(model);
  auto sol = solver.solve_step(NetworkState{});
  for (Phase p : kPhases) {
    CHECK(std::abs(branch_current(sol, "L1")[p]) < 1e-12);
    CHECK(rel_err(sol.bus_voltages_kv.at("r")[p],
                  model.sources[0].emf_kv[p]) < 1e-9);
  }
}

TEST_CASE("solve_step: two-source transfer matches E1*E2*sin(d)/X") {
  double delta = 0.4;
  double e = 127.0;
  auto model = two_source(e, delta, {0.0, 4.0}, {0.0, 6.0}, {0.0, 30.0});
  NetworkSolver solver(model);
  auto sol = solver.solve_step(NetworkState{});

  double x_tot = 40.0;
  double p_formula = 3.0 * e * e * std::sin(delta) / x_tot;  // MW
  double p_received = 0.0;
  for (Phase p : kPhases) {
    Phasor i = branch_current(sol, "L1")[p];
    p_received += (model.sources[1].emf_kv[p] * std::conj(i)).real();
  }
  CHECK(p_received == doctest::Approx(p_formula).epsilon(1e-3));
}

TEST_CASE("branch_current: dead island line reads zero on all phases") {
  NetworkModel m;
  m.buses = {{"a", "A", 220.0}, {"b", "B", 220.0}, {"c", "C", 220.0}};
  m.sources = {{"a", balanced_set(127.0, 0.0), Phasor{0.0, 5.0}}};
  m.lines = {{"L1", "a", "b", {0.0, 10.0}, 1000.0, "L1.bf", "L1.bt"},
             {"L2", "b", "c", {0.0, 10.0}, 1000.0, "L2.bf", "L2.bt"}};
  NetworkSolver solver(m);
  NetworkState state;
  state.breaker_closed["L1.bt"] = PhaseFlags{false, false, false};
  auto sol = solver.solve_step(state);
  for (Phase p : kPhases) {
    CHECK(branch_current(sol, "L2")[p] == Phasor{0.0, 0.0});
    CHECK(sol.bus_voltages_kv.at("c")[p] == Phasor{0.0, 0.0});
  }
  CHECK_THROWS_AS(branch_current(sol, "nope"), SpecError);
}

TEST_CASE("balanced system keeps phase magnitudes equal to 1e-9") {
  auto model = two_bus(from_polar(127.0, 0.2), Phasor{1.0, 5.0}, {2.0, 10.0});
  model.loads.push_back({"r", Phasor{150.0, 70.0}});
  NetworkSolver solver(model);
  auto sol = solver.solve_step(NetworkState{});
  auto i3 = branch_current(sol, "L1");
  double ref = std::abs(i3.a);
  CHECK(std::abs(std::abs(i3.b) - ref) / ref < 1e-9);
  CHECK(std::abs(std::abs(i3.c) - ref) / ref < 1e-9);
}

TEST_CASE("linearity: scaling EMFs scales the whole solution") {
  auto model = two_bus(from_polar(127.0, 0.1), Phasor{1.0, 5.0}, {2.0, 20.0});
  model.loads.push_back({"r", Phasor{120.0, 55.0}});
  NetworkSolver solver(model);
  auto base = solver.solve_step(NetworkState{});

  // Power-of-two factors must scale bit-exactly; general reals to rounding.
  for (double k : {2.0, 0.5}) {
    auto scaled = model;
    for (auto& s : scaled.sources)
      for (Phase p : kPhases) s.emf_kv[p] *= k;
    NetworkSolver s2(scaled);
    auto sol = s2.solve_step(NetworkState{});
    for (Phase p : kPhases) {
      CHECK(sol.branch_currents_ka.at("L1")[p] ==
            base.branch_currents_ka.at("L1")[p] * k);
      CHECK(sol.bus_voltages_kv.at("r")[p] ==
            base.bus_voltages_kv.at("r")[p] * k);
    }
  }
  {
    double k = 3.0;
    auto scaled = model;
    for (auto& s : scaled.sources)
      for (Phase p : kPhases) s.emf_kv[p] *= k;
    NetworkSolver s2(scaled);
    auto sol = s2.solve_step(NetworkState{});
    for (Phase p : kPhases)
      CHECK(rel_err(sol.branch_currents_ka.at("L1")[p],
                    base.branch_currents_ka.at("L1")[p] * k) < 1e-12);
  }
}

TEST_CASE("oracle equivalence on randomized small networks") {
  std::mt19937_64 rng(20240817ULL);
  int solved = 0;
  for (int trial = 0; trial < 80; ++trial) {
    auto net = random_net(rng);
    NetworkSolver solver(net.model);
    auto sol = solver.solve_step(net.state);
    auto ref = oracle::solve(net.model, net.state);
    CHECK(max_rel_vs_oracle(sol, ref) < 1e-9);
    CHECK(sol.kcl_residual_max <= 1e-9);
    ++solved;
  }
  CHECK(solved == 80);
}

TEST_CASE("injection-only change reuses topology and stays consistent") {
  auto model = two_bus(from_polar(127.0, 0.0), Phasor{1.0, 6.0}, {2.0, 20.0});
  model.loads.push_back({"r", Phasor{100.0, 40.0}});
  NetworkSolver solver(model);
  NetworkState state;
  solver.solve_step(state);  // primes the cache
  for (int k = 1; k <= 4; ++k) {
    for (int ph = 0; ph < 3; ++ph)
      state.series_injections_kv[{"L1", ph}] = from_polar(0.5 * k, 1.0);
    auto fast = solver.solve_step(state);
    NetworkSolver fresh(model);
    auto ref = fresh.solve_step(state);
    for (Phase p : kPhases)
      CHECK(fast.branch_currents_ka.at("L1")[p] ==
            ref.branch_currents_ka.at("L1")[p]);
  }
}

TEST_CASE("effective reactance: injection of jX*I reads as Z + jX") {
  Phasor z_line{2.0, 20.0};
  auto model = two_bus(from_polar(127.0, 0.0), Phasor{1.0, 6.0}, z_line);
  model.loads.push_back({"r", Phasor{60.0, 30.0}});

  for (double x_set : {-10.0, 0.0, 10.0, 20.0}) {
    NetworkSolver solver(model);
    NetworkState state;
    Solution sol = solver.solve_step(state);
    // Fixed-point iteration: V_inj tracks jX*I of the previous solve.
    for (int it = 0; it < 60; ++it) {
      auto i3 = branch_current(sol, "L1");
      for (Phase p : kPhases)
        state.series_injections_kv[{"L1", static_cast<int>(p)}] =
            Phasor{0.0, x_set} * i3[p];
      sol = solver.solve_step(state);
    }
    auto i3 = branch_current(sol, "L1");
    for (Phase p : kPhases) {
      Phasor z_eff = (sol.bus_voltages_kv.at("s")[p] -
                      sol.bus_voltages_kv.at("r")[p]) /
                     i3[p];
      CHECK(rel_err(z_eff, z_line + Phasor{0.0, x_set}) < 1e-6);
    }
  }
}

TEST_CASE("determinism: identical inputs give bit-identical solutions") {
  std::mt19937_64 rng(7ULL);
  auto net = random_net(rng);
  NetworkSolver a(net.model), b(net.model);
  auto sa = a.solve_step(net.state);
  auto sb = b.solve_step(net.state);
  for (const auto& [id, vs] : sa.bus_voltages_kv)
    CHECK(vs == sb.bus_voltages_kv.at(id));
  for (const auto& [id, is] : sa.branch_currents_ka)
    CHECK(is == sb.branch_currents_ka.at(id));
}

TEST_CASE("errors: non-finite parameters and ill-conditioned islands") {
  auto model = two_bus(from_polar(127.0, 0.0), Phasor{0.0, 5.0}, {0.0, 10.0});
  NetworkSolver solver(model);
  NetworkState bad;
  bad.series_injections_kv[{"L1", 0}] =
      Phasor{std::nan(""), 0.0};
  CHECK_THROWS_AS(solver.solve_step(bad), SolverError);

  auto sick = two_bus(from_polar(127.0, 0.0), Phasor{1e6, 0.0}, {1e-12, 0.0});
  NetworkSolver s2(sick);
  CHECK_THROWS_AS(s2.solve_step(NetworkState{}), SolverError);
}

TEST_CASE("model validation rejects broken fixtures") {
  NetworkModel m;
  m.buses = {{"a", "A", 220.0}};
  m.lines = {{"L1", "a", "ghost", {0.0, 10.0}, 1000.0, "b1", "b2"}};
  auto issues = m.validate();
  CHECK(!issues.empty());
  CHECK_THROWS_AS(NetworkSolver{m}, SpecError);
}

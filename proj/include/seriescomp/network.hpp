#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "seriescomp/errors.hpp"
#include "seriescomp/phasor.hpp"

namespace seriescomp {

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct Bus {
  std::string id;
  std::string name;
  double nominal_kv = 0.0;

  bool operator==(const Bus&) const = default;
};

/// Ideal EMF behind a per-phase Thevenin impedance.
struct Source {
  std::string bus;
  ThreePhaseSet emf_kv;
  Phasor thevenin_ohm{0.0, 0.0};

  bool operator==(const Source&) const = default;
};

struct Line {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  Phasor series_ohm{0.0, 0.0};  // identical per phase (decoupled model)
  double thermal_limit_a = 0.0;
  std::string breaker_from;
  std::string breaker_to;

  bool operator==(const Line&) const = default;
};

struct Load {
  std::string bus;
  Phasor shunt_ohm{0.0, 0.0};  // per phase, to ground

  bool operator==(const Load&) const = default;
};

/// The solvable grid. Phases are electrically decoupled: every impedance is
/// a single complex value applied to each phase independently; coupling can
/// only enter through phase-to-phase fault shunts.
struct NetworkModel {
  double system_frequency_hz = 60.0;
  std::vector<Bus> buses;
  std::vector<Source> sources;
  std::vector<Line> lines;
  std::vector<Load> loads;

  const Line* find_line(const std::string& id) const;
  const Bus* find_bus(const std::string& id) const;

  /// Structural checks (endpoint references, positive limits, finiteness,
  /// at least one source reachable from every bus with all breakers closed).
  std::vector<std::string> validate() const;

  bool operator==(const NetworkModel&) const = default;
};

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

struct PhaseFlags {
  bool a = true;
  bool b = true;
  bool c = true;

  bool& operator[](Phase p) {
    switch (p) {
      case Phase::B: return b;
      case Phase::C: return c;
      default: return a;
    }
  }
  bool operator[](Phase p) const {
    switch (p) {
      case Phase::B: return b;
      case Phase::C: return c;
      default: return a;
    }
  }
  bool all() const { return a && b && c; }
  bool any() const { return a || b || c; }

  bool operator==(const PhaseFlags&) const = default;
};

/// Shunt network attached at an interior point of a line. Grounded phases
/// get a per-phase impedance to ground; ungrounded phase-phase faults get an
/// impedance between two phases at the same point.
struct FaultShunt {
  std::string line_id;
  double position_p = 0.5;  // fraction from from_bus, in [0, 1]
  std::array<std::optional<Phasor>, 3> phase_ground_ohm{};
  struct PhasePair {
    Phase p1 = Phase::A;
    Phase p2 = Phase::B;
    Phasor ohm{0.0, 0.0};
    bool operator==(const PhasePair&) const = default;
  };
  std::vector<PhasePair> phase_pairs;

  bool operator==(const FaultShunt&) const = default;
};

/// Mutable electrical state laid over a NetworkModel for one step.
/// Series injections are voltage drops in the direction of positive branch
/// current (from_bus -> to_bus): a branch solves as
///   I = (V_from - V_to - V_inj) / Z
/// so an injection of j*X*I behaves exactly like adding X to the line
/// reactance.
struct NetworkState {
  std::map<std::string, PhaseFlags> breaker_closed;  // absent => closed
  std::vector<FaultShunt> fault_shunts;
  std::map<std::pair<std::string, int>, Phasor> series_injections_kv;

  bool breaker_phase_closed(const std::string& breaker_id, Phase p) const {
    auto it = breaker_closed.find(breaker_id);
    return it == breaker_closed.end() ? true : it->second[p];
  }
  Phasor injection(const std::string& line_id, Phase p) const {
    auto it = series_injections_kv.find({line_id, static_cast<int>(p)});
    return it == series_injections_kv.end() ? Phasor{0.0, 0.0} : it->second;
  }
};

// ---------------------------------------------------------------------------
// Solution
// ---------------------------------------------------------------------------

struct Solution {
  std::map<std::string, ThreePhaseSet> bus_voltages_kv;
  /// Keyed by line id, positive from from_bus to to_bus. For a line split by
  /// an interior fault this is the sending-side sub-branch (the relay-side
  /// measurement).
  std::map<std::string, ThreePhaseSet> branch_currents_ka;
  double kcl_residual_max = 0.0;
};

/// Solved current of one line; throws on unknown id.
ThreePhaseSet branch_current(const Solution& sol, const std::string& line_id);

// ---------------------------------------------------------------------------
// Nodal system
// ---------------------------------------------------------------------------

/// Expanded per-phase nodal admittance system. Nodes cover model buses plus
/// one internal node per interior fault point; vertices are (node, phase)
/// pairs, kept only while energized (galvanically connected to a source
/// through closed elements). Dead vertices solve to zero without entering
/// the system.
struct NodalSystem {
  struct BranchRef {
    std::string line_id;
    int sub = 0;  // 0 = sending side of a split line
    int from_node = 0;
    int to_node = 0;
    Phasor z_ohm{0.0, 0.0};
    PhaseFlags closed;
    std::array<Phasor, 3> injection_kv{};  // drop convention
  };

  std::vector<std::string> node_ids;
  std::vector<BranchRef> branches;

  /// vertex_index[node][phase]: row in the combined system, -1 when dead.
  std::vector<std::array<int, 3>> vertex_index;
  std::array<int, 3> dim_per_phase{0, 0, 0};
  int dimension = 0;

  Eigen::MatrixXcd Y;  // combined admittance over energized vertices
  Eigen::VectorXcd I;  // current injections (sources + Norton terms)

  int node_index(const std::string& node_id) const;
  int vertex(const std::string& node_id, Phase p) const;
};

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

/// Quasi-static three-phase solver over a fixed model. Pure function of
/// (model, state); the instance only caches LU factorizations keyed by the
/// state's topology so that injection-only changes re-solve cheaply.
class NetworkSolver {
 public:
  explicit NetworkSolver(NetworkModel model);

  /// Assemble the nodal system without solving; exposed for inspection and
  /// for the independent-oracle tests.
  NodalSystem build_system(const NetworkState& state) const;

  /// Solve bus voltages and branch currents. Deterministic: identical
  /// inputs produce bit-identical outputs. Throws SolverError on
  /// ill-conditioned islands or non-finite parameters.
  Solution solve_step(const NetworkState& state);

  const NetworkModel& model() const { return model_; }

  /// Relative KCL residual bound accepted by solve_step.
  static constexpr double kResidualLimit = 1e-9;
  /// Reciprocal-condition bound below which an island is rejected.
  static constexpr double kRcondLimit = 1e-13;

 private:
  struct Cached;
  NetworkModel model_;
  std::uint64_t cached_topology_key_ = 0;
  std::shared_ptr<Cached> cache_;
};

}  // namespace seriescomp

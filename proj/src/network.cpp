#include "seriescomp/network.hpp"

#include <algorithm>
#include <cstring>
#include <memory>
#include <queue>
#include <set>

namespace seriescomp {

namespace {

constexpr double kSplitEps = 1e-9;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a_str(std::uint64_t h, const std::string& s) {
  return fnv1a(h, s.data(), s.size());
}

std::uint64_t fnv1a_f64(std::uint64_t h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  return fnv1a(h, &bits, sizeof(bits));
}

/// Hash of everything in the state that shapes the admittance matrix.
/// Series injections are excluded: they only touch the RHS.
std::uint64_t topology_key(const NetworkState& state) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& [id, flags] : state.breaker_closed) {
    h = fnv1a_str(h, id);
    unsigned char f = static_cast<unsigned char>(flags.a) |
                      static_cast<unsigned char>(flags.b) << 1 |
                      static_cast<unsigned char>(flags.c) << 2;
    h = fnv1a(h, &f, 1);
  }
  for (const auto& fs : state.fault_shunts) {
    h = fnv1a_str(h, fs.line_id);
    h = fnv1a_f64(h, fs.position_p);
    for (const auto& zg : fs.phase_ground_ohm) {
      h = fnv1a_f64(h, zg ? zg->real() : std::nan(""));
      h = fnv1a_f64(h, zg ? zg->imag() : std::nan(""));
    }
    for (const auto& pp : fs.phase_pairs) {
      int a = static_cast<int>(pp.p1), b = static_cast<int>(pp.p2);
      h = fnv1a(h, &a, sizeof(a));
      h = fnv1a(h, &b, sizeof(b));
      h = fnv1a_f64(h, pp.ohm.real());
      h = fnv1a_f64(h, pp.ohm.imag());
    }
  }
  return h;
}

}  // namespace

const Line* NetworkModel::find_line(const std::string& id) const {
  for (const auto& l : lines)
    if (l.id == id) return &l;
  return nullptr;
}

const Bus* NetworkModel::find_bus(const std::string& id) const {
  for (const auto& b : buses)
    if (b.id == id) return &b;
  return nullptr;
}

std::vector<std::string> NetworkModel::validate() const {
  std::vector<std::string> issues;
  auto has_bus = [&](const std::string& id) { return find_bus(id) != nullptr; };

  std::set<std::string> bus_ids;
  for (const auto& b : buses) {
    if (!bus_ids.insert(b.id).second)
      issues.push_back("network.buses: duplicate bus id '" + b.id + "'");
    if (!(b.nominal_kv > 0.0))
      issues.push_back("network.buses." + b.id + ": nominal_kv must be > 0");
  }
  std::set<std::string> line_ids, breaker_ids;
  for (const auto& l : lines) {
    const std::string where = "network.lines." + l.id;
    if (!line_ids.insert(l.id).second)
      issues.push_back("network.lines: duplicate line id '" + l.id + "'");
    if (!has_bus(l.from_bus))
      issues.push_back(where + ": unknown from_bus '" + l.from_bus + "'");
    if (!has_bus(l.to_bus))
      issues.push_back(where + ": unknown to_bus '" + l.to_bus + "'");
    if (!(l.thermal_limit_a > 0.0))
      issues.push_back(where + ": thermal_limit_a must be > 0");
    if (!(std::abs(l.series_ohm) > 0.0) || !is_finite(l.series_ohm))
      issues.push_back(where + ": series_ohm magnitude must be finite and > 0");
    for (const auto& br : {l.breaker_from, l.breaker_to}) {
      if (br.empty())
        issues.push_back(where + ": breaker ids must be non-empty");
      else if (!breaker_ids.insert(br).second)
        issues.push_back(where + ": duplicate breaker id '" + br + "'");
    }
  }
  for (const auto& s : sources) {
    if (!has_bus(s.bus))
      issues.push_back("network.sources: unknown bus '" + s.bus + "'");
    if (!(std::abs(s.thevenin_ohm) > 0.0) || !is_finite(s.thevenin_ohm))
      issues.push_back("network.sources." + s.bus +
                       ": thevenin_ohm magnitude must be finite and > 0");
    if (!is_finite(s.emf_kv))
      issues.push_back("network.sources." + s.bus + ": emf must be finite");
  }
  for (const auto& ld : loads) {
    if (!has_bus(ld.bus))
      issues.push_back("network.loads: unknown bus '" + ld.bus + "'");
    if (!(std::abs(ld.shunt_ohm) > 0.0) || !is_finite(ld.shunt_ohm))
      issues.push_back("network.loads." + ld.bus +
                       ": shunt_ohm magnitude must be finite and > 0");
  }

  // Every bus must reach a source with all breakers closed.
  if (issues.empty() && !buses.empty()) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& l : lines) {
      adj[l.from_bus].push_back(l.to_bus);
      adj[l.to_bus].push_back(l.from_bus);
    }
    std::set<std::string> reached;
    std::queue<std::string> q;
    for (const auto& s : sources)
      if (reached.insert(s.bus).second) q.push(s.bus);
    while (!q.empty()) {
      auto cur = q.front();
      q.pop();
      for (const auto& nb : adj[cur])
        if (reached.insert(nb).second) q.push(nb);
    }
    for (const auto& b : buses)
      if (!reached.count(b.id))
        issues.push_back("network.buses." + b.id +
                         ": no source path with all breakers closed");
  }
  return issues;
}

ThreePhaseSet branch_current(const Solution& sol, const std::string& line_id) {
  auto it = sol.branch_currents_ka.find(line_id);
  if (it == sol.branch_currents_ka.end())
    throw SpecError({"branch_current: unknown line id '" + line_id + "'"});
  return it->second;
}

int NodalSystem::node_index(const std::string& node_id) const {
  for (std::size_t i = 0; i < node_ids.size(); ++i)
    if (node_ids[i] == node_id) return static_cast<int>(i);
  return -1;
}

int NodalSystem::vertex(const std::string& node_id, Phase p) const {
  int n = node_index(node_id);
  return n < 0 ? -1 : vertex_index[n][static_cast<int>(p)];
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

namespace {

struct GroundShuntRef {
  int node;
  Phase phase;
  Phasor z_ohm;
  Phasor emf_kv;  // zero for passive shunts
};

struct PairShuntRef {
  int node;
  Phase p1;
  Phase p2;
  Phasor z_ohm;
};

struct Expanded {
  std::vector<std::string> node_ids;
  std::vector<NodalSystem::BranchRef> branches;
  std::vector<GroundShuntRef> grounds;  // sources and loads and fault grounds
  std::vector<PairShuntRef> pairs;
};

Expanded expand(const NetworkModel& model, const NetworkState& state) {
  Expanded ex;
  for (const auto& b : model.buses) ex.node_ids.push_back(b.id);
  auto node_of = [&](const std::string& id) {
    for (std::size_t i = 0; i < ex.node_ids.size(); ++i)
      if (ex.node_ids[i] == id) return static_cast<int>(i);
    throw SolverError("internal: unknown node '" + id + "'");
  };

  // Interior fault points split their line in two; shunts at an endpoint
  // attach directly to the endpoint bus.
  std::map<std::string, const FaultShunt*> split_by_line;
  for (const auto& fs : state.fault_shunts) {
    if (!is_finite(Phasor{fs.position_p, 0.0}) || fs.position_p < 0.0 ||
        fs.position_p > 1.0)
      throw SolverError("fault position out of [0,1] on line '" + fs.line_id +
                        "'");
    if (fs.position_p > kSplitEps && fs.position_p < 1.0 - kSplitEps) {
      if (split_by_line.count(fs.line_id))
        throw SolverError("multiple interior fault points on line '" +
                          fs.line_id + "'");
      split_by_line[fs.line_id] = &fs;
    }
  }

  for (const auto& l : model.lines) {
    if (!is_finite(l.series_ohm))
      throw SolverError("non-finite impedance on line '" + l.id + "'");
    PhaseFlags closed_from, closed_to;
    for (Phase p : kPhases) {
      closed_from[p] = state.breaker_phase_closed(l.breaker_from, p);
      closed_to[p] = state.breaker_phase_closed(l.breaker_to, p);
    }
    std::array<Phasor, 3> inj{};
    for (Phase p : kPhases) {
      Phasor v = state.injection(l.id, p);
      if (!is_finite(v))
        throw SolverError("non-finite series injection on line '" + l.id + "'");
      inj[static_cast<int>(p)] = v;
    }

    auto it = split_by_line.find(l.id);
    if (it == split_by_line.end()) {
      PhaseFlags closed;
      for (Phase p : kPhases) closed[p] = closed_from[p] && closed_to[p];
      ex.branches.push_back({l.id, 0, node_of(l.from_bus), node_of(l.to_bus),
                             l.series_ohm, closed, inj});
    } else {
      double p = it->second->position_p;
      int fault_node = static_cast<int>(ex.node_ids.size());
      ex.node_ids.push_back(l.id + "@fault");
      // The parent injection rides on the sending-side sub-branch, keeping
      // the device between the relay and the fault point.
      ex.branches.push_back({l.id, 0, node_of(l.from_bus), fault_node,
                             l.series_ohm * p, closed_from, inj});
      ex.branches.push_back({l.id, 1, fault_node, node_of(l.to_bus),
                             l.series_ohm * (1.0 - p), closed_to,
                             std::array<Phasor, 3>{}});
    }
  }

  for (const auto& s : model.sources) {
    if (!is_finite(s.emf_kv) || !is_finite(s.thevenin_ohm))
      throw SolverError("non-finite source parameters at bus '" + s.bus + "'");
    for (Phase p : kPhases)
      ex.grounds.push_back({node_of(s.bus), p, s.thevenin_ohm, s.emf_kv[p]});
  }
  for (const auto& ld : model.loads) {
    if (!is_finite(ld.shunt_ohm))
      throw SolverError("non-finite load at bus '" + ld.bus + "'");
    for (Phase p : kPhases)
      ex.grounds.push_back({node_of(ld.bus), p, ld.shunt_ohm, Phasor{}});
  }

  for (const auto& fs : state.fault_shunts) {
    const Line* line = model.find_line(fs.line_id);
    if (line == nullptr)
      throw SolverError("fault on unknown line '" + fs.line_id + "'");
    int attach;
    if (fs.position_p <= kSplitEps)
      attach = node_of(line->from_bus);
    else if (fs.position_p >= 1.0 - kSplitEps)
      attach = node_of(line->to_bus);
    else
      attach = node_of(fs.line_id + "@fault");
    for (Phase p : kPhases) {
      const auto& zg = fs.phase_ground_ohm[static_cast<int>(p)];
      if (zg) ex.grounds.push_back({attach, p, *zg, Phasor{}});
    }
    for (const auto& pp : fs.phase_pairs)
      ex.pairs.push_back({attach, pp.p1, pp.p2, pp.ohm});
  }
  return ex;
}

/// Impedances of exactly zero ohms would produce infinite admittance; the
/// model validator forbids them, fault shunts may still carry 0 (bolted).
/// Bolted shunts are floored to one milliohm: electrically negligible at
/// transmission scale while keeping the nodal matrix well conditioned.
constexpr double kBoltedFloorOhm = 1e-3;

Phasor shunt_admittance(Phasor z) {
  if (std::abs(z) < kBoltedFloorOhm) z = Phasor{kBoltedFloorOhm, 0.0};
  return 1.0 / z;
}

}  // namespace

NodalSystem NetworkSolver::build_system(const NetworkState& state) const {
  Expanded ex = expand(model_, state);
  const int n_nodes = static_cast<int>(ex.node_ids.size());

  // Energization: BFS over (node, phase) vertices from source attachment
  // points, across closed branches and phase-pair shunts.
  std::vector<std::array<bool, 3>> energized(n_nodes, {false, false, false});
  std::vector<std::vector<std::pair<int, int>>> adj(n_nodes * 3);
  auto vid = [&](int node, Phase p) { return node * 3 + static_cast<int>(p); };
  for (const auto& br : ex.branches)
    for (Phase p : kPhases)
      if (br.closed[p]) {
        adj[vid(br.from_node, p)].push_back({br.to_node, static_cast<int>(p)});
        adj[vid(br.to_node, p)].push_back({br.from_node, static_cast<int>(p)});
      }
  for (const auto& pp : ex.pairs) {
    adj[vid(pp.node, pp.p1)].push_back({pp.node, static_cast<int>(pp.p2)});
    adj[vid(pp.node, pp.p2)].push_back({pp.node, static_cast<int>(pp.p1)});
  }
  // Source seats energize regardless of EMF magnitude: the Thevenin branch
  // pins the node voltage either way. Loads and fault shunts do not.
  std::queue<std::pair<int, int>> q;
  for (const auto& s : model_.sources) {
    int node = -1;
    for (std::size_t i = 0; i < ex.node_ids.size(); ++i)
      if (ex.node_ids[i] == s.bus) node = static_cast<int>(i);
    for (Phase p : kPhases) {
      int ph = static_cast<int>(p);
      if (!energized[node][ph]) {
        energized[node][ph] = true;
        q.push({node, ph});
      }
    }
  }
  while (!q.empty()) {
    auto [node, ph] = q.front();
    q.pop();
    for (auto [nn, np] : adj[vid(node, static_cast<Phase>(ph))])
      if (!energized[nn][np]) {
        energized[nn][np] = true;
        q.push({nn, np});
      }
  }

  NodalSystem sys;
  sys.node_ids = std::move(ex.node_ids);
  sys.branches = std::move(ex.branches);
  sys.vertex_index.assign(n_nodes, {-1, -1, -1});
  int dim = 0;
  for (int node = 0; node < n_nodes; ++node)
    for (int ph = 0; ph < 3; ++ph)
      if (energized[node][ph]) {
        sys.vertex_index[node][ph] = dim++;
        sys.dim_per_phase[ph]++;
      }
  sys.dimension = dim;
  sys.Y = Eigen::MatrixXcd::Zero(dim, dim);
  sys.I = Eigen::VectorXcd::Zero(dim);

  auto vx = [&](int node, Phase p) {
    return sys.vertex_index[node][static_cast<int>(p)];
  };

  for (const auto& br : sys.branches) {
    Phasor y = 1.0 / br.z_ohm;
    for (Phase p : kPhases) {
      if (!br.closed[p]) continue;
      int f = vx(br.from_node, p), t = vx(br.to_node, p);
      if (f < 0 && t < 0) continue;  // dead on both ends
      if (f >= 0) sys.Y(f, f) += y;
      if (t >= 0) sys.Y(t, t) += y;
      if (f >= 0 && t >= 0) {
        sys.Y(f, t) -= y;
        sys.Y(t, f) -= y;
      }
      // Series drop V_inj: Norton pair +V/Z out of the sending node,
      // -V/Z into the receiving node (drop convention).
      Phasor vinj = br.injection_kv[static_cast<int>(p)];
      if (vinj != Phasor{}) {
        Phasor j = vinj * y;
        if (f >= 0) sys.I(f) += j;
        if (t >= 0) sys.I(t) -= j;
      }
    }
  }
  for (const auto& g : ex.grounds) {
    int v = vx(g.node, g.phase);
    if (v < 0) continue;
    Phasor y = shunt_admittance(g.z_ohm);
    sys.Y(v, v) += y;
    if (g.emf_kv != Phasor{}) sys.I(v) += g.emf_kv * y;
  }
  for (const auto& pp : ex.pairs) {
    int v1 = vx(pp.node, pp.p1), v2 = vx(pp.node, pp.p2);
    Phasor y = shunt_admittance(pp.z_ohm);
    if (v1 >= 0) sys.Y(v1, v1) += y;
    if (v2 >= 0) sys.Y(v2, v2) += y;
    if (v1 >= 0 && v2 >= 0) {
      sys.Y(v1, v2) -= y;
      sys.Y(v2, v1) -= y;
    }
  }
  return sys;
}

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

struct NetworkSolver::Cached {
  NodalSystem sys;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu;
};

NetworkSolver::NetworkSolver(NetworkModel model) : model_(std::move(model)) {
  auto issues = model_.validate();
  if (!issues.empty()) throw SpecError(std::move(issues));
}

Solution NetworkSolver::solve_step(const NetworkState& state) {
  const std::uint64_t key = topology_key(state);
  if (!cache_ || key != cached_topology_key_) {
    auto cached = std::make_shared<Cached>();
    cached->sys = build_system(state);
    if (cached->sys.dimension > 0) {
      cached->lu.compute(cached->sys.Y);
      double rcond = cached->lu.rcond();
      if (!(rcond > kRcondLimit)) {
        std::string nodes;
        for (const auto& id : cached->sys.node_ids) {
          if (!nodes.empty()) nodes += ", ";
          nodes += id;
        }
        throw SolverError("ill-conditioned island (rcond=" +
                          std::to_string(rcond) + "): " + nodes);
      }
    }
    cache_ = std::move(cached);
    cached_topology_key_ = key;
  } else {
    // Same topology: only the injection vector changed. Rebuild I in place.
    NodalSystem& sys = cache_->sys;
    sys.I.setZero();
    for (auto& br : sys.branches) {
      const Line* line = model_.find_line(br.line_id);
      if (br.sub == 0)
        for (Phase p : kPhases)
          br.injection_kv[static_cast<int>(p)] = state.injection(line->id, p);
      Phasor y = 1.0 / br.z_ohm;
      for (Phase p : kPhases) {
        if (!br.closed[p]) continue;
        Phasor vinj = br.injection_kv[static_cast<int>(p)];
        if (vinj == Phasor{}) continue;
        Phasor j = vinj * y;
        int f = sys.vertex_index[br.from_node][static_cast<int>(p)];
        int t = sys.vertex_index[br.to_node][static_cast<int>(p)];
        if (f >= 0) sys.I(f) += j;
        if (t >= 0) sys.I(t) -= j;
      }
    }
    for (const auto& s : model_.sources) {
      int node = sys.node_index(s.bus);
      Phasor y = 1.0 / s.thevenin_ohm;
      for (Phase p : kPhases) {
        int v = sys.vertex_index[node][static_cast<int>(p)];
        if (v >= 0) sys.I(v) += s.emf_kv[p] * y;
      }
    }
  }

  const NodalSystem& sys = cache_->sys;
  Eigen::VectorXcd v;
  if (sys.dimension > 0) v = cache_->lu.solve(sys.I);

  Solution sol;
  auto voltage_at = [&](int node, Phase p) -> Phasor {
    int idx = sys.vertex_index[node][static_cast<int>(p)];
    return idx < 0 ? Phasor{0.0, 0.0} : Phasor{v(idx)};
  };

  for (std::size_t node = 0; node < sys.node_ids.size(); ++node) {
    const std::string& id = sys.node_ids[node];
    if (model_.find_bus(id) == nullptr) continue;  // internal fault node
    ThreePhaseSet vs;
    for (Phase p : kPhases) vs[p] = voltage_at(static_cast<int>(node), p);
    sol.bus_voltages_kv[id] = vs;
  }

  // Branch currents; open phases are structurally zero. KCL residual is
  // evaluated from these recovered currents, which checks both the solve
  // and the recovery path.
  std::vector<Phasor> mismatch(static_cast<std::size_t>(sys.dimension),
                               Phasor{});
  std::vector<double> scale(static_cast<std::size_t>(sys.dimension), 0.0);
  auto accumulate = [&](int vtx, Phasor current_in) {
    if (vtx < 0) return;
    mismatch[vtx] += current_in;
    scale[vtx] = std::max(scale[vtx], std::abs(current_in));
  };

  for (const auto& br : sys.branches) {
    ThreePhaseSet i3;
    for (Phase p : kPhases) {
      Phasor current{0.0, 0.0};
      if (br.closed[p]) {
        Phasor vf = voltage_at(br.from_node, p);
        Phasor vt = voltage_at(br.to_node, p);
        current = (vf - vt - br.injection_kv[static_cast<int>(p)]) / br.z_ohm;
        int f = sys.vertex_index[br.from_node][static_cast<int>(p)];
        int t = sys.vertex_index[br.to_node][static_cast<int>(p)];
        accumulate(f, -current);
        accumulate(t, current);
      }
      i3[p] = current;
    }
    if (br.sub == 0) sol.branch_currents_ka[br.line_id] = i3;
  }

  // Shunt contributions to the residual. Re-expanding is cheap at these
  // sizes and avoids caching a second structure.
  Expanded ex = expand(model_, state);
  for (const auto& g : ex.grounds) {
    int vtx = sys.vertex_index[g.node][static_cast<int>(g.phase)];
    if (vtx < 0) continue;
    Phasor y = shunt_admittance(g.z_ohm);
    Phasor current_in = (g.emf_kv - v(vtx)) * y;
    accumulate(vtx, current_in);
  }
  for (const auto& pp : ex.pairs) {
    int v1 = sys.vertex_index[pp.node][static_cast<int>(pp.p1)];
    int v2 = sys.vertex_index[pp.node][static_cast<int>(pp.p2)];
    Phasor y = shunt_admittance(pp.z_ohm);
    Phasor u1 = v1 < 0 ? Phasor{} : Phasor{v(v1)};
    Phasor u2 = v2 < 0 ? Phasor{} : Phasor{v(v2)};
    Phasor flow = (u1 - u2) * y;  // from p1 into p2
    accumulate(v1, -flow);
    accumulate(v2, flow);
  }

  double worst = 0.0;
  for (int k = 0; k < sys.dimension; ++k) {
    double s = scale[static_cast<std::size_t>(k)];
    if (s < 1e-12) continue;
    worst = std::max(worst, std::abs(mismatch[static_cast<std::size_t>(k)]) / s);
  }
  sol.kcl_residual_max = worst;
  if (!(worst <= kResidualLimit))
    throw SolverError("KCL residual " + std::to_string(worst) +
                      " exceeds bound");
  return sol;
}

}  // namespace seriescomp

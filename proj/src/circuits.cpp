#include "mqc/circuits.hpp"

#include <algorithm>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <stdexcept>

namespace mqc {

int EntanglingPlan::logical(int physical) const {
  auto it = std::find(qubits.begin(), qubits.end(), physical);
  if (it == qubits.end()) {
    throw std::invalid_argument("qubit " + std::to_string(physical) + " is not part of the plan");
  }
  return static_cast<int>(it - qubits.begin());
}

void EntanglingPlan::validate() const {
  if (qubits.empty()) throw std::invalid_argument("plan has no qubits");
  if (qubits.size() > static_cast<std::size_t>(kMaxQubits)) throw std::invalid_argument("plan exceeds 24 qubits");
  std::set<int> members(qubits.begin(), qubits.end());
  if (members.size() != qubits.size()) throw std::invalid_argument("plan lists a qubit twice");
  std::set<int> reached{root()};
  for (std::size_t m = 0; m < schedule.size(); ++m) {
    std::set<int> busy;
    std::vector<int> newly;
    for (const CxPair& p : schedule[m]) {
      const std::string where = "moment " + std::to_string(m) + ": CX(" + std::to_string(p.control) +
                                "," + std::to_string(p.target) + ") ";
      if (!members.count(p.control) || !members.count(p.target)) {
        throw std::invalid_argument(where + "uses a qubit outside the plan");
      }
      if (!busy.insert(p.control).second || !busy.insert(p.target).second) {
        throw std::invalid_argument(where + "reuses a qubit within the moment");
      }
      if (!reached.count(p.control)) throw std::invalid_argument(where + "control not yet entangled");
      if (reached.count(p.target)) throw std::invalid_argument(where + "target already entangled");
      newly.push_back(p.target);
    }
    reached.insert(newly.begin(), newly.end());
  }
  if (reached.size() != members.size()) throw std::invalid_argument("plan does not reach every qubit");
}

void EntanglingPlan::validate(const DeviceModel& device) const {
  for (int q : qubits) {
    if (q < 0 || q >= device.num_qubits()) {
      throw std::invalid_argument("plan qubit " + std::to_string(q) + " is not on the device");
    }
  }
  validate();
  for (const auto& moment : schedule) {
    for (const CxPair& p : moment) {
      if (!device.connected(p.control, p.target)) {
        throw std::invalid_argument("CX(" + std::to_string(p.control) + "," + std::to_string(p.target) +
                                    ") is not a device coupler");
      }
    }
  }
}

std::string to_string(MqcVariant v) {
  switch (v) {
    case MqcVariant::Ghz: return "ghz";
    case MqcVariant::StarGraph: return "star";
    case MqcVariant::CompleteGraph: return "complete";
  }
  return "?";
}

MqcVariant parse_variant(const std::string& s) {
  if (s == "ghz") return MqcVariant::Ghz;
  if (s == "star") return MqcVariant::StarGraph;
  if (s == "complete") return MqcVariant::CompleteGraph;
  throw std::invalid_argument("unknown variant '" + s + "' (expected ghz, star or complete)");
}

PhiGrid PhiGrid::make(int q_max) {
  if (q_max < 1) throw std::invalid_argument("q_max must be >= 1");
  PhiGrid g;
  g.q_max = q_max;
  g.angles.resize(2 * static_cast<std::size_t>(q_max));
  for (std::size_t j = 0; j < g.angles.size(); ++j) {
    g.angles[j] = std::numbers::pi * static_cast<double>(j) / q_max;
  }
  return g;
}

PhiGrid phi_grid(int num_qubits) {
  if (num_qubits < 1) throw std::invalid_argument("phi grid needs N >= 1");
  return PhiGrid::make(num_qubits + 1);
}

namespace {

using Layer = std::vector<Gate>;

Circuit make_circuit(const EntanglingPlan& plan, const std::vector<Layer>& layers) {
  Circuit c(plan.size());
  for (const Layer& l : layers) c.add_moment(l);
  c.set_physical_qubits(plan.qubits);
  return c;
}

std::vector<Layer> ghz_prep_layers(const EntanglingPlan& plan) {
  plan.validate();
  std::vector<Layer> layers{{Gate::h(0)}};
  for (const auto& moment : plan.schedule) {
    Layer l;
    for (const CxPair& p : moment) l.push_back(Gate::cx(plan.logical(p.control), plan.logical(p.target)));
    layers.push_back(std::move(l));
  }
  return layers;
}

// H on all, then CZ = H(t)·CX·H(t) on each edge, edges packed greedily
// into rounds of disjoint pairs.
std::vector<Layer> graph_prep_layers(const EntanglingPlan& plan, MqcVariant variant) {
  plan.validate();
  const int n = plan.size();
  std::vector<std::pair<int, int>> edges;
  if (variant == MqcVariant::StarGraph) {
    for (int q = 1; q < n; ++q) edges.emplace_back(0, q);
  } else {
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) edges.emplace_back(a, b);
    }
  }
  std::vector<std::vector<std::pair<int, int>>> rounds;
  std::vector<std::set<int>> used;
  for (const auto& e : edges) {
    std::size_t r = 0;
    while (r < rounds.size() && (used[r].count(e.first) || used[r].count(e.second))) ++r;
    if (r == rounds.size()) {
      rounds.emplace_back();
      used.emplace_back();
    }
    rounds[r].push_back(e);
    used[r].insert({e.first, e.second});
  }
  Layer all_h;
  for (int q = 0; q < n; ++q) all_h.push_back(Gate::h(q));
  std::vector<Layer> layers{all_h};
  for (const auto& round : rounds) {
    Layer h, cx;
    for (const auto& [a, b] : round) {
      h.push_back(Gate::h(b));
      cx.push_back(Gate::cx(a, b));
    }
    layers.push_back(h);
    layers.push_back(cx);
    layers.push_back(h);
  }
  return layers;
}

std::vector<Layer> inverse_layers(const std::vector<Layer>& layers) {
  std::vector<Layer> inv;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    Layer l;
    for (const Gate& g : *it) l.push_back(g.inverse());
    inv.push_back(std::move(l));
  }
  return inv;
}

std::vector<Layer> rotation_layers(int n, double phi, MqcVariant variant) {
  Layer rz;
  for (int q = 0; q < n; ++q) rz.push_back(Gate::rz(q, phi));
  switch (variant) {
    case MqcVariant::Ghz:
      return {rz};
    case MqcVariant::StarGraph: {
      Layer h;
      for (int q = 1; q < n; ++q) h.push_back(Gate::h(q));
      if (h.empty()) return {rz};
      return {h, rz, h};
    }
    case MqcVariant::CompleteGraph: {
      // e^{-iπ/4 X} RZ(φ) e^{iπ/4 X}: the rightmost factor acts first.
      Layer before, after;
      for (int q = 0; q < n; ++q) {
        before.push_back(Gate::rxy(q, -std::numbers::pi / 2.0, 0.0));
        after.push_back(Gate::rxy(q, std::numbers::pi / 2.0, 0.0));
      }
      return {before, rz, after};
    }
  }
  throw std::logic_error("unhandled variant");
}

}  // namespace

Circuit build_ghz_prep(const EntanglingPlan& plan) { return make_circuit(plan, ghz_prep_layers(plan)); }

Circuit build_mqc_circuit(const EntanglingPlan& plan, double phi, bool refocus, MqcVariant variant) {
  const std::vector<Layer> prep =
      variant == MqcVariant::Ghz ? ghz_prep_layers(plan) : graph_prep_layers(plan, variant);
  std::vector<Layer> layers = prep;
  if (refocus) {
    Layer x;
    for (int q = 0; q < plan.size(); ++q) x.push_back(Gate::x(q));
    layers.push_back(std::move(x));
  }
  for (Layer& l : rotation_layers(plan.size(), phi, variant)) layers.push_back(std::move(l));
  for (Layer& l : inverse_layers(prep)) layers.push_back(std::move(l));
  Circuit c = make_circuit(plan, layers);
  c.measure_all();
  return c;
}

Circuit build_parity_circuit(const EntanglingPlan& plan, double phi) {
  std::vector<Layer> layers = ghz_prep_layers(plan);
  Layer rot;
  for (int q = 0; q < plan.size(); ++q) rot.push_back(Gate::rxy(q, -std::numbers::pi / 2.0, phi));
  layers.push_back(std::move(rot));
  Circuit c = make_circuit(plan, layers);
  c.measure_all();
  return c;
}

Circuit build_populations_circuit(const EntanglingPlan& plan) {
  Circuit c = build_ghz_prep(plan);
  c.measure_all();
  return c;
}

namespace {

struct TreeSchedule {
  int moments = 0;
  std::vector<std::vector<CxPair>> schedule;
};

// Optimal broadcast schedule on a fixed rooted tree: every node feeds its
// children in decreasing order of their subtree completion time.
TreeSchedule schedule_tree(int root, const std::map<int, int>& parent) {
  std::map<int, std::vector<int>> children;
  for (const auto& [child, par] : parent) children[par].push_back(child);
  std::map<int, int> finish;  // moments needed to saturate the subtree
  std::map<int, std::vector<int>> ordered;

  // Post-order via explicit stack.
  std::vector<std::pair<int, bool>> stack{{root, false}};
  while (!stack.empty()) {
    auto [v, expanded] = stack.back();
    stack.pop_back();
    if (!expanded) {
      stack.emplace_back(v, true);
      for (int c : children[v]) stack.emplace_back(c, false);
      continue;
    }
    std::vector<int> kids = children[v];
    std::sort(kids.begin(), kids.end(), [&](int a, int b) {
      return finish[a] != finish[b] ? finish[a] > finish[b] : a < b;
    });
    int t = 0;
    for (std::size_t i = 0; i < kids.size(); ++i) t = std::max(t, static_cast<int>(i) + 1 + finish[kids[i]]);
    finish[v] = t;
    ordered[v] = std::move(kids);
  }

  TreeSchedule out;
  out.moments = finish[root];
  out.schedule.resize(static_cast<std::size_t>(out.moments));
  std::queue<std::pair<int, int>> q;  // (node, moment it became entangled)
  q.emplace(root, 0);
  while (!q.empty()) {
    auto [v, start] = q.front();
    q.pop();
    const auto& kids = ordered[v];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const int m = start + static_cast<int>(i);  // 0-based moment index
      out.schedule[static_cast<std::size_t>(m)].push_back(CxPair{v, kids[i]});
      q.emplace(kids[i], m + 1);
    }
  }
  for (auto& moment : out.schedule) {
    std::sort(moment.begin(), moment.end(),
              [](const CxPair& a, const CxPair& b) { return a.control < b.control; });
  }
  return out;
}

}  // namespace

EntanglingPlan auto_plan(const DeviceModel& device, std::span<const int> qubits) {
  if (qubits.empty()) throw std::invalid_argument("auto_plan needs at least one qubit");
  std::set<int> members;
  for (int q : qubits) {
    if (q < 0 || q >= device.num_qubits()) {
      throw std::invalid_argument("qubit " + std::to_string(q) + " is not on the device");
    }
    if (!members.insert(q).second) throw std::invalid_argument("qubit list repeats " + std::to_string(q));
  }
  const int root = qubits[0];

  // Breadth-first levels within the induced subgraph.
  std::map<int, int> level{{root, 0}};
  std::queue<int> frontier;
  frontier.push(root);
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int w : device.neighbors(v)) {
      if (members.count(w) && !level.count(w)) {
        level[w] = level[v] + 1;
        frontier.push(w);
      }
    }
  }
  if (level.size() != members.size()) throw std::invalid_argument("qubit list induces a disconnected subgraph");

  // Candidate parents: neighbours one level closer to the root, ascending.
  std::vector<int> nodes;
  std::map<int, std::vector<int>> candidates;
  for (const auto& [v, d] : level) {
    if (v == root) continue;
    for (int w : device.neighbors(v)) {
      if (members.count(w) && level[w] == d - 1) candidates[v].push_back(w);
    }
    nodes.push_back(v);
  }

  std::map<int, int> parent;
  for (int v : nodes) parent[v] = candidates[v].front();
  std::vector<int> flexible;
  for (int v : nodes) {
    if (candidates[v].size() > 1) flexible.push_back(v);
  }

  TreeSchedule best = schedule_tree(root, parent);
  double combos = 1.0;
  for (int v : flexible) combos *= static_cast<double>(candidates[v].size());

  if (combos <= 4096.0) {
    // Exhaustive over parent choices; the first minimum in odometer order wins.
    std::vector<std::size_t> pick(flexible.size(), 0);
    std::map<int, int> best_parent = parent;
    while (true) {
      for (std::size_t i = 0; i < flexible.size(); ++i) parent[flexible[i]] = candidates[flexible[i]][pick[i]];
      TreeSchedule s = schedule_tree(root, parent);
      if (s.moments < best.moments) {
        best = std::move(s);
        best_parent = parent;
      }
      std::size_t i = 0;
      while (i < flexible.size() && ++pick[i] == candidates[flexible[i]].size()) pick[i++] = 0;
      if (i == flexible.size()) break;
    }
  } else {
    // Coordinate descent from the lowest-index choice.
    bool improved = true;
    while (improved) {
      improved = false;
      for (int v : flexible) {
        const int original = parent[v];
        for (int c : candidates[v]) {
          if (c == original) continue;
          parent[v] = c;
          TreeSchedule s = schedule_tree(root, parent);
          if (s.moments < best.moments) {
            best = std::move(s);
            improved = true;
            break;
          }
          parent[v] = original;
        }
      }
    }
  }

  EntanglingPlan plan;
  plan.qubits.assign(qubits.begin(), qubits.end());
  plan.schedule = std::move(best.schedule);
  plan.validate(device);
  return plan;
}

EntanglingPlan system_one_18q_plan() {
  EntanglingPlan plan;
  plan.qubits = system_one_ghz_qubits(18);
  plan.schedule = {
      {{5, 10}},
      {{5, 6}, {10, 11}},
      {{5, 0}, {6, 7}, {11, 12}},
      {{0, 1}, {7, 8}, {10, 15}},
      {{1, 2}, {8, 9}, {12, 13}, {15, 16}},
      {{2, 3}, {9, 4}, {13, 14}, {16, 17}},
  };
  return plan;
}

void stamp_device_durations(Circuit& circuit, const DeviceModel& device) {
  const std::vector<int> phys = circuit.physical_qubits();
  circuit.stamp_durations([&](const Gate& g) {
    switch (g.kind) {
      case GateKind::RZ:
        return 0.0;
      case GateKind::CX:
        return device.edge(phys.at(static_cast<std::size_t>(g.qubits[0])),
                           phys.at(static_cast<std::size_t>(g.qubits[1])))
            .duration_ns;
      default:
        return device.qubit(phys.at(static_cast<std::size_t>(g.qubits[0]))).gate_duration_ns;
    }
  });
}

std::vector<int> default_qubits(const DeviceModel& device, int n) {
  if (n < 1 || n > device.num_qubits()) {
    throw std::invalid_argument("cannot pick " + std::to_string(n) + " qubits on a " +
                                std::to_string(device.num_qubits()) + "-qubit device");
  }
  const auto& order = device.ghz_order();
  if (static_cast<int>(order.size()) >= n) return {order.begin(), order.begin() + n};
  std::vector<int> out{0};
  std::vector<bool> seen(static_cast<std::size_t>(device.num_qubits()), false);
  seen[0] = true;
  for (std::size_t head = 0; head < out.size() && static_cast<int>(out.size()) < n; ++head) {
    for (int nb : device.neighbors(out[head])) {
      if (seen[static_cast<std::size_t>(nb)] || static_cast<int>(out.size()) >= n) continue;
      seen[static_cast<std::size_t>(nb)] = true;
      out.push_back(nb);
    }
  }
  if (static_cast<int>(out.size()) < n) throw std::invalid_argument("device graph has too few connected qubits");
  return out;
}

}  // namespace mqc

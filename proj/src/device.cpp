#include "mqc/device.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include <yaml-cpp/yaml.h>

namespace mqc {

DeviceModel::DeviceModel(std::string name, std::vector<QubitParams> qubits,
                         std::vector<Edge> edges, EdgeParams default_edge)
    : name_(std::move(name)),
      qubits_(std::move(qubits)),
      edges_(std::move(edges)),
      default_edge_(default_edge) {
  validate();
  adjacency_.resize(qubits_.size());
  for (const Edge& e : edges_) {
    adjacency_[static_cast<std::size_t>(e.a)].push_back(e.b);
    adjacency_[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
}

void DeviceModel::validate() const {
  if (qubits_.empty()) throw std::invalid_argument("device has no qubits");
  for (std::size_t q = 0; q < qubits_.size(); ++q) {
    const QubitParams& p = qubits_[q];
    const std::string where = "qubit " + std::to_string(q) + ": ";
    if (!(p.t1_us > 0.0) || !(p.t2_us > 0.0)) throw std::invalid_argument(where + "T1 and T2 must be positive");
    if (p.t2_us > 2.0 * p.t1_us) throw std::invalid_argument(where + "T2 exceeds 2*T1");
    if (!(p.readout_fidelity > 0.0 && p.readout_fidelity <= 1.0)) {
      throw std::invalid_argument(where + "readout fidelity must be in (0, 1]");
    }
    if (!(p.gate_error >= 0.0 && p.gate_error < 1.0)) {
      throw std::invalid_argument(where + "gate error must be in [0, 1)");
    }
    if (!(p.gate_duration_ns >= 0.0)) throw std::invalid_argument(where + "negative gate duration");
  }
  auto check_edge_params = [](const EdgeParams& p) {
    if (!(p.gate_error >= 0.0 && p.gate_error < 1.0)) throw std::invalid_argument("edge gate error must be in [0, 1)");
    if (!(p.duration_ns >= 0.0)) throw std::invalid_argument("negative edge duration");
  };
  check_edge_params(default_edge_);
  const int n = num_qubits();
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (e.a < 0 || e.b < 0 || e.a >= n || e.b >= n) throw std::invalid_argument("edge references a missing qubit");
    if (e.a == e.b) throw std::invalid_argument("self-loop edge");
    for (std::size_t j = 0; j < i; ++j) {
      const Edge& f = edges_[j];
      if ((f.a == e.a && f.b == e.b) || (f.a == e.b && f.b == e.a)) {
        throw std::invalid_argument("duplicate edge " + std::to_string(e.a) + "-" + std::to_string(e.b));
      }
    }
    check_edge_params(e.params);
  }
}

const QubitParams& DeviceModel::qubit(int q) const {
  if (q < 0 || q >= num_qubits()) throw std::out_of_range("device qubit out of range");
  return qubits_[static_cast<std::size_t>(q)];
}

bool DeviceModel::connected(int a, int b) const {
  if (a < 0 || a >= num_qubits()) return false;
  const auto& adj = adjacency_[static_cast<std::size_t>(a)];
  return std::binary_search(adj.begin(), adj.end(), b);
}

const EdgeParams& DeviceModel::edge(int a, int b) const {
  for (const Edge& e : edges_) {
    if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) return e.params;
  }
  return default_edge_;
}

std::vector<int> DeviceModel::neighbors(int q) const {
  if (q < 0 || q >= num_qubits()) throw std::out_of_range("device qubit out of range");
  return adjacency_[static_cast<std::size_t>(q)];
}

DeviceModel DeviceModel::with_uniform_qubits(const QubitParams& params) const {
  DeviceModel out(name_, std::vector<QubitParams>(qubits_.size(), params), edges_, default_edge_);
  out.ghz_order_ = ghz_order_;
  return out;
}

DeviceModel DeviceModel::with_uniform_edges(const EdgeParams& params) const {
  std::vector<Edge> edges = edges_;
  for (Edge& e : edges) e.params = params;
  DeviceModel out(name_, qubits_, std::move(edges), params);
  out.ghz_order_ = ghz_order_;
  return out;
}

namespace {

template <typename T>
T get_or(const YAML::Node& node, const char* key, T fallback) {
  return node[key] ? node[key].as<T>() : fallback;
}

}  // namespace

void DeviceModel::set_ghz_order(std::vector<int> order) {
  std::vector<bool> seen(qubits_.size(), false);
  for (int q : order) {
    if (q < 0 || q >= num_qubits() || seen[static_cast<std::size_t>(q)]) {
      throw std::invalid_argument("ghz_order must list distinct device qubits");
    }
    seen[static_cast<std::size_t>(q)] = true;
  }
  ghz_order_ = std::move(order);
}

DeviceModel parse_device(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("device config: ") + e.what());
  }
  try {
    const std::string name = get_or<std::string>(root, "name", "device");
    const YAML::Node defaults = root["defaults"];
    QubitParams qdef;
    EdgeParams edef;
    if (defaults) {
      qdef.gate_error = get_or(defaults, "one_qubit_error", qdef.gate_error);
      qdef.gate_duration_ns = get_or(defaults, "one_qubit_duration_ns", qdef.gate_duration_ns);
      edef.gate_error = get_or(defaults, "two_qubit_error", edef.gate_error);
      edef.duration_ns = get_or(defaults, "two_qubit_duration_ns", edef.duration_ns);
    }
    const YAML::Node qnodes = root["qubits"];
    if (!qnodes || !qnodes.IsSequence()) throw std::invalid_argument("device config: missing 'qubits' list");
    std::vector<QubitParams> qubits(qnodes.size());
    std::vector<bool> seen(qnodes.size(), false);
    for (const YAML::Node& q : qnodes) {
      const int id = q["id"].as<int>();
      if (id < 0 || static_cast<std::size_t>(id) >= qubits.size() || seen[static_cast<std::size_t>(id)]) {
        throw std::invalid_argument("device config: qubit ids must be 0..n-1 without repeats");
      }
      seen[static_cast<std::size_t>(id)] = true;
      QubitParams p = qdef;
      p.frequency_ghz = get_or(q, "frequency_ghz", p.frequency_ghz);
      p.t1_us = q["t1_us"].as<double>();
      p.t2_us = q["t2_echo_us"].as<double>();
      p.readout_fidelity = get_or(q, "readout_fidelity", p.readout_fidelity);
      p.gate_error = get_or(q, "gate_error", p.gate_error);
      p.gate_duration_ns = get_or(q, "gate_duration_ns", p.gate_duration_ns);
      qubits[static_cast<std::size_t>(id)] = p;
    }
    std::vector<Edge> edges;
    if (const YAML::Node enodes = root["edges"]) {
      for (const YAML::Node& e : enodes) {
        const YAML::Node pair = e["pair"];
        if (!pair || pair.size() != 2) throw std::invalid_argument("device config: edge needs 'pair: [a, b]'");
        Edge edge{pair[0].as<int>(), pair[1].as<int>(), edef};
        edge.params.gate_error = get_or(e, "error", edef.gate_error);
        edge.params.duration_ns = get_or(e, "duration_ns", edef.duration_ns);
        edges.push_back(edge);
      }
    }
    DeviceModel device(name, std::move(qubits), std::move(edges), edef);
    if (const YAML::Node order = root["ghz_order"]) device.set_ghz_order(order.as<std::vector<int>>());
    return device;
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("device config: ") + e.what());
  }
}

DeviceModel load_device(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open device config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_device(ss.str());
}

std::string device_to_yaml(const DeviceModel& device) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << device.name();
  out << YAML::Key << "defaults" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "two_qubit_error" << YAML::Value << device.default_edge().gate_error;
  out << YAML::Key << "two_qubit_duration_ns" << YAML::Value << device.default_edge().duration_ns;
  out << YAML::EndMap;
  out << YAML::Key << "qubits" << YAML::Value << YAML::BeginSeq;
  for (int q = 0; q < device.num_qubits(); ++q) {
    const QubitParams& p = device.qubit(q);
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << q;
    out << YAML::Key << "frequency_ghz" << YAML::Value << p.frequency_ghz;
    out << YAML::Key << "t1_us" << YAML::Value << p.t1_us;
    out << YAML::Key << "t2_echo_us" << YAML::Value << p.t2_us;
    out << YAML::Key << "readout_fidelity" << YAML::Value << p.readout_fidelity;
    out << YAML::Key << "gate_error" << YAML::Value << p.gate_error;
    out << YAML::Key << "gate_duration_ns" << YAML::Value << p.gate_duration_ns;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "edges" << YAML::Value << YAML::BeginSeq;
  for (const Edge& e : device.edges()) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "pair" << YAML::Value << YAML::Flow << YAML::BeginSeq << e.a << e.b << YAML::EndSeq;
    out << YAML::Key << "error" << YAML::Value << e.params.gate_error;
    out << YAML::Key << "duration_ns" << YAML::Value << e.params.duration_ns;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  if (!device.ghz_order().empty()) {
    out << YAML::Key << "ghz_order" << YAML::Value << YAML::Flow << device.ghz_order();
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

namespace {

struct QubitRow {
  double freq, t1, t2, readout_percent;
};

constexpr QubitRow kSystemOne[20] = {
    {4.666, 88.1, 76.6, 98.1}, {4.760, 69.0, 75.7, 96.4}, {4.609, 58.3, 65.4, 97.2},
    {5.031, 60.9, 73.0, 79.7}, {4.657, 69.1, 78.1, 96.6}, {4.752, 74.4, 71.9, 95.9},
    {4.829, 60.2, 65.8, 98.1}, {4.698, 80.7, 79.5, 96.4}, {4.893, 64.0, 75.7, 96.5},
    {4.731, 63.3, 70.7, 93.0}, {4.840, 59.1, 62.9, 96.6}, {4.755, 64.1, 56.3, 97.8},
    {4.621, 85.4, 87.2, 96.6}, {4.859, 69.4, 83.2, 93.6}, {4.394, 101.6, 86.6, 93.5},
    {4.693, 76.1, 74.3, 98.1}, {4.512, 70.3, 80.1, 95.0}, {4.719, 66.4, 79.2, 97.8},
    {4.321, 73.6, 80.7, 93.0}, {4.593, 83.3, 85.5, 97.6},
};

constexpr int kSystemOneEdges[][2] = {
    {0, 1},   {1, 2},   {2, 3},   {3, 4},   {0, 5},   {4, 9},   {5, 6},   {6, 7},
    {7, 8},   {8, 9},   {5, 10},  {7, 12},  {9, 14},  {10, 11}, {11, 12}, {12, 13},
    {13, 14}, {10, 15}, {14, 19}, {15, 16}, {16, 17}, {17, 18}, {18, 19},
};

constexpr int kGhzOrder[20] = {5, 10, 6, 11, 0, 12, 7, 15, 1, 8, 13, 16, 2, 9, 17, 4, 14, 3, 18, 19};

constexpr double kOneQubitError = 5e-4;
constexpr double kTwoQubitError = 0.02;
constexpr double kOneQubitNs = 50.0;

}  // namespace

DeviceModel system_one_device() {
  std::vector<QubitParams> qubits;
  for (const QubitRow& r : kSystemOne) {
    QubitParams p;
    p.frequency_ghz = r.freq;
    p.t1_us = r.t1;
    p.t2_us = r.t2;
    p.readout_fidelity = r.readout_percent / 100.0;
    p.gate_error = kOneQubitError;
    p.gate_duration_ns = kOneQubitNs;
    qubits.push_back(p);
  }
  const EdgeParams edge{kTwoQubitError, 400.0};
  std::vector<Edge> edges;
  for (const auto& e : kSystemOneEdges) edges.push_back(Edge{e[0], e[1], edge});
  DeviceModel device("ibm-q-system-one", std::move(qubits), std::move(edges), edge);
  device.set_ghz_order(std::vector<int>(std::begin(kGhzOrder), std::end(kGhzOrder)));
  return device;
}

QubitParams system_one_median_qubit() {
  QubitParams p;
  p.frequency_ghz = 4.708;
  p.t1_us = 69.2;
  p.t2_us = 76.2;
  p.readout_fidelity = 0.966;
  p.gate_error = kOneQubitError;
  p.gate_duration_ns = kOneQubitNs;
  return p;
}

std::vector<int> system_one_ghz_qubits(int n) {
  if (n < 1 || n > 20) throw std::invalid_argument("System One GHZ size must be in [1, 20]");
  return std::vector<int>(kGhzOrder, kGhzOrder + n);
}

}  // namespace mqc

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mqc {

struct QubitParams {
  double frequency_ghz = 5.0;
  double t1_us = 100.0;
  double t2_us = 100.0;  // echo T2
  double readout_fidelity = 1.0;
  double gate_error = 0.0;  // single-qubit average gate error
  double gate_duration_ns = 50.0;
};

struct EdgeParams {
  double gate_error = 0.0;  // CX average gate error
  double duration_ns = 400.0;
};

struct Edge {
  int a = 0;
  int b = 0;
  EdgeParams params;
};

/// Qubit parameters and coupling graph of a device. Two-qubit gates between
/// unconnected qubits (graph-state variants) fall back to `default_edge`.
class DeviceModel {
 public:
  DeviceModel(std::string name, std::vector<QubitParams> qubits, std::vector<Edge> edges,
              EdgeParams default_edge = {});

  const std::string& name() const { return name_; }
  int num_qubits() const { return static_cast<int>(qubits_.size()); }
  const QubitParams& qubit(int q) const;
  const std::vector<Edge>& edges() const { return edges_; }
  const EdgeParams& default_edge() const { return default_edge_; }

  bool connected(int a, int b) const;
  /// Parameters of the (a, b) coupler, or default_edge() when not connected.
  const EdgeParams& edge(int a, int b) const;
  std::vector<int> neighbors(int q) const;

  /// Preferred order for growing GHZ states (root first); may be empty.
  const std::vector<int>& ghz_order() const { return ghz_order_; }
  /// Throws std::invalid_argument on unknown or repeated qubits.
  void set_ghz_order(std::vector<int> order);

  /// Copy with every qubit set to `params` (topology and edges unchanged).
  DeviceModel with_uniform_qubits(const QubitParams& params) const;
  /// Copy with every coupler (and the default) set to `params`.
  DeviceModel with_uniform_edges(const EdgeParams& params) const;

 private:
  void validate() const;

  std::string name_;
  std::vector<QubitParams> qubits_;
  std::vector<Edge> edges_;
  EdgeParams default_edge_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<int> ghz_order_;
};

/// Reads the YAML device schema documented in configs/system_one.yaml.
DeviceModel load_device(const std::string& path);
DeviceModel parse_device(const std::string& yaml_text);
std::string device_to_yaml(const DeviceModel& device);

/// 20-qubit IBM Q System One: measured qubit table and coupling map.
/// Gate errors are uniform placeholders (see README).
DeviceModel system_one_device();
/// Median qubit parameters of system_one_device().
QubitParams system_one_median_qubit();

/// Physical qubits entangled for an n-qubit GHZ state (root first), 1 ≤ n ≤ 20.
std::vector<int> system_one_ghz_qubits(int n);

}  // namespace mqc

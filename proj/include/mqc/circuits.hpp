#pragma once

#include <span>
#include <string>
#include <vector>

#include "mqc/device.hpp"
#include "mqc/statevector.hpp"

namespace mqc {

struct CxPair {
  int control = 0;
  int target = 0;
  friend bool operator==(const CxPair&, const CxPair&) = default;
};

/// Fan-out tree that spreads the root's superposition over `qubits`.
/// Qubit ids are physical; circuits built from a plan act on
/// `qubits.size()` logical qubits where logical i is `qubits[i]`.
struct EntanglingPlan {
  std::vector<int> qubits;
  std::vector<std::vector<CxPair>> schedule;

  int size() const { return static_cast<int>(qubits.size()); }
  int root() const { return qubits.at(0); }
  int logical(int physical) const;
  std::size_t depth() const { return schedule.size(); }

  /// Throws std::invalid_argument unless the schedule is a spanning tree of
  /// `qubits` rooted at the first entry, every target is hit exactly once,
  /// only after its control holds the superposition, and no qubit is used
  /// twice in a moment.
  void validate() const;
  /// validate() plus: every pair is a coupler of `device`.
  void validate(const DeviceModel& device) const;
};

enum class MqcVariant { Ghz, StarGraph, CompleteGraph };

std::string to_string(MqcVariant v);
MqcVariant parse_variant(const std::string& s);

/// φ_j = π j / q_max for j = 0 .. 2 q_max − 1.
struct PhiGrid {
  int q_max = 0;
  std::vector<double> angles;

  static PhiGrid make(int q_max);
  std::size_t size() const { return angles.size(); }
  friend bool operator==(const PhiGrid&, const PhiGrid&) = default;
};

/// Grid for an n-qubit sweep: q_max = n + 1.
PhiGrid phi_grid(int num_qubits);

/// H on the root followed by the CX moments of the plan.
Circuit build_ghz_prep(const EntanglingPlan& plan);

/// prep, optional X layer, variant rotation, inverse prep, measure all.
Circuit build_mqc_circuit(const EntanglingPlan& plan, double phi, bool refocus,
                          MqcVariant variant = MqcVariant::Ghz);

/// GHZ prep followed by exp(iπ/4 (cos φ X + sin φ Y)) on every qubit.
Circuit build_parity_circuit(const EntanglingPlan& plan, double phi);

/// GHZ prep then measure all; gives the all-zero and all-one populations.
Circuit build_populations_circuit(const EntanglingPlan& plan);

/// Spanning tree over `qubits` (root first) with the fewest CX moments
/// found by breadth-first fan-out. Throws if the induced subgraph is
/// disconnected or a qubit is unknown.
EntanglingPlan auto_plan(const DeviceModel& device, std::span<const int> qubits);

/// Sets every gate's duration from the device: per-qubit 1Q durations,
/// per-coupler CX durations, RZ stays virtual.
void stamp_device_durations(Circuit& circuit, const DeviceModel& device);

/// n physical qubits for a GHZ state: a prefix of the device's ghz_order()
/// when it is long enough, otherwise breadth-first from qubit 0.
std::vector<int> default_qubits(const DeviceModel& device, int n);

/// The 18-qubit schedule used on System One (six CX moments from qubit 5).
EntanglingPlan system_one_18q_plan();

}  // namespace mqc

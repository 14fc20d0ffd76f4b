#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mqc/channels.hpp"
#include "mqc/counts.hpp"
#include "mqc/device.hpp"
#include "mqc/seeds.hpp"
#include "mqc/statevector.hpp"

namespace mqc {

/// Readout confusion. Per-qubit matrices are
/// [[p(0|0), p(0|1)], [p(1|0), p(1|1)]] (columns = prepared value). An
/// optional full matrix over the whole register (n ≤ 10) replaces them when
/// present; column j is the outcome distribution for prepared state j.
struct ReadoutModel {
  std::vector<Eigen::Matrix2d> per_qubit;
  std::optional<Eigen::MatrixXd> full;

  static ReadoutModel ideal(int num_qubits);
  /// p(1|0) = p(0|1) = error for each qubit.
  static ReadoutModel symmetric(const std::vector<double>& errors);
  static ReadoutModel from_full(const Eigen::MatrixXd& matrix);

  int num_qubits() const;
  bool is_ideal() const;
  /// Throws std::invalid_argument unless entries are in [0,1] and columns
  /// sum to 1 within 1e-9.
  void validate() const;

  double probability(Bits measured, Bits prepared) const;
  Bits sample(Bits prepared, ShotRng& rng) const;
  /// Pushes a full 2^n outcome distribution through the confusion model.
  std::vector<double> apply(std::vector<double> probabilities) const;
  /// Restriction to the given qubits, in order (per-qubit form only).
  ReadoutModel select(const std::vector<int>& qubits) const;
};

struct NoiseToggles {
  bool gates = true;
  bool idle = true;
  /// Standard deviation of the quasi-static Z drift rate, rad/ns. Zero
  /// disables drift.
  double drift_sigma = 0.0;
  bool readout = true;
};

/// A channel applied to logical qubits of a circuit.
struct ChannelOp {
  std::vector<int> qubits;  // 1 or 2 logical qubits
  const KrausChannel* channel = nullptr;
};

/// Device-derived noise: gate errors as depolarizing ∘ thermal relaxation
/// filled to the device's gate error, thermal relaxation on idle qubits,
/// quasi-static drift and readout confusion. Lookups take physical qubits.
class NoiseModel {
 public:
  NoiseModel(DeviceModel device, NoiseToggles toggles);

  /// No noise at all on an n-qubit identity-mapped register.
  static NoiseModel noiseless(int num_qubits);

  const DeviceModel& device() const { return device_; }
  const NoiseToggles& toggles() const { return toggles_; }
  bool has_quantum_noise() const;

  /// Readout model for a circuit register, or nullopt when readout is off.
  std::optional<ReadoutModel> readout_for(const std::vector<int>& physical) const;
  /// Overrides the device-derived readout for the logical register.
  void set_readout(ReadoutModel readout) { readout_override_ = std::move(readout); }

  /// Channels following `gate`, in application order. Empty for RZ or when
  /// gate noise is off.
  std::vector<ChannelOp> gate_channels(const Gate& gate, const std::vector<int>& physical) const;
  /// Relaxation of an idle logical qubit, or nullptr when idle noise is off
  /// or the idle time is zero.
  const KrausChannel* idle_channel(int logical, double idle_ns, const std::vector<int>& physical) const;

  /// Average gate error of the relaxation part alone (coherence limit) and
  /// the depolarizing parameter added on top, for a CX on (a, b).
  std::pair<double, double> two_qubit_error_budget(int a, int b, double duration_ns) const;

 private:
  struct ChannelCache;

  const KrausChannel& relaxation(int physical, double duration_ns) const;
  const KrausChannel& depolarizing(const std::vector<int>& physical, double duration_ns) const;

  DeviceModel device_;
  NoiseToggles toggles_;
  std::optional<ReadoutModel> readout_override_;
  // Channels are pure functions of the (immutable) device, so copies may
  // share one cache.
  std::shared_ptr<ChannelCache> cache_;
};

struct TrajectoryOptions {
  int workers = 1;
};

/// Monte Carlo unraveling of `circuit` under `noise`. Shot s uses the
/// stream derive_seed({seed, s}); counts do not depend on `workers`.
CountsTable run_trajectories(const Circuit& circuit, const NoiseModel& noise, std::uint64_t shots,
                             std::uint64_t seed, TrajectoryOptions options = {});

}  // namespace mqc

#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mqc/circuits.hpp"
#include "mqc/noise.hpp"
#include "mqc/statevector.hpp"

namespace mqc {

inline constexpr int kMaxDensityQubits = 8;

/// Density matrix of n ≤ 8 qubits. Row/column index is the basis bitstring
/// (qubit 0 = least significant bit).
class DensityMatrix {
 public:
  /// |0…0⟩⟨0…0|.
  explicit DensityMatrix(int num_qubits);
  /// Throws std::invalid_argument unless the matrix is Hermitian within
  /// 1e-10, has unit trace within 1e-10 and no eigenvalue below −1e-8.
  DensityMatrix(int num_qubits, Eigen::MatrixXcd matrix);
  static DensityMatrix from_state(const StateVector& state);

  int num_qubits() const { return num_qubits_; }
  Eigen::Index dim() const { return matrix_.rows(); }
  const Eigen::MatrixXcd& matrix() const { return matrix_; }
  cplx operator()(Bits row, Bits col) const;

  void apply(const Gate& gate);
  /// Applies a one- or two-qubit channel to the listed qubits.
  void apply(const KrausChannel& channel, const std::vector<int>& qubits);

  double trace() const;
  double purity() const;
  /// ⟨ψ|ρ|ψ⟩.
  double overlap(const StateVector& state) const;
  /// Diagonal, clipped at zero.
  std::vector<double> probabilities() const;

 private:
  int num_qubits_;
  Eigen::MatrixXcd matrix_;
};

/// Exact evolution of |0…0⟩⟨0…0| through `circuit` with the same channel
/// placement as run_trajectories. Drift is replaced by its per-moment
/// dephasing average, coherence factor exp(−σ² τ² / 2) for a moment of
/// length τ. Throws std::invalid_argument for more than 8 qubits.
DensityMatrix density_oracle(const Circuit& circuit, const NoiseModel& noise);

/// Outcome distribution over the circuit's measured qubits (all qubits when
/// none are marked), pushed through `readout` when given. Index = measured
/// bitstring.
std::vector<double> measured_distribution(const DensityMatrix& rho, const Circuit& circuit,
                                          const std::optional<ReadoutModel>& readout = std::nullopt);

/// Exact oracle distribution including the noise model's readout confusion.
std::vector<double> oracle_distribution(const Circuit& circuit, const NoiseModel& noise);

/// I_q = Tr(ρ_q ρ_−q) for q = −n .. n, where ρ_q keeps the elements
/// |a⟩⟨b| with excitations(a) − excitations(b) = q.
struct MqcDecomposition {
  int num_qubits = 0;
  std::vector<double> values;  // index q + n

  double at(int q) const { return values.at(static_cast<std::size_t>(q + num_qubits)); }
  double sum() const;
};

/// Also checks that each ρ_q picks up the phase e^{−iqφ} under the
/// collective rotation and that Tr(ρ_q ρ_p) vanishes for p ≠ −q; throws
/// std::logic_error if either fails.
MqcDecomposition mqc_decompose(const DensityMatrix& rho);

/// S_φ = Tr(ρ_φ ρ) with ρ_φ = e^{−iφN̂} ρ e^{iφN̂}, for every angle of `grid`.
std::vector<double> overlap_signal(const DensityMatrix& rho, const PhiGrid& grid);

/// (|0…0⟩ + |1…1⟩)/√2.
StateVector ghz_state(int num_qubits);

}  // namespace mqc

#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

namespace mqc {

/// Completely positive map in Kraus form on one or two qubits. For two-qubit
/// channels the local basis index is bit(first qubit) + 2·bit(second qubit).
struct KrausChannel {
  int num_qubits = 1;
  std::vector<Eigen::MatrixXcd> ops;

  int dim() const { return 1 << num_qubits; }
  /// max |Σ K†K − I|.
  double completeness_error() const;
  bool is_complete(double tol = 1e-9) const { return completeness_error() <= tol; }
  bool is_identity(double tol = 1e-14) const;

  /// When every K†K is proportional to the identity the branch weights do
  /// not depend on the state; returns them in that case.
  std::optional<std::vector<double>> mixture_weights(double tol = 1e-12) const;

  static KrausChannel identity(int num_qubits);
};

/// `second` applied after `first`.
KrausChannel compose(const KrausChannel& second, const KrausChannel& first);
/// `low` acts on the first qubit of the pair, `high` on the second.
KrausChannel tensor(const KrausChannel& low, const KrausChannel& high);

/// Amplitude damping toward |0⟩ with p1 = 1 − e^{−t/T1}, plus pure dephasing
/// so the total coherence decay is e^{−t/T2}. T1, T2 in µs; duration in ns.
KrausChannel thermal_relaxation_channel(double t1_us, double t2_us, double duration_ns);

/// Keeps coherences scaled by `coherence_factor` ∈ [0, 1].
KrausChannel dephasing_channel(double coherence_factor);

/// ρ → (1 − λ) ρ + λ I/d, written over the Pauli basis.
KrausChannel depolarizing_channel(double lambda, int num_qubits);

/// Overlap of the Choi state with the maximally entangled state.
double process_fidelity(const KrausChannel& channel);
/// (d F_pro + 1) / (d + 1).
double average_gate_fidelity(const KrausChannel& channel);

struct DepolarizingFill {
  KrausChannel channel;  // depolarizing ∘ relaxation
  double lambda = 0.0;
  /// Relaxation alone already exceeds the requested error; lambda is 0.
  bool infeasible = false;
};

/// Chooses λ so depolarizing(λ) ∘ relaxation has average gate error
/// `gate_error`.
DepolarizingFill depolarizing_fill(double gate_error, const KrausChannel& relaxation);

}  // namespace mqc

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mqc/circuits.hpp"
#include "mqc/counts.hpp"

namespace mqc {

/// Fraction of shots that returned all zeros. Throws on an empty table.
double s_phi(const CountsTable& counts);
double s_phi(const Distribution& dist);

/// ⟨Z⊗…⊗Z⟩ estimated from counts: Σ (−1)^{excitations} frequency.
double parity_expectation(const CountsTable& counts);
double parity_expectation(const Distribution& dist);

/// A signal sampled on a PhiGrid, averaged over repetitions. Holds S_φ for
/// MQC sweeps and ⟨Z…Z⟩ for parity sweeps.
struct SweepResult {
  PhiGrid phis;
  std::vector<double> s_values;
  /// Standard error of the mean per point; missing for a single repetition.
  std::optional<std::vector<double>> s_stderr;
  int repetitions = 1;

  /// Throws std::invalid_argument if lengths disagree with the grid.
  void validate() const;
};

/// Mean and stderr (sample standard deviation / √reps) per grid point.
/// Inputs are treated as one repetition each. Throws on mismatched grids or
/// an empty list.
SweepResult aggregate_repetitions(std::span<const SweepResult> runs);

struct MqcSpectrum {
  int q_max = 0;
  std::vector<double> i_values;  // q = 0 .. q_max
  std::optional<std::vector<double>> i_stderr;

  double at(int q) const { return i_values.at(static_cast<std::size_t>(q)); }
  std::optional<double> stderr_at(int q) const;
};

/// I_q = |Σ_j e^{iqφ_j} S_j| / (2 q_max) for q = 0 .. q_max, with first-order
/// propagation of the per-point standard errors.
MqcSpectrum mqc_spectrum(const SweepResult& sweep);

struct FidelityBounds {
  double lower = 0.0;
  double upper = 0.0;
  double upper_raw = 0.0;  // before clamping to 1
};

/// lower = 2√I_N, upper = min(1, √(I_0/2) + √I_N). Negative inputs throw.
FidelityBounds fidelity_bounds(double i0, double i_n);

/// ½(P_0…0 + P_1…1) + √I_N, clamped to [0, 1].
double direct_fidelity(double p_allzero, double p_allone, double i_n);

struct Coherence {
  double value = 0.0;
  std::optional<double> stderr;
};

/// C = 2 |Σ_j e^{iNφ_j} P_j| / (2 q_max) from a parity sweep. Throws unless
/// the sweep grid is phi_grid(num_qubits).
Coherence parity_coherence(const SweepResult& parity, int num_qubits);

/// All-zero and all-one populations after GHZ preparation, with the
/// standard error of their mean when several repetitions exist.
struct Populations {
  double p_allzero = 0.0;
  double p_allone = 0.0;
  std::optional<double> half_sum_stderr;
};

Populations aggregate_populations(std::span<const Distribution> runs);

struct FidelityReport {
  double lower = 0.0;
  double upper = 0.0;
  double upper_raw = 0.0;
  std::optional<double> direct;
  bool entangled = false;  // lower > 0.5 or direct > 0.5
  std::optional<double> lower_stderr;
  std::optional<double> upper_stderr;
  std::optional<double> direct_stderr;
};

FidelityReport fidelity_report(const MqcSpectrum& spectrum, int num_qubits,
                               const std::optional<Populations>& populations = std::nullopt);

}  // namespace mqc

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mqc/analysis.hpp"
#include "mqc/counts.hpp"
#include "mqc/noise.hpp"

namespace mqc {

/// Readout calibration over an ordered label set. Entry (i, j) is the
/// probability of measuring labels[i] given that labels[j] was prepared, so
/// the forward model is A · v_true = v_measured. Columns of a truncated
/// matrix may sum to less than 1.
struct CalibrationMatrix {
  int num_qubits = 0;
  std::vector<Bits> labels;
  Eigen::MatrixXd matrix;

  std::size_t size() const { return labels.size(); }
  void validate() const;

  /// Header "measured\\prepared,<labels...>", then one row per measured
  /// state: label followed by K probabilities.
  std::string to_csv() const;
  static CalibrationMatrix from_csv(const std::string& text);
};

/// Full 2^n calibration (n ≤ 10). shots_per_state = 0 gives exact columns;
/// otherwise column j is estimated from that many readout draws seeded by
/// (seed, prepared label, shot).
CalibrationMatrix build_full_calibration(int num_qubits, const ReadoutModel& readout,
                                         std::uint64_t shots_per_state, std::uint64_t seed = 0);

/// Top-K bitstrings by total weight over all experiments. The all-zeros
/// string is always included; ties go to the smaller bitstring. The result
/// is sorted by bitstring.
std::vector<Bits> select_truncation_states(std::span<const CountsTable> experiments, std::size_t k);
/// Same ranking over normalized distributions (exact-probability runs).
std::vector<Bits> select_truncation_states(std::span<const Distribution> experiments, std::size_t k);

/// Calibration restricted to `labels`; outcomes outside the set are dropped.
/// Columns match those of build_full_calibration for the same seed.
CalibrationMatrix build_truncated_calibration(int num_qubits, std::vector<Bits> labels,
                                              const ReadoutModel& readout, std::uint64_t shots_per_state,
                                              std::uint64_t seed = 0);

struct SimplexLsqResult {
  Eigen::VectorXd x;
  double residual = 0.0;    // ‖A x − b‖²
  double kkt_error = 0.0;   // largest KKT violation at x
  bool degenerate = false;  // fell back to the simplex projection of b
};

/// argmin ‖A x − b‖² subject to Σx = 1, x ≥ 0. Accelerated projected
/// gradient followed by a primal active-set polish; KKT conditions are
/// verified to 1e-8 before returning.
SimplexLsqResult solve_simplex_lsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

struct MitigatedDistribution {
  int num_qubits = 0;
  std::vector<Bits> labels;
  std::vector<double> probabilities;
  double residual = 0.0;
  double dropped_mass = 0.0;  // measured weight outside the label set
  bool degenerate = false;

  Distribution to_distribution() const;
};

/// Corrects `measured` with A. Weight on labels outside A's set is dropped
/// and reported; the rest is renormalized before solving.
MitigatedDistribution mitigate(const Distribution& measured, const CalibrationMatrix& a);

/// Same solve with A the tensor product of per-qubit confusion matrices,
/// restricted to the observed outcomes plus all zeros. Throws if a factor
/// is singular or the readout model is a full matrix.
MitigatedDistribution tensored_mitigate(const Distribution& measured, const ReadoutModel& readout);

/// Outcome distributions of one sweep: data[rep][phi index].
using SweepData = std::vector<std::vector<Distribution>>;

/// S_φ sweep with each distribution passed through `correct` first.
SweepResult corrected_sweep(const PhiGrid& grid, const SweepData& data,
                            const std::function<Distribution(const Distribution&)>& correct);

struct ConvergenceRow {
  std::size_t k = 0;
  double i0 = 0.0;
  double i_n = 0.0;
  std::optional<double> i0_stderr;
  std::optional<double> i_n_stderr;
};

/// For each K: select the top-K states over every table of the sweep,
/// build A_t, correct all tables and recompute I_0 and I_N. K values above
/// 2^n use all 2^n states (the row keeps the requested K). Throws unless
/// `k_values` is ascending.
std::vector<ConvergenceRow> convergence_study(const PhiGrid& grid, const SweepData& data, int num_qubits,
                                              std::span<const std::size_t> k_values, const ReadoutModel& readout,
                                              std::uint64_t shots_per_state, std::uint64_t seed = 0);

/// Number of labels with each excitation count 0 .. n.
std::vector<std::size_t> excitation_histogram(std::span<const Bits> labels, int num_qubits);

}  // namespace mqc

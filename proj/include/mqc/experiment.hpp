#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mqc/analysis.hpp"
#include "mqc/circuits.hpp"
#include "mqc/mitigation.hpp"
#include "mqc/noise.hpp"

namespace mqc {

inline constexpr const char* kToolVersion = "0.3.0";

enum class MitigationMode { None, Full, Truncated, Tensored };

struct MitigationSpec {
  MitigationMode mode = MitigationMode::None;
  std::size_t k = 256;                    // truncated only
  std::uint64_t calibration_shots = 4096;  // 0: exact calibration columns
};

/// "none", "full", "tensored" or "truncated:K".
std::string to_string(const MitigationSpec& m);
MitigationSpec parse_mitigation(const std::string& text);

enum class ExperimentKind { GhzMqc, Parity, MitigationStudy };

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& text);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::GhzMqc;
  std::string device_path;  // empty: built-in System One
  std::vector<int> qubits;  // physical, root first; empty: pick num_qubits
  int num_qubits = 0;
  bool median_qubits = false;  // replace every qubit by the device median
  MqcVariant variant = MqcVariant::Ghz;
  bool refocus = false;
  std::uint64_t shots = 16384;  // 0: exact probabilities (n ≤ 8 with noise)
  int repetitions = 8;
  std::uint64_t seed = 1;
  MitigationSpec mitigation;
  NoiseToggles noise;
  std::vector<std::size_t> k_values;  // mitigation study
  int workers = 1;

  /// Throws std::invalid_argument on inconsistent settings, including
  /// truncated mitigation for parity sweeps.
  void validate() const;
  int size() const { return qubits.empty() ? num_qubits : static_cast<int>(qubits.size()); }
};

std::string spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const std::string& text);

/// Everything an analysis needs: the persisted part of a run.
struct RawData {
  ExperimentSpec spec;
  EntanglingPlan plan;
  ReadoutModel readout;  // per measured (logical) qubit
  SweepData sweep;       // [rep][phi]: MQC or parity outcomes
  std::vector<Distribution> populations;  // per rep, GHZ prep then measure
  bool exact = false;
};

struct DerivedResults {
  SweepResult sweep_raw;
  std::optional<SweepResult> sweep_mitigated;
  std::optional<MqcSpectrum> spectrum_raw;
  std::optional<MqcSpectrum> spectrum_mitigated;
  std::optional<Populations> populations_raw;
  std::optional<Populations> populations_mitigated;
  std::optional<FidelityReport> fidelity_raw;
  std::optional<FidelityReport> fidelity_mitigated;
  std::optional<Coherence> coherence_raw;
  std::optional<Coherence> coherence_mitigated;
  std::optional<double> parity_fidelity_raw;        // ½(P0 + P1 + C)
  std::optional<double> parity_fidelity_mitigated;
  std::optional<CalibrationMatrix> calibration;
  double dropped_mass = 0.0;  // largest per-table weight outside A's labels
  bool degenerate_solve = false;
  std::vector<ConvergenceRow> convergence;
  std::vector<Bits> top_states;
  std::vector<std::size_t> top_histogram;
};

/// Builds the plan and runs every circuit of the experiment.
RawData collect(const ExperimentSpec& spec);
/// Pure function of the persisted data.
DerivedResults analyze(const RawData& data);

/// Derived results as the results.json document (without run metadata).
std::string results_json(const RawData& data, const DerivedResults& results);

struct RunRecord {
  RawData data;
  DerivedResults results;
  double wall_clock_s = 0.0;
};

/// Runs `spec` and writes the record directory: spec.json, readout.csv,
/// counts/, results.json, sweep.csv, spectrum.csv (MQC), calibration.csv
/// (full/truncated), convergence.csv and histogram.csv (study), and
/// manifest.json last.
RunRecord run_and_record(const ExperimentSpec& spec, const std::filesystem::path& out_dir);

/// Loads the persisted data of a record, checking manifest hashes and count
/// totals. Throws std::runtime_error on missing or corrupt files.
RawData load_record(const std::filesystem::path& dir);

struct ReplayReport {
  bool matches = false;
  double max_abs_diff = 0.0;
  std::vector<std::string> mismatched;  // JSON paths
  bool mitigation_overridden = false;
  std::string recomputed_json;
};

/// Recomputes results.json from the persisted data and compares numbers
/// with tolerance 1e-12. With `mitigation` set, the stored data is
/// re-analyzed under that mode; divergences are then reported, not thrown.
ReplayReport replay(const std::filesystem::path& dir, const std::optional<MitigationSpec>& mitigation = std::nullopt);

}  // namespace mqc

// Command-line runner for MQC, parity and readout-mitigation experiments.
//
//   mqc ghz-mqc --n 8 --shots 16384 --reps 8 --out runs/n8
//   mqc parity --n 3 --noiseless --shots 0 --out runs/parity3
//   mqc mitigation-study --n 8 --k-values 1,4,16,64,256 --out runs/study
//   mqc replay runs/n8 [--mitigation tensored]
//
// Failures print {"error": {...}} on stderr and exit nonzero.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mqc/experiment.hpp"

namespace {

using nlohmann::json;

enum ExitCode { kOk = 0, kBadInput = 2, kCorrupt = 3, kReplayMismatch = 4, kInternal = 5 };

struct Options {
  std::string device;
  std::vector<int> qubits;
  int n = 0;
  bool median = false;
  std::string variant = "ghz";
  bool refocus = false;
  std::uint64_t shots = 16384;
  int reps = 8;
  std::uint64_t seed = 1;
  std::string mitigation = "none";
  std::uint64_t calibration_shots = 4096;
  bool gates = true;
  bool idle = true;
  double drift = 0.0;
  bool readout = true;
  bool noiseless = false;
  int workers = 1;
  std::vector<std::size_t> k_values{1, 2, 4, 8, 16, 32, 64, 128, 256};
  std::string out;
};

void add_experiment_options(CLI::App* cmd, Options& o, bool study) {
  cmd->add_option("--device", o.device, "Device YAML (default: built-in System One)");
  auto* qubits = cmd->add_option("--qubits", o.qubits, "Physical qubits, root first")->delimiter(',');
  auto* n = cmd->add_option("--n", o.n, "Number of qubits; picked from the device GHZ order");
  qubits->excludes(n);
  cmd->add_flag("--median-qubits", o.median, "Give every qubit the device median parameters");
  if (!study) {
    cmd->add_option("--variant", o.variant, "ghz, star or complete")
        ->check(CLI::IsMember({"ghz", "star", "complete"}));
  }
  cmd->add_flag("--refocus", o.refocus, "Insert the collective pi pulse before the rotation");
  cmd->add_option("--shots", o.shots, "Shots per circuit; 0 for exact probabilities")->capture_default_str();
  cmd->add_option("--reps", o.reps, "Repetitions of the sweep")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  cmd->add_option("--mitigation", o.mitigation, "none, full, truncated[:K] or tensored")->capture_default_str();
  cmd->add_option("--calibration-shots", o.calibration_shots, "Shots per calibration column; 0 for exact")
      ->capture_default_str();
  cmd->add_flag("--gates,!--no-gates", o.gates, "Gate noise");
  cmd->add_flag("--idle,!--no-idle", o.idle, "Idle relaxation");
  cmd->add_option("--drift", o.drift, "Quasi-static drift sigma in rad/ns")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--readout,!--no-readout", o.readout, "Readout error");
  cmd->add_flag("--noiseless", o.noiseless, "Disable every noise source");
  cmd->add_option("--workers", o.workers, "Threads per circuit")->check(CLI::PositiveNumber);
  if (study) cmd->add_option("--k-values", o.k_values, "Ascending truncation sizes")->delimiter(',');
  cmd->add_option("--out", o.out, "Record directory")->required();
}

mqc::ExperimentSpec to_spec(const Options& o, mqc::ExperimentKind kind) {
  mqc::ExperimentSpec s;
  s.kind = kind;
  s.device_path = o.device;
  s.qubits = o.qubits;
  s.num_qubits = o.n;
  s.median_qubits = o.median;
  s.variant = mqc::parse_variant(o.variant);
  s.refocus = o.refocus;
  s.shots = o.shots;
  s.repetitions = o.reps;
  s.seed = o.seed;
  s.mitigation = mqc::parse_mitigation(o.mitigation);
  s.mitigation.calibration_shots = o.calibration_shots;
  s.noise = o.noiseless ? mqc::NoiseToggles{false, false, 0.0, false}
                        : mqc::NoiseToggles{o.gates, o.idle, o.drift, o.readout};
  if (kind == mqc::ExperimentKind::MitigationStudy) s.k_values = o.k_values;
  s.workers = o.workers;
  if (s.qubits.empty() && s.num_qubits == 0) throw std::invalid_argument("give --n or --qubits");
  return s;
}

int fail(ExitCode code, const std::string& type, const std::string& message) {
  const json err = {{"error", {{"type", type}, {"message", message}, {"exit_code", static_cast<int>(code)}}}};
  std::cerr << err.dump() << '\n';
  return code;
}

json summary(const mqc::RunRecord& rec, const std::string& out) {
  json s = {{"record", out},
            {"experiment", mqc::to_string(rec.data.spec.kind)},
            {"num_qubits", rec.data.plan.size()}};
  const json results = json::parse(mqc::results_json(rec.data, rec.results));
  for (const char* key : {"fidelity", "coherence", "parity_fidelity"}) {
    if (!results.at(key).is_null()) s[key] = results.at(key);
  }
  s["wall_clock_s"] = rec.wall_clock_s;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-quantum-coherence experiments on a simulated device"};
  app.require_subcommand(1);
  Options opts;
  std::string record;
  std::optional<std::string> replay_mitigation;
  std::string replay_out;

  auto* ghz = app.add_subcommand("ghz-mqc", "MQC sweep with fidelity bounds and direct fidelity");
  add_experiment_options(ghz, opts, false);
  auto* parity = app.add_subcommand("parity", "Parity oscillation sweep and coherence");
  add_experiment_options(parity, opts, false);
  auto* study = app.add_subcommand("mitigation-study", "Truncated-calibration convergence in K");
  add_experiment_options(study, opts, true);
  auto* rep = app.add_subcommand("replay", "Recompute a record's outputs from its counts");
  rep->add_option("record", record, "Record directory")->required();
  rep->add_option("--mitigation", replay_mitigation, "Re-analyze under another mitigation mode");
  rep->add_option("--out", replay_out, "Write the recomputed results.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kBadInput, "usage", e.what());
  }

  try {
    if (rep->parsed()) {
      std::optional<mqc::MitigationSpec> override_mode;
      if (replay_mitigation) override_mode = mqc::parse_mitigation(*replay_mitigation);
      const mqc::ReplayReport report = mqc::replay(record, override_mode);
      if (!replay_out.empty()) {
        std::ofstream(replay_out) << report.recomputed_json;
      }
      const json out = {{"record", record},
                        {"matches", report.matches},
                        {"max_abs_diff", report.max_abs_diff},
                        {"mitigation_overridden", report.mitigation_overridden},
                        {"mismatched", report.mismatched}};
      if (!report.matches && !report.mitigation_overridden) {
        return fail(kReplayMismatch, "replay_mismatch", out.dump());
      }
      std::cout << out.dump(2) << '\n';
      return kOk;
    }
    mqc::ExperimentKind kind = mqc::ExperimentKind::GhzMqc;
    if (parity->parsed()) kind = mqc::ExperimentKind::Parity;
    if (study->parsed()) kind = mqc::ExperimentKind::MitigationStudy;
    const mqc::RunRecord rec = mqc::run_and_record(to_spec(opts, kind), opts.out);
    std::cout << summary(rec, opts.out).dump(2) << '\n';
    return kOk;
  } catch (const std::invalid_argument& e) {
    return fail(kBadInput, "invalid_argument", e.what());
  } catch (const std::runtime_error& e) {
    return fail(kCorrupt, "runtime_error", e.what());
  } catch (const std::exception& e) {
    return fail(kInternal, "internal", e.what());
  }
}

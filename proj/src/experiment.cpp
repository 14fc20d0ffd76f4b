#include "mqc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mqc/density.hpp"

namespace mqc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Stream ids mixed into every seed: hash(master, stream, phi index, rep).
constexpr std::uint64_t kMqcStream = 1;
constexpr std::uint64_t kPopulationStream = 2;
constexpr std::uint64_t kParityStream = 3;
constexpr std::uint64_t kCalibrationStream = 4;

// Exact probabilities below this are dropped from persisted distributions.
constexpr double kExactFloor = 1e-20;
constexpr double kReplayTol = 1e-12;
constexpr std::size_t kTopStates = 256;

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("missing file: " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

DeviceModel spec_device(const ExperimentSpec& spec) {
  DeviceModel device = spec.device_path.empty() ? system_one_device() : load_device(spec.device_path);
  if (!spec.median_qubits) return device;
  if (spec.device_path.empty()) return device.with_uniform_qubits(system_one_median_qubit());
  auto median = [&](auto field) {
    std::vector<double> v;
    for (int q = 0; q < device.num_qubits(); ++q) v.push_back(field(device.qubit(q)));
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  QubitParams p;
  p.frequency_ghz = median([](const QubitParams& q) { return q.frequency_ghz; });
  p.t1_us = median([](const QubitParams& q) { return q.t1_us; });
  p.t2_us = median([](const QubitParams& q) { return q.t2_us; });
  p.readout_fidelity = median([](const QubitParams& q) { return q.readout_fidelity; });
  p.gate_error = median([](const QubitParams& q) { return q.gate_error; });
  p.gate_duration_ns = median([](const QubitParams& q) { return q.gate_duration_ns; });
  return device.with_uniform_qubits(p);
}

Distribution exact_distribution(const Circuit& circuit, const NoiseModel& noise, const ReadoutModel& readout) {
  std::vector<double> p;
  if (noise.has_quantum_noise()) {
    if (circuit.num_qubits() > kMaxDensityQubits) {
      throw std::invalid_argument("exact probabilities with gate, idle or drift noise need at most 8 qubits");
    }
    p = measured_distribution(density_oracle(circuit, noise), circuit, readout);
  } else {
    const StateVector state = apply_circuit(StateVector(circuit.num_qubits()), circuit);
    p.resize(state.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::norm(state.amplitudes()[i]);
    if (!readout.is_ideal()) p = readout.apply(std::move(p));
  }
  Distribution d{circuit.num_qubits(), {}};
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= kExactFloor) d.weights[static_cast<Bits>(i)] = p[i];
  }
  return d;
}

Distribution run_one(const Circuit& circuit, const NoiseModel& noise, const RawData& data, std::uint64_t stream,
                     std::size_t phi_index, int rep) {
  const ExperimentSpec& spec = data.spec;
  const std::uint64_t seed = derive_seed({spec.seed, stream, phi_index, static_cast<std::uint64_t>(rep)});
  return Distribution::from_counts(run_trajectories(circuit, noise, spec.shots, seed, {spec.workers}));
}

// Signal per grid point, aggregated over repetitions, with an optional
// correction applied to each distribution first.
SweepResult signal_sweep(const PhiGrid& grid, const SweepData& data, ExperimentKind kind,
                         const std::function<Distribution(const Distribution&)>& correct) {
  std::vector<SweepResult> reps;
  for (const auto& rep : data) {
    SweepResult r{grid, {}, std::nullopt, 1};
    for (const auto& d : rep) {
      const Distribution c = correct ? correct(d) : d;
      r.s_values.push_back(kind == ExperimentKind::Parity ? parity_expectation(c) : s_phi(c));
    }
    reps.push_back(std::move(r));
  }
  return aggregate_repetitions(reps);
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json sweep_json(const SweepResult& s) {
  return {{"values", s.s_values}, {"stderr", s.s_stderr ? json(*s.s_stderr) : json(nullptr)},
          {"repetitions", s.repetitions}};
}

json spectrum_json(const MqcSpectrum& s) {
  return {{"q_max", s.q_max}, {"I", s.i_values}, {"stderr", s.i_stderr ? json(*s.i_stderr) : json(nullptr)}};
}

json populations_json(const Populations& p) {
  return {{"p_allzero", p.p_allzero}, {"p_allone", p.p_allone},
          {"half_sum_stderr", optional_number(p.half_sum_stderr)}};
}

json fidelity_json(const FidelityReport& f) {
  return {{"lower", f.lower},
          {"upper", f.upper},
          {"upper_raw", f.upper_raw},
          {"direct", optional_number(f.direct)},
          {"entangled", f.entangled},
          {"lower_stderr", optional_number(f.lower_stderr)},
          {"upper_stderr", optional_number(f.upper_stderr)},
          {"direct_stderr", optional_number(f.direct_stderr)}};
}

json coherence_json(const Coherence& c) { return {{"C", c.value}, {"stderr", optional_number(c.stderr)}}; }

template <typename T, typename F>
json pair_json(const std::optional<T>& raw, const std::optional<T>& mitigated, F&& to_json) {
  if (!raw) return nullptr;
  return {{"raw", to_json(*raw)}, {"mitigated", mitigated ? to_json(*mitigated) : json(nullptr)}};
}

std::string csv_cell(const std::optional<double>& v) { return v ? fmt17(*v) : std::string(); }

std::string sweep_csv(const RawData& data, const DerivedResults& r) {
  const std::string name = data.spec.kind == ExperimentKind::Parity ? "parity" : "s";
  std::ostringstream os;
  os << "phi_index,phi," << name << "_raw," << name << "_raw_stderr," << name << "_mitigated," << name
     << "_mitigated_stderr\n";
  const auto& grid = r.sweep_raw.phis;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    auto err = [&](const SweepResult& s) -> std::optional<double> {
      return s.s_stderr ? std::optional<double>((*s.s_stderr)[j]) : std::nullopt;
    };
    os << j << ',' << fmt17(grid.angles[j]) << ',' << fmt17(r.sweep_raw.s_values[j]) << ','
       << csv_cell(err(r.sweep_raw)) << ','
       << (r.sweep_mitigated ? fmt17(r.sweep_mitigated->s_values[j]) : std::string()) << ','
       << (r.sweep_mitigated ? csv_cell(err(*r.sweep_mitigated)) : std::string()) << '\n';
  }
  return os.str();
}

std::string spectrum_csv(const DerivedResults& r) {
  std::ostringstream os;
  os << "q,i_raw,i_raw_stderr,i_mitigated,i_mitigated_stderr\n";
  const MqcSpectrum& raw = *r.spectrum_raw;
  for (int q = -raw.q_max; q <= raw.q_max; ++q) {
    const int a = std::abs(q);
    os << q << ',' << fmt17(raw.at(a)) << ',' << csv_cell(raw.stderr_at(a)) << ','
       << (r.spectrum_mitigated ? fmt17(r.spectrum_mitigated->at(a)) : std::string()) << ','
       << (r.spectrum_mitigated ? csv_cell(r.spectrum_mitigated->stderr_at(a)) : std::string()) << '\n';
  }
  return os.str();
}

std::string convergence_csv(const DerivedResults& r) {
  std::ostringstream os;
  os << "k,i0,i0_stderr,i_n,i_n_stderr\n";
  for (const auto& row : r.convergence) {
    os << row.k << ',' << fmt17(row.i0) << ',' << csv_cell(row.i0_stderr) << ',' << fmt17(row.i_n) << ','
       << csv_cell(row.i_n_stderr) << '\n';
  }
  return os.str();
}

std::string histogram_csv(const DerivedResults& r) {
  std::ostringstream os;
  os << "excitations,states\n";
  for (std::size_t e = 0; e < r.top_histogram.size(); ++e) os << e << ',' << r.top_histogram[e] << '\n';
  return os.str();
}

std::string readout_csv(const ReadoutModel& readout) {
  std::ostringstream os;
  os << "qubit,p0_given0,p1_given0,p0_given1,p1_given1\n";
  for (std::size_t q = 0; q < readout.per_qubit.size(); ++q) {
    const auto& m = readout.per_qubit[q];
    os << q << ',' << fmt17(m(0, 0)) << ',' << fmt17(m(1, 0)) << ',' << fmt17(m(0, 1)) << ',' << fmt17(m(1, 1))
       << '\n';
  }
  return os.str();
}

ReadoutModel parse_readout_csv(const std::string& text, int n) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  ReadoutModel r;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 5) throw std::runtime_error("readout.csv: malformed row '" + line + "'");
    Eigen::Matrix2d m;
    m << v[1], v[3], v[2], v[4];
    r.per_qubit.push_back(m);
  }
  if (r.num_qubits() != n) throw std::runtime_error("readout.csv: expected " + std::to_string(n) + " qubits");
  r.validate();
  return r;
}

std::string distribution_text(const Distribution& d, bool exact, std::uint64_t shots) {
  std::ostringstream os;
  if (exact) {
    os << "# n=" << d.num_qubits << " exact\n";
    for (const auto& [b, w] : d.weights) os << format_bits(b, d.num_qubits) << ' ' << fmt17(w) << '\n';
  } else {
    os << "# n=" << d.num_qubits << " shots=" << shots << '\n';
    for (const auto& [b, w] : d.weights) {
      os << format_bits(b, d.num_qubits) << ' ' << std::llround(w * static_cast<double>(shots)) << '\n';
    }
  }
  return os.str();
}

Distribution parse_distribution(const std::string& text, const std::string& name, int n, bool& exact,
                                std::uint64_t shots) {
  std::istringstream is(text);
  std::string header;
  if (!std::getline(is, header) || header.rfind("# n=", 0) != 0) {
    throw std::runtime_error(name + ": missing header");
  }
  std::istringstream hs(header.substr(4));
  int file_n = 0;
  std::string mode;
  hs >> file_n >> mode;
  if (file_n != n) throw std::runtime_error(name + ": qubit count does not match the spec");
  exact = mode == "exact";
  if (!exact && mode != "shots=" + std::to_string(shots)) {
    throw std::runtime_error(name + ": shot count does not match the spec");
  }
  Distribution d{n, {}};
  CountsTable counts(n);
  std::string bits;
  std::string value;
  while (is >> bits >> value) {
    if (static_cast<int>(bits.size()) != n) throw std::runtime_error(name + ": bad bitstring '" + bits + "'");
    const Bits b = parse_bits(bits);
    if (exact) {
      d.weights[b] = std::stod(value);
    } else {
      counts.add(b, std::stoull(value));
    }
  }
  if (exact) {
    if (d.weights.empty()) throw std::runtime_error(name + ": no outcomes");
    return d;
  }
  if (counts.total() != shots) {
    throw std::runtime_error(name + ": counts sum to " + std::to_string(counts.total()) + ", expected " +
                             std::to_string(shots));
  }
  return Distribution::from_counts(counts);
}

std::string counts_name(const std::string& prefix, std::size_t phi, int rep) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "counts/%s_phi%02zu_rep%02d.txt", prefix.c_str(), phi, rep);
  return buf;
}

std::string populations_name(int rep) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "counts/populations_rep%02d.txt", rep);
  return buf;
}

std::string sweep_prefix(ExperimentKind k) { return k == ExperimentKind::Parity ? "parity" : "mqc"; }

void compare_json(const json& expected, const json& actual, const std::string& path, ReplayReport& report) {
  if (expected.is_number() && actual.is_number()) {
    const double a = expected.get<double>();
    const double b = actual.get<double>();
    const double diff = std::abs(a - b);
    report.max_abs_diff = std::max(report.max_abs_diff, diff);
    if (diff > kReplayTol * std::max(1.0, std::abs(a))) report.mismatched.push_back(path);
    return;
  }
  if (expected.type() != actual.type()) {
    report.mismatched.push_back(path);
    return;
  }
  if (expected.is_object()) {
    for (const auto& [key, value] : expected.items()) {
      if (!actual.contains(key)) {
        report.mismatched.push_back(path + "/" + key);
      } else {
        compare_json(value, actual.at(key), path + "/" + key, report);
      }
    }
    for (const auto& [key, value] : actual.items()) {
      if (!expected.contains(key)) report.mismatched.push_back(path + "/" + key);
    }
  } else if (expected.is_array()) {
    if (expected.size() != actual.size()) {
      report.mismatched.push_back(path);
      return;
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
      compare_json(expected[i], actual[i], path + "/" + std::to_string(i), report);
    }
  } else if (expected != actual) {
    report.mismatched.push_back(path);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec

std::string to_string(const MitigationSpec& m) {
  switch (m.mode) {
    case MitigationMode::None:
      return "none";
    case MitigationMode::Full:
      return "full";
    case MitigationMode::Tensored:
      return "tensored";
    case MitigationMode::Truncated:
      return "truncated:" + std::to_string(m.k);
  }
  return "none";
}

MitigationSpec parse_mitigation(const std::string& text) {
  MitigationSpec m;
  if (text == "none") return m;
  if (text == "full") {
    m.mode = MitigationMode::Full;
  } else if (text == "tensored") {
    m.mode = MitigationMode::Tensored;
  } else if (text == "truncated" || text.rfind("truncated:", 0) == 0) {
    m.mode = MitigationMode::Truncated;
    if (text.size() > 10) {
      const std::string k = text.substr(10);
      if (k.empty() || k.find_first_not_of("0123456789") != std::string::npos) {
        throw std::invalid_argument("truncated mitigation needs an integer K, got '" + k + "'");
      }
      m.k = std::stoull(k);
    }
  } else {
    throw std::invalid_argument("unknown mitigation mode '" + text + "' (none, full, truncated[:K], tensored)");
  }
  return m;
}

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::GhzMqc:
      return "ghz-mqc";
    case ExperimentKind::Parity:
      return "parity";
    case ExperimentKind::MitigationStudy:
      return "mitigation-study";
  }
  return "ghz-mqc";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
  if (text == "ghz-mqc") return ExperimentKind::GhzMqc;
  if (text == "parity") return ExperimentKind::Parity;
  if (text == "mitigation-study") return ExperimentKind::MitigationStudy;
  throw std::invalid_argument("unknown experiment '" + text + "'");
}

void ExperimentSpec::validate() const {
  const int n = size();
  if (n < 1 || n > kMaxQubits) throw std::invalid_argument("experiment needs 1 to 24 qubits");
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (!(noise.drift_sigma >= 0.0)) throw std::invalid_argument("drift sigma must be nonnegative");
  if (mitigation.mode == MitigationMode::Truncated && mitigation.k < 1) {
    throw std::invalid_argument("truncated mitigation needs K >= 1");
  }
  if (mitigation.mode == MitigationMode::Full && n > 10) {
    throw std::invalid_argument("full calibration is limited to 10 qubits; use truncated or tensored");
  }
  if (kind == ExperimentKind::Parity && mitigation.mode == MitigationMode::Truncated) {
    throw std::invalid_argument(
        "truncated calibration cannot correct parity data: after the final rotation the outcomes spread over "
        "all 2^N states, so no small label set carries the signal; use full or tensored mitigation");
  }
  if (kind == ExperimentKind::MitigationStudy) {
    if (k_values.empty()) throw std::invalid_argument("mitigation study needs at least one K value");
    if (!std::is_sorted(k_values.begin(), k_values.end())) throw std::invalid_argument("K values must ascend");
    if (k_values.front() < 1) throw std::invalid_argument("K values must be >= 1");
  }
  if (shots == 0 && n > kMaxDensityQubits && (noise.gates || noise.idle || noise.drift_sigma > 0.0)) {
    throw std::invalid_argument("exact probabilities with gate, idle or drift noise need at most 8 qubits");
  }
}

std::string spec_to_json(const ExperimentSpec& s) {
  const json j = {{"kind", to_string(s.kind)},
                  {"device", s.device_path},
                  {"qubits", s.qubits},
                  {"num_qubits", s.size()},
                  {"median_qubits", s.median_qubits},
                  {"variant", to_string(s.variant)},
                  {"refocus", s.refocus},
                  {"shots", s.shots},
                  {"repetitions", s.repetitions},
                  {"seed", s.seed},
                  {"mitigation",
                   {{"mode", to_string(s.mitigation)}, {"calibration_shots", s.mitigation.calibration_shots}}},
                  {"noise",
                   {{"gates", s.noise.gates},
                    {"idle", s.noise.idle},
                    {"drift_sigma", s.noise.drift_sigma},
                    {"readout", s.noise.readout}}},
                  {"k_values", s.k_values},
                  {"workers", s.workers}};
  return j.dump(2) + "\n";
}

ExperimentSpec spec_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ExperimentSpec s;
    s.kind = parse_experiment_kind(j.at("kind").get<std::string>());
    s.device_path = j.at("device").get<std::string>();
    s.qubits = j.at("qubits").get<std::vector<int>>();
    s.num_qubits = j.at("num_qubits").get<int>();
    s.median_qubits = j.at("median_qubits").get<bool>();
    s.variant = parse_variant(j.at("variant").get<std::string>());
    s.refocus = j.at("refocus").get<bool>();
    s.shots = j.at("shots").get<std::uint64_t>();
    s.repetitions = j.at("repetitions").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.mitigation = parse_mitigation(j.at("mitigation").at("mode").get<std::string>());
    s.mitigation.calibration_shots = j.at("mitigation").at("calibration_shots").get<std::uint64_t>();
    const json& nz = j.at("noise");
    s.noise = {nz.at("gates").get<bool>(), nz.at("idle").get<bool>(), nz.at("drift_sigma").get<double>(),
               nz.at("readout").get<bool>()};
    s.k_values = j.at("k_values").get<std::vector<std::size_t>>();
    s.workers = j.at("workers").get<int>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("spec.json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Collection and analysis

RawData collect(const ExperimentSpec& spec) {
  spec.validate();
  RawData data;
  data.spec = spec;
  const DeviceModel device = spec_device(spec);
  const std::vector<int> qubits = spec.qubits.empty() ? default_qubits(device, spec.num_qubits) : spec.qubits;
  data.plan = auto_plan(device, qubits);
  data.spec.num_qubits = data.plan.size();
  const NoiseModel noise(device, spec.noise);
  data.readout = noise.readout_for(qubits).value_or(ReadoutModel::ideal(data.plan.size()));
  data.exact = spec.shots == 0;

  const PhiGrid grid = phi_grid(data.plan.size());
  const bool parity = spec.kind == ExperimentKind::Parity;
  auto prepare = [&](Circuit c) {
    stamp_device_durations(c, device);
    return c;
  };
  std::vector<Circuit> circuits;
  for (double phi : grid.angles) {
    circuits.push_back(prepare(parity ? build_parity_circuit(data.plan, phi)
                                      : build_mqc_circuit(data.plan, phi, spec.refocus, spec.variant)));
  }
  const Circuit populations = prepare(build_populations_circuit(data.plan));
  const std::uint64_t stream = parity ? kParityStream : kMqcStream;

  if (data.exact) {
    std::vector<Distribution> row;
    for (const Circuit& c : circuits) row.push_back(exact_distribution(c, noise, data.readout));
    const Distribution pop = exact_distribution(populations, noise, data.readout);
    data.sweep.assign(static_cast<std::size_t>(spec.repetitions), row);
    data.populations.assign(static_cast<std::size_t>(spec.repetitions), pop);
    return data;
  }
  for (int r = 0; r < spec.repetitions; ++r) {
    std::vector<Distribution> row;
    for (std::size_t j = 0; j < circuits.size(); ++j) row.push_back(run_one(circuits[j], noise, data, stream, j, r));
    data.sweep.push_back(std::move(row));
    data.populations.push_back(run_one(populations, noise, data, kPopulationStream, 0, r));
  }
  return data;
}

DerivedResults analyze(const RawData& data) {
  const ExperimentSpec& spec = data.spec;
  const int n = data.plan.size();
  const PhiGrid grid = phi_grid(n);
  const std::uint64_t cal_seed = derive_seed({spec.seed, kCalibrationStream});
  const std::uint64_t cal_shots = spec.mitigation.calibration_shots;
  DerivedResults r;

  std::vector<Distribution> all;
  for (const auto& rep : data.sweep) all.insert(all.end(), rep.begin(), rep.end());
  all.insert(all.end(), data.populations.begin(), data.populations.end());

  std::function<Distribution(const Distribution&)> correct;
  auto track = [&r](const MitigatedDistribution& m) {
    r.dropped_mass = std::max(r.dropped_mass, m.dropped_mass);
    r.degenerate_solve = r.degenerate_solve || m.degenerate;
    return m.to_distribution();
  };
  switch (spec.mitigation.mode) {
    case MitigationMode::None:
      break;
    case MitigationMode::Full:
      r.calibration = build_full_calibration(n, data.readout, cal_shots, cal_seed);
      break;
    case MitigationMode::Truncated: {
      const std::size_t k = std::min<std::size_t>(spec.mitigation.k, std::size_t{1} << std::min(n, 40));
      r.calibration = build_truncated_calibration(n, select_truncation_states(std::span<const Distribution>(all), k),
                                                  data.readout, cal_shots, cal_seed);
      break;
    }
    case MitigationMode::Tensored:
      correct = [&](const Distribution& d) { return track(tensored_mitigate(d, data.readout)); };
      break;
  }
  if (r.calibration) correct = [&](const Distribution& d) { return track(mitigate(d, *r.calibration)); };

  r.sweep_raw = signal_sweep(grid, data.sweep, spec.kind, nullptr);
  r.populations_raw = aggregate_populations(data.populations);
  if (correct) {
    r.sweep_mitigated = signal_sweep(grid, data.sweep, spec.kind, correct);
    std::vector<Distribution> pops;
    for (const auto& d : data.populations) pops.push_back(correct(d));
    r.populations_mitigated = aggregate_populations(pops);
  }

  if (spec.kind == ExperimentKind::Parity) {
    auto parity_fidelity = [](const Populations& p, const Coherence& c) {
      return std::clamp(0.5 * (p.p_allzero + p.p_allone + c.value), 0.0, 1.0);
    };
    r.coherence_raw = parity_coherence(r.sweep_raw, n);
    r.parity_fidelity_raw = parity_fidelity(*r.populations_raw, *r.coherence_raw);
    if (r.sweep_mitigated) {
      r.coherence_mitigated = parity_coherence(*r.sweep_mitigated, n);
      r.parity_fidelity_mitigated = parity_fidelity(*r.populations_mitigated, *r.coherence_mitigated);
    }
    return r;
  }

  r.spectrum_raw = mqc_spectrum(r.sweep_raw);
  r.fidelity_raw = fidelity_report(*r.spectrum_raw, n, r.populations_raw);
  if (r.sweep_mitigated) {
    r.spectrum_mitigated = mqc_spectrum(*r.sweep_mitigated);
    r.fidelity_mitigated = fidelity_report(*r.spectrum_mitigated, n, r.populations_mitigated);
  }

  if (spec.kind == ExperimentKind::MitigationStudy) {
    r.convergence = convergence_study(grid, data.sweep, n, spec.k_values, data.readout, cal_shots, cal_seed);
    std::vector<Distribution> sweep_only;
    for (const auto& rep : data.sweep) sweep_only.insert(sweep_only.end(), rep.begin(), rep.end());
    r.top_states = select_truncation_states(std::span<const Distribution>(sweep_only), kTopStates);
    r.top_histogram = excitation_histogram(r.top_states, n);
  }
  return r;
}

std::string results_json(const RawData& data, const DerivedResults& r) {
  json schedule = json::array();
  for (const auto& moment : data.plan.schedule) {
    json m = json::array();
    for (const CxPair& p : moment) m.push_back({p.control, p.target});
    schedule.push_back(m);
  }
  json top = nullptr;
  if (!r.top_states.empty()) {
    json labels = json::array();
    for (Bits b : r.top_states) labels.push_back(format_bits(b, data.plan.size()));
    top = {{"labels", labels}, {"excitation_histogram", r.top_histogram}};
  }
  json convergence = json::array();
  for (const auto& row : r.convergence) {
    convergence.push_back({{"k", row.k},
                           {"i0", row.i0},
                           {"i0_stderr", optional_number(row.i0_stderr)},
                           {"i_n", row.i_n},
                           {"i_n_stderr", optional_number(row.i_n_stderr)}});
  }
  auto number = [](double v) { return json(v); };
  const json j = {
      {"experiment", to_string(data.spec.kind)},
      {"num_qubits", data.plan.size()},
      {"plan", {{"qubits", data.plan.qubits}, {"schedule", schedule}, {"cx_moments", data.plan.depth()}}},
      {"exact", data.exact},
      {"phi", r.sweep_raw.phis.angles},
      {"sweep", pair_json(std::optional<SweepResult>(r.sweep_raw), r.sweep_mitigated, sweep_json)},
      {"spectrum", pair_json(r.spectrum_raw, r.spectrum_mitigated, spectrum_json)},
      {"populations", pair_json(r.populations_raw, r.populations_mitigated, populations_json)},
      {"fidelity", pair_json(r.fidelity_raw, r.fidelity_mitigated, fidelity_json)},
      {"coherence", pair_json(r.coherence_raw, r.coherence_mitigated, coherence_json)},
      {"parity_fidelity", pair_json(r.parity_fidelity_raw, r.parity_fidelity_mitigated, number)},
      {"mitigation",
       {{"mode", to_string(data.spec.mitigation)},
        {"calibration_states", r.calibration ? r.calibration->size() : 0},
        {"dropped_mass", r.dropped_mass},
        {"degenerate_solve", r.degenerate_solve}}},
      {"convergence", convergence},
      {"top_states", top},
  };
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Records

RunRecord run_and_record(const ExperimentSpec& spec, const fs::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.data = collect(spec);
  rec.results = analyze(rec.data);
  rec.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const RawData& d = rec.data;
  std::map<std::string, std::string> files;
  files["spec.json"] = spec_to_json(d.spec);
  files["readout.csv"] = readout_csv(d.readout);
  const std::string prefix = sweep_prefix(d.spec.kind);
  for (std::size_t r = 0; r < d.sweep.size(); ++r) {
    for (std::size_t j = 0; j < d.sweep[r].size(); ++j) {
      files[counts_name(prefix, j, static_cast<int>(r))] = distribution_text(d.sweep[r][j], d.exact, d.spec.shots);
    }
    files[populations_name(static_cast<int>(r))] = distribution_text(d.populations[r], d.exact, d.spec.shots);
  }
  json results = json::parse(results_json(d, rec.results));
  results["run"] = {{"tool_version", kToolVersion}, {"wall_clock_s", rec.wall_clock_s}};
  files["results.json"] = results.dump(2) + "\n";
  files["sweep.csv"] = sweep_csv(d, rec.results);
  if (rec.results.spectrum_raw) files["spectrum.csv"] = spectrum_csv(rec.results);
  if (rec.results.calibration) files["calibration.csv"] = rec.results.calibration->to_csv();
  if (d.spec.kind == ExperimentKind::MitigationStudy) {
    files["convergence.csv"] = convergence_csv(rec.results);
    files["histogram.csv"] = histogram_csv(rec.results);
  }

  json manifest = {{"tool_version", kToolVersion}, {"files", json::object()}};
  for (const auto& [name, content] : files) {
    write_atomic(out_dir / name, content);
    manifest["files"][name] = fnv1a64(content);
  }
  write_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return rec;
}

RawData load_record(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("manifest.json: ") + e.what());
  }
  std::map<std::string, std::string> contents;
  for (const auto& [name, hash] : manifest.at("files").items()) {
    std::string text = read_file(dir / name);
    if (fnv1a64(text) != hash.get<std::string>()) throw std::runtime_error(name + ": content does not match manifest");
    contents[name] = std::move(text);
  }
  auto get = [&](const std::string& name) -> const std::string& {
    const auto it = contents.find(name);
    if (it == contents.end()) throw std::runtime_error("record is missing " + name);
    return it->second;
  };

  RawData d;
  d.spec = spec_from_json(get("spec.json"));
  const json results = json::parse(get("results.json"));
  d.plan.qubits = results.at("plan").at("qubits").get<std::vector<int>>();
  for (const auto& m : results.at("plan").at("schedule")) {
    std::vector<CxPair> moment;
    for (const auto& p : m) moment.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    d.plan.schedule.push_back(std::move(moment));
  }
  d.plan.validate();
  const int n = d.plan.size();
  d.readout = parse_readout_csv(get("readout.csv"), n);

  const std::size_t points = phi_grid(n).size();
  const std::string prefix = sweep_prefix(d.spec.kind);
  bool any_exact = false;
  bool any_sampled = false;
  auto load = [&](const std::string& name) {
    bool exact = false;
    Distribution dist = parse_distribution(get(name), name, n, exact, d.spec.shots);
    (exact ? any_exact : any_sampled) = true;
    return dist;
  };
  for (int r = 0; r < d.spec.repetitions; ++r) {
    std::vector<Distribution> row;
    for (std::size_t j = 0; j < points; ++j) row.push_back(load(counts_name(prefix, j, r)));
    d.sweep.push_back(std::move(row));
    d.populations.push_back(load(populations_name(r)));
  }
  if (any_exact && any_sampled) throw std::runtime_error("record mixes exact and sampled files");
  d.exact = any_exact;
  return d;
}

ReplayReport replay(const fs::path& dir, const std::optional<MitigationSpec>& mitigation) {
  RawData data = load_record(dir);
  ReplayReport report;
  if (mitigation) {
    report.mitigation_overridden = true;
    data.spec.mitigation = *mitigation;
    data.spec.validate();
  }
  report.recomputed_json = results_json(data, analyze(data));
  json stored = json::parse(read_file(dir / "results.json"));
  stored.erase("run");
  compare_json(stored, json::parse(report.recomputed_json), "", report);
  report.matches = report.mismatched.empty();
  return report;
}

}  // namespace mqc

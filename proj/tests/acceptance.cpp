// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Heavy sampled checks use fixed seeds.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mqc/density.hpp"
#include "mqc/device.hpp"
#include "mqc/experiment.hpp"
#include "mqc/seeds.hpp"
#include "support.hpp"

using namespace mqc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

SweepResult single_sweep(const PhiGrid& grid, std::vector<double> values) {
  SweepResult s;
  s.phis = grid;
  s.s_values = std::move(values);
  return s;
}

EntanglingPlan device_plan(int n) { return auto_plan(system_one_device(), system_one_ghz_qubits(n)); }

std::vector<double> exact_mqc_signal(const EntanglingPlan& plan, MqcVariant variant = MqcVariant::Ghz) {
  std::vector<double> s;
  for (double phi : phi_grid(plan.size()).angles) {
    const StateVector out = apply_circuit(StateVector(plan.size()), build_mqc_circuit(plan, phi, false, variant));
    s.push_back(probability_of(out, Bits{0}));
  }
  return s;
}

double parity_of(const std::vector<double>& p) {
  double e = 0.0;
  for (Bits b = 0; b < p.size(); ++b) e += (std::popcount(b) % 2 ? -1.0 : 1.0) * p[b];
  return e;
}

// ---------------------------------------------------------------------------

Outcome ideal_signal() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int n = 2; n <= 12; ++n) {
    const std::vector<double> s = exact_mqc_signal(device_plan(n));
    const PhiGrid grid = phi_grid(n);
    for (std::size_t j = 0; j < s.size(); ++j) {
      worst = std::max(worst, std::abs(s[j] - 0.5 * (1.0 + std::cos(n * grid.angles[j]))));
    }
  }
  const double t = seconds_since(start);
  return {worst <= 1e-9 && t < 5.0, fmt("N=2..12, max |S - ideal| = %.2e, %.2f s", worst, t)};
}

Outcome ideal_spectrum() {
  const auto start = std::chrono::steady_clock::now();
  const EntanglingPlan plan = system_one_18q_plan();
  const MqcSpectrum spec = mqc_spectrum(single_sweep(phi_grid(18), exact_mqc_signal(plan)));
  double others = 0.0;
  for (int q = 1; q < 18; ++q) others = std::max(others, spec.at(q));
  others = std::max(others, spec.at(19));
  const FidelityBounds b = fidelity_bounds(spec.at(0), spec.at(18));
  const double t = seconds_since(start);
  const bool ok = std::abs(spec.at(0) - 0.5) <= 1e-9 && std::abs(spec.at(18) - 0.25) <= 1e-9 && others < 1e-9 &&
                  std::abs(b.lower - 1.0) <= 1e-9 && std::abs(b.upper - 1.0) <= 1e-9 && t < 30.0;
  return {ok, fmt("I_0 = %.12f, I_18 = %.12f, max other = %.1e, bounds (%.9f, %.9f), %.1f s", spec.at(0),
                  spec.at(18), others, b.lower, b.upper, t)};
}

Outcome sampled_spectrum() {
  ExperimentSpec s;
  s.num_qubits = 10;
  s.shots = 16384;
  s.repetitions = 8;
  s.seed = 3;
  s.noise = NoiseToggles{false, false, 0.0, false};
  const DerivedResults r = analyze(collect(s));
  const double i10 = r.spectrum_raw->at(10);
  const double err = r.spectrum_raw->stderr_at(10).value();
  return {std::abs(i10 - 0.25) <= 3 * err && err < 0.01, fmt("I_10 = %.5f +- %.5f", i10, err)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0, worst_purity = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 6;
    QubitParams qp;
    qp.t1_us = 5.0 + 45.0 * u(rng);
    qp.t2_us = qp.t1_us * (0.2 + 1.8 * u(rng));
    qp.gate_error = 0.02 * u(rng);
    const DeviceModel dev = testing::uniform_device(n, qp, EdgeParams{0.05 * u(rng), 300.0});
    const NoiseModel noise(dev, NoiseToggles{true, true, 1e-3 * u(rng), false});
    const DensityMatrix rho = density_oracle(testing::random_circuit(n, dev, rng), noise);

    const PhiGrid grid = phi_grid(n);
    const MqcSpectrum spec = mqc_spectrum(single_sweep(grid, overlap_signal(rho, grid)));
    const MqcDecomposition dec = mqc_decompose(rho);
    for (int q = 0; q <= n; ++q) worst = std::max(worst, std::abs(spec.at(q) - dec.at(q)));
    worst = std::max(worst, spec.at(n + 1));
    double from_spectrum = spec.at(0);
    for (int q = 1; q <= n; ++q) from_spectrum += 2 * spec.at(q);
    worst_purity = std::max({worst_purity, std::abs(dec.sum() - rho.purity()), std::abs(from_spectrum - rho.purity())});
  }
  return {worst <= 1e-9 && worst_purity <= 1e-9,
          fmt("100 circuits, max |I_q diff| = %.2e, max |sum - purity| = %.2e", worst, worst_purity)};
}

Outcome bound_validity() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  double tightest = 1.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 2 + trial % 4;
    const double w = u(rng);
    Eigen::MatrixXcd m = w * testing::ghz_projector(n) + (1 - w) * testing::random_density_matrix(n, 1 + trial % 4, rng);
    // Random local Z phases move the corner off the real axis before alignment.
    Eigen::VectorXcd phases(m.rows());
    std::vector<double> z(static_cast<std::size_t>(n));
    for (auto& a : z) a = 2 * std::numbers::pi * u(rng);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double a = 0.0;
      for (int q = 0; q < n; ++q) a += (i >> q & 1) ? z[static_cast<std::size_t>(q)] : 0.0;
      phases(i) = std::polar(1.0, a);
    }
    m = phases.asDiagonal() * m * phases.conjugate().asDiagonal();
    const Eigen::MatrixXcd aligned = testing::align_corner(m);
    const DensityMatrix rho(n, 0.5 * (aligned + aligned.adjoint()));
    const MqcDecomposition dec = mqc_decompose(rho);
    const double f = testing::ghz_fidelity(rho.matrix(), n);
    const double lower = 2 * std::sqrt(dec.at(n));
    const double upper = std::sqrt(dec.at(0) / 2) + std::sqrt(dec.at(n));
    if (lower > f + 1e-10 || f > upper + 1e-10) ++violations;
    tightest = std::min({tightest, f - lower, upper - f});
  }
  return {violations == 0, fmt("10^4 states, %d violations, smallest margin %.2e", violations, tightest)};
}

// Copies `c` with device durations and an idle window of `wait_ns` (identity on every qubit)
// inserted before each listed moment index (the size appends one).
Circuit with_waits(Circuit c, const std::vector<std::size_t>& before, double wait_ns, const DeviceModel& dev) {
  stamp_device_durations(c, dev);
  Circuit out(c.num_qubits());
  for (std::size_t m = 0; m <= c.moments().size(); ++m) {
    if (std::find(before.begin(), before.end(), m) != before.end()) {
      std::vector<Gate> idle;
      for (int q = 0; q < c.num_qubits(); ++q) {
        idle.push_back(Gate::u1q(q, Eigen::Matrix2cd::Identity()));
        idle.back().duration_ns = wait_ns;
      }
      out.add_moment(idle);
    }
    if (m < c.moments().size()) out.add_moment(c.moments()[m].gates);
  }
  out.measure_all();
  return out;
}

Outcome parity_identity() {
  // Exact: random states and a noisy GHZ state, rotated noiselessly.
  std::mt19937_64 rng(6);
  double worst = 0.0;
  auto check_state = [&](const DensityMatrix& rho) {
    const int n = rho.num_qubits();
    const PhiGrid grid = phi_grid(n);
    std::vector<double> parity;
    for (double phi : grid.angles) {
      DensityMatrix r = rho;
      for (int q = 0; q < n; ++q) r.apply(Gate::rxy(q, -std::numbers::pi / 2, phi));
      parity.push_back(parity_of(r.probabilities()));
    }
    const double c = parity_coherence(single_sweep(grid, parity), n).value;
    worst = std::max(worst, std::abs(c - 2 * std::sqrt(mqc_decompose(rho).at(n))));
  };
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 6;
    check_state(DensityMatrix(n, testing::random_density_matrix(n, 1 + trial % 3, rng)));
  }

  // Sampled: gates are instantaneous and noiseless; the only noise is pure
  // dephasing during idle windows. The parity circuit waits once after the
  // preparation. The MQC circuit waits before and after the rotation, and
  // since dephasing is self-adjoint and commutes with the rotation, its
  // signal is Tr(rho_phi rho) for the state the parity circuit measures.
  const int n = 4;
  const double wait_ns = 200.0;
  QubitParams qp;
  qp.t1_us = 1e6;
  qp.t2_us = 3.0;
  qp.gate_duration_ns = 0.0;
  const DeviceModel dev = testing::uniform_device(n, qp, EdgeParams{0.0, 0.0});
  const NoiseModel noise(dev, NoiseToggles{true, false, 0.0, false});
  const EntanglingPlan plan = testing::doubling_plan(n);
  const std::size_t prep = build_ghz_prep(plan).moments().size();
  const std::size_t after_rotation = build_mqc_circuit(plan, 0.0, false).moments().size() - prep;
  auto parity_circuit = [&](double phi) { return with_waits(build_parity_circuit(plan, phi), {prep}, wait_ns, dev); };
  auto mqc_circuit = [&](double phi) {
    return with_waits(build_mqc_circuit(plan, phi, false), {prep, after_rotation}, wait_ns, dev);
  };

  const DensityMatrix rho = density_oracle(with_waits(build_ghz_prep(plan), {prep}, wait_ns, dev), noise);
  check_state(rho);
  const double exact = 2 * std::sqrt(mqc_decompose(rho).at(n));
  const PhiGrid grid = phi_grid(n);
  std::vector<double> exact_parity, exact_s;
  for (double phi : grid.angles) {
    exact_parity.push_back(parity_of(oracle_distribution(parity_circuit(phi), noise)));
    exact_s.push_back(oracle_distribution(mqc_circuit(phi), noise)[0]);
  }
  worst = std::max(worst, std::abs(parity_coherence(single_sweep(grid, exact_parity), n).value - exact));
  worst = std::max(worst, std::abs(2 * std::sqrt(mqc_spectrum(single_sweep(grid, exact_s)).at(n)) - exact));

  const std::uint64_t shots = 16384;
  std::vector<SweepResult> parity_reps, mqc_reps;
  for (std::uint64_t r = 0; r < 8; ++r) {
    std::vector<double> p, s;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double phi = grid.angles[j];
      p.push_back(parity_expectation(run_trajectories(parity_circuit(phi), noise, shots, derive_seed({66, 1, j, r}))));
      s.push_back(s_phi(run_trajectories(mqc_circuit(phi), noise, shots, derive_seed({66, 2, j, r}))));
    }
    parity_reps.push_back(single_sweep(grid, p));
    mqc_reps.push_back(single_sweep(grid, s));
  }
  const Coherence c = parity_coherence(aggregate_repetitions(parity_reps), n);
  const MqcSpectrum spec = mqc_spectrum(aggregate_repetitions(mqc_reps));
  const double from_mqc = 2 * std::sqrt(spec.at(n));
  const double from_mqc_err = spec.stderr_at(n).value() / std::sqrt(spec.at(n));
  const double combined = std::hypot(c.stderr.value(), from_mqc_err);
  const double gap = std::abs(c.value - from_mqc);
  return {worst <= 1e-9 && gap <= combined,
          fmt("exact max diff %.2e; sampled C = %.4f +- %.4f, 2 sqrt(I_4) = %.4f +- %.4f (exact %.4f), gap %.4f vs %.4f",
              worst, c.value, *c.stderr, from_mqc, from_mqc_err, exact, gap, combined)};
}

// Exhaustive simplex grid with an incrementally updated residual.
Eigen::VectorXd grid_search(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int steps) {
  const Eigen::Index k = a.cols();
  const double h = 1.0 / steps;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(k), best = x;
  Eigen::VectorXd r = -b;
  double best_value = std::numeric_limits<double>::infinity();
  auto visit = [&](auto&& self, Eigen::Index j, int left) -> void {
    if (j == k - 1) {
      x(j) = left * h;
      const double v = (r + x(j) * a.col(j)).squaredNorm();
      if (v < best_value) {
        best_value = v;
        best = x;
      }
      return;
    }
    for (int i = 0; i <= left; ++i) {
      x(j) = i * h;
      self(self, j + 1, left - i);
      r += h * a.col(j);
    }
    r -= (left + 1) * h * a.col(j);
  };
  visit(visit, 0, steps);
  return best;
}

Outcome mitigation_correctness() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 0.1);
  double worst_unbiased = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 5;
    std::vector<double> errs;
    for (int q = 0; q < n; ++q) errs.push_back(u(rng));
    const CalibrationMatrix a = build_full_calibration(n, ReadoutModel::symmetric(errs), 0);
    const Eigen::VectorXd p = testing::random_simplex_point(a.matrix.cols(), rng, trial % 2 ? 0.5 : 0.0);
    Distribution measured{n, {}};
    const Eigen::VectorXd v = a.matrix * p;
    for (Eigen::Index i = 0; i < v.size(); ++i) measured.weights[a.labels[static_cast<std::size_t>(i)]] = v(i);
    const MitigatedDistribution m = mitigate(measured, a);
    for (std::size_t i = 0; i < m.probabilities.size(); ++i) {
      worst_unbiased = std::max(worst_unbiased, std::abs(m.probabilities[i] - p(static_cast<Eigen::Index>(i))));
    }
  }

  double worst_grid = 0.0, worst_support = 0.0;
  int grid_cases = 0;
  for (Eigen::Index k = 2; k <= 6; ++k) {
    for (int trial = 0; trial < 8; ++trial) {
      const Eigen::MatrixXd a = testing::random_confusion(k, 0.3, rng);
      const Eigen::VectorXd b = trial % 2 ? Eigen::VectorXd(a * testing::random_simplex_point(k, rng, 0.4))
                                          : testing::random_simplex_point(k, rng, 0.5);
      const Eigen::VectorXd x = solve_simplex_lsq(a, b).x;
      worst_support = std::max(worst_support, (x - testing::simplex_lsq_by_supports(a, b)).cwiseAbs().maxCoeff());
      if (k <= 4 && (k < 4 || trial < 3)) {
        worst_grid = std::max(worst_grid, (x - grid_search(a, b, 1000)).cwiseAbs().maxCoeff());
        ++grid_cases;
      }
    }
  }
  return {worst_unbiased <= 1e-8 && worst_grid <= 2e-3 && worst_support <= 2e-3,
          fmt("unbiased max err %.2e; grid (step 1e-3, %d cases, K<=4) %.2e; support enumeration (K<=6) %.2e",
              worst_unbiased, grid_cases, worst_grid, worst_support)};
}

Outcome truncation_convergence() {
  QubitParams qp = system_one_median_qubit();
  qp.readout_fidelity = 0.97;
  const fs::path yaml = fs::temp_directory_path() / "mqc_acceptance_device.yaml";
  std::ofstream(yaml) << device_to_yaml(system_one_device().with_uniform_qubits(qp));

  ExperimentSpec s;
  s.device_path = yaml.string();
  s.num_qubits = 8;
  s.shots = 8192;
  s.repetitions = 8;
  s.seed = 8;
  const RawData data = collect(s);
  const PhiGrid grid = phi_grid(8);
  const std::uint64_t cal_seed = 81;
  const std::vector<std::size_t> ks{256};
  const auto rows = convergence_study(grid, data.sweep, 8, ks, data.readout, 4096, cal_seed);
  const CalibrationMatrix full = build_full_calibration(8, data.readout, 4096, cal_seed);
  const MqcSpectrum f = mqc_spectrum(
      corrected_sweep(grid, data.sweep, [&](const Distribution& d) { return mitigate(d, full).to_distribution(); }));
  std::vector<Distribution> all;
  for (const auto& rep : data.sweep) all.insert(all.end(), rep.begin(), rep.end());
  const std::size_t observed = select_truncation_states(std::span<const Distribution>(all), 256).size();
  const double d0 = std::abs(rows[0].i0 - f.at(0)), d8 = std::abs(rows[0].i_n - f.at(8));
  return {d0 < 0.005 && d8 < 0.005,
          fmt("K=256 (%zu states observed): I_0 %.5f vs %.5f, I_8 %.5f vs %.5f", observed, rows[0].i0, f.at(0),
              rows[0].i_n, f.at(8))};
}

FidelityReport drift_run(double sigma, bool refocus, std::uint64_t shots, int reps) {
  ExperimentSpec s;
  s.num_qubits = 8;
  s.median_qubits = true;
  s.shots = shots;
  s.repetitions = reps;
  s.seed = 9;
  s.refocus = refocus;
  s.noise = NoiseToggles{false, true, sigma, false};
  return analyze(collect(s)).fidelity_raw.value();
}

Outcome refocusing_effect() {
  // Bisect log σ until the unrefocused direct fidelity is about 0.8.
  double lo = std::log(1e-4), hi = std::log(2e-3);
  for (int it = 0; it < 8; ++it) {
    const double mid = 0.5 * (lo + hi);
    (*drift_run(std::exp(mid), false, 1024, 2).direct > 0.8 ? lo : hi) = mid;
  }
  const double sigma = std::exp(0.5 * (lo + hi));
  const FidelityReport plain = drift_run(sigma, false, 4096, 8), echo = drift_run(sigma, true, 4096, 8);
  const FidelityReport plain0 = drift_run(0.0, false, 4096, 8), echo0 = drift_run(0.0, true, 4096, 8);
  const double gain = *echo.direct - *plain.direct;
  const double err = std::hypot(*echo.direct_stderr, *plain.direct_stderr);
  const double diff0 = std::abs(*echo0.direct - *plain0.direct);
  const double err0 = std::hypot(*echo0.direct_stderr, *plain0.direct_stderr);
  return {gain >= 5 * err && diff0 <= 2 * err0,
          fmt("sigma = %.3e rad/ns: F %.4f -> %.4f refocused (gain %.1f stderr); no drift: %.4f vs %.4f (%.1f stderr)",
              sigma, *plain.direct, *echo.direct, gain / err, *plain0.direct, *echo0.direct, diff0 / err0)};
}

Outcome monotone_degradation() {
  std::string detail;
  double previous = 2.0;
  bool ok = true;
  for (int n : {4, 6, 8, 10, 12}) {
    ExperimentSpec s;
    s.num_qubits = n;
    s.median_qubits = true;
    s.shots = 2048;
    s.repetitions = 2;
    s.seed = 10;
    const FidelityReport f = analyze(collect(s)).fidelity_raw.value();
    ok = ok && f.lower < previous;
    previous = f.lower;
    detail += fmt("%sN=%d %.4f", detail.empty() ? "" : ", ", n, f.lower);
  }
  return {ok, "lower bounds " + detail};
}

Outcome variant_equivalence() {
  double worst = 0.0;
  for (int n = 2; n <= 8; ++n) {
    const EntanglingPlan plan = device_plan(n);
    const PhiGrid grid = phi_grid(n);
    const MqcSpectrum ghz = mqc_spectrum(single_sweep(grid, exact_mqc_signal(plan)));
    for (MqcVariant v : {MqcVariant::StarGraph, MqcVariant::CompleteGraph}) {
      const MqcSpectrum other = mqc_spectrum(single_sweep(grid, exact_mqc_signal(plan, v)));
      for (int q = 0; q <= n + 1; ++q) worst = std::max(worst, std::abs(other.at(q) - ghz.at(q)));
    }
  }
  return {worst <= 1e-9, fmt("N=2..8, max |I_q diff| = %.2e", worst)};
}

Outcome replay_determinism() {
  int records = 0, matched = 0;
  double worst = 0.0;
  for (const auto& entry : fs::directory_iterator(fs::path(MQC_SOURCE_DIR) / "tests" / "golden")) {
    if (!entry.is_directory()) continue;
    ++records;
    const ReplayReport r = replay(entry.path());
    matched += r.matches ? 1 : 0;
    worst = std::max(worst, r.max_abs_diff);
  }
  return {records > 0 && matched == records && worst <= 1e-12,
          fmt("%d/%d golden records match, max diff %.1e", matched, records, worst)};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments pick criteria by number; default runs all.
  std::vector<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::stoul(argv[i]));
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"ideal signal", ideal_signal},
      {"ideal spectrum", ideal_spectrum},
      {"sampled spectrum", sampled_spectrum},
      {"oracle equivalence", oracle_equivalence},
      {"bound validity", bound_validity},
      {"parity identity", parity_identity},
      {"mitigation correctness", mitigation_correctness},
      {"truncation convergence", truncation_convergence},
      {"refocusing effect", refocusing_effect},
      {"monotone degradation", monotone_degradation},
      {"variant equivalence", variant_equivalence},
      {"replay determinism", replay_determinism},
  };
  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), i + 1) == only.end()) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s  %2zu %-24s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}

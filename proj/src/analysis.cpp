#include "mqc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace mqc {

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// |Σ_j e^{iqφ_j} x_j| / norm and its first-order standard error.
std::pair<double, std::optional<double>> dft_magnitude(const SweepResult& sweep, int q, double norm) {
  std::complex<double> z = 0.0;
  for (std::size_t j = 0; j < sweep.s_values.size(); ++j) {
    z += std::polar(sweep.s_values[j], q * sweep.phis.angles[j]);
  }
  const double mag = std::abs(z);
  if (!sweep.s_stderr) return {mag / norm, std::nullopt};
  double var = 0.0;
  for (std::size_t j = 0; j < sweep.s_values.size(); ++j) {
    const double sigma = (*sweep.s_stderr)[j];
    // d|z|/dx_j = Re(conj(z) e^{iqφ_j}) / |z|. At z = 0 the magnitude is not
    // differentiable; every direction is bounded by |e^{iqφ_j}| = 1.
    const double grad =
        mag > 0.0 ? std::real(std::conj(z) * std::polar(1.0, q * sweep.phis.angles[j])) / mag : 1.0;
    var += grad * grad * sigma * sigma;
  }
  return {mag / norm, std::sqrt(var) / norm};
}

}  // namespace

double s_phi(const CountsTable& counts) {
  if (counts.total() == 0) throw std::invalid_argument("s_phi needs a nonempty counts table");
  return static_cast<double>(counts.count(0)) / static_cast<double>(counts.total());
}

double s_phi(const Distribution& dist) {
  if (!(dist.total() > 0.0)) throw std::invalid_argument("s_phi needs a nonempty distribution");
  return dist.probability(0);
}

double parity_expectation(const CountsTable& counts) {
  return parity_expectation(Distribution::from_counts(counts));
}

double parity_expectation(const Distribution& dist) {
  const double total = dist.total();
  if (!(total > 0.0)) throw std::invalid_argument("parity needs a nonempty distribution");
  double acc = 0.0;
  for (const auto& [b, w] : dist.weights) acc += (excitations(b) % 2 == 0 ? w : -w);
  return acc / total;
}

void SweepResult::validate() const {
  if (s_values.size() != phis.size()) throw std::invalid_argument("sweep length does not match the phi grid");
  if (s_stderr && s_stderr->size() != phis.size()) {
    throw std::invalid_argument("stderr length does not match the phi grid");
  }
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
}

SweepResult aggregate_repetitions(std::span<const SweepResult> runs) {
  if (runs.empty()) throw std::invalid_argument("no repetitions to aggregate");
  const PhiGrid& grid = runs.front().phis;
  for (const auto& r : runs) {
    r.validate();
    if (!(r.phis == grid)) throw std::invalid_argument("repetitions use different phi grids");
  }
  const std::size_t reps = runs.size();
  SweepResult out{grid, std::vector<double>(grid.size(), 0.0), std::nullopt, static_cast<int>(reps)};
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double sum = 0.0;
    for (const auto& r : runs) sum += r.s_values[j];
    out.s_values[j] = sum / static_cast<double>(reps);
  }
  if (reps > 1) {
    out.s_stderr.emplace(grid.size(), 0.0);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      double ss = 0.0;
      for (const auto& r : runs) ss += (r.s_values[j] - out.s_values[j]) * (r.s_values[j] - out.s_values[j]);
      (*out.s_stderr)[j] = std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps));
    }
  }
  return out;
}

std::optional<double> MqcSpectrum::stderr_at(int q) const {
  if (!i_stderr) return std::nullopt;
  return i_stderr->at(static_cast<std::size_t>(q));
}

MqcSpectrum mqc_spectrum(const SweepResult& sweep) {
  sweep.validate();
  const int q_max = sweep.phis.q_max;
  if (q_max < 1 || sweep.s_values.size() != static_cast<std::size_t>(2 * q_max)) {
    throw std::invalid_argument("spectrum needs 2 q_max grid points");
  }
  MqcSpectrum out{q_max, {}, std::nullopt};
  if (sweep.s_stderr) out.i_stderr.emplace();
  for (int q = 0; q <= q_max; ++q) {
    const auto [value, err] = dft_magnitude(sweep, q, 2.0 * q_max);
    out.i_values.push_back(value);
    if (err) out.i_stderr->push_back(*err);
  }
  return out;
}

FidelityBounds fidelity_bounds(double i0, double i_n) {
  if (!(i0 >= 0.0) || !(i_n >= 0.0)) throw std::invalid_argument("MQC amplitudes must be nonnegative");
  const double raw = std::sqrt(i0 / 2.0) + std::sqrt(i_n);
  return {clamp01(2.0 * std::sqrt(i_n)), std::min(1.0, raw), raw};
}

double direct_fidelity(double p_allzero, double p_allone, double i_n) {
  if (!(i_n >= 0.0)) throw std::invalid_argument("I_N must be nonnegative");
  return clamp01(0.5 * (p_allzero + p_allone) + std::sqrt(i_n));
}

Coherence parity_coherence(const SweepResult& parity, int num_qubits) {
  parity.validate();
  const int q_max = parity.phis.q_max;
  if (num_qubits < 1 || num_qubits + 1 != q_max || parity.s_values.size() != 2 * static_cast<std::size_t>(q_max)) {
    throw std::invalid_argument("parity sweep grid does not match the qubit count");
  }
  const auto [value, err] = dft_magnitude(parity, num_qubits, q_max);
  Coherence c{value, std::nullopt};
  if (err) c.stderr = *err;
  return c;
}

Populations aggregate_populations(std::span<const Distribution> runs) {
  if (runs.empty()) throw std::invalid_argument("no population runs");
  std::vector<double> half;
  Populations out;
  for (const auto& d : runs) {
    const double p0 = d.probability(0);
    const double p1 = d.probability(all_ones(d.num_qubits));
    out.p_allzero += p0;
    out.p_allone += p1;
    half.push_back(0.5 * (p0 + p1));
  }
  const double reps = static_cast<double>(runs.size());
  out.p_allzero /= reps;
  out.p_allone /= reps;
  if (runs.size() > 1) {
    const double mean = 0.5 * (out.p_allzero + out.p_allone);
    double ss = 0.0;
    for (double h : half) ss += (h - mean) * (h - mean);
    out.half_sum_stderr = std::sqrt(ss / (reps - 1.0) / reps);
  }
  return out;
}

FidelityReport fidelity_report(const MqcSpectrum& spectrum, int num_qubits,
                               const std::optional<Populations>& populations) {
  if (num_qubits < 1 || num_qubits > spectrum.q_max) throw std::invalid_argument("qubit count outside the spectrum");
  const double i0 = spectrum.at(0);
  const double i_n = spectrum.at(num_qubits);
  const FidelityBounds b = fidelity_bounds(i0, i_n);
  FidelityReport r;
  r.lower = b.lower;
  r.upper = b.upper;
  r.upper_raw = b.upper_raw;

  // d√I/dI = 1/(2√I); at I = 0 the derivative diverges, so no stderr is given.
  std::optional<double> sqrt_in_err;
  if (spectrum.i_stderr && i_n > 0.0) sqrt_in_err = *spectrum.stderr_at(num_qubits) / (2.0 * std::sqrt(i_n));
  if (sqrt_in_err) {
    r.lower_stderr = 2.0 * *sqrt_in_err;
    if (i0 > 0.0) {
      const double d0 = *spectrum.stderr_at(0) / (2.0 * std::sqrt(2.0 * i0));
      r.upper_stderr = std::hypot(d0, *sqrt_in_err);
    }
  }
  if (populations) {
    r.direct = direct_fidelity(populations->p_allzero, populations->p_allone, i_n);
    if (sqrt_in_err && populations->half_sum_stderr) {
      r.direct_stderr = std::hypot(*populations->half_sum_stderr, *sqrt_in_err);
    }
  }
  r.entangled = r.lower > 0.5 || (r.direct && *r.direct > 0.5);
  return r;
}

}  // namespace mqc

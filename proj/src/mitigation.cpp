#include "mqc/mitigation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace mqc {

namespace {

constexpr double kKktTol = 1e-8;
// Above this many labels the tensored solve never forms A_S explicitly.
constexpr std::size_t kDenseTensoredLimit = 256;

using Op = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Largest violation of the simplex KKT conditions for gradient g at x:
// g_i equal to a common ν on the support and ≥ ν elsewhere.
double kkt_violation(const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  double nu = 0.0;
  int support = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) > 0.0) {
      nu += g(i);
      ++support;
    }
  }
  if (support == 0) return std::numeric_limits<double>::infinity();
  nu /= support;
  double err = std::abs(x.sum() - 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    err = std::max(err, -x(i));
    err = std::max(err, x(i) > 0.0 ? std::abs(g(i) - nu) : nu - g(i));
  }
  return err;
}

// FISTA with function-value restart on ‖A x − b‖² over the simplex.
Eigen::VectorXd accelerated_projected_gradient(const Op& forward, const Op& adjoint, const Eigen::VectorXd& b,
                                               double lipschitz, Eigen::VectorXd x, int max_iter) {
  const double step = 1.0 / lipschitz;
  Eigen::VectorXd y = x;
  double t = 1.0;
  double last = (forward(x) - b).squaredNorm();
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd g = 2.0 * adjoint(forward(y) - b);
    Eigen::VectorXd next = project_to_simplex(y - step * g);
    const double value = (forward(next) - b).squaredNorm();
    if (value > last && t > 1.0) {
      t = 1.0;
      y = x;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - x);
    const double change = (next - x).cwiseAbs().maxCoeff();
    x = std::move(next);
    t = t_next;
    last = value;
    if (change < 1e-16) break;
  }
  return x;
}

// Primal active-set method on Q = AᵀA, c = Aᵀb starting from feasible x.
// Returns false if a reduced KKT system is singular.
bool active_set(const Eigen::MatrixXd& q, const Eigen::VectorXd& c, Eigen::VectorXd& x) {
  const Eigen::Index k = x.size();
  std::vector<char> free(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < k; ++i) free[static_cast<std::size_t>(i)] = x(i) > 1e-12;
  if (std::find(free.begin(), free.end(), 1) == free.end()) {
    Eigen::Index best = 0;
    x.maxCoeff(&best);
    free[static_cast<std::size_t>(best)] = 1;
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!free[static_cast<std::size_t>(i)]) x(i) = 0.0;
  }
  x /= x.sum();

  const int max_iter = static_cast<int>(4 * k + 100);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (free[static_cast<std::size_t>(i)]) idx.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd rhs(m + 1);
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index s = 0; s < m; ++s) kkt(r, s) = q(idx[r], idx[s]);
      kkt(r, m) = 1.0;
      kkt(m, r) = 1.0;
      rhs(r) = c(idx[r]);
    }
    rhs(m) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) return false;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const double mu = sol(m);

    // Step toward the equality-constrained minimizer, stopping at the first
    // bound that would be crossed.
    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index r = 0; r < m; ++r) {
      const double xi = x(idx[r]);
      const double yi = sol(r);
      if (yi < 0.0 && xi - yi > 0.0) {
        const double a = xi / (xi - yi);
        if (a < alpha) {
          alpha = a;
          blocking = idx[r];
        }
      }
    }
    for (Eigen::Index r = 0; r < m; ++r) x(idx[r]) += alpha * (sol(r) - x(idx[r]));
    if (blocking >= 0) {
      x(blocking) = 0.0;
      free[static_cast<std::size_t>(blocking)] = 0;
      for (Eigen::Index r = 0; r < m; ++r) {
        if (x(idx[r]) <= 0.0) {
          x(idx[r]) = 0.0;
          free[static_cast<std::size_t>(idx[r])] = 0;
        }
      }
      continue;
    }

    // At the reduced minimizer: release the bound with the most negative
    // multiplier (Qx − c)_i + μ, if any.
    const Eigen::VectorXd grad = q * x - c;
    Eigen::Index enter = -1;
    double worst = -1e-13 * std::max(1.0, q.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < k; ++i) {
      if (free[static_cast<std::size_t>(i)]) continue;
      const double lambda = grad(i) + mu;
      if (lambda < worst) {
        worst = lambda;
        enter = i;
      }
    }
    if (enter < 0) return true;
    free[static_cast<std::size_t>(enter)] = 1;
  }
  return true;
}

std::string label_text(Bits b, int n) { return format_bits(b, n); }

void restrict_and_normalize(const Distribution& measured, const std::vector<Bits>& labels, Eigen::VectorXd& b,
                            double& dropped) {
  const double total = measured.total();
  if (!(total > 0.0)) throw std::invalid_argument("cannot mitigate an empty distribution");
  b.resize(static_cast<Eigen::Index>(labels.size()));
  double kept = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = measured.weights.find(labels[i]);
    b(static_cast<Eigen::Index>(i)) = it == measured.weights.end() ? 0.0 : it->second;
    kept += b(static_cast<Eigen::Index>(i));
  }
  // With nothing on the labels the target is the zero vector; the solve
  // still returns a point on the simplex and the loss shows up as dropped.
  if (kept > 0.0) b /= kept;
  dropped = 1.0 - kept / total;
}

MitigatedDistribution package(int n, std::vector<Bits> labels, const SimplexLsqResult& r, double dropped) {
  MitigatedDistribution out;
  out.num_qubits = n;
  out.labels = std::move(labels);
  out.probabilities.assign(r.x.data(), r.x.data() + r.x.size());
  out.residual = r.residual;
  out.dropped_mass = dropped;
  out.degenerate = r.degenerate;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Calibration matrices

void CalibrationMatrix::validate() const {
  const auto k = static_cast<Eigen::Index>(labels.size());
  if (k == 0 || matrix.rows() != k || matrix.cols() != k) {
    throw std::invalid_argument("calibration matrix must be K x K over a nonempty label set");
  }
  std::vector<Bits> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("duplicate calibration labels");
  }
  if ((matrix.array() < 0.0).any() || (matrix.array() > 1.0).any()) {
    throw std::invalid_argument("calibration entries must lie in [0, 1]");
  }
  if ((matrix.colwise().sum().array() > 1.0 + 1e-9).any()) {
    throw std::invalid_argument("calibration columns must sum to at most 1");
  }
}

std::string CalibrationMatrix::to_csv() const {
  std::ostringstream os;
  os << "measured\\prepared";
  for (Bits l : labels) os << ',' << label_text(l, num_qubits);
  os << '\n';
  char buf[32];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << label_text(labels[i], num_qubits);
    for (std::size_t j = 0; j < labels.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      os << ',' << buf;
    }
    os << '\n';
  }
  return os.str();
}

CalibrationMatrix CalibrationMatrix::from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(is, line)) throw std::invalid_argument("empty calibration CSV");
  const auto header = split(line);
  if (header.size() < 2) throw std::invalid_argument("calibration CSV header has no labels");
  CalibrationMatrix cal;
  cal.num_qubits = static_cast<int>(header[1].size());
  for (std::size_t j = 1; j < header.size(); ++j) cal.labels.push_back(parse_bits(header[j]));
  const auto k = static_cast<Eigen::Index>(cal.labels.size());
  cal.matrix = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!std::getline(is, line)) throw std::invalid_argument("calibration CSV is truncated");
    const auto cells = split(line);
    const bool ok = static_cast<Eigen::Index>(cells.size()) == k + 1 &&
                    parse_bits(cells[0]) == cal.labels[static_cast<std::size_t>(i)];
    if (!ok) {
      throw std::invalid_argument("calibration CSV row " + std::to_string(i) + " is malformed");
    }
    for (Eigen::Index j = 0; j < k; ++j) cal.matrix(i, j) = std::stod(cells[static_cast<std::size_t>(j + 1)]);
  }
  cal.validate();
  return cal;
}

CalibrationMatrix build_truncated_calibration(int num_qubits, std::vector<Bits> labels, const ReadoutModel& readout,
                                              std::uint64_t shots_per_state, std::uint64_t seed) {
  if (labels.empty()) throw std::invalid_argument("calibration needs at least one label");
  if (readout.num_qubits() != num_qubits) throw std::invalid_argument("readout model width mismatch");
  std::map<Bits, Eigen::Index> row;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >> num_qubits) throw std::invalid_argument("calibration label wider than the register");
    if (!row.emplace(labels[i], static_cast<Eigen::Index>(i)).second) {
      throw std::invalid_argument("duplicate calibration label " + format_bits(labels[i], num_qubits));
    }
  }
  const auto k = static_cast<Eigen::Index>(labels.size());
  CalibrationMatrix cal{num_qubits, labels, Eigen::MatrixXd::Zero(k, k)};
  for (Eigen::Index j = 0; j < k; ++j) {
    const Bits prepared = labels[static_cast<std::size_t>(j)];
    if (shots_per_state == 0) {
      for (Eigen::Index i = 0; i < k; ++i) {
        cal.matrix(i, j) = readout.probability(labels[static_cast<std::size_t>(i)], prepared);
      }
      continue;
    }
    for (std::uint64_t s = 0; s < shots_per_state; ++s) {
      ShotRng rng(derive_seed({seed, prepared, s}));
      const auto it = row.find(readout.sample(prepared, rng));
      if (it != row.end()) cal.matrix(it->second, j) += 1.0;
    }
    cal.matrix.col(j) /= static_cast<double>(shots_per_state);
  }
  return cal;
}

CalibrationMatrix build_full_calibration(int num_qubits, const ReadoutModel& readout, std::uint64_t shots_per_state,
                                         std::uint64_t seed) {
  if (num_qubits < 1 || num_qubits > 10) {
    throw std::invalid_argument("full calibration supports 1 to 10 qubits; use a truncated calibration");
  }
  std::vector<Bits> labels(std::size_t{1} << num_qubits);
  std::iota(labels.begin(), labels.end(), Bits{0});
  return build_truncated_calibration(num_qubits, std::move(labels), readout, shots_per_state, seed);
}

std::vector<Bits> select_truncation_states(std::span<const Distribution> experiments, std::size_t k) {
  if (k == 0) throw std::invalid_argument("K must be >= 1");
  std::map<Bits, double> weight;
  for (const auto& d : experiments) {
    const double total = d.total();
    if (!(total > 0.0)) continue;
    for (const auto& [b, w] : d.weights) weight[b] += w / total;
  }
  if (weight.empty()) throw std::invalid_argument("no counts to select truncation states from");
  std::vector<std::pair<Bits, double>> ranked(weight.begin(), weight.end());
  // std::map iteration is ascending in bitstring, so a stable sort keeps the
  // smaller bitstring first among equal weights.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<Bits> out{0};
  for (const auto& [b, w] : ranked) {
    if (out.size() >= k) break;
    if (b != 0) out.push_back(b);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Bits> select_truncation_states(std::span<const CountsTable> experiments, std::size_t k) {
  std::vector<Distribution> dists;
  for (const auto& c : experiments) {
    if (c.total() > 0) dists.push_back(Distribution::from_counts(c));
  }
  return select_truncation_states(std::span<const Distribution>(dists), k);
}

// ---------------------------------------------------------------------------
// Solver

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index k = v.size();
  std::vector<double> u(v.data(), v.data() + k);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    cumulative += u[static_cast<std::size_t>(j)];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

SimplexLsqResult solve_simplex_lsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  if (a.rows() != b.size() || a.cols() == 0) throw std::invalid_argument("solve_simplex_lsq: shape mismatch");
  const Eigen::MatrixXd q = a.transpose() * a;
  const Eigen::VectorXd c = a.transpose() * b;
  SimplexLsqResult r;

  // ‖Q‖_∞ bounds the largest eigenvalue of Q.
  const double lipschitz = 2.0 * q.cwiseAbs().rowwise().sum().maxCoeff();
  const Eigen::VectorXd start = a.rows() == a.cols()
                                    ? project_to_simplex(b)
                                    : Eigen::VectorXd::Constant(a.cols(), 1.0 / static_cast<double>(a.cols()));
  auto kkt_of = [&](const Eigen::VectorXd& x) { return kkt_violation(x, 2.0 * (q * x - c)); };

  if (lipschitz > 0.0) {
    const Op forward = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x; };
    const Op adjoint = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return a.transpose() * y; };
    const Eigen::VectorXd pg = accelerated_projected_gradient(forward, adjoint, b, lipschitz, start, 500);
    Eigen::VectorXd x = pg;
    if (active_set(q, c, x) && kkt_of(x) <= kKktTol) {
      r.x = x;
    } else if (kkt_of(pg) <= kKktTol) {
      r.x = pg;
    }
  }
  if (r.x.size() == 0) {
    r.x = start;
    r.degenerate = true;
  }
  r.residual = (a * r.x - b).squaredNorm();
  r.kkt_error = kkt_of(r.x);
  return r;
}

// ---------------------------------------------------------------------------
// Mitigation

Distribution MitigatedDistribution::to_distribution() const {
  Distribution d{num_qubits, {}};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (probabilities[i] > 0.0) d.weights[labels[i]] = probabilities[i];
  }
  return d;
}

MitigatedDistribution mitigate(const Distribution& measured, const CalibrationMatrix& a) {
  a.validate();
  Eigen::VectorXd b;
  double dropped = 0.0;
  restrict_and_normalize(measured, a.labels, b, dropped);
  return package(a.num_qubits, a.labels, solve_simplex_lsq(a.matrix, b), dropped);
}

MitigatedDistribution tensored_mitigate(const Distribution& measured, const ReadoutModel& readout) {
  if (readout.full) throw std::invalid_argument("tensored mitigation needs per-qubit confusion matrices");
  const int n = readout.num_qubits();
  if (n != measured.num_qubits) throw std::invalid_argument("readout model width mismatch");
  for (const auto& m : readout.per_qubit) {
    if (std::abs(m.determinant()) < 1e-12) throw std::invalid_argument("singular per-qubit confusion matrix");
  }
  std::vector<Bits> support{0};
  for (const auto& [bits, w] : measured.weights) {
    if (w > 0.0 && bits != 0) support.push_back(bits);
  }
  Eigen::VectorXd b;
  double dropped = 0.0;
  restrict_and_normalize(measured, support, b, dropped);
  const auto k = static_cast<Eigen::Index>(support.size());

  if (support.size() <= kDenseTensoredLimit) {
    Eigen::MatrixXd a(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        a(i, j) = readout.probability(support[static_cast<std::size_t>(i)], support[static_cast<std::size_t>(j)]);
      }
    }
    return package(n, support, solve_simplex_lsq(a, b), dropped);
  }

  // Large support: apply the factors one qubit at a time on a 2^n scratch
  // vector and read off the support rows.
  std::vector<double> scratch(std::size_t{1} << n);
  auto apply = [&](const Eigen::VectorXd& v, bool transpose) -> Eigen::VectorXd {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    for (Eigen::Index i = 0; i < k; ++i) scratch[support[static_cast<std::size_t>(i)]] = v(i);
    for (int q = 0; q < n; ++q) {
      const Eigen::Matrix2d m = transpose ? Eigen::Matrix2d(readout.per_qubit[static_cast<std::size_t>(q)].transpose())
                                          : readout.per_qubit[static_cast<std::size_t>(q)];
      const std::size_t bit = std::size_t{1} << q;
      for (std::size_t i = 0; i < scratch.size(); ++i) {
        if (i & bit) continue;
        const double x0 = scratch[i];
        const double x1 = scratch[i | bit];
        scratch[i] = m(0, 0) * x0 + m(0, 1) * x1;
        scratch[i | bit] = m(1, 0) * x0 + m(1, 1) * x1;
      }
    }
    Eigen::VectorXd out(k);
    for (Eigen::Index i = 0; i < k; ++i) out(i) = scratch[support[static_cast<std::size_t>(i)]];
    return out;
  };
  const Op forward = [&](const Eigen::VectorXd& v) { return apply(v, false); };
  const Op adjoint = [&](const Eigen::VectorXd& v) { return apply(v, true); };
  double lipschitz = 2.0;
  for (const auto& m : readout.per_qubit) {
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(m);
    lipschitz *= svd.singularValues()(0) * svd.singularValues()(0);
  }
  SimplexLsqResult r;
  r.x = accelerated_projected_gradient(forward, adjoint, b, lipschitz, project_to_simplex(b), 5000);
  r.residual = (forward(r.x) - b).squaredNorm();
  r.kkt_error = kkt_violation(r.x, 2.0 * adjoint(forward(r.x) - b));
  return package(n, support, r, dropped);
}

SweepResult corrected_sweep(const PhiGrid& grid, const SweepData& data,
                            const std::function<Distribution(const Distribution&)>& correct) {
  std::vector<SweepResult> reps;
  for (const auto& rep : data) {
    if (rep.size() != grid.size()) throw std::invalid_argument("sweep data do not cover the phi grid");
    SweepResult r{grid, {}, std::nullopt, 1};
    for (const auto& d : rep) r.s_values.push_back(s_phi(correct(d)));
    reps.push_back(std::move(r));
  }
  return aggregate_repetitions(reps);
}

std::vector<ConvergenceRow> convergence_study(const PhiGrid& grid, const SweepData& data, int num_qubits,
                                              std::span<const std::size_t> k_values, const ReadoutModel& readout,
                                              std::uint64_t shots_per_state, std::uint64_t seed) {
  if (!std::is_sorted(k_values.begin(), k_values.end())) throw std::invalid_argument("K values must be ascending");
  std::vector<Distribution> all;
  for (const auto& rep : data) all.insert(all.end(), rep.begin(), rep.end());
  const std::size_t full = std::size_t{1} << num_qubits;

  std::vector<ConvergenceRow> rows;
  for (std::size_t k : k_values) {
    const std::size_t capped = std::min(k, full);
    const auto labels = select_truncation_states(std::span<const Distribution>(all), capped);
    const CalibrationMatrix a = build_truncated_calibration(num_qubits, labels, readout, shots_per_state, seed);
    const SweepResult sweep =
        corrected_sweep(grid, data, [&](const Distribution& d) { return mitigate(d, a).to_distribution(); });
    const MqcSpectrum spec = mqc_spectrum(sweep);
    rows.push_back({k, spec.at(0), spec.at(num_qubits), spec.stderr_at(0), spec.stderr_at(num_qubits)});
  }
  return rows;
}

std::vector<std::size_t> excitation_histogram(std::span<const Bits> labels, int num_qubits) {
  std::vector<std::size_t> h(static_cast<std::size_t>(num_qubits + 1), 0);
  for (Bits b : labels) ++h.at(static_cast<std::size_t>(excitations(b)));
  return h;
}

}  // namespace mqc

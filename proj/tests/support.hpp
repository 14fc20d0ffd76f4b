#pragma once

// Shared helpers for the unit and acceptance tests: random states and
// channels, and small brute-force reference computations.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mqc/channels.hpp"
#include "mqc/circuits.hpp"
#include "mqc/density.hpp"
#include "mqc/device.hpp"

namespace mqc::testing {

using Rng = std::mt19937_64;

inline Eigen::MatrixXcd ginibre(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXcd g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = cplx(normal(rng), normal(rng));
  }
  return g;
}

/// Haar-random unitary via QR of a Ginibre matrix with phase fix.
inline Eigen::MatrixXcd random_unitary(Eigen::Index dim, Rng& rng) {
  const Eigen::HouseholderQR<Eigen::MatrixXcd> qr(ginibre(dim, dim, rng));
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd r = qr.matrixQR();
  for (Eigen::Index j = 0; j < dim; ++j) {
    const cplx d = r(j, j);
    q.col(j) *= d / std::abs(d);
  }
  return q;
}

/// W W† / Tr for a dim × rank Ginibre W.
inline Eigen::MatrixXcd random_density_matrix(int num_qubits, int rank, Rng& rng) {
  const Eigen::Index dim = Eigen::Index{1} << num_qubits;
  const Eigen::MatrixXcd w = ginibre(dim, rank, rng);
  Eigen::MatrixXcd rho = w * w.adjoint();
  rho /= rho.trace();
  return 0.5 * (rho + rho.adjoint());
}

inline Eigen::MatrixXcd ghz_projector(int num_qubits) {
  const StateVector g = ghz_state(num_qubits);
  const Eigen::Map<const Eigen::VectorXcd> v(g.amplitudes().data(), static_cast<Eigen::Index>(g.size()));
  return v * v.adjoint();
}

/// Choi state of a channel on d-dimensional input: Σ_k (K ⊗ I)|Φ⟩⟨Φ|(K ⊗ I)†,
/// |Φ⟩ = Σ_i |i⟩|i⟩ / √d. Index = out · d + ref.
inline Eigen::MatrixXcd choi_state(const KrausChannel& ch) {
  const Eigen::Index d = ch.dim();
  Eigen::MatrixXcd choi = Eigen::MatrixXcd::Zero(d * d, d * d);
  for (const auto& k : ch.ops) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d * d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index o = 0; o < d; ++o) v(o * d + i) += k(o, i) / std::sqrt(static_cast<double>(d));
    }
    choi += v * v.adjoint();
  }
  return choi;
}

/// Average gate fidelity from the Choi state: F_avg = (d ⟨Φ|J|Φ⟩ + 1)/(d + 1).
inline double reference_average_fidelity(const KrausChannel& ch) {
  const Eigen::Index d = ch.dim();
  Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(d * d);
  for (Eigen::Index i = 0; i < d; ++i) phi(i * d + i) = 1.0 / std::sqrt(static_cast<double>(d));
  const double f_pro = (phi.adjoint() * choi_state(ch) * phi)(0, 0).real();
  return (static_cast<double>(d) * f_pro + 1.0) / (static_cast<double>(d) + 1.0);
}

/// ρ → Σ K ρ K† on a d-dimensional matrix.
inline Eigen::MatrixXcd apply_kraus(const KrausChannel& ch, const Eigen::MatrixXcd& rho) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rho.rows(), rho.cols());
  for (const auto& k : ch.ops) out += k * rho * k.adjoint();
  return out;
}

/// Rotates qubit 0 about Z so that the |1…1⟩⟨0…0| corner becomes real and
/// nonnegative.
inline Eigen::MatrixXcd align_corner(const Eigen::MatrixXcd& rho) {
  const Eigen::Index last = rho.rows() - 1;
  const cplx corner = rho(last, 0);
  if (std::abs(corner) == 0.0) return rho;
  const double phase = std::arg(corner);
  Eigen::VectorXcd diag(rho.rows());
  for (Eigen::Index i = 0; i < rho.rows(); ++i) diag(i) = (i & 1) ? std::polar(1.0, -phase) : cplx(1.0);
  return diag.asDiagonal() * rho * diag.conjugate().asDiagonal();
}

inline double ghz_fidelity(const Eigen::MatrixXcd& rho, int num_qubits) {
  return (ghz_projector(num_qubits) * rho).trace().real();
}

/// Chain plan 0 → 1 → … → n−1 on logical qubits.
inline EntanglingPlan chain_plan(int n) {
  EntanglingPlan plan;
  for (int q = 0; q < n; ++q) plan.qubits.push_back(q);
  for (int q = 0; q + 1 < n; ++q) plan.schedule.push_back({CxPair{q, q + 1}});
  return plan;
}

/// Binary fan-out: each reached qubit drives one new qubit per moment.
inline EntanglingPlan doubling_plan(int n) {
  EntanglingPlan plan;
  for (int q = 0; q < n; ++q) plan.qubits.push_back(q);
  int reached = 1;
  while (reached < n) {
    std::vector<CxPair> moment;
    const int limit = reached;
    for (int c = 0; c < limit && reached < n; ++c) moment.push_back(CxPair{c, reached++});
    plan.schedule.push_back(moment);
  }
  return plan;
}

/// All-to-all device with uniform parameters; lets graph-state variants and
/// arbitrary plans run without connectivity limits.
inline DeviceModel uniform_device(int n, const QubitParams& qp, const EdgeParams& ep = {}) {
  std::vector<QubitParams> qubits(static_cast<std::size_t>(n), qp);
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) edges.push_back(Edge{a, b, ep});
  }
  return DeviceModel("uniform", qubits, edges, ep);
}

// Random layered circuit with device durations on a uniform all-to-all device.
inline Circuit random_circuit(int n, const DeviceModel& dev, std::mt19937_64& rng) {
  Circuit c(n);
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int g = 0; g < 4 * n; ++g) {
    const int q = pick(rng);
    const int t = (q + 1 + pick(rng) % std::max(1, n - 1)) % n;
    if (n > 1 && g % 3 == 1) {
      c.append(Gate::cx(q, t));
    } else {
      c.append(Gate::u1q(q, Eigen::Matrix2cd(random_unitary(2, rng))));
    }
  }
  c.measure_all();
  std::vector<int> phys(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) phys[static_cast<std::size_t>(q)] = q;
  c.set_physical_qubits(phys);
  stamp_device_durations(c, dev);
  return c;
}

/// Exact minimizer of ‖Ax − b‖² on the simplex by trying every support:
/// on each subset solve the equality-constrained problem through its KKT
/// system and keep the best feasible point. Exponential in the size; K ≤ 10.
inline Eigen::VectorXd simplex_lsq_by_supports(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index k = a.cols();
  Eigen::VectorXd best;
  double best_value = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1U << k); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (mask >> j & 1U) cols.push_back(j);
    }
    const Eigen::Index m = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd as(a.rows(), m);
    for (Eigen::Index j = 0; j < m; ++j) as.col(j) = a.col(cols[static_cast<std::size_t>(j)]);
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    kkt.topLeftCorner(m, m) = 2 * as.transpose() * as;
    kkt.topRightCorner(m, 1).setOnes();
    kkt.bottomLeftCorner(1, m).setOnes();
    Eigen::VectorXd rhs(m + 1);
    rhs.head(m) = 2 * as.transpose() * b;
    rhs(m) = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if ((kkt * sol - rhs).norm() > 1e-9 || sol.head(m).minCoeff() < -1e-12) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
    for (Eigen::Index j = 0; j < m; ++j) x(cols[static_cast<std::size_t>(j)]) = std::max(0.0, sol(j));
    x /= x.sum();
    const double value = (a * x - b).squaredNorm();
    if (value < best_value) {
      best_value = value;
      best = x;
    }
  }
  return best;
}

/// Exhaustive search over the simplex grid of spacing `step` (K ≤ 3).
inline Eigen::VectorXd simplex_lsq_by_grid(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double step) {
  const Eigen::Index k = a.cols();
  const int steps = static_cast<int>(std::lround(1.0 / step));
  Eigen::VectorXd best, x(k);
  double best_value = std::numeric_limits<double>::infinity();
  auto visit = [&](auto&& self, Eigen::Index j, int left) -> void {
    if (j == k - 1) {
      x(j) = left * step;
      const double value = (a * x - b).squaredNorm();
      if (value < best_value) {
        best_value = value;
        best = x;
      }
      return;
    }
    for (int i = 0; i <= left; ++i) {
      x(j) = i * step;
      self(self, j + 1, left - i);
    }
  };
  visit(visit, 0, steps);
  return best;
}

/// Column-stochastic matrix close to the identity: column j keeps
/// 1 − leak_j on the diagonal and spreads leak_j randomly over the rest.
inline Eigen::MatrixXd random_confusion(Eigen::Index k, double max_leak, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd a(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd spread(k);
    for (Eigen::Index i = 0; i < k; ++i) spread(i) = i == j ? 0.0 : u(rng);
    const double leak = k > 1 ? max_leak * u(rng) : 0.0;
    if (spread.sum() > 0) spread *= leak / spread.sum();
    spread(j) = 1.0 - leak;
    a.col(j) = spread;
  }
  return a;
}

inline Eigen::VectorXd random_simplex_point(Eigen::Index k, Rng& rng, double sparsity = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd p(k);
  for (Eigen::Index i = 0; i < k; ++i) p(i) = u(rng) < sparsity ? 0.0 : e(rng);
  if (p.sum() == 0.0) p(0) = 1.0;
  return p / p.sum();
}

}  // namespace mqc::testing

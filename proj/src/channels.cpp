#include "mqc/channels.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace mqc {

namespace {

using cplx = std::complex<double>;

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

std::vector<Eigen::MatrixXcd> paulis() {
  const cplx i{0.0, 1.0};
  Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(2, 2);
  Eigen::MatrixXcd X(2, 2), Y(2, 2), Z(2, 2);
  X << 0.0, 1.0, 1.0, 0.0;
  Y << 0.0, -i, i, 0.0;
  Z << 1.0, 0.0, 0.0, -1.0;
  return {I, X, Y, Z};
}

}  // namespace

double KrausChannel::completeness_error() const {
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(dim(), dim());
  for (const auto& k : ops) {
    if (k.rows() != dim() || k.cols() != dim()) return std::numeric_limits<double>::infinity();
    sum += k.adjoint() * k;
  }
  return (sum - Eigen::MatrixXcd::Identity(dim(), dim())).cwiseAbs().maxCoeff();
}

bool KrausChannel::is_identity(double tol) const {
  if (ops.size() != 1) return false;
  // A single Kraus operator equal to the identity up to a global phase.
  const cplx phase = ops[0](0, 0);
  return std::abs(std::abs(phase) - 1.0) <= tol &&
         (ops[0] - phase * Eigen::MatrixXcd::Identity(dim(), dim())).cwiseAbs().maxCoeff() <= tol;
}

std::optional<std::vector<double>> KrausChannel::mixture_weights(double tol) const {
  std::vector<double> w;
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(dim(), dim());
  for (const auto& k : ops) {
    const Eigen::MatrixXcd kk = k.adjoint() * k;
    const double p = kk(0, 0).real();
    if ((kk - p * id).cwiseAbs().maxCoeff() > tol) return std::nullopt;
    w.push_back(p);
  }
  return w;
}

KrausChannel KrausChannel::identity(int num_qubits) {
  KrausChannel c;
  c.num_qubits = num_qubits;
  c.ops.push_back(Eigen::MatrixXcd::Identity(c.dim(), c.dim()));
  return c;
}

KrausChannel compose(const KrausChannel& second, const KrausChannel& first) {
  if (second.num_qubits != first.num_qubits) throw std::invalid_argument("channel dimension mismatch");
  KrausChannel out;
  out.num_qubits = first.num_qubits;
  for (const auto& a : second.ops) {
    for (const auto& b : first.ops) {
      Eigen::MatrixXcd k = a * b;
      if (k.cwiseAbs().maxCoeff() > 0.0) out.ops.push_back(std::move(k));
    }
  }
  return out;
}

KrausChannel tensor(const KrausChannel& low, const KrausChannel& high) {
  if (low.num_qubits != 1 || high.num_qubits != 1) throw std::invalid_argument("tensor expects single-qubit channels");
  KrausChannel out;
  out.num_qubits = 2;
  for (const auto& h : high.ops) {
    for (const auto& l : low.ops) out.ops.push_back(kron(h, l));
  }
  return out;
}

KrausChannel thermal_relaxation_channel(double t1_us, double t2_us, double duration_ns) {
  if (!(t1_us > 0.0) || !(t2_us > 0.0)) throw std::invalid_argument("T1 and T2 must be positive");
  if (t2_us > 2.0 * t1_us) throw std::invalid_argument("T2 must not exceed 2*T1");
  if (!(duration_ns >= 0.0)) throw std::invalid_argument("duration must be nonnegative");
  if (duration_ns == 0.0) return KrausChannel::identity(1);
  const double t_us = duration_ns * 1e-3;
  const double p1 = std::isinf(t_us) ? 1.0 : 1.0 - std::exp(-t_us / t1_us);
  const double keep = std::sqrt(1.0 - p1);  // amplitude damping coherence factor
  const double total = std::exp(-t_us / t2_us);
  // Extra pure dephasing so keep · f = e^{-t/T2}.
  const double f = keep > 0.0 ? std::min(1.0, total / keep) : 0.0;
  KrausChannel c;
  Eigen::MatrixXcd k0 = Eigen::MatrixXcd::Zero(2, 2);
  k0(0, 0) = 1.0;
  k0(1, 1) = keep * f;
  c.ops.push_back(k0);
  if (p1 > 0.0) {
    Eigen::MatrixXcd k1 = Eigen::MatrixXcd::Zero(2, 2);
    k1(0, 1) = std::sqrt(p1);
    c.ops.push_back(k1);
  }
  const double rest = (1.0 - p1) * (1.0 - f * f);
  if (rest > 0.0) {
    Eigen::MatrixXcd k2 = Eigen::MatrixXcd::Zero(2, 2);
    k2(1, 1) = std::sqrt(rest);
    c.ops.push_back(k2);
  }
  return c;
}

KrausChannel dephasing_channel(double coherence_factor) {
  if (!(coherence_factor >= 0.0 && coherence_factor <= 1.0)) {
    throw std::invalid_argument("coherence factor must be in [0, 1]");
  }
  const auto p = paulis();
  KrausChannel c;
  c.ops.push_back(std::sqrt((1.0 + coherence_factor) / 2.0) * p[0]);
  if (coherence_factor < 1.0) c.ops.push_back(std::sqrt((1.0 - coherence_factor) / 2.0) * p[3]);
  return c;
}

KrausChannel depolarizing_channel(double lambda, int num_qubits) {
  if (num_qubits != 1 && num_qubits != 2) throw std::invalid_argument("depolarizing supports 1 or 2 qubits");
  const int d = 1 << num_qubits;
  const double d2 = static_cast<double>(d * d);
  if (!(lambda >= 0.0 && lambda <= d2 / (d2 - 1.0))) throw std::invalid_argument("depolarizing lambda out of range");
  const auto p = paulis();
  KrausChannel c;
  c.num_qubits = num_qubits;
  std::vector<Eigen::MatrixXcd> basis;
  if (num_qubits == 1) {
    basis = p;
  } else {
    for (const auto& hi : p) {
      for (const auto& lo : p) basis.push_back(kron(hi, lo));
    }
  }
  c.ops.push_back(std::sqrt(1.0 - lambda * (d2 - 1.0) / d2) * basis[0]);
  if (lambda > 0.0) {
    for (std::size_t k = 1; k < basis.size(); ++k) c.ops.push_back(std::sqrt(lambda / d2) * basis[k]);
  }
  return c;
}

double process_fidelity(const KrausChannel& channel) {
  const double d = channel.dim();
  double s = 0.0;
  for (const auto& k : channel.ops) s += std::norm(k.trace());
  return s / (d * d);
}

double average_gate_fidelity(const KrausChannel& channel) {
  const double d = channel.dim();
  return (d * process_fidelity(channel) + 1.0) / (d + 1.0);
}

DepolarizingFill depolarizing_fill(double gate_error, const KrausChannel& relaxation) {
  if (!(gate_error >= 0.0 && gate_error < 1.0)) throw std::invalid_argument("gate error must be in [0, 1)");
  if (!relaxation.is_complete()) throw std::invalid_argument("relaxation channel is not complete");
  const double d = relaxation.dim();
  const double f_relax = process_fidelity(relaxation);
  const double f_target = ((1.0 - gate_error) * (d + 1.0) - 1.0) / d;
  // Depolarizing acts on the Choi state as (1-λ) J + λ I/d², so the
  // composed process fidelity is (1-λ) F_relax + λ/d².
  double lambda = (f_relax - f_target) / (f_relax - 1.0 / (d * d));
  DepolarizingFill out;
  if (lambda < -1e-12) {
    out.infeasible = true;
    lambda = 0.0;
  }
  lambda = std::max(lambda, 0.0);
  out.lambda = lambda;
  out.channel = lambda > 0.0 ? compose(depolarizing_channel(lambda, relaxation.num_qubits), relaxation)
                             : relaxation;
  return out;
}

}  // namespace mqc

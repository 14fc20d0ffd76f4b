#include "mqc/density.hpp"

#include <cmath>
#include <span>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "mqc/kernels.hpp"

namespace mqc {

namespace {

void check_width(int n) {
  if (n < 1 || n > kMaxDensityQubits) {
    throw std::invalid_argument("density matrices support 1 to 8 qubits, got " + std::to_string(n));
  }
}

// Column-major storage makes element (r, c) sit at r | (c << n), so the
// statevector kernels act on rows through bit q and on columns through
// bit q + n.
std::span<cplx> vec(Eigen::MatrixXcd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }

void apply_kraus_op(Eigen::MatrixXcd& m, int n, const Eigen::MatrixXcd& k, const std::vector<int>& qubits) {
  if (qubits.size() == 1) {
    kernels::apply_1q(vec(m), qubits[0], Eigen::Matrix2cd(k));
    kernels::apply_1q(vec(m), qubits[0] + n, Eigen::Matrix2cd(k.conjugate()));
  } else {
    kernels::apply_2q(vec(m), qubits[0], qubits[1], Eigen::Matrix4cd(k));
    kernels::apply_2q(vec(m), qubits[0] + n, qubits[1] + n, Eigen::Matrix4cd(k.conjugate()));
  }
}

void rotate_collective(Eigen::MatrixXcd& m, int n, double phi) {
  const cplx d0 = std::polar(1.0, phi / 2.0);
  const cplx d1 = std::polar(1.0, -phi / 2.0);
  for (int q = 0; q < n; ++q) {
    kernels::apply_diag(vec(m), q, d0, d1);
    kernels::apply_diag(vec(m), q + n, std::conj(d0), std::conj(d1));
  }
}

}  // namespace

DensityMatrix::DensityMatrix(int num_qubits) : num_qubits_(num_qubits) {
  check_width(num_qubits);
  const Eigen::Index d = Eigen::Index{1} << num_qubits;
  matrix_ = Eigen::MatrixXcd::Zero(d, d);
  matrix_(0, 0) = 1.0;
}

DensityMatrix::DensityMatrix(int num_qubits, Eigen::MatrixXcd matrix)
    : num_qubits_(num_qubits), matrix_(std::move(matrix)) {
  check_width(num_qubits);
  const Eigen::Index d = Eigen::Index{1} << num_qubits;
  if (matrix_.rows() != d || matrix_.cols() != d) throw std::invalid_argument("density matrix has wrong shape");
  if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("density matrix is not Hermitian");
  }
  if (std::abs(matrix_.trace() - 1.0) > 1e-10) throw std::invalid_argument("density matrix trace is not 1");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(matrix_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-8) {
    throw std::invalid_argument("density matrix is not positive semidefinite");
  }
}

DensityMatrix DensityMatrix::from_state(const StateVector& state) {
  check_width(state.num_qubits());
  const auto a = state.amplitudes();
  const Eigen::Map<const Eigen::VectorXcd> psi(a.data(), static_cast<Eigen::Index>(a.size()));
  DensityMatrix rho(state.num_qubits());
  rho.matrix_ = psi * psi.adjoint();
  return rho;
}

cplx DensityMatrix::operator()(Bits row, Bits col) const {
  return matrix_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
}

void DensityMatrix::apply(const Gate& gate) {
  const int n = num_qubits_;
  switch (gate.kind) {
    case GateKind::CX:
      kernels::apply_cx(vec(matrix_), gate.qubits[0], gate.qubits[1]);
      kernels::apply_cx(vec(matrix_), gate.qubits[0] + n, gate.qubits[1] + n);
      return;
    default: {
      const Eigen::Matrix2cd u = gate.unitary();
      kernels::apply_1q(vec(matrix_), gate.qubits[0], u);
      kernels::apply_1q(vec(matrix_), gate.qubits[0] + n, u.conjugate());
    }
  }
}

void DensityMatrix::apply(const KrausChannel& channel, const std::vector<int>& qubits) {
  if (static_cast<int>(qubits.size()) != channel.num_qubits) {
    throw std::invalid_argument("channel width does not match qubit list");
  }
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim(), dim());
  for (const auto& k : channel.ops) {
    Eigen::MatrixXcd branch = matrix_;
    apply_kraus_op(branch, num_qubits_, k, qubits);
    out += branch;
  }
  matrix_ = std::move(out);
}

double DensityMatrix::trace() const { return matrix_.trace().real(); }

double DensityMatrix::purity() const { return (matrix_ * matrix_).trace().real(); }

double DensityMatrix::overlap(const StateVector& state) const {
  const auto a = state.amplitudes();
  const Eigen::Map<const Eigen::VectorXcd> psi(a.data(), static_cast<Eigen::Index>(a.size()));
  return (psi.adjoint() * matrix_ * psi)(0, 0).real();
}

std::vector<double> DensityMatrix::probabilities() const {
  std::vector<double> p(static_cast<std::size_t>(dim()));
  for (Eigen::Index i = 0; i < dim(); ++i) p[static_cast<std::size_t>(i)] = std::max(0.0, matrix_(i, i).real());
  return p;
}

DensityMatrix density_oracle(const Circuit& circuit, const NoiseModel& noise) {
  const int n = circuit.num_qubits();
  check_width(n);
  DensityMatrix rho(n);
  const auto& phys = circuit.physical_qubits();
  const double sigma = noise.toggles().drift_sigma;
  for (const Moment& m : circuit.moments()) {
    const double dur = m.duration_ns();
    std::vector<double> busy(static_cast<std::size_t>(n), 0.0);
    for (const Gate& g : m.gates) {
      rho.apply(g);
      for (const ChannelOp& op : noise.gate_channels(g, phys)) rho.apply(*op.channel, op.qubits);
      for (int q : g.targets()) busy[static_cast<std::size_t>(q)] = g.duration_ns;
    }
    for (int q = 0; q < n; ++q) {
      if (const KrausChannel* ch = noise.idle_channel(q, dur - busy[static_cast<std::size_t>(q)], phys)) {
        rho.apply(*ch, {q});
      }
    }
    if (sigma > 0.0 && dur > 0.0) {
      const KrausChannel drift = dephasing_channel(std::exp(-0.5 * sigma * sigma * dur * dur));
      for (int q = 0; q < n; ++q) rho.apply(drift, {q});
    }
  }
  return rho;
}

std::vector<double> measured_distribution(const DensityMatrix& rho, const Circuit& circuit,
                                          const std::optional<ReadoutModel>& readout) {
  std::vector<int> measured = circuit.measured_qubits();
  if (measured.empty()) {
    for (int q = 0; q < circuit.num_qubits(); ++q) measured.push_back(q);
  }
  const std::vector<double> full = rho.probabilities();
  std::vector<double> marginal(std::size_t{1} << measured.size(), 0.0);
  for (std::size_t i = 0; i < full.size(); ++i) {
    Bits b = 0;
    for (std::size_t k = 0; k < measured.size(); ++k) b |= ((static_cast<Bits>(i) >> measured[k]) & 1U) << k;
    marginal[b] += full[i];
  }
  if (!readout || readout->is_ideal()) return marginal;
  return readout->apply(std::move(marginal));
}

std::vector<double> oracle_distribution(const Circuit& circuit, const NoiseModel& noise) {
  return measured_distribution(density_oracle(circuit, noise), circuit,
                               noise.readout_for(circuit.physical_qubits()));
}

double MqcDecomposition::sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

MqcDecomposition mqc_decompose(const DensityMatrix& rho) {
  const int n = rho.num_qubits();
  const Eigen::Index d = rho.dim();
  const Eigen::MatrixXcd& m = rho.matrix();

  std::vector<Eigen::MatrixXcd> parts(static_cast<std::size_t>(2 * n + 1), Eigen::MatrixXcd::Zero(d, d));
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) {
      const int q = excitations(static_cast<Bits>(r)) - excitations(static_cast<Bits>(c));
      parts[static_cast<std::size_t>(q + n)](r, c) = m(r, c);
    }
  }

  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double phi = 0.7390851332151607;
  for (int q = -n; q <= n; ++q) {
    Eigen::MatrixXcd rotated = parts[static_cast<std::size_t>(q + n)];
    rotate_collective(rotated, n, phi);
    const Eigen::MatrixXcd expected = std::polar(1.0, -q * phi) * parts[static_cast<std::size_t>(q + n)];
    if ((rotated - expected).cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw std::logic_error("coherence order " + std::to_string(q) + " fails the rotation check");
    }
  }

  MqcDecomposition out{n, std::vector<double>(static_cast<std::size_t>(2 * n + 1), 0.0)};
  for (int q = -n; q <= n; ++q) {
    const auto& a = parts[static_cast<std::size_t>(q + n)];
    for (int p = -n; p <= n; ++p) {
      // Tr(A B) = Σ A_rc B_cr = sum of A ∘ Bᵀ.
      const cplx t = a.cwiseProduct(parts[static_cast<std::size_t>(p + n)].transpose()).sum();
      if (p == -q) {
        out.values[static_cast<std::size_t>(q + n)] = t.real();
      } else if (std::abs(t) > 1e-12 * scale * scale) {
        throw std::logic_error("coherence orders " + std::to_string(q) + " and " + std::to_string(p) +
                               " are not orthogonal");
      }
    }
  }
  return out;
}

std::vector<double> overlap_signal(const DensityMatrix& rho, const PhiGrid& grid) {
  std::vector<double> s;
  s.reserve(grid.size());
  for (double phi : grid.angles) {
    Eigen::MatrixXcd rotated = rho.matrix();
    rotate_collective(rotated, rho.num_qubits(), phi);
    s.push_back(rotated.cwiseProduct(rho.matrix().transpose()).sum().real());
  }
  return s;
}

StateVector ghz_state(int num_qubits) {
  std::vector<cplx> amps(std::size_t{1} << num_qubits, 0.0);
  amps.front() = M_SQRT1_2;
  amps.back() = M_SQRT1_2;
  return StateVector(num_qubits, std::move(amps));
}

}  // namespace mqc

#include "mqc/statevector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mqc/kernels.hpp"
#include "mqc/seeds.hpp"

namespace mqc {

namespace {

constexpr double kUnitaryTol = 1e-10;
constexpr double kNormTol = 1e-9;

void check_qubit(int q, int n) {
  if (q < 0 || q >= n) {
    throw std::out_of_range("qubit index " + std::to_string(q) +
                            " out of range for " + std::to_string(n) + " qubits");
  }
}

}  // namespace

const char* gate_name(GateKind kind) {
  switch (kind) {
    case GateKind::H: return "H";
    case GateKind::X: return "X";
    case GateKind::CX: return "CX";
    case GateKind::RZ: return "RZ";
    case GateKind::RXY: return "RXY";
    case GateKind::U1Q: return "U1Q";
  }
  return "?";
}

Gate Gate::h(int q) {
  Gate g;
  g.kind = GateKind::H;
  g.qubits = {q, -1};
  g.duration_ns = kDefaultOneQubitNs;
  return g;
}

Gate Gate::x(int q) {
  Gate g = h(q);
  g.kind = GateKind::X;
  return g;
}

Gate Gate::cx(int control, int target) {
  if (control == target) throw std::invalid_argument("CX needs two distinct qubits");
  Gate g;
  g.kind = GateKind::CX;
  g.qubits = {control, target};
  g.duration_ns = kDefaultTwoQubitNs;
  return g;
}

Gate Gate::rz(int q, double theta) {
  Gate g;
  g.kind = GateKind::RZ;
  g.qubits = {q, -1};
  g.theta = theta;
  g.duration_ns = 0.0;
  return g;
}

Gate Gate::rxy(int q, double theta, double axis) {
  Gate g = h(q);
  g.kind = GateKind::RXY;
  g.theta = theta;
  g.axis = axis;
  return g;
}

Gate Gate::u1q(int q, const Eigen::Matrix2cd& m) {
  const double err = (m.adjoint() * m - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff();
  if (!(err <= kUnitaryTol)) throw std::invalid_argument("U1Q matrix is not unitary");
  Gate g = h(q);
  g.kind = GateKind::U1Q;
  g.matrix = m;
  return g;
}

Eigen::Matrix2cd Gate::unitary() const {
  using std::numbers::sqrt2;
  const cplx i{0.0, 1.0};
  Eigen::Matrix2cd m;
  switch (kind) {
    case GateKind::H:
      m << 1.0 / sqrt2, 1.0 / sqrt2, 1.0 / sqrt2, -1.0 / sqrt2;
      return m;
    case GateKind::X:
      m << 0.0, 1.0, 1.0, 0.0;
      return m;
    case GateKind::RZ:
      m << std::exp(i * theta / 2.0), 0.0, 0.0, std::exp(-i * theta / 2.0);
      return m;
    case GateKind::RXY: {
      const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
      m << c, -i * s * std::exp(-i * axis), -i * s * std::exp(i * axis), c;
      return m;
    }
    case GateKind::U1Q:
      return matrix;
    case GateKind::CX:
      break;
  }
  throw std::logic_error("CX has no single-qubit unitary");
}

Gate Gate::inverse() const {
  Gate g = *this;
  switch (kind) {
    case GateKind::RZ:
    case GateKind::RXY:
      g.theta = -theta;
      break;
    case GateKind::U1Q:
      g.matrix = matrix.adjoint();
      break;
    default:
      break;
  }
  return g;
}

double Moment::duration_ns() const {
  double d = 0.0;
  for (const Gate& g : gates) d = std::max(d, g.duration_ns);
  return d;
}

bool Moment::touches(int qubit) const {
  return std::any_of(gates.begin(), gates.end(), [&](const Gate& g) {
    const auto t = g.targets();
    return std::find(t.begin(), t.end(), qubit) != t.end();
  });
}

Circuit::Circuit(int num_qubits) : num_qubits_(num_qubits) {
  if (num_qubits < 1 || num_qubits > kMaxQubits) {
    throw std::invalid_argument("circuit width must be in [1, 24]");
  }
  physical_.resize(static_cast<std::size_t>(num_qubits));
  for (int q = 0; q < num_qubits; ++q) physical_[static_cast<std::size_t>(q)] = q;
}

std::size_t Circuit::gate_count() const {
  std::size_t n = 0;
  for (const Moment& m : moments_) n += m.gates.size();
  return n;
}

void Circuit::add_moment(std::vector<Gate> gates) {
  std::vector<bool> used(static_cast<std::size_t>(num_qubits_), false);
  for (const Gate& g : gates) {
    for (int q : g.targets()) {
      check_qubit(q, num_qubits_);
      if (used[static_cast<std::size_t>(q)]) {
        throw std::invalid_argument("qubit " + std::to_string(q) +
                                    " appears twice in one moment");
      }
      used[static_cast<std::size_t>(q)] = true;
    }
  }
  moments_.push_back(Moment{std::move(gates)});
}

void Circuit::append(const Gate& gate) {
  for (int q : gate.targets()) check_qubit(q, num_qubits_);
  std::size_t slot = 0;
  for (std::size_t m = moments_.size(); m > 0; --m) {
    const bool blocked = std::any_of(gate.targets().begin(), gate.targets().end(),
                                     [&](int q) { return moments_[m - 1].touches(q); });
    if (blocked) {
      slot = m;
      break;
    }
  }
  if (slot == moments_.size()) {
    moments_.push_back(Moment{{gate}});
  } else {
    moments_[slot].gates.push_back(gate);
  }
}

void Circuit::append(const Circuit& other) {
  if (other.num_qubits_ != num_qubits_) throw std::invalid_argument("circuit width mismatch");
  for (const Moment& m : other.moments_) add_moment(m.gates);
}

void Circuit::measure_all() {
  measured_.resize(static_cast<std::size_t>(num_qubits_));
  for (int q = 0; q < num_qubits_; ++q) measured_[static_cast<std::size_t>(q)] = q;
}

void Circuit::set_physical_qubits(std::vector<int> physical) {
  if (physical.size() != static_cast<std::size_t>(num_qubits_)) {
    throw std::invalid_argument("physical qubit map must have one entry per qubit");
  }
  physical_ = std::move(physical);
}

void Circuit::stamp_durations(const std::function<double(const Gate&)>& duration_of) {
  for (Moment& m : moments_) {
    for (Gate& g : m.gates) g.duration_ns = duration_of(g);
  }
}

StateVector::StateVector(int num_qubits) : num_qubits_(num_qubits) {
  if (num_qubits < 1 || num_qubits > kMaxQubits) {
    throw std::invalid_argument("state width must be in [1, 24]");
  }
  amps_.assign(std::size_t{1} << num_qubits, cplx{0.0, 0.0});
  amps_[0] = 1.0;
}

StateVector::StateVector(int num_qubits, std::vector<cplx> amplitudes)
    : StateVector(num_qubits) {
  if (amplitudes.size() != amps_.size()) throw std::invalid_argument("amplitude count mismatch");
  if (std::abs(kernels::norm_squared(amplitudes) - 1.0) > kNormTol) {
    throw std::invalid_argument("amplitudes are not normalized");
  }
  amps_ = std::move(amplitudes);
}

StateVector StateVector::basis(int num_qubits, Bits index) {
  StateVector s(num_qubits);
  if (index >= s.size()) throw std::out_of_range("basis index out of range");
  s.amps_[0] = 0.0;
  s.amps_[index] = 1.0;
  return s;
}

double StateVector::norm_squared() const { return kernels::norm_squared(amps_); }

void StateVector::apply(const Gate& gate) {
  for (int q : gate.targets()) check_qubit(q, num_qubits_);
  switch (gate.kind) {
    case GateKind::CX:
      if (gate.qubits[0] == gate.qubits[1]) throw std::invalid_argument("CX needs two distinct qubits");
      kernels::apply_cx(amps_, gate.qubits[0], gate.qubits[1]);
      return;
    case GateKind::X:
      kernels::apply_x(amps_, gate.qubits[0]);
      return;
    case GateKind::RZ: {
      const cplx i{0.0, 1.0};
      kernels::apply_diag(amps_, gate.qubits[0], std::exp(i * gate.theta / 2.0),
                          std::exp(-i * gate.theta / 2.0));
      return;
    }
    case GateKind::U1Q: {
      const double err =
          (gate.matrix.adjoint() * gate.matrix - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff();
      if (!(err <= kUnitaryTol)) throw std::invalid_argument("U1Q matrix is not unitary");
      kernels::apply_1q(amps_, gate.qubits[0], gate.matrix);
      return;
    }
    default:
      kernels::apply_1q(amps_, gate.qubits[0], gate.unitary());
  }
}

void StateVector::apply(const Circuit& circuit) {
  if (circuit.num_qubits() != num_qubits_) {
    throw std::invalid_argument("circuit has " + std::to_string(circuit.num_qubits()) +
                                " qubits, state has " + std::to_string(num_qubits_));
  }
  for (const Moment& m : circuit.moments()) {
    for (const Gate& g : m.gates) apply(g);
  }
}

StateVector apply_gate(StateVector state, const Gate& gate) {
  state.apply(gate);
  return state;
}

StateVector apply_circuit(StateVector state, const Circuit& circuit) {
  state.apply(circuit);
  return state;
}

double probability_of(const StateVector& state, Bits outcome) {
  if (outcome >= state.size()) throw std::out_of_range("outcome out of range");
  return std::norm(state.amplitude(outcome));
}

double probability_of(const StateVector& state, std::string_view bits) {
  if (bits.size() != static_cast<std::size_t>(state.num_qubits())) {
    throw std::invalid_argument("bitstring length " + std::to_string(bits.size()) +
                                " does not match " + std::to_string(state.num_qubits()) +
                                " qubits");
  }
  return probability_of(state, parse_bits(bits));
}

Bits draw_outcome(std::span<const double> cdf, double u) {
  const double target = u * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  // upper_bound never lands on a zero-weight entry: its cdf equals the
  // previous one, which is already <= target.
  if (it == cdf.end()) --it;
  return static_cast<Bits>(it - cdf.begin());
}

CountsTable sample_counts(const StateVector& state, std::uint64_t shots, std::uint64_t seed) {
  if (shots == 0) throw std::invalid_argument("shots must be >= 1");
  std::vector<double> cdf(state.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < state.size(); ++k) {
    acc += std::norm(state.amplitudes()[k]);
    cdf[k] = acc;
  }
  CountsTable counts(state.num_qubits());
  for (std::uint64_t s = 0; s < shots; ++s) {
    ShotRng rng(derive_seed({seed, s}));
    counts.add(draw_outcome(cdf, rng.uniform()));
  }
  return counts;
}

}  // namespace mqc

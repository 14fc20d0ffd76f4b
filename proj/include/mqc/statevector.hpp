#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mqc/bits.hpp"
#include "mqc/counts.hpp"

namespace mqc {

using cplx = std::complex<double>;

inline constexpr double kDefaultOneQubitNs = 50.0;
inline constexpr double kDefaultTwoQubitNs = 400.0;

enum class GateKind { H, X, CX, RZ, RXY, U1Q };

const char* gate_name(GateKind kind);

/// One gate instance. CX uses qubits[0] as control and qubits[1] as target;
/// every other kind acts on qubits[0] only.
///
/// RZ(theta) is the collective-rotation factor exp(-i theta n), n the
/// excitation number of the qubit, i.e. diag(e^{i theta/2}, e^{-i theta/2})
/// up to global phase. RZ is virtual: zero duration, no error.
/// RXY(theta, axis) = exp(-i theta/2 (cos(axis) X + sin(axis) Y)).
struct Gate {
  GateKind kind = GateKind::H;
  std::array<int, 2> qubits{0, -1};
  double theta = 0.0;
  double axis = 0.0;
  Eigen::Matrix2cd matrix = Eigen::Matrix2cd::Identity();
  double duration_ns = 0.0;

  static Gate h(int q);
  static Gate x(int q);
  static Gate cx(int control, int target);
  static Gate rz(int q, double theta);
  static Gate rxy(int q, double theta, double axis);
  /// Throws std::invalid_argument unless `m` is unitary within 1e-10.
  static Gate u1q(int q, const Eigen::Matrix2cd& m);

  int arity() const { return kind == GateKind::CX ? 2 : 1; }
  std::span<const int> targets() const {
    return {qubits.data(), static_cast<std::size_t>(arity())};
  }
  /// 2x2 unitary of a single-qubit gate. Throws std::logic_error for CX.
  Eigen::Matrix2cd unitary() const;
  Gate inverse() const;
};

/// Gates acting on disjoint qubits during one time slice.
struct Moment {
  std::vector<Gate> gates;

  double duration_ns() const;
  bool touches(int qubit) const;
};

class Circuit {
 public:
  explicit Circuit(int num_qubits);

  int num_qubits() const { return num_qubits_; }
  const std::vector<Moment>& moments() const { return moments_; }
  std::size_t gate_count() const;

  /// Appends one time slice. Throws std::invalid_argument if a qubit index
  /// is out of range or a qubit appears twice.
  void add_moment(std::vector<Gate> gates);
  /// Places `gate` in the earliest moment after the last one that touches
  /// any of its qubits.
  void append(const Gate& gate);
  void append(const Circuit& other);

  const std::vector<int>& measured_qubits() const { return measured_; }
  void measure_all();

  /// Logical-to-physical qubit map used for noise lookup. Identity unless set.
  const std::vector<int>& physical_qubits() const { return physical_; }
  void set_physical_qubits(std::vector<int> physical);

  void stamp_durations(const std::function<double(const Gate&)>& duration_of);

 private:
  int num_qubits_;
  std::vector<Moment> moments_;
  std::vector<int> measured_;
  std::vector<int> physical_;
};

/// Dense pure state of n ≤ 24 qubits, always normalized.
class StateVector {
 public:
  /// |0…0⟩.
  explicit StateVector(int num_qubits);
  StateVector(int num_qubits, std::vector<cplx> amplitudes);
  static StateVector basis(int num_qubits, Bits index);

  int num_qubits() const { return num_qubits_; }
  std::size_t size() const { return amps_.size(); }
  std::span<const cplx> amplitudes() const { return amps_; }
  cplx amplitude(Bits index) const { return amps_.at(index); }
  double norm_squared() const;

  void apply(const Gate& gate);
  void apply(const Circuit& circuit);

 private:
  int num_qubits_;
  std::vector<cplx> amps_;
};

StateVector apply_gate(StateVector state, const Gate& gate);
StateVector apply_circuit(StateVector state, const Circuit& circuit);

double probability_of(const StateVector& state, Bits outcome);
/// `bits` is rendered qubit-0-rightmost and must have num_qubits characters.
double probability_of(const StateVector& state, std::string_view bits);

/// Multinomial sample over |amplitudes|². Shot s draws from its own stream
/// seeded with derive_seed({seed, s}).
CountsTable sample_counts(const StateVector& state, std::uint64_t shots,
                          std::uint64_t seed);

/// Draws one outcome given a uniform u in [0,1) and the cumulative
/// distribution `cdf` (last entry is the total weight).
Bits draw_outcome(std::span<const double> cdf, double u);

}  // namespace mqc

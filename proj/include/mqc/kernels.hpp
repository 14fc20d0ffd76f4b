#pragma once

// Low-level amplitude kernels shared by the pure-state simulator and the
// vectorized density-matrix oracle. None of them validate their arguments.

#include <complex>
#include <span>

#include <Eigen/Core>

namespace mqc::kernels {

using cplx = std::complex<double>;

void apply_1q(std::span<cplx> amps, int qubit, const Eigen::Matrix2cd& m);
void apply_2q(std::span<cplx> amps, int q0, int q1, const Eigen::Matrix4cd& m);
void apply_cx(std::span<cplx> amps, int control, int target);
void apply_x(std::span<cplx> amps, int qubit);
void apply_diag(std::span<cplx> amps, int qubit, cplx d0, cplx d1);

/// Scales only the amplitudes whose `qubit` bit equals `bit`.
void scale_half(std::span<cplx> amps, int qubit, int bit, double factor);

/// Reduced density matrix of one qubit (unnormalized: trace = norm²).
Eigen::Matrix2cd reduced_1q(std::span<const cplx> amps, int qubit);
/// Reduced density matrix of (q0, q1); local index = bit(q0) + 2·bit(q1).
Eigen::Matrix4cd reduced_2q(std::span<const cplx> amps, int q0, int q1);

/// Σ|a_k|² over amplitudes with `qubit` set.
double excited_population(std::span<const cplx> amps, int qubit);

double norm_squared(std::span<const cplx> amps);

}  // namespace mqc::kernels

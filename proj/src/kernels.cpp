#include "mqc/kernels.hpp"

#include <cstddef>

namespace mqc::kernels {

namespace {

// Iterates over all indices with `qubit` clear, visiting pairs (i, i | bit).
template <typename F>
void for_pairs(std::size_t size, int qubit, F&& f) {
  const std::size_t bit = std::size_t{1} << qubit;
  for (std::size_t hi = 0; hi < size; hi += 2 * bit) {
    for (std::size_t i = hi; i < hi + bit; ++i) f(i, i | bit);
  }
}

}  // namespace

void apply_1q(std::span<cplx> amps, int qubit, const Eigen::Matrix2cd& m) {
  const cplx m00 = m(0, 0), m01 = m(0, 1), m10 = m(1, 0), m11 = m(1, 1);
  for_pairs(amps.size(), qubit, [&](std::size_t i0, std::size_t i1) {
    const cplx a0 = amps[i0], a1 = amps[i1];
    amps[i0] = m00 * a0 + m01 * a1;
    amps[i1] = m10 * a0 + m11 * a1;
  });
}

void apply_2q(std::span<cplx> amps, int q0, int q1, const Eigen::Matrix4cd& m) {
  const std::size_t b0 = std::size_t{1} << q0;
  const std::size_t b1 = std::size_t{1} << q1;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    if ((i & b0) || (i & b1)) continue;
    const std::size_t idx[4] = {i, i | b0, i | b1, i | b0 | b1};
    cplx in[4];
    for (int k = 0; k < 4; ++k) in[k] = amps[idx[k]];
    for (int r = 0; r < 4; ++r) {
      cplx acc = 0.0;
      for (int c = 0; c < 4; ++c) acc += m(r, c) * in[c];
      amps[idx[r]] = acc;
    }
  }
}

void apply_cx(std::span<cplx> amps, int control, int target) {
  const std::size_t cbit = std::size_t{1} << control;
  for_pairs(amps.size(), target, [&](std::size_t i0, std::size_t i1) {
    if (i0 & cbit) std::swap(amps[i0], amps[i1]);
  });
}

void apply_x(std::span<cplx> amps, int qubit) {
  for_pairs(amps.size(), qubit,
            [&](std::size_t i0, std::size_t i1) { std::swap(amps[i0], amps[i1]); });
}

void apply_diag(std::span<cplx> amps, int qubit, cplx d0, cplx d1) {
  for_pairs(amps.size(), qubit, [&](std::size_t i0, std::size_t i1) {
    amps[i0] *= d0;
    amps[i1] *= d1;
  });
}

void scale_half(std::span<cplx> amps, int qubit, int bit, double factor) {
  for_pairs(amps.size(), qubit, [&](std::size_t i0, std::size_t i1) {
    amps[bit ? i1 : i0] *= factor;
  });
}

Eigen::Matrix2cd reduced_1q(std::span<const cplx> amps, int qubit) {
  double p0 = 0.0, p1 = 0.0;
  cplx c10 = 0.0;
  for_pairs(amps.size(), qubit, [&](std::size_t i0, std::size_t i1) {
    p0 += std::norm(amps[i0]);
    p1 += std::norm(amps[i1]);
    c10 += amps[i1] * std::conj(amps[i0]);
  });
  Eigen::Matrix2cd rho;
  rho << p0, std::conj(c10), c10, p1;
  return rho;
}

Eigen::Matrix4cd reduced_2q(std::span<const cplx> amps, int q0, int q1) {
  const std::size_t b0 = std::size_t{1} << q0;
  const std::size_t b1 = std::size_t{1} << q1;
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
  for (std::size_t i = 0; i < amps.size(); ++i) {
    if ((i & b0) || (i & b1)) continue;
    const cplx v[4] = {amps[i], amps[i | b0], amps[i | b1], amps[i | b0 | b1]};
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) rho(r, c) += v[r] * std::conj(v[c]);
    }
  }
  return rho;
}

double excited_population(std::span<const cplx> amps, int qubit) {
  double p1 = 0.0;
  for_pairs(amps.size(), qubit,
            [&](std::size_t, std::size_t i1) { p1 += std::norm(amps[i1]); });
  return p1;
}

double norm_squared(std::span<const cplx> amps) {
  double s = 0.0;
  for (const cplx& a : amps) s += std::norm(a);
  return s;
}

}  // namespace mqc::kernels

#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

namespace mqc {

/// Computational basis index. Qubit j is bit j (qubit 0 is the least
/// significant bit); text renderings put qubit 0 rightmost.
using Bits = std::uint64_t;

inline constexpr int kMaxQubits = 24;

inline int excitations(Bits b) { return std::popcount(b); }

inline Bits all_ones(int num_qubits) {
  return num_qubits >= 64 ? ~Bits{0} : (Bits{1} << num_qubits) - 1;
}

std::string format_bits(Bits b, int num_qubits);

/// Parses a '0'/'1' string with qubit 0 rightmost. Throws
/// std::invalid_argument on other characters or more than 63 digits.
Bits parse_bits(std::string_view text);

}  // namespace mqc

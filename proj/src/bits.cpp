#include "mqc/bits.hpp"

#include <stdexcept>

namespace mqc {

std::string format_bits(Bits b, int num_qubits) {
  std::string s(static_cast<std::size_t>(num_qubits), '0');
  for (int q = 0; q < num_qubits; ++q) {
    if ((b >> q) & 1U) s[static_cast<std::size_t>(num_qubits - 1 - q)] = '1';
  }
  return s;
}

Bits parse_bits(std::string_view text) {
  if (text.empty() || text.size() > 63) {
    throw std::invalid_argument("bitstring length must be in [1, 63]");
  }
  Bits b = 0;
  for (char c : text) {
    if (c != '0' && c != '1') {
      throw std::invalid_argument("bitstring may only contain '0' and '1': " +
                                  std::string(text));
    }
    b = (b << 1) | static_cast<Bits>(c == '1');
  }
  return b;
}

}  // namespace mqc

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>

#include "mqc/bits.hpp"

namespace mqc {

/// Observed bitstring counts for one experiment repetition.
class CountsTable {
 public:
  CountsTable() = default;
  explicit CountsTable(int num_qubits) : num_qubits_(num_qubits) {}

  void add(Bits outcome, std::uint64_t n = 1);
  std::uint64_t count(Bits outcome) const;
  std::uint64_t total() const { return total_; }
  int num_qubits() const { return num_qubits_; }
  bool empty() const { return entries_.empty(); }
  const std::map<Bits, std::uint64_t>& entries() const { return entries_; }

  friend bool operator==(const CountsTable&, const CountsTable&) = default;

 private:
  int num_qubits_ = 0;
  std::uint64_t total_ = 0;
  std::map<Bits, std::uint64_t> entries_;
};

/// Nonnegative weights over bitstrings. Either normalized sampled
/// frequencies or exact probabilities.
struct Distribution {
  int num_qubits = 0;
  std::map<Bits, double> weights;

  static Distribution from_counts(const CountsTable& counts);

  double total() const;
  double probability(Bits outcome) const;
};

}  // namespace mqc

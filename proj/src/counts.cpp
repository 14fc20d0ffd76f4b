#include "mqc/counts.hpp"

#include <stdexcept>

namespace mqc {

void CountsTable::add(Bits outcome, std::uint64_t n) {
  if (n == 0) return;
  entries_[outcome] += n;
  total_ += n;
}

std::uint64_t CountsTable::count(Bits outcome) const {
  auto it = entries_.find(outcome);
  return it == entries_.end() ? 0 : it->second;
}

Distribution Distribution::from_counts(const CountsTable& counts) {
  if (counts.total() == 0) throw std::invalid_argument("empty counts table");
  Distribution d;
  d.num_qubits = counts.num_qubits();
  const double total = static_cast<double>(counts.total());
  for (const auto& [b, n] : counts.entries()) d.weights[b] = static_cast<double>(n) / total;
  return d;
}

double Distribution::total() const {
  double s = 0.0;
  for (const auto& [b, w] : weights) s += w;
  return s;
}

double Distribution::probability(Bits outcome) const {
  const double t = total();
  if (t <= 0.0) throw std::invalid_argument("empty distribution");
  auto it = weights.find(outcome);
  return it == weights.end() ? 0.0 : it->second / t;
}

}  // namespace mqc

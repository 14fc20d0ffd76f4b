#include "mqc/noise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include "mqc/kernels.hpp"

namespace mqc {

// ---------------------------------------------------------------------------
// Readout

ReadoutModel ReadoutModel::ideal(int num_qubits) {
  return ReadoutModel{std::vector<Eigen::Matrix2d>(static_cast<std::size_t>(num_qubits),
                                                   Eigen::Matrix2d::Identity()),
                      std::nullopt};
}

ReadoutModel ReadoutModel::symmetric(const std::vector<double>& errors) {
  ReadoutModel r;
  for (double e : errors) {
    Eigen::Matrix2d m;
    m << 1.0 - e, e, e, 1.0 - e;
    r.per_qubit.push_back(m);
  }
  r.validate();
  return r;
}

ReadoutModel ReadoutModel::from_full(const Eigen::MatrixXd& matrix) {
  const auto dim = matrix.rows();
  if (dim != matrix.cols() || dim < 2 || (dim & (dim - 1)) != 0) {
    throw std::invalid_argument("full confusion matrix must be 2^n x 2^n");
  }
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  if (n > 10) throw std::invalid_argument("full confusion matrix limited to 10 qubits");
  ReadoutModel r = ideal(n);
  r.full = matrix;
  r.validate();
  return r;
}

int ReadoutModel::num_qubits() const { return static_cast<int>(per_qubit.size()); }

bool ReadoutModel::is_ideal() const {
  if (full) return full->isIdentity(0.0);
  return std::all_of(per_qubit.begin(), per_qubit.end(),
                     [](const Eigen::Matrix2d& m) { return m.isIdentity(0.0); });
}

void ReadoutModel::validate() const {
  auto check = [](const Eigen::MatrixXd& m) {
    if ((m.array() < 0.0).any() || (m.array() > 1.0).any()) {
      throw std::invalid_argument("confusion entries must be in [0, 1]");
    }
    if (((m.colwise().sum().array() - 1.0).abs() > 1e-9).any()) {
      throw std::invalid_argument("confusion matrix columns must sum to 1");
    }
  };
  for (const auto& m : per_qubit) check(m);
  if (full) check(*full);
}

double ReadoutModel::probability(Bits measured, Bits prepared) const {
  if (full) return (*full)(static_cast<Eigen::Index>(measured), static_cast<Eigen::Index>(prepared));
  double p = 1.0;
  for (std::size_t q = 0; q < per_qubit.size(); ++q) {
    p *= per_qubit[q]((measured >> q) & 1U, (prepared >> q) & 1U);
  }
  return p;
}

Bits ReadoutModel::sample(Bits prepared, ShotRng& rng) const {
  if (full) {
    const Eigen::Index col = static_cast<Eigen::Index>(prepared);
    double u = rng.uniform() * full->col(col).sum();
    for (Eigen::Index r = 0; r < full->rows(); ++r) {
      u -= (*full)(r, col);
      if (u < 0.0) return static_cast<Bits>(r);
    }
    return static_cast<Bits>(full->rows() - 1);
  }
  Bits out = prepared;
  for (std::size_t q = 0; q < per_qubit.size(); ++q) {
    const unsigned b = (prepared >> q) & 1U;
    const double flip = per_qubit[q](1 - b, b);
    if (flip > 0.0 && rng.uniform() < flip) out ^= Bits{1} << q;
  }
  return out;
}

std::vector<double> ReadoutModel::apply(std::vector<double> p) const {
  if (p.size() != (std::size_t{1} << num_qubits())) throw std::invalid_argument("distribution width mismatch");
  if (full) {
    const Eigen::Map<const Eigen::VectorXd> v(p.data(), static_cast<Eigen::Index>(p.size()));
    const Eigen::VectorXd out = *full * v;
    return {out.data(), out.data() + out.size()};
  }
  for (std::size_t q = 0; q < per_qubit.size(); ++q) {
    const Eigen::Matrix2d& c = per_qubit[q];
    if (c.isIdentity(0.0)) continue;
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i & bit) continue;
      const double p0 = p[i];
      const double p1 = p[i | bit];
      p[i] = c(0, 0) * p0 + c(0, 1) * p1;
      p[i | bit] = c(1, 0) * p0 + c(1, 1) * p1;
    }
  }
  return p;
}

ReadoutModel ReadoutModel::select(const std::vector<int>& qubits) const {
  if (full) throw std::invalid_argument("cannot select qubits from a full confusion matrix");
  ReadoutModel r;
  for (int q : qubits) r.per_qubit.push_back(per_qubit.at(static_cast<std::size_t>(q)));
  return r;
}

// ---------------------------------------------------------------------------
// Noise model

struct NoiseModel::ChannelCache {
  std::mutex mutex;
  std::map<std::pair<int, double>, KrausChannel> relax;
  std::map<std::tuple<int, int, double>, KrausChannel> depol;
};

NoiseModel::NoiseModel(DeviceModel device, NoiseToggles toggles)
    : device_(std::move(device)), toggles_(toggles), cache_(std::make_shared<ChannelCache>()) {
  if (!(toggles_.drift_sigma >= 0.0)) throw std::invalid_argument("drift sigma must be nonnegative");
}

NoiseModel NoiseModel::noiseless(int num_qubits) {
  DeviceModel device("noiseless", std::vector<QubitParams>(static_cast<std::size_t>(num_qubits)), {});
  return NoiseModel(std::move(device), NoiseToggles{false, false, 0.0, false});
}

bool NoiseModel::has_quantum_noise() const {
  return toggles_.gates || toggles_.idle || toggles_.drift_sigma > 0.0;
}

std::optional<ReadoutModel> NoiseModel::readout_for(const std::vector<int>& physical) const {
  if (!toggles_.readout) return std::nullopt;
  if (readout_override_) {
    if (readout_override_->num_qubits() != static_cast<int>(physical.size())) {
      throw std::invalid_argument("readout override width does not match the circuit");
    }
    return readout_override_;
  }
  std::vector<double> errors;
  for (int q : physical) errors.push_back(1.0 - device_.qubit(q).readout_fidelity);
  return ReadoutModel::symmetric(errors);
}

const KrausChannel& NoiseModel::relaxation(int physical, double duration_ns) const {
  std::lock_guard lock(cache_->mutex);
  const auto key = std::make_pair(physical, duration_ns);
  auto it = cache_->relax.find(key);
  if (it == cache_->relax.end()) {
    const QubitParams& p = device_.qubit(physical);
    it = cache_->relax.emplace(key, thermal_relaxation_channel(p.t1_us, p.t2_us, duration_ns)).first;
  }
  return it->second;
}

const KrausChannel& NoiseModel::depolarizing(const std::vector<int>& physical, double duration_ns) const {
  const int a = physical.at(0);
  const int b = physical.size() > 1 ? physical[1] : -1;
  {
    std::lock_guard lock(cache_->mutex);
    auto it = cache_->depol.find({a, b, duration_ns});
    if (it != cache_->depol.end()) return it->second;
  }
  KrausChannel depol;
  if (b < 0) {
    const QubitParams& p = device_.qubit(a);
    const auto fill = depolarizing_fill(p.gate_error, relaxation(a, duration_ns));
    depol = depolarizing_channel(fill.lambda, 1);
  } else {
    const double err = device_.edge(a, b).gate_error;
    const auto fill = depolarizing_fill(err, tensor(relaxation(a, duration_ns), relaxation(b, duration_ns)));
    depol = depolarizing_channel(fill.lambda, 2);
  }
  std::lock_guard lock(cache_->mutex);
  return cache_->depol.emplace(std::make_tuple(a, b, duration_ns), std::move(depol)).first->second;
}

std::vector<ChannelOp> NoiseModel::gate_channels(const Gate& gate, const std::vector<int>& physical) const {
  if (!toggles_.gates || gate.kind == GateKind::RZ) return {};
  std::vector<int> phys;
  for (int q : gate.targets()) phys.push_back(physical.at(static_cast<std::size_t>(q)));
  std::vector<ChannelOp> out;
  for (std::size_t i = 0; i < phys.size(); ++i) {
    out.push_back(ChannelOp{{gate.targets()[i]}, &relaxation(phys[i], gate.duration_ns)});
  }
  std::vector<int> logical(gate.targets().begin(), gate.targets().end());
  out.push_back(ChannelOp{logical, &depolarizing(phys, gate.duration_ns)});
  return out;
}

const KrausChannel* NoiseModel::idle_channel(int logical, double idle_ns, const std::vector<int>& physical) const {
  if (!toggles_.idle || !(idle_ns > 0.0)) return nullptr;
  return &relaxation(physical.at(static_cast<std::size_t>(logical)), idle_ns);
}

std::pair<double, double> NoiseModel::two_qubit_error_budget(int a, int b, double duration_ns) const {
  const KrausChannel relax = tensor(relaxation(a, duration_ns), relaxation(b, duration_ns));
  const auto fill = depolarizing_fill(device_.edge(a, b).gate_error, relax);
  return {1.0 - average_gate_fidelity(relax), fill.lambda};
}

// ---------------------------------------------------------------------------
// Trajectories

namespace {

using kernels::cplx;

struct CompiledChannel {
  std::vector<int> qubits;
  std::vector<Eigen::MatrixXcd> ops;
  std::optional<std::vector<double>> weights;  // state-independent branches
  std::vector<bool> identity;                   // op ∝ I (skip when drawn)
  std::vector<bool> diagonal;
  bool ground_preserving = false;  // K|0⟩ = |0⟩ for exactly one op, 0 for the rest
  // 1Q channels whose effects K†K are all diagonal: branch weights follow
  // from the excited population alone.
  std::vector<std::array<double, 2>> effects;
};

struct Step {
  enum class Kind { Gate, Channel, Drift } kind;
  const Gate* gate = nullptr;
  std::size_t channel = 0;
  double drift_ns = 0.0;
};

struct Program {
  int num_qubits = 0;
  std::vector<Step> steps;
  std::vector<CompiledChannel> channels;
  double drift_sigma = 0.0;
  std::optional<ReadoutModel> readout;
  std::vector<int> measured;
  bool stochastic = false;
};

CompiledChannel compile_channel(const ChannelOp& op) {
  const KrausChannel& ch = *op.channel;
  if (!ch.is_complete()) throw std::invalid_argument("incomplete Kraus channel in noise model");
  CompiledChannel c;
  c.qubits = op.qubits;
  c.weights = ch.mixture_weights();
  int ground_hits = 0;
  bool ground_ok = true;
  for (const auto& k : ch.ops) {
    Eigen::MatrixXcd m = k;
    bool ident = false;
    if (c.weights) {
      const double w = (k.adjoint() * k)(0, 0).real();
      if (w > 0.0) m /= std::sqrt(w);
      const std::complex<double> ph = m(0, 0);
      ident = (m - ph * Eigen::MatrixXcd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff() < 1e-14;
    }
    Eigen::MatrixXcd off = m;
    off.diagonal().setZero();
    c.diagonal.push_back(off.cwiseAbs().maxCoeff() == 0.0);
    c.identity.push_back(ident);
    c.ops.push_back(std::move(m));
    const Eigen::VectorXcd col0 = k.col(0);
    const double rest = col0.tail(col0.size() - 1).cwiseAbs().maxCoeff();
    if (rest != 0.0) ground_ok = false;
    if (std::abs(col0(0)) != 0.0) {
      ++ground_hits;
      if (std::abs(col0(0) - 1.0) > 1e-14) ground_ok = false;
    }
  }
  c.ground_preserving = ground_ok && ground_hits == 1;
  if (!c.weights && c.qubits.size() == 1) {
    for (const auto& k : ch.ops) {
      const Eigen::MatrixXcd e = k.adjoint() * k;
      if (std::abs(e(0, 1)) > 1e-15) {
        c.effects.clear();
        break;
      }
      c.effects.push_back({e(0, 0).real(), e(1, 1).real()});
    }
  }
  return c;
}

Program compile(const Circuit& circuit, const NoiseModel& noise) {
  Program p;
  p.num_qubits = circuit.num_qubits();
  p.drift_sigma = noise.toggles().drift_sigma;
  p.readout = noise.readout_for(circuit.physical_qubits());
  if (p.readout && p.readout->is_ideal()) p.readout.reset();
  p.measured = circuit.measured_qubits();
  if (p.measured.empty()) {
    for (int q = 0; q < p.num_qubits; ++q) p.measured.push_back(q);
  }
  const auto& phys = circuit.physical_qubits();
  auto add_channel = [&](const ChannelOp& op) {
    if (op.channel->is_identity()) return;
    p.channels.push_back(compile_channel(op));
    p.steps.push_back(Step{Step::Kind::Channel, nullptr, p.channels.size() - 1, 0.0});
  };
  for (const Moment& m : circuit.moments()) {
    const double dur = m.duration_ns();
    std::vector<double> busy(static_cast<std::size_t>(p.num_qubits), 0.0);
    for (const Gate& g : m.gates) {
      p.steps.push_back(Step{Step::Kind::Gate, &g, 0, 0.0});
      for (const ChannelOp& op : noise.gate_channels(g, phys)) add_channel(op);
      for (int q : g.targets()) busy[static_cast<std::size_t>(q)] = g.duration_ns;
    }
    for (int q = 0; q < p.num_qubits; ++q) {
      const double idle = dur - busy[static_cast<std::size_t>(q)];
      if (const KrausChannel* ch = noise.idle_channel(q, idle, phys)) add_channel(ChannelOp{{q}, ch});
    }
    if (p.drift_sigma > 0.0 && dur > 0.0) p.steps.push_back(Step{Step::Kind::Drift, nullptr, 0, dur});
  }
  p.stochastic = !p.channels.empty() || p.drift_sigma > 0.0;
  return p;
}

Bits measure_bits(const Program& p, Bits full) {
  Bits out = 0;
  for (std::size_t i = 0; i < p.measured.size(); ++i) {
    out |= ((full >> p.measured[i]) & 1U) << i;
  }
  return out;
}

Bits finish_shot(const Program& p, std::span<const double> cdf, ShotRng& rng) {
  Bits b = measure_bits(p, draw_outcome(cdf, rng.uniform()));
  if (p.readout) b = p.readout->sample(b, rng);
  return b;
}

std::size_t draw_index(const std::vector<double>& weights, double total, ShotRng& rng) {
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    u -= weights[k];
    if (u < 0.0) return k;
  }
  // Rounding: fall back to the last branch with positive weight.
  for (std::size_t k = weights.size(); k > 0; --k) {
    if (weights[k - 1] > 0.0) return k - 1;
  }
  return 0;
}

void apply_op(std::span<cplx> amps, const CompiledChannel& c, const Eigen::MatrixXcd& k) {
  if (c.qubits.size() == 1) {
    const int q = c.qubits[0];
    if (k(0, 1) == 0.0 && k(1, 0) == 0.0) {
      if (k(0, 0) == 1.0) {
        const cplx d = k(1, 1);
        if (d.imag() == 0.0) {
          kernels::scale_half(amps, q, 1, d.real());
          return;
        }
      }
      kernels::apply_diag(amps, q, k(0, 0), k(1, 1));
      return;
    }
    kernels::apply_1q(amps, q, Eigen::Matrix2cd(k));
  } else {
    kernels::apply_2q(amps, c.qubits[0], c.qubits[1], Eigen::Matrix4cd(k));
  }
}

class ShotRunner {
 public:
  explicit ShotRunner(const Program& p)
      : p_(p), amps_(std::size_t{1} << p.num_qubits), touched_(static_cast<std::size_t>(p.num_qubits)),
        rates_(static_cast<std::size_t>(p.num_qubits)), cdf_(amps_.size()) {}

  Bits run(ShotRng& rng) {
    std::fill(amps_.begin(), amps_.end(), cplx{0.0, 0.0});
    amps_[0] = 1.0;
    std::fill(touched_.begin(), touched_.end(), false);
    double norm2 = 1.0;
    if (p_.drift_sigma > 0.0) {
      std::normal_distribution<double> normal(0.0, p_.drift_sigma);
      for (double& r : rates_) r = normal(rng);
    }
    std::vector<double> probs;
    for (const Step& s : p_.steps) {
      switch (s.kind) {
        case Step::Kind::Gate: {
          const Gate& g = *s.gate;
          apply_gate(g);
          if (g.kind != GateKind::RZ) {
            for (int q : g.targets()) touched_[static_cast<std::size_t>(q)] = true;
          }
          break;
        }
        case Step::Kind::Channel: {
          const CompiledChannel& c = p_.channels[s.channel];
          if (c.qubits.size() == 1 && c.ground_preserving && !touched_[static_cast<std::size_t>(c.qubits[0])]) break;
          std::size_t k = 0;
          if (c.weights) {
            k = draw_index(*c.weights, 1.0, rng);
            if (c.identity[k]) break;
          } else {
            probs.assign(c.ops.size(), 0.0);
            if (!c.effects.empty()) {
              const double p1 = kernels::excited_population(amps_, c.qubits[0]);
              const double p0 = std::max(0.0, norm2 - p1);
              for (std::size_t i = 0; i < c.ops.size(); ++i) {
                probs[i] = std::max(0.0, c.effects[i][0] * p0 + c.effects[i][1] * p1);
              }
            } else if (c.qubits.size() == 1) {
              const Eigen::Matrix2cd rho = kernels::reduced_1q(amps_, c.qubits[0]);
              for (std::size_t i = 0; i < c.ops.size(); ++i) {
                const Eigen::Matrix2cd kk = c.ops[i];
                probs[i] = std::max(0.0, (kk * rho * kk.adjoint()).trace().real());
              }
            } else {
              const Eigen::Matrix4cd rho = kernels::reduced_2q(amps_, c.qubits[0], c.qubits[1]);
              for (std::size_t i = 0; i < c.ops.size(); ++i) {
                const Eigen::Matrix4cd kk = c.ops[i];
                probs[i] = std::max(0.0, (kk * rho * kk.adjoint()).trace().real());
              }
            }
            double total = 0.0;
            for (double v : probs) total += v;
            k = draw_index(probs, total, rng);
            norm2 = probs[k];
          }
          apply_op(amps_, c, c.ops[k]);
          if (!c.diagonal[k]) {
            for (int q : c.qubits) touched_[static_cast<std::size_t>(q)] = true;
          }
          if (norm2 < 1e-150) {
            const double scale = 1.0 / std::sqrt(norm2);
            for (cplx& a : amps_) a *= scale;
            norm2 = 1.0;
          }
          break;
        }
        case Step::Kind::Drift: {
          for (int q = 0; q < p_.num_qubits; ++q) {
            if (!touched_[static_cast<std::size_t>(q)]) continue;
            const double theta = rates_[static_cast<std::size_t>(q)] * s.drift_ns;
            kernels::apply_diag(amps_, q, 1.0, std::polar(1.0, -theta));
          }
          break;
        }
      }
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < amps_.size(); ++i) {
      acc += std::norm(amps_[i]);
      cdf_[i] = acc;
    }
    return finish_shot(p_, cdf_, rng);
  }

 private:
  void apply_gate(const Gate& g) {
    switch (g.kind) {
      case GateKind::CX:
        kernels::apply_cx(amps_, g.qubits[0], g.qubits[1]);
        break;
      case GateKind::X:
        kernels::apply_x(amps_, g.qubits[0]);
        break;
      case GateKind::RZ:
        kernels::apply_diag(amps_, g.qubits[0], std::polar(1.0, g.theta / 2.0), std::polar(1.0, -g.theta / 2.0));
        break;
      default:
        kernels::apply_1q(amps_, g.qubits[0], g.unitary());
    }
  }

  const Program& p_;
  std::vector<cplx> amps_;
  std::vector<bool> touched_;
  std::vector<double> rates_;
  std::vector<double> cdf_;
};

}  // namespace

CountsTable run_trajectories(const Circuit& circuit, const NoiseModel& noise, std::uint64_t shots,
                             std::uint64_t seed, TrajectoryOptions options) {
  if (shots == 0) throw std::invalid_argument("shots must be >= 1");
  if (circuit.num_qubits() > kMaxQubits) throw std::invalid_argument("circuit exceeds 24 qubits");
  const Program program = compile(circuit, noise);
  const int width = static_cast<int>(program.measured.size());

  std::vector<double> exact_cdf;
  if (!program.stochastic) {
    const StateVector final_state = apply_circuit(StateVector(circuit.num_qubits()), circuit);
    exact_cdf.resize(final_state.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < final_state.size(); ++i) {
      acc += std::norm(final_state.amplitudes()[i]);
      exact_cdf[i] = acc;
    }
  }

  auto run_range = [&](std::uint64_t begin, std::uint64_t end) {
    CountsTable counts(width);
    std::optional<ShotRunner> runner;
    if (program.stochastic) runner.emplace(program);
    for (std::uint64_t s = begin; s < end; ++s) {
      ShotRng rng(derive_seed({seed, s}));
      counts.add(runner ? runner->run(rng) : finish_shot(program, exact_cdf, rng));
    }
    return counts;
  };

  const std::uint64_t workers =
      std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::max(options.workers, 1)), 1, shots);
  if (workers == 1) return run_range(0, shots);

  std::vector<CountsTable> partial(workers);
  {
    std::vector<std::jthread> threads;
    for (std::uint64_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        partial[w] = run_range(shots * w / workers, shots * (w + 1) / workers);
      });
    }
  }
  CountsTable total(width);
  for (const CountsTable& c : partial) {
    for (const auto& [b, n] : c.entries()) total.add(b, n);
  }
  return total;
}

}  // namespace mqc

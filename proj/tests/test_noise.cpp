#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "mqc/density.hpp"
#include "mqc/experiment.hpp"
#include "mqc/noise.hpp"
#include "support.hpp"

using namespace mqc;
using doctest::Approx;

namespace {

Circuit device_mqc(const DeviceModel& dev, const std::vector<int>& qubits, double phi, bool refocus) {
  Circuit c = build_mqc_circuit(auto_plan(dev, qubits), phi, refocus);
  stamp_device_durations(c, dev);
  return c;
}

double total_variation(const CountsTable& counts, const std::vector<double>& p) {
  double tv = 0.0;
  const double shots = static_cast<double>(counts.total());
  for (Bits k = 0; k < p.size(); ++k) tv += std::abs(static_cast<double>(counts.count(k)) / shots - p[k]);
  return 0.5 * tv;
}

}  // namespace

TEST_SUITE("noise") {
  TEST_CASE("readout model") {
    const ReadoutModel sym = ReadoutModel::symmetric({0.02, 0.1});
    CHECK_NOTHROW(sym.validate());
    CHECK(sym.num_qubits() == 2);
    CHECK_FALSE(sym.is_ideal());
    CHECK(ReadoutModel::ideal(3).is_ideal());
    CHECK(sym.probability(0b00, 0b00) == Approx(0.98 * 0.9));
    CHECK(sym.probability(0b10, 0b00) == Approx(0.98 * 0.1));
    CHECK(sym.probability(0b01, 0b11) == Approx(0.98 * 0.1));
    CHECK(sym.probability(0b10, 0b01) == Approx(0.02 * 0.1));

    const std::vector<double> pushed = sym.apply({1.0, 0.0, 0.0, 0.0});
    for (Bits m = 0; m < 4; ++m) CHECK(pushed[m] == Approx(sym.probability(m, 0)));

    Eigen::MatrixXd full(4, 4);
    for (Bits m = 0; m < 4; ++m) {
      for (Bits p = 0; p < 4; ++p) full(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p)) = sym.probability(m, p);
    }
    const ReadoutModel f = ReadoutModel::from_full(full);
    const std::vector<double> v{0.1, 0.2, 0.3, 0.4};
    const std::vector<double> a = f.apply(v), b = sym.apply(v);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == Approx(b[i]).epsilon(1e-14));

    const ReadoutModel sel = ReadoutModel::symmetric({0.01, 0.02, 0.03}).select({2, 0});
    CHECK(sel.per_qubit[0](1, 0) == Approx(0.03));
    CHECK(sel.per_qubit[1](1, 0) == Approx(0.01));

    ReadoutModel broken = sym;
    broken.per_qubit[0](0, 0) = 0.5;
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
    CHECK_THROWS_AS(ReadoutModel::from_full(Eigen::MatrixXd::Identity(3, 3)), std::invalid_argument);
  }

  TEST_CASE("readout sampling frequencies") {
    const ReadoutModel r = ReadoutModel::symmetric({0.05, 0.2});
    ShotRng rng(derive_seed({1, 2}));
    const int shots = 200000;
    std::vector<int> hits(4, 0);
    for (int s = 0; s < shots; ++s) ++hits[r.sample(0b01, rng)];
    for (Bits m = 0; m < 4; ++m) {
      const double p = r.probability(m, 0b01);
      CHECK(std::abs(hits[m] / static_cast<double>(shots) - p) < 4 * std::sqrt(p * (1 - p) / shots) + 1e-12);
    }
  }

  TEST_CASE("zero noise reduces to sample_counts") {
    const DeviceModel dev = system_one_device();
    const Circuit c = device_mqc(dev, system_one_ghz_qubits(6), 0.7, false);
    const StateVector s = apply_circuit(StateVector(6), c);
    const NoiseModel off(dev, NoiseToggles{false, false, 0.0, false});
    CHECK(run_trajectories(c, off, 5000, 42) == sample_counts(s, 5000, 42));
    CHECK(run_trajectories(c, NoiseModel::noiseless(6), 5000, 43) == sample_counts(s, 5000, 43));
  }

  TEST_CASE("readout-only noise on the all-zeros outcome") {
    const DeviceModel dev = testing::uniform_device(4, QubitParams{});
    NoiseModel noise(dev, NoiseToggles{false, false, 0.0, true});
    noise.set_readout(ReadoutModel::symmetric({0.03, 0.03, 0.03, 0.03}));
    const Circuit c = build_mqc_circuit(testing::doubling_plan(4), 0.0, false);
    const std::vector<double> exact = oracle_distribution(c, noise);
    CHECK(exact[0] == Approx(std::pow(0.97, 4)).epsilon(1e-12));
    CHECK(exact[0] == Approx(0.8853).epsilon(1e-4));
    const std::uint64_t shots = 200000;
    const CountsTable counts = run_trajectories(c, noise, shots, 5);
    const double p = exact[0];
    CHECK(std::abs(counts.count(0) / static_cast<double>(shots) - p) < 4 * std::sqrt(p * (1 - p) / shots));
  }

  TEST_CASE("trajectories converge to the oracle for random noisy circuits") {
    std::mt19937_64 rng(2024);
    QubitParams qp;
    qp.t1_us = 8.0;
    qp.t2_us = 9.0;
    qp.gate_error = 0.01;
    qp.readout_fidelity = 0.95;
    for (int n = 1; n <= 6; ++n) {
      const DeviceModel sub = testing::uniform_device(n, qp, EdgeParams{0.05, 300.0});
      const NoiseModel noise(sub, NoiseToggles{});
      const Circuit c = testing::random_circuit(n, sub, rng);
      const std::vector<double> exact = oracle_distribution(c, noise);
      const CountsTable counts = run_trajectories(c, noise, 400000, 100 + static_cast<std::uint64_t>(n));
      CHECK(total_variation(counts, exact) < 0.01);
    }
  }

  TEST_CASE("trajectory histogram within multinomial bounds of the oracle") {
    const DeviceModel dev = system_one_device();
    const NoiseModel noise(dev, NoiseToggles{});
    const Circuit c = device_mqc(dev, system_one_ghz_qubits(4), std::numbers::pi / 5, false);
    const std::vector<double> exact = oracle_distribution(c, noise);
    const std::uint64_t shots = 1000000;
    const CountsTable counts = run_trajectories(c, noise, shots, 77);
    for (Bits k = 0; k < exact.size(); ++k) {
      const double p = exact[k];
      const double f = static_cast<double>(counts.count(k)) / static_cast<double>(shots);
      CHECK(std::abs(f - p) <= 3 * std::sqrt(p * (1 - p) / static_cast<double>(shots)) + 1e-9);
    }
  }

  TEST_CASE("worker count does not change the counts") {
    const DeviceModel dev = system_one_device();
    const NoiseModel noise(dev, NoiseToggles{true, true, 2e-4, true});
    const Circuit c = device_mqc(dev, system_one_ghz_qubits(5), 1.1, true);
    const CountsTable one = run_trajectories(c, noise, 3000, 8, {1});
    CHECK(run_trajectories(c, noise, 3000, 8, {3}) == one);
    CHECK(run_trajectories(c, noise, 3000, 8, {7}) == one);
    CHECK(run_trajectories(c, noise, 3000, 8) == one);
    CHECK(one.total() == 3000);
    CHECK_THROWS_AS(run_trajectories(c, noise, 0, 8), std::invalid_argument);
  }

  TEST_CASE("quasi-static drift gives Gaussian Ramsey decay") {
    const double sigma = 2e-3;  // rad/ns
    const double idle = 600.0;
    Circuit c(1);
    c.add_moment({Gate::h(0)});
    Gate wait = Gate::u1q(0, Eigen::Matrix2cd::Identity());
    c.add_moment({wait});
    c.add_moment({Gate::h(0)});
    c.measure_all();
    c.stamp_durations([&](const Gate& g) { return g.kind == GateKind::U1Q ? idle : 50.0; });
    const DeviceModel dev = testing::uniform_device(1, QubitParams{});
    const NoiseModel noise(dev, NoiseToggles{false, false, sigma, false});
    const std::uint64_t shots = 200000;
    const CountsTable counts = run_trajectories(c, noise, shots, 3);
    // Phase accrues from the first H onward; after the last H it no longer matters.
    const double t = 50.0 + idle;
    const double p0 = 0.5 * (1 + std::exp(-sigma * sigma * t * t / 2));
    CHECK(std::abs(counts.count(0) / static_cast<double>(shots) - p0) < 4 * std::sqrt(p0 * (1 - p0) / shots));

    // The oracle's per-moment dephasing gives exp(-σ²Σt²/2) instead.
    const std::vector<double> exact = oracle_distribution(c, noise);
    CHECK(exact[0] == Approx(0.5 * (1 + std::exp(-sigma * sigma * (50.0 * 50.0 + idle * idle) / 2))).epsilon(1e-12));
  }

  TEST_CASE("idle relaxation follows the moment length") {
    // Qubit 1 sits in |1> while qubit 0 runs a long gate.
    QubitParams qp;
    qp.t1_us = 2.0;
    qp.t2_us = 2.0;
    const DeviceModel dev = testing::uniform_device(2, qp);
    Circuit c(2);
    c.add_moment({Gate::x(1)});
    c.add_moment({Gate::u1q(0, Eigen::Matrix2cd::Identity())});
    c.measure_all();
    c.stamp_durations([](const Gate& g) { return g.kind == GateKind::U1Q ? 1000.0 : 0.0; });
    c.set_physical_qubits({0, 1});
    const NoiseModel noise(dev, NoiseToggles{false, true, 0.0, false});
    const std::vector<double> exact = oracle_distribution(c, noise);
    CHECK(exact[0b10] == Approx(std::exp(-1.0 / 2.0)).epsilon(1e-12));
    const CountsTable counts = run_trajectories(c, noise, 100000, 1);
    const double p = exact[0b10];
    CHECK(std::abs(counts.count(0b10) / 1e5 - p) < 4 * std::sqrt(p * (1 - p) / 1e5));
  }

  TEST_CASE("noise model channels") {
    const DeviceModel dev = system_one_device();
    const NoiseModel noise(dev, NoiseToggles{});
    const std::vector<int> phys{5, 10};
    const auto cx = noise.gate_channels(Gate::cx(0, 1), phys);
    CHECK_FALSE(cx.empty());
    for (const auto& op : cx) CHECK(op.channel->is_complete(1e-9));
    CHECK(noise.gate_channels(Gate::rz(0, 0.3), phys).empty());
    CHECK(noise.idle_channel(0, 0.0, phys) == nullptr);
    CHECK(noise.idle_channel(0, 400.0, phys) != nullptr);
    const NoiseModel quiet(dev, NoiseToggles{false, false, 0.0, false});
    CHECK(quiet.gate_channels(Gate::h(0), phys).empty());
    CHECK(quiet.idle_channel(0, 400.0, phys) == nullptr);
    CHECK_FALSE(quiet.readout_for(phys).has_value());
    CHECK_FALSE(quiet.has_quantum_noise());
    CHECK_THROWS_AS(NoiseModel(dev, NoiseToggles{true, true, -1.0, true}), std::invalid_argument);
  }

  TEST_CASE("median-parameter N=10 run stays entangled but below ideal") {
    ExperimentSpec spec;
    spec.num_qubits = 10;
    spec.median_qubits = true;
    spec.shots = 2048;
    spec.repetitions = 1;
    spec.seed = 10;
    const RawData data = collect(spec);
    const DerivedResults r = analyze(data);
    REQUIRE(r.fidelity_raw.has_value());
    CHECK(r.fidelity_raw->lower < 1.0);
    CHECK(r.fidelity_raw->lower > 0.5);
    CHECK(r.fidelity_raw->entangled);
  }

  TEST_CASE("refocusing recovers drift but changes nothing without it") {
    ExperimentSpec spec;
    spec.num_qubits = 4;
    spec.median_qubits = true;
    spec.shots = 2048;
    spec.repetitions = 4;
    spec.noise = NoiseToggles{false, true, 8e-4, false};
    auto direct = [&](bool refocus, double sigma) {
      ExperimentSpec s = spec;
      s.refocus = refocus;
      s.noise.drift_sigma = sigma;
      return analyze(collect(s)).fidelity_raw.value();
    };
    const FidelityReport plain = direct(false, 8e-4), echo = direct(true, 8e-4);
    CHECK(*echo.direct > *plain.direct + 5 * std::hypot(*echo.direct_stderr, *plain.direct_stderr));
    const FidelityReport a = direct(false, 0.0), b = direct(true, 0.0);
    CHECK(std::abs(*a.direct - *b.direct) <= 2 * std::hypot(*a.direct_stderr, *b.direct_stderr) + 1e-12);
  }
}

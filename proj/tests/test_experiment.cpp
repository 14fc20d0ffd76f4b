#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mqc/device.hpp"
#include "mqc/experiment.hpp"

using namespace mqc;
using doctest::Approx;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mqc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string fnv(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Rewrites a record file and its manifest entry, so only the content check fires.
void rewrite(const fs::path& dir, const std::string& name, const std::string& text) {
  spit(dir / name, text);
  json manifest = json::parse(slurp(dir / "manifest.json"));
  manifest["files"][name] = fnv(text);
  spit(dir / "manifest.json", manifest.dump(2) + "\n");
}

ExperimentSpec small_spec() {
  ExperimentSpec s;
  s.num_qubits = 4;
  s.shots = 512;
  s.repetitions = 2;
  s.seed = 5;
  return s;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("spec validation") {
    ExperimentSpec s = small_spec();
    CHECK_NOTHROW(s.validate());
    s.kind = ExperimentKind::Parity;
    s.mitigation = parse_mitigation("truncated:8");
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = small_spec();
    s.repetitions = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = small_spec();
    s.num_qubits = 11;
    s.mitigation = parse_mitigation("full");
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = small_spec();
    s.kind = ExperimentKind::MitigationStudy;
    s.k_values = {8, 4};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = small_spec();
    s.num_qubits = 9;
    s.shots = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.noise = NoiseToggles{false, false, 0.0, true};
    CHECK_NOTHROW(s.validate());

    CHECK(to_string(parse_mitigation("truncated:32")) == "truncated:32");
    CHECK(parse_mitigation("truncated").k == 256);
    CHECK_THROWS_AS(parse_mitigation("truncated:x"), std::invalid_argument);
    CHECK_THROWS_AS(parse_mitigation("inverse"), std::invalid_argument);
    CHECK_THROWS_AS(parse_experiment_kind("tomography"), std::invalid_argument);
  }

  TEST_CASE("spec JSON round trip") {
    ExperimentSpec s = small_spec();
    s.kind = ExperimentKind::MitigationStudy;
    s.qubits = {5, 0, 10, 6};
    s.variant = MqcVariant::StarGraph;
    s.refocus = true;
    s.noise.drift_sigma = 3e-4;
    s.noise.idle = false;
    s.mitigation = parse_mitigation("truncated:16");
    s.mitigation.calibration_shots = 0;
    s.k_values = {1, 4, 16};
    const ExperimentSpec back = spec_from_json(spec_to_json(s));
    CHECK(spec_to_json(back) == spec_to_json(s));
    CHECK(back.qubits == s.qubits);
    CHECK(back.noise.drift_sigma == s.noise.drift_sigma);
    CHECK(back.k_values == s.k_values);
    CHECK_THROWS_AS(spec_from_json("{\"kind\": 3}"), std::invalid_argument);
  }

  TEST_CASE("noiseless exact MQC gives unit bounds") {
    ExperimentSpec s = small_spec();
    s.shots = 0;
    s.repetitions = 1;
    s.noise = NoiseToggles{false, false, 0.0, false};
    const DerivedResults r = analyze(collect(s));
    REQUIRE(r.fidelity_raw);
    CHECK(r.fidelity_raw->lower == Approx(1.0).epsilon(1e-12));
    CHECK(r.fidelity_raw->upper == Approx(1.0).epsilon(1e-12));
    CHECK(*r.fidelity_raw->direct == Approx(1.0).epsilon(1e-12));
    CHECK(r.spectrum_raw->at(0) == Approx(0.5).epsilon(1e-12));
    CHECK(r.spectrum_raw->at(4) == Approx(0.25).epsilon(1e-12));
  }

  TEST_CASE("noiseless parity gives full coherence") {
    ExperimentSpec s = small_spec();
    s.kind = ExperimentKind::Parity;
    s.num_qubits = 3;
    s.shots = 0;
    s.repetitions = 1;
    s.noise = NoiseToggles{false, false, 0.0, false};
    const DerivedResults r = analyze(collect(s));
    REQUIRE(r.coherence_raw);
    CHECK(r.coherence_raw->value == Approx(1.0).epsilon(1e-12));
    CHECK(*r.parity_fidelity_raw == Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(r.spectrum_raw);
  }

  TEST_CASE("collection is deterministic") {
    ExperimentSpec s = small_spec();
    s.noise.drift_sigma = 5e-4;
    const RawData a = collect(s), b = collect(s);
    REQUIRE(a.sweep.size() == b.sweep.size());
    for (std::size_t r = 0; r < a.sweep.size(); ++r) {
      for (std::size_t j = 0; j < a.sweep[r].size(); ++j) CHECK(a.sweep[r][j].weights == b.sweep[r][j].weights);
    }
    s.workers = 3;
    const RawData c = collect(s);
    CHECK(c.sweep[1][3].weights == a.sweep[1][3].weights);
    s.seed = 6;
    const RawData d = collect(s);
    CHECK(d.sweep[1][3].weights != a.sweep[1][3].weights);
  }

  TEST_CASE("records replay exactly") {
    const fs::path dir = scratch("record");
    ExperimentSpec s = small_spec();
    s.mitigation = parse_mitigation("truncated:8");
    const RunRecord rec = run_and_record(s, dir);
    for (const char* f : {"spec.json", "readout.csv", "results.json", "sweep.csv", "spectrum.csv", "calibration.csv",
                          "manifest.json", "counts/mqc_phi00_rep00.txt", "counts/populations_rep01.txt"}) {
      CHECK_MESSAGE(fs::exists(dir / f), f);
    }
    const ReplayReport same = replay(dir);
    CHECK(same.matches);
    CHECK(same.max_abs_diff <= 1e-12);
    CHECK(same.mismatched.empty());

    const RawData loaded = load_record(dir);
    CHECK(loaded.sweep[0][2].weights == rec.data.sweep[0][2].weights);
    CHECK(loaded.plan.qubits == rec.data.plan.qubits);

    const ReplayReport other = replay(dir, parse_mitigation("none"));
    CHECK(other.mitigation_overridden);
    CHECK_FALSE(other.matches);
    CHECK_FALSE(other.mismatched.empty());
  }

  TEST_CASE("corrupt records are rejected") {
    const fs::path dir = scratch("corrupt");
    run_and_record(small_spec(), dir);
    const std::string name = "counts/mqc_phi03_rep00.txt";
    const std::string text = slurp(dir / name);

    spit(dir / name, text + "0000 1\n");
    CHECK_THROWS_AS(load_record(dir), std::runtime_error);  // manifest hash

    std::string shorter = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
    rewrite(dir, name, shorter);
    CHECK_THROWS_AS(load_record(dir), std::runtime_error);  // counts no longer sum to the shots

    rewrite(dir, name, "0000 512\n");
    CHECK_THROWS_AS(load_record(dir), std::runtime_error);  // header

    rewrite(dir, name, text);
    CHECK_NOTHROW(load_record(dir));
    fs::remove(dir / "readout.csv");
    CHECK_THROWS_AS(load_record(dir), std::runtime_error);
  }

  TEST_CASE("mitigation study without noise is flat") {
    ExperimentSpec s = small_spec();
    s.kind = ExperimentKind::MitigationStudy;
    s.noise = NoiseToggles{false, false, 0.0, false};
    s.k_values = {2, 8, 16};
    const DerivedResults r = analyze(collect(s));
    REQUIRE(r.convergence.size() == 3);
    for (const auto& row : r.convergence) {
      CHECK(row.i0 == Approx(r.convergence[0].i0).epsilon(1e-12));
      CHECK(row.i_n == Approx(r.convergence[0].i_n).epsilon(1e-12));
    }
    CHECK(r.top_histogram.size() == 5);
  }

  TEST_CASE("bundled device config matches the built-in table") {
    const DeviceModel file = load_device(std::string(MQC_SOURCE_DIR) + "/configs/system_one.yaml");
    const DeviceModel builtin = system_one_device();
    REQUIRE(file.num_qubits() == builtin.num_qubits());
    for (int q = 0; q < file.num_qubits(); ++q) {
      CHECK(file.qubit(q).t1_us == builtin.qubit(q).t1_us);
      CHECK(file.qubit(q).t2_us == builtin.qubit(q).t2_us);
      CHECK(std::abs(file.qubit(q).readout_fidelity - builtin.qubit(q).readout_fidelity) < 1e-12);
      CHECK(file.qubit(q).frequency_ghz == builtin.qubit(q).frequency_ghz);
    }
    CHECK(file.edges().size() == builtin.edges().size());
    for (const Edge& e : builtin.edges()) CHECK(file.connected(e.a, e.b));
    CHECK(file.ghz_order() == builtin.ghz_order());

    const DeviceModel again = parse_device(device_to_yaml(builtin));
    CHECK(device_to_yaml(again) == device_to_yaml(builtin));
  }

  TEST_CASE("malformed device configs") {
    CHECK_THROWS_AS(parse_device("name: x\nqubits: []\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_device("name: x\nqubits:\n  - {id: 0, t1_us: 10, t2_echo_us: 30, readout_fidelity: 0.9}\n"),
                    std::invalid_argument);  // T2 > 2 T1
    CHECK_THROWS_AS(parse_device("name: x\nqubits:\n  - {id: 1, t1_us: 10, t2_echo_us: 10, readout_fidelity: 0.9}\n"),
                    std::invalid_argument);  // ids must start at 0
    CHECK_THROWS_AS(parse_device("name: x\nqubits:\n  - {id: 0, t1_us: 10, t2_echo_us: 10, readout_fidelity: 0.9}\n"
                                 "edges:\n  - {pair: [0, 3]}\n"),
                    std::invalid_argument);
    CHECK_THROWS(parse_device("name: [unclosed\n"));
    CHECK_THROWS(load_device("/nonexistent/device.yaml"));
  }

  TEST_CASE("golden records replay") {
    const fs::path root = fs::path(MQC_SOURCE_DIR) / "tests" / "golden";
    int seen = 0;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (!entry.is_directory()) continue;
      ++seen;
      const ReplayReport r = replay(entry.path());
      CHECK_MESSAGE(r.matches, entry.path().filename().string());
    }
    CHECK(seen >= 4);
  }

  TEST_CASE("command line errors are machine readable") {
    const std::string cmd = std::string(MQC_CLI_PATH) + " parity --n 3 --mitigation truncated:4 --out " +
                            scratch("cli").string() + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[512];
    while (fgets(buf, sizeof buf, pipe) != nullptr) out += buf;
    const int status = pclose(pipe);
    CHECK(status != 0);
    const json err = json::parse(out.substr(out.find('{')));
    CHECK(err.at("error").at("type").get<std::string>().size() > 0);
    CHECK(err.at("error").at("exit_code").get<int>() != 0);
  }
}

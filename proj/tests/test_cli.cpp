#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "commands.hpp"
#include "doctest.h"
#include "instance_io.hpp"

namespace fs = std::filesystem;
using doctest::Approx;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = hyperq::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("hyperq_cli_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = (path / name).string();
    std::ofstream(p) << text;
    return p;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

const char* kHomogeneous = R"({"n_units": 2, "n_nodes": 1, "arrival_rate": 1.0, "demand_fractions": [1.0],
  "service_rates": [1.0, 1.0], "preferences": [[1, 2]], "buffer_capacity": 0, "travel_times": [[1.0], [2.0]]})";
const char* kHeterogeneous = R"({"n_units": 2, "n_nodes": 1, "arrival_rate": 1.0, "demand_fractions": [1.0],
  "service_rates": [2.0, 1.0], "preferences": [[1, 2]]})";
const char* kSingle = R"({"n_units": 1, "n_nodes": 1, "arrival_rate": 1.0, "demand_fractions": [1.0],
  "service_rates": [1.0], "preferences": [[1]]})";

}  // namespace

TEST_CASE("solve with oracle cross-check") {
  TempDir dir;
  const auto inst = dir.write("hom.json", kHomogeneous);
  const auto r = run({"solve", inst, "--oracle"});
  CHECK(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["format"] == "hyperq-result");
  CHECK(doc["oracle"]["mpre_pct"].get<double>() < 1e-6);
  CHECK(doc["state_probabilities"]["0"].get<double>() == Approx(0.4).epsilon(1e-12));
  CHECK(doc["metrics"]["mean_response_time"].get<double>() == Approx(1.375).epsilon(1e-12));
  CHECK(doc["convergence"]["assumption_ok"] == true);
}

TEST_CASE("malformed preferences exit with a validation error") {
  TempDir dir;
  std::string bad = kHomogeneous;
  bad.replace(bad.find("[[1, 2]]"), 8, "[[1, 1]]");
  const auto r = run({"solve", dir.write("bad.json", bad)});
  CHECK(r.code == 2);
  CHECK(r.err.find("NonPermutationPreference") != std::string::npos);
  CHECK(run({"solve", dir.file("missing.json")}).code == 2);
  CHECK(run({"solve"}).code == 2);
  CHECK(run({"solve", dir.write("h.json", kHomogeneous), "--batch-size", "zero"}).code == 2);
}

TEST_CASE("buffer override") {
  TempDir dir;
  const auto inst = dir.write("one.json", kSingle);
  auto doc = json::parse(run({"solve", inst, "--buffer", "1"}).out);
  CHECK(doc["queue_tail"].size() == 1);
  CHECK(doc["queue_tail"][0].get<double>() == Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(doc["state_probabilities"]["0"].get<double>() == Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(doc["state_probabilities"]["1"].get<double>() == Approx(1.0 / 3.0).epsilon(1e-12));

  // Two waiting places: M/M/1/3 with four equally likely levels.
  doc = json::parse(run({"solve", inst, "--buffer", "2"}).out);
  REQUIRE(doc["queue_tail"].size() == 2);
  for (const auto& q : doc["queue_tail"]) CHECK(q.get<double>() == Approx(0.25).epsilon(1e-12));
  CHECK(doc["state_probabilities"]["1"].get<double>() == Approx(0.25).epsilon(1e-12));
}

TEST_CASE("strict and lenient instance keys") {
  TempDir dir;
  std::string extra = kSingle;
  extra.insert(extra.size() - 1, R"(, "colour": "red")");
  const auto inst = dir.write("extra.json", extra);
  auto r = run({"solve", inst});
  CHECK(r.code == 2);
  CHECK(r.err.find("colour") != std::string::npos);
  r = run({"solve", inst, "--lenient"});
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
}

TEST_CASE("csv dump agrees with the JSON document") {
  TempDir dir;
  const auto inst = dir.write("het.json", kHeterogeneous);
  const auto csv_path = dir.file("dist.csv");
  const auto r = run({"solve", inst, "--full", "--csv", csv_path, "--buffer", "2"});
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  std::ifstream in(csv_path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "kind,index,busy_units,probability");
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string kind, index, units, prob;
    std::getline(ss, kind, ',');
    std::getline(ss, index, ',');
    std::getline(ss, units, ',');
    std::getline(ss, prob, ',');
    const double p = std::stod(prob);
    if (kind == "state")
      CHECK(doc["state_probabilities"][index].get<double>() == p);
    else
      CHECK(doc["queue_tail"][std::stoi(index) - 1].get<double>() == p);
    ++rows;
  }
  CHECK(rows == 4 + 2);
}

TEST_CASE("parallel solve honours HYPERQ_THREADS") {
  TempDir dir;
  const auto inst = dir.write("het.json", kHeterogeneous);
  setenv("HYPERQ_THREADS", "3", 1);
  const auto r = run({"solve", inst, "--parallel", "--batch-size", "1"});
  unsetenv("HYPERQ_THREADS");
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["timing"]["workers"] == 3);
  CHECK(doc["state_probabilities"]["1"].get<double>() == Approx(2.0 / 9.0).epsilon(1e-9));
}

TEST_CASE("non-convergence exit code") {
  TempDir dir;
  const auto inst = dir.write("het.json", kHeterogeneous);
  const auto r = run({"solve", inst, "--max-outer", "1"});
  CHECK(r.code == 3);
}

TEST_CASE("simulate") {
  TempDir dir;
  const auto inst = dir.write("hom.json", kHomogeneous);
  const std::vector<std::string> args{"simulate", inst, "--arrivals", "100000", "--reps", "10", "--seed", "7"};
  const auto a = run(args);
  const auto b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const auto doc = json::parse(a.out);
  const std::vector<double> exact{0.5, 0.3};
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(std::abs(doc["utilization"][i].get<double>() - exact[i]) <=
          3.0 * doc["utilization_half_width"][i].get<double>());
  CHECK(doc["analytic"]["utilization_mpre_pct"].get<double>() < 2.0);

  const auto lossy = dir.write("one.json", kSingle);
  CHECK(run({"simulate", lossy, "--dist", "lognormal", "--arrivals", "1000", "--reps", "2"}).code == 0);
  std::string queued = kSingle;
  queued.insert(queued.size() - 1, R"(, "buffer_capacity": 2)");
  const auto r = run({"simulate", dir.write("q.json", queued), "--dist", "lognormal", "--arrivals", "1000"});
  CHECK(r.code == 2);
  CHECK(run({"simulate", lossy, "--dist", "gamma:-2"}).code == 2);
}

TEST_CASE("check-assumption") {
  TempDir dir;
  auto r = run({"check-assumption", dir.write("het.json", kHeterogeneous), "--json"});
  REQUIRE(r.code == 0);
  auto doc = json::parse(r.out);
  CHECK(doc["phi"][0].get<double>() == Approx(0.5).epsilon(1e-12));
  CHECK(doc["ok"] == true);
  r = run({"check-assumption", dir.write("hom.json", kHomogeneous)});
  CHECK(r.out.find("ok") != std::string::npos);
}

TEST_CASE("gen is reproducible and round-trips") {
  TempDir dir;
  const std::vector<std::string> args{"gen", "--units", "6", "--nodes", "9", "--rho", "0.4", "--seed", "11"};
  const auto a = run(args);
  const auto b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(std::hash<std::string>{}(a.out) == std::hash<std::string>{}(b.out));
  const auto inst = dir.write("gen.json", a.out);
  const auto parsed = hyperq::cli::read_instance_file(inst, false);
  const auto sys = hyperq::ServiceSystem::validate(parsed.raw);
  CHECK(sys.arrival_rate() / sys.total_service_rate() == Approx(0.4).epsilon(1e-12));
  CHECK(hyperq::cli::instance_to_json(parsed.raw, parsed.metadata).dump(2) + "\n" == a.out);
  CHECK(run({"solve", inst, "--oracle", "--tol-outer", "1e-10", "--tol-inner", "1e-11"}).code == 0);
  // Looser sweeps leave this slowly mixing instance just outside the oracle bound.
  CHECK(run({"solve", inst, "--oracle", "--tol-outer", "1e-6", "--tol-inner", "1e-7"}).code == 4);
}

TEST_CASE("bench writes the fixed CSV header") {
  TempDir dir;
  const auto suite = dir.write("suite.json", R"({"experiments": [{"id": "tiny", "methods": ["cpu", "oracle"],
    "N": [4], "rho": [0.5], "J": 5, "repetitions": 1}]})");
  const auto csv = dir.file("out.csv");
  const auto r = run({"bench", suite, "-o", csv});
  REQUIRE(r.code == 0);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "experiment,instance_seed,N,J,rho,C,method,workers,batch,wall_ms,iters,mpre_pct,notes");
}

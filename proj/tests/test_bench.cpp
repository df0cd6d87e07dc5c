#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "hyperq/bench.hpp"

using namespace hyperq;
using doctest::Approx;

TEST_CASE("generator hits the target load and is deterministic") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    for (double rho : {0.1, 0.5, 0.9}) {
      InstanceGenerator gen;
      gen.n_units = 6;
      gen.n_nodes = 15;
      gen.rho = rho;
      gen.seed = seed;
      const auto sys = gen_instance(gen);
      CHECK(std::abs(sys.arrival_rate() / sys.total_service_rate() - rho) < 1e-9);
      CHECK(sys.has_travel_times());
    }

  InstanceGenerator gen;
  const auto a = gen_raw_instance(gen);
  const auto b = gen_raw_instance(gen);
  CHECK(a.service_rates == b.service_rates);
  CHECK(a.preferences == b.preferences);
  CHECK(*a.travel_times == *b.travel_times);

  gen.heterogeneity = 0.0;
  const auto flat = gen_raw_instance(gen);
  for (double nu : flat.service_rates) CHECK(nu == flat.service_rates[0]);
}

TEST_CASE("preferences follow travel time") {
  InstanceGenerator gen;
  gen.n_units = 5;
  gen.n_nodes = 7;
  const auto raw = gen_raw_instance(gen);
  for (int j = 0; j < 7; ++j)
    for (int h = 1; h < 5; ++h)
      CHECK((*raw.travel_times)[raw.preferences[j][h - 1] - 1][j] <= (*raw.travel_times)[raw.preferences[j][h] - 1][j]);
}

TEST_CASE("CSV round-trips") {
  BenchRecord r;
  r.experiment = "sweep, \"quoted\"";
  r.instance_seed = 18446744073709551615ULL;
  r.n_units = 9;
  r.n_nodes = 20;
  r.rho = 0.1;
  r.capacity = 3;
  r.method = "parallel";
  r.workers = 4;
  r.batch = 64;
  r.wall_ms = 1.0 / 3.0;
  r.iters = 37;
  r.mpre_pct = 1.234e-9;
  r.notes = "line1\nline2";
  BenchRecord s;
  s.experiment = "x";
  s.method = "oracle";
  s.wall_ms = std::nan("");
  const std::vector<BenchRecord> rows{r, s};
  const auto text = format_csv(rows);
  CHECK(text.rfind(kBenchCsvHeader, 0) == 0);
  const auto back = parse_csv(text);
  REQUIRE(back.size() == 2);
  CHECK(same_record(back[0], r));
  CHECK(same_record(back[1], s));
  CHECK(format_csv(back) == text);
  CHECK(parse_csv(format_csv({})).empty());
  CHECK_THROWS_AS(parse_csv("a,b\n"), Error);
}

TEST_CASE("suite parsing") {
  const auto suite = parse_suite(R"({"experiments": [
    {"id": "e1", "methods": ["cpu", "oracle"], "N": [4, 5], "rho": [0.5], "J": 6, "C": [0, 2],
     "batch": [1, "layer"], "repetitions": 1}]})");
  REQUIRE(suite.size() == 1);
  CHECK(suite[0].n_units == std::vector<int>{4, 5});
  CHECK(suite[0].capacity == std::vector<int>{0, 2});
  CHECK(suite[0].batch == std::vector<std::size_t>{1, kWholeLayer});
  CHECK_THROWS_AS(parse_suite(R"({"experiments": [{"id": "e", "methods": ["magic"], "N": [3], "rho": [0.5]}]})"),
                  Error);
  CHECK_THROWS_AS(parse_suite("{"), Error);
  CHECK(run_suite({}).records.empty());
}

TEST_CASE("small suite agrees with the oracle") {
  Experiment ex;
  ex.id = "oracle_check";
  ex.methods = {"cpu", "oracle", "parallel"};
  ex.n_units = {5, 6};
  ex.n_nodes = 8;
  ex.rho = {0.1, 0.9};
  ex.capacity = {0, 2};
  ex.workers = {1, 2};
  ex.batch = {4};
  ex.repetitions = 1;
  auto res = run_suite({ex});
  CHECK(res.records.size() == 2 * 2 * 2 * 4);
  for (const auto& r : res.records) {
    CAPTURE(r.method);
    CHECK(std::isfinite(r.wall_ms));
    if (r.method == "oracle") {
      CHECK_FALSE(r.mpre_pct.has_value());
    } else {
      REQUIRE(r.mpre_pct.has_value());
      CHECK(*r.mpre_pct < 1e-6);
      CHECK(r.notes.find("savings_vs_oracle_pct=") != std::string::npos);
    }
  }
  // MPRE is derived from the stored outputs, not cached.
  res.outputs[0].probabilities[0] *= 2.0;
  res.outputs[1].probabilities[0] *= 2.0;
  refresh_mpre(res);
  bool moved = false;
  for (const auto& r : res.records) moved |= r.mpre_pct && *r.mpre_pct > 10.0;
  CHECK(moved);
}

TEST_CASE("errors become rows") {
  Experiment ex;
  ex.id = "too_big";
  ex.methods = {"oracle"};
  ex.n_units = {15};
  ex.rho = {0.5};
  ex.n_nodes = 2;
  ex.repetitions = 1;
  const auto res = run_suite({ex});
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].notes.find("OracleTooLarge") != std::string::npos);
}

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "hyperq/transitions.hpp"

using namespace hyperq;

namespace {

ServiceSystem two_node() {
  return ServiceSystem::validate(fixtures::two_unit({2.0, 1.0}, {{1, 2}, {2, 1}}, {0.6, 0.4}));
}

bool key_less(const Transition& a, const Transition& b) {
  return std::tie(a.from, a.to, a.rate) < std::tie(b.from, b.to, b.rate);
}

}  // namespace

TEST_CASE("upward_rate follows the first free unit of each node") {
  const auto sys = fixtures::homogeneous2();
  CHECK(upward_rate({0b00}, {0b01}, sys) == 1.0);
  CHECK(upward_rate({0b00}, {0b10}, sys) == 0.0);

  const auto two = two_node();
  CHECK(upward_rate({0b00}, {0b01}, two) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(upward_rate({0b00}, {0b10}, two) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(upward_rate({0b01}, {0b11}, two) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(upward_rate({0b01}, {0b01}, sys), Error);
  CHECK_THROWS_AS(upward_rate({0b01}, {0b00}, sys), Error);
  CHECK_THROWS_AS(upward_rate({0b00}, {0b11}, sys), Error);
}

TEST_CASE("total_rates") {
  const auto sys = fixtures::heterogeneous2();
  CHECK(total_rates(sys, {0}).lambda == 1.0);
  CHECK(total_rates(sys, {0}).mu == 0.0);
  CHECK(total_rates(sys, {0b11}).lambda == 0.0);
  CHECK(total_rates(sys, {0b11}).mu == 3.0);
  CHECK(total_rates(sys, {0b01}).lambda == 1.0);
  CHECK(total_rates(sys, {0b01}).mu == 2.0);
}

TEST_CASE("generate_full on tiny systems") {
  RawInstance raw;
  raw.n_units = 1;
  raw.n_nodes = 1;
  raw.arrival_rate = 1.0;
  raw.demand_fractions = {1.0};
  raw.service_rates = {2.0};
  raw.preferences = {{1}};
  const auto one = generate_full(ServiceSystem::validate(raw));
  CHECK(one.upward == std::vector<Transition>{{0, 1, 1.0}});
  CHECK(one.downward == std::vector<Transition>{{1, 0, 2.0}});

  const auto set = generate_full(fixtures::homogeneous2());
  CHECK(set.upward == std::vector<Transition>{{0, 1, 1.0}, {1, 3, 1.0}, {2, 3, 1.0}});
  CHECK(set.downward.size() == 4);
}

TEST_CASE("generate_for_states matches hand enumeration") {
  const auto sys = fixtures::heterogeneous2();
  const std::vector<StateIndex> full{{0b11}};
  const auto top = generate_for_states(sys, full);
  CHECK(top.upward == std::vector<Transition>{{0b01, 0b11, 1.0}, {0b10, 0b11, 1.0}});
  CHECK(top.downward.empty());

  const std::vector<StateIndex> empty{{0b00}};
  const auto bottom = generate_for_states(sys, empty);
  CHECK(bottom.upward.empty());
  CHECK(bottom.downward == std::vector<Transition>{{0b01, 0b00, 2.0}, {0b10, 0b00, 1.0}});
}

TEST_CASE("transition set invariants on random instances") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const int n = 2 + static_cast<int>(seed % 7);
    const auto sys = ServiceSystem::validate(fixtures::random_raw(n, 5, 0.6, 0.3, seed));
    const auto set = generate_full(sys);
    std::vector<double> out_up(sys.n_states(), 0.0);
    std::vector<double> out_down(sys.n_states(), 0.0);
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> pairs;
    for (const auto& t : set.upward) {
      CHECK(std::popcount(t.from ^ t.to) == 1);
      CHECK(std::popcount(t.to) == std::popcount(t.from) + 1);
      CHECK(++pairs[{t.from, t.to}] == 1);
      out_up[t.from] += t.rate;
    }
    for (const auto& t : set.downward) {
      CHECK(std::popcount(t.to) + 1 == std::popcount(t.from));
      CHECK(t.rate == sys.service_rate(std::countr_zero(t.from ^ t.to)));
      out_down[t.from] += t.rate;
    }
    for (std::uint32_t v = 0; v < sys.n_states(); ++v) {
      CHECK(std::abs(out_up[v] - set.lambda_total[v]) <= 1e-12);
      CHECK(out_down[v] == doctest::Approx(set.mu_total[v]).epsilon(1e-14));
    }
    CHECK(set.lambda_total[full_state(n).value] == 0.0);
    CHECK(std::abs(out_up[0] - sys.arrival_rate()) <= 1e-12);
  }
}

TEST_CASE("per-batch generation reproduces the full sweep") {
  std::mt19937_64 rng(99);
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const int n = 3 + static_cast<int>(seed);
    const auto sys = ServiceSystem::validate(fixtures::random_raw(n, 7, 0.5, 0.2, seed));
    const auto full = generate_full(sys);

    // Random partition of all states into batches.
    std::vector<StateIndex> all;
    for (std::uint32_t v = 0; v < sys.n_states(); ++v) all.push_back({v});
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<Transition> up;
    std::vector<Transition> down;
    for (std::size_t i = 0; i < all.size();) {
      const std::size_t len = 1 + rng() % 17;
      const std::span<const StateIndex> batch(all.data() + i, std::min(len, all.size() - i));
      auto part = generate_for_states(sys, batch);
      up.insert(up.end(), part.upward.begin(), part.upward.end());
      down.insert(down.end(), part.downward.begin(), part.downward.end());
      i += batch.size();
    }
    auto expect_up = full.upward;
    auto expect_down = full.downward;
    std::sort(up.begin(), up.end(), key_less);
    std::sort(down.begin(), down.end(), key_less);
    std::sort(expect_up.begin(), expect_up.end(), key_less);
    std::sort(expect_down.begin(), expect_down.end(), key_less);
    CHECK(up == expect_up);
    CHECK(down == expect_down);
  }
}

TEST_CASE("layer slices and batch blocks agree") {
  const auto sys = ServiceSystem::validate(fixtures::random_raw(7, 4, 0.5, 0.2, 3));
  const auto full = generate_full(sys);
  for (int n = 0; n <= 7; ++n) {
    const auto states = layer_states(7, n).states;
    const auto slice = inflow_for_layer(full, states);
    const auto block = make_inflow_block(generate_for_states(sys, states), states);
    REQUIRE(slice.up_offsets.size() == states.size() + 1);
    CHECK(slice.up_offsets == block.up_offsets);
    CHECK(slice.down_offsets == block.down_offsets);
    CHECK(std::equal(slice.upward.begin(), slice.upward.end(), block.upward.begin(), block.upward.end()));
    CHECK(std::equal(slice.downward.begin(), slice.downward.end(), block.downward.begin(),
                     block.downward.end()));
  }
}

TEST_CASE("oversized sweeps are refused") {
  const auto sys = ServiceSystem::validate(fixtures::random_raw(12, 2, 0.5, 0.2, 5));
  CHECK_THROWS_AS(generate_full(sys, 1024), Error);
}

TEST_CASE("binary cache round-trips and rejects other instances") {
  const auto sys = ServiceSystem::validate(fixtures::random_raw(6, 3, 0.5, 0.2, 8));
  const auto other = ServiceSystem::validate(fixtures::random_raw(6, 3, 0.5, 0.2, 9));
  const auto set = generate_full(sys);
  const auto path = std::filesystem::temp_directory_path() / "hyperq_cache_test.bin";
  save_transition_cache(path, sys, set);
  const auto back = load_transition_cache(path, sys);
  CHECK(back.upward == set.upward);
  CHECK(back.downward == set.downward);
  CHECK(back.mu_total == set.mu_total);
  CHECK_THROWS_AS(load_transition_cache(path, other), Error);
  std::filesystem::remove(path);
}

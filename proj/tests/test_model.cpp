#include <algorithm>
#include <memory>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "hyperq/model.hpp"

using namespace hyperq;

namespace {

ErrorCode code_of(const RawInstance& raw) {
  try {
    ServiceSystem::validate(raw);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected validation failure");
  return ErrorCode::ParseError;
}

}  // namespace

TEST_CASE("validate accepts the minimal instance and derives ranks") {
  auto sys = ServiceSystem::validate(fixtures::two_unit({1.0, 1.0}, {{2, 1}}));
  CHECK(sys.n_units() == 2);
  CHECK(sys.n_nodes() == 1);
  CHECK(sys.preference(0)[0] == 1);
  CHECK(sys.rank(0, 1) == 0);
  CHECK(sys.rank(0, 0) == 1);
  CHECK(sys.total_service_rate() == 2.0);
}

TEST_CASE("validate rejects malformed instances") {
  auto raw = fixtures::two_unit({1.0, 1.0}, {{1, 2}, {2, 1}}, {0.5, 0.4});
  CHECK(code_of(raw) == ErrorCode::FractionsNotNormalized);

  raw = fixtures::two_unit({1.0, 1.0}, {{1, 1}});
  CHECK(code_of(raw) == ErrorCode::NonPermutationPreference);

  raw = fixtures::two_unit({1.0, 1.0}, {{1, 3}});
  CHECK(code_of(raw) == ErrorCode::NonPermutationPreference);

  raw = fixtures::two_unit({1.0, 0.0});
  CHECK(code_of(raw) == ErrorCode::NonPositiveRate);

  raw = fixtures::two_unit({1.0, 1.0});
  raw.arrival_rate = -1.0;
  CHECK(code_of(raw) == ErrorCode::NonPositiveRate);

  raw = fixtures::two_unit({1.0, 1.0, 1.0});
  CHECK(code_of(raw) == ErrorCode::DimensionMismatch);

  raw = fixtures::two_unit({1.0, 1.0});
  raw.travel_times = std::vector<std::vector<double>>{{1.0}};
  CHECK(code_of(raw) == ErrorCode::DimensionMismatch);

  raw = fixtures::random_raw(31, 2, 0.5, 0.0, 1);
  CHECK(code_of(raw) == ErrorCode::StateSpaceTooLarge);
}

TEST_CASE("layer_states enumerates popcount classes in ascending order") {
  CHECK(layer_states(3, 0).states == std::vector<StateIndex>{{0}});
  CHECK(layer_states(3, 2).states == std::vector<StateIndex>{{3}, {5}, {6}});
  CHECK(layer_states(3, 3).states == std::vector<StateIndex>{{7}});
  CHECK_THROWS_AS(layer_states(3, 4), Error);
  CHECK_THROWS_AS(layer_states(31, 1), Error);

  for (int n = 0; n <= 12; ++n) {
    std::set<std::uint32_t> seen;
    for (int k = 0; k <= n; ++k) {
      const auto view = layer_states(n, k);
      CHECK(view.states.size() == binomial(n, k));
      for (std::size_t i = 0; i < view.states.size(); ++i) {
        CHECK(view.states[i].busy_count() == k);
        if (i > 0) CHECK(view.states[i - 1] < view.states[i]);
        CHECK(seen.insert(view.states[i].value).second);
      }
    }
    CHECK(seen.size() == (std::size_t{1} << n));
  }
}

TEST_CASE("down_neighbors clears each busy bit") {
  const auto d = down_neighbors({0b011});
  REQUIRE(d.size() == 2);
  CHECK(d[0].state == StateIndex{0b010});
  CHECK(d[0].unit == 0);
  CHECK(d[1].state == StateIndex{0b001});
  CHECK(d[1].unit == 1);
  CHECK(down_neighbors({0}).empty());

  std::set<std::uint32_t> three;
  for (auto nb : down_neighbors({0b111})) three.insert(nb.state.value);
  CHECK(three == std::set<std::uint32_t>{0b011, 0b101, 0b110});
}

TEST_CASE("neighbour relation is symmetric") {
  const int n = 6;
  for (std::uint32_t v = 0; v < (1u << n); ++v) {
    for (auto nb : down_neighbors({v})) {
      bool found = false;
      for (auto up : up_neighbors(nb.state, n)) found |= up.state == StateIndex{v} && up.unit == nb.unit;
      CHECK(found);
    }
    CHECK(down_neighbors({v}).size() + up_neighbors({v}, n).size() == static_cast<std::size_t>(n));
  }
}

TEST_CASE("encode and decode round-trip") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 30);
    std::vector<bool> bits(n);
    for (int i = 0; i < n; ++i) bits[i] = rng() & 1u;
    std::unique_ptr<bool[]> buf(new bool[n]);
    for (int i = 0; i < n; ++i) buf[i] = bits[i];
    const auto s = encode({buf.get(), static_cast<std::size_t>(n)});
    CHECK(decode(s, n) == bits);
    CHECK(s.busy_count() == static_cast<int>(std::count(bits.begin(), bits.end(), true)));
  }
}

TEST_CASE("fingerprint tracks rate-relevant fields only") {
  const auto a = ServiceSystem::validate(fixtures::random_raw(5, 3, 0.5, 0.2, 11));
  const auto b = ServiceSystem::validate(fixtures::random_raw(5, 3, 0.5, 0.2, 11));
  const auto c = ServiceSystem::validate(fixtures::random_raw(5, 3, 0.5, 0.2, 12));
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());
  CHECK(a.with_buffer(3).fingerprint() == a.fingerprint());
  const auto back = ServiceSystem::validate(a.to_raw());
  CHECK(back.fingerprint() == a.fingerprint());
}

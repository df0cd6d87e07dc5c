#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "hyperq/baseline.hpp"

using namespace hyperq;
using doctest::Approx;

namespace {

RawInstance single(double lambda, double nu, int capacity) {
  RawInstance raw;
  raw.n_units = 1;
  raw.n_nodes = 1;
  raw.arrival_rate = lambda;
  raw.demand_fractions = {1.0};
  raw.service_rates = {nu};
  raw.preferences = {{1}};
  raw.buffer_capacity = capacity;
  return raw;
}

}  // namespace

TEST_CASE("small closed forms") {
  auto d = solve_direct(ServiceSystem::validate(single(1.0, 1.0, 0)));
  CHECK(d.state_probs[0] == Approx(0.5).epsilon(1e-14));
  CHECK(d.state_probs[1] == Approx(0.5).epsilon(1e-14));

  d = solve_direct(fixtures::homogeneous2());
  CHECK(d.state_probs[0] == Approx(0.4).epsilon(1e-14));
  CHECK(d.state_probs[1] == Approx(0.3).epsilon(1e-14));
  CHECK(d.state_probs[2] == Approx(0.1).epsilon(1e-14));
  CHECK(d.state_probs[3] == Approx(0.2).epsilon(1e-14));

  d = solve_direct(ServiceSystem::validate(single(1.0, 1.0, 1)));
  REQUIRE(d.queue_tail.size() == 1);
  CHECK(d.state_probs[0] == Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(d.state_probs[1] == Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(d.queue_tail[0] == Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(d.saturation == Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("assembled matrix is a transposed generator") {
  const auto sys = ServiceSystem::validate(fixtures::random_raw(6, 4, 0.7, 0.3, 3, 3));
  const auto a = assemble(sys, false);
  CHECK(a.dimension == 64 + 3);
  std::vector<double> col(a.dimension, 0.0);
  std::vector<std::set<std::size_t>> offdiag(a.dimension);
  for (const auto& e : a.entries) {
    col[e.col] += e.value;
    if (e.row != e.col) offdiag[e.row].insert(e.col);
  }
  for (double c : col) CHECK(std::abs(c) < 1e-14);
  for (std::size_t r = 0; r < 64; ++r) CHECK(offdiag[r].size() <= 6 + 1);
}

TEST_CASE("solution agrees with the dense oracle and has a small residual") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto raw = fixtures::random_raw(2 + static_cast<int>(seed), 3, 0.5, 0.4, seed, seed % 2 ? 0 : 3);
    const auto sys = ServiceSystem::validate(raw);
    const auto system = assemble(sys);
    const auto x = solve_balance(system);
    CHECK(residual_inf(system, x) < 1e-10);
    const auto dense = fixtures::brute_force_stationary(raw);
    CHECK(fixtures::max_abs_diff(x, dense) < 1e-13);
    const auto d = solve_direct(sys);
    CHECK(d.total() == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("oracle cap and singular systems") {
  const auto big = ServiceSystem::validate(fixtures::random_raw(15, 2, 0.5, 0.2, 1));
  CHECK_THROWS_AS(assemble(big), Error);
  CHECK_NOTHROW(assemble(ServiceSystem::validate(fixtures::random_raw(5, 2, 0.5, 0.2, 1)), true, 5));

  BalanceSystem singular;
  singular.dimension = 2;
  singular.entries = {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}};
  singular.rhs = {1.0, 0.0};
  CHECK_THROWS_AS(solve_balance(singular), Error);
}

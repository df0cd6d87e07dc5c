#pragma once

#include <span>
#include <vector>

#include "hyperq/conditional.hpp"
#include "hyperq/model.hpp"

namespace hyperq {

/// Aggregated birth-death chain over the number of calls in the system.
/// All vectors are indexed by n = 0..N+C; mu_n[0] is unused and zero.
struct BirthDeathProfile {
  std::vector<double> lambda_n;
  std::vector<double> mu_n;
  std::vector<double> p_n;
  /// p(n) = G(n) p(0), with G(0) = 1.
  std::vector<double> g_n;
};

/// Probability-weighted layer rates, n = 0..N.
struct LayerRates {
  std::vector<double> lambda;
  std::vector<double> mu;  // mu[0] = 0
};

/// lambda(n) = sum_m p_n(m) lambda_m and mu(n) = sum_m p_n(m) mu_m. With a
/// waiting room (C >= 1) the all-busy layer still admits arrivals.
LayerRates layer_rates(const ConditionalDistribution& cond, const ServiceSystem& sys);

/// Loss system: lambda and mu both hold n = 0..N.
BirthDeathProfile stationary_zero_queue(std::span<const double> lambda, std::span<const double> mu);

/// Finite waiting room of `capacity` calls beyond the N busy units. The tail
/// arrives at `arrival_rate` and is served at mu(N). capacity = 0 reduces to
/// the loss system.
BirthDeathProfile stationary_finite_buffer(std::span<const double> lambda, std::span<const double> mu,
                                           double arrival_rate, int capacity);

struct InfiniteBufferProfile {
  /// Covers n = 0..N; p(N + c) = p_n[N] * tail_ratio^c.
  BirthDeathProfile head;
  double tail_ratio = 0.0;
};

/// Unlimited waiting room; requires arrival_rate < mu(N).
InfiniteBufferProfile stationary_infinite(std::span<const double> lambda, std::span<const double> mu,
                                          double arrival_rate);

}  // namespace hyperq

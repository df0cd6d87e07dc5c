#include "hyperq/birthdeath.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hyperq/transitions.hpp"

namespace hyperq {

namespace {

// Above this many layers the products are accumulated in log space.
constexpr std::size_t kLogSpaceThreshold = 20;

void check_rates(std::span<const double> lambda, std::span<const double> mu) {
  if (lambda.size() != mu.size() || lambda.empty())
    throw Error(ErrorCode::DimensionMismatch, "lambda and mu must both cover n = 0..N");
  for (std::size_t n = 1; n < mu.size(); ++n)
    if (!(mu[n] > 0.0) || !std::isfinite(mu[n]))
      throw Error(ErrorCode::DegenerateRates, "mu(" + std::to_string(n) + ") must be positive");
  for (double l : lambda)
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error(ErrorCode::DegenerateRates, "negative lambda(n)");
}

// Fills g_n and p_n from complete lambda_n (0..K) / mu_n (0..K).
void solve_chain(BirthDeathProfile& bd) {
  const std::size_t k = bd.lambda_n.size() - 1;
  bd.g_n.assign(k + 1, 0.0);
  bd.p_n.assign(k + 1, 0.0);
  if (k > kLogSpaceThreshold) {
    std::vector<double> log_g(k + 1, 0.0);
    for (std::size_t n = 1; n <= k; ++n)
      log_g[n] = log_g[n - 1] + std::log(bd.lambda_n[n - 1]) - std::log(bd.mu_n[n]);
    const double top = *std::max_element(log_g.begin(), log_g.end());
    double total = 0.0;
    for (std::size_t n = 0; n <= k; ++n) {
      bd.g_n[n] = std::exp(log_g[n]);
      bd.p_n[n] = std::exp(log_g[n] - top);
      total += bd.p_n[n];
    }
    for (auto& p : bd.p_n) p /= total;
    return;
  }
  bd.g_n[0] = 1.0;
  double total = 1.0;
  for (std::size_t n = 1; n <= k; ++n) {
    bd.g_n[n] = bd.g_n[n - 1] * bd.lambda_n[n - 1] / bd.mu_n[n];
    total += bd.g_n[n];
  }
  const double p0 = 1.0 / total;
  for (std::size_t n = 0; n <= k; ++n) bd.p_n[n] = bd.g_n[n] * p0;
}

}  // namespace

LayerRates layer_rates(const ConditionalDistribution& cond, const ServiceSystem& sys) {
  const int n_units = sys.n_units();
  LayerRates r;
  r.lambda.assign(static_cast<std::size_t>(n_units) + 1, 0.0);
  r.mu.assign(static_cast<std::size_t>(n_units) + 1, 0.0);
  for (int n = 0; n <= n_units; ++n) {
    for (auto s : cond.layer(n)) {
      const auto totals = total_rates(sys, s);
      r.lambda[n] += cond[s] * totals.lambda;
      r.mu[n] += cond[s] * totals.mu;
    }
  }
  if (sys.buffer_capacity() > 0) r.lambda[n_units] = sys.arrival_rate();
  return r;
}

BirthDeathProfile stationary_zero_queue(std::span<const double> lambda, std::span<const double> mu) {
  check_rates(lambda, mu);
  BirthDeathProfile bd;
  bd.lambda_n.assign(lambda.begin(), lambda.end());
  bd.lambda_n.back() = 0.0;
  bd.mu_n.assign(mu.begin(), mu.end());
  bd.mu_n[0] = 0.0;
  solve_chain(bd);
  return bd;
}

BirthDeathProfile stationary_finite_buffer(std::span<const double> lambda, std::span<const double> mu,
                                           double arrival_rate, int capacity) {
  check_rates(lambda, mu);
  if (capacity < 0) throw Error(ErrorCode::DimensionMismatch, "negative buffer capacity");
  if (capacity == 0) return stationary_zero_queue(lambda, mu);
  if (!(arrival_rate > 0.0)) throw Error(ErrorCode::DegenerateRates, "arrival rate must be positive");

  const std::size_t n_units = lambda.size() - 1;
  const std::size_t k = n_units + static_cast<std::size_t>(capacity);
  BirthDeathProfile bd;
  bd.lambda_n.assign(k + 1, arrival_rate);
  bd.mu_n.assign(k + 1, mu[n_units]);
  std::copy(lambda.begin(), lambda.end() - 1, bd.lambda_n.begin());
  std::copy(mu.begin(), mu.end(), bd.mu_n.begin());
  bd.mu_n[0] = 0.0;
  bd.lambda_n[k] = 0.0;
  solve_chain(bd);
  return bd;
}

InfiniteBufferProfile stationary_infinite(std::span<const double> lambda, std::span<const double> mu,
                                          double arrival_rate) {
  check_rates(lambda, mu);
  const std::size_t n_units = lambda.size() - 1;
  const double ratio = arrival_rate / mu[n_units];
  if (!(ratio < 1.0))
    throw Error(ErrorCode::UnstableSystem, "arrival rate must be below mu(N)");

  InfiniteBufferProfile out;
  auto& bd = out.head;
  bd.lambda_n.assign(lambda.begin(), lambda.end());
  bd.lambda_n[n_units] = arrival_rate;
  bd.mu_n.assign(mu.begin(), mu.end());
  bd.mu_n[0] = 0.0;
  bd.g_n.assign(n_units + 1, 1.0);
  for (std::size_t n = 1; n <= n_units; ++n) bd.g_n[n] = bd.g_n[n - 1] * bd.lambda_n[n - 1] / bd.mu_n[n];
  // Everything from layer N upward is a geometric series.
  double total = 0.0;
  for (std::size_t n = 0; n < n_units; ++n) total += bd.g_n[n];
  total += bd.g_n[n_units] / (1.0 - ratio);
  bd.p_n.resize(n_units + 1);
  for (std::size_t n = 0; n <= n_units; ++n) bd.p_n[n] = bd.g_n[n] / total;
  out.tail_ratio = ratio;
  return out;
}

}  // namespace hyperq

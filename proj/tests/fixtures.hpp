#pragma once

// Shared instances and a brute-force stationary solver for the unit tests.
// The oracle builds the generator straight from the dispatch rule and solves
// it by dense Gaussian elimination, without touching the library's
// transition or solver code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "hyperq/model.hpp"

namespace fixtures {

inline hyperq::RawInstance two_unit(std::vector<double> rates, std::vector<std::vector<int>> prefs = {{1, 2}},
                                    std::vector<double> fractions = {1.0}) {
  hyperq::RawInstance raw;
  raw.n_units = 2;
  raw.n_nodes = static_cast<int>(fractions.size());
  raw.arrival_rate = 1.0;
  raw.demand_fractions = std::move(fractions);
  raw.service_rates = std::move(rates);
  raw.preferences = std::move(prefs);
  return raw;
}

/// lambda = 1, nu = [1, 1], one node preferring unit 1.
inline hyperq::ServiceSystem homogeneous2() { return hyperq::ServiceSystem::validate(two_unit({1.0, 1.0})); }
/// lambda = 1, nu = [2, 1], one node preferring unit 1.
inline hyperq::ServiceSystem heterogeneous2() { return hyperq::ServiceSystem::validate(two_unit({2.0, 1.0})); }

/// Random instance with random preferences; rates drawn around 1.
inline hyperq::RawInstance random_raw(int n_units, int n_nodes, double rho, double spread, std::uint64_t seed,
                                      int capacity = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  hyperq::RawInstance raw;
  raw.n_units = n_units;
  raw.n_nodes = n_nodes;
  raw.buffer_capacity = capacity;
  double total = 0.0;
  for (int j = 0; j < n_nodes; ++j) {
    raw.demand_fractions.push_back(0.05 + u(rng));
    total += raw.demand_fractions.back();
  }
  for (auto& f : raw.demand_fractions) f /= total;
  double sum = 0.0;
  for (int j = 0; j < n_nodes; ++j) sum += raw.demand_fractions[j];
  raw.demand_fractions.back() += 1.0 - sum;
  double nu_sum = 0.0;
  for (int i = 0; i < n_units; ++i) {
    raw.service_rates.push_back(1.0 + spread * (2.0 * u(rng) - 1.0));
    nu_sum += raw.service_rates.back();
  }
  raw.arrival_rate = rho * nu_sum;
  for (int j = 0; j < n_nodes; ++j) {
    std::vector<int> p(n_units);
    for (int i = 0; i < n_units; ++i) p[i] = i + 1;
    std::shuffle(p.begin(), p.end(), rng);
    raw.preferences.push_back(p);
  }
  return raw;
}

/// Stationary distribution over 2^N states followed by C queue states.
inline std::vector<double> brute_force_stationary(const hyperq::RawInstance& raw) {
  const int n = raw.n_units;
  const int c = raw.buffer_capacity;
  const std::size_t hyper = std::size_t{1} << n;
  const std::size_t dim = hyper + static_cast<std::size_t>(c);
  const std::size_t full = hyper - 1;
  double nu_total = 0.0;
  for (double v : raw.service_rates) nu_total += v;

  // q[from][to] rates.
  std::vector<std::vector<double>> q(dim, std::vector<double>(dim, 0.0));
  for (std::size_t s = 0; s < hyper; ++s) {
    for (int j = 0; j < raw.n_nodes; ++j) {
      for (int pick : raw.preferences[j]) {
        const int unit = pick - 1;
        if (!((s >> unit) & 1u)) {
          q[s][s | (std::size_t{1} << unit)] += raw.arrival_rate * raw.demand_fractions[j];
          break;
        }
      }
    }
    for (int unit = 0; unit < n; ++unit)
      if ((s >> unit) & 1u) q[s][s & ~(std::size_t{1} << unit)] += raw.service_rates[unit];
  }
  for (int k = 0; k < c; ++k) {
    const std::size_t from = k == 0 ? full : hyper + k - 1;
    const std::size_t to = hyper + k;
    q[from][to] += raw.arrival_rate;
    q[to][from] += nu_total;
  }

  // Solve pi Q = 0 with sum(pi) = 1: transpose, replace row 0 by ones.
  std::vector<std::vector<double>> a(dim, std::vector<double>(dim + 1, 0.0));
  for (std::size_t i = 0; i < dim; ++i) {
    double out = 0.0;
    for (std::size_t j = 0; j < dim; ++j) out += q[i][j];
    for (std::size_t j = 0; j < dim; ++j) a[j][i] += q[i][j];
    a[i][i] -= out;
  }
  for (std::size_t j = 0; j < dim; ++j) a[0][j] = 1.0;
  a[0][dim] = 1.0;
  for (std::size_t j = 1; j < dim; ++j) a[j][dim] = 0.0;

  for (std::size_t col = 0; col < dim; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < dim; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    for (std::size_t r = 0; r < dim; ++r) {
      if (r == col || a[r][col] == 0.0) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t k = col; k <= dim; ++k) a[r][k] -= f * a[col][k];
    }
  }
  std::vector<double> pi(dim);
  for (std::size_t i = 0; i < dim; ++i) pi[i] = a[i][dim] / a[i][i];
  return pi;
}

inline double max_abs_diff(const std::vector<double>& x, const std::vector<double>& y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

/// Erlang-B layer distribution: truncated Poisson with offered load a.
inline std::vector<double> erlang_layers(double offered, int n) {
  std::vector<double> p(static_cast<std::size_t>(n) + 1);
  double term = 1.0;
  double total = 0.0;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) term *= offered / k;
    p[k] = term;
    total += term;
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace fixtures

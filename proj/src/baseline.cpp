#include "hyperq/baseline.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <cmath>
#include <numeric>
#include <string>

namespace hyperq {

BalanceSystem assemble(const ServiceSystem& sys, bool normalize, int max_units) {
  const int n_units = sys.n_units();
  if (n_units > max_units)
    throw Error(ErrorCode::OracleTooLarge,
                "N=" + std::to_string(n_units) + " exceeds the oracle cap of " + std::to_string(max_units));
  const std::size_t hyper = sys.n_states();
  const std::size_t capacity = static_cast<std::size_t>(sys.buffer_capacity());
  const std::size_t full = full_state(n_units).value;
  const double lambda = sys.arrival_rate();
  const double nu_total = sys.total_service_rate();

  BalanceSystem out;
  out.dimension = hyper + capacity;
  out.rhs.assign(out.dimension, 0.0);
  auto skip = [&](std::size_t row) { return normalize && row == 0; };
  auto add_flow = [&](std::size_t from, std::size_t to, double rate) {
    if (rate == 0.0) return;
    if (!skip(from)) out.entries.push_back({from, from, rate});
    if (!skip(to)) out.entries.push_back({to, from, -rate});
  };

  for (std::size_t v = 0; v < hyper; ++v) {
    const StateIndex s{static_cast<std::uint32_t>(v)};
    for (int j = 0; j < sys.n_nodes(); ++j) {
      for (auto unit : sys.preference(j)) {
        if (!s.busy(unit)) {
          add_flow(v, s.toggled(unit).value, lambda * sys.demand_fractions()[j]);
          break;
        }
      }
    }
    for (int unit = 0; unit < n_units; ++unit)
      if (s.busy(unit)) add_flow(v, s.toggled(unit).value, sys.service_rate(unit));
  }
  for (std::size_t c = 0; c < capacity; ++c) {
    const std::size_t below = c == 0 ? full : hyper + c - 1;
    add_flow(below, hyper + c, lambda);
    add_flow(hyper + c, below, nu_total);
  }
  if (normalize) {
    for (std::size_t col = 0; col < out.dimension; ++col) out.entries.push_back({0, col, 1.0});
    out.rhs[0] = 1.0;
  }
  return out;
}

double residual_inf(const BalanceSystem& system, const std::vector<double>& x) {
  std::vector<double> r(system.dimension, 0.0);
  for (const auto& e : system.entries) r[e.row] += e.value * x[e.col];
  double worst = 0.0;
  for (std::size_t i = 0; i < system.dimension; ++i) worst = std::max(worst, std::abs(r[i] - system.rhs[i]));
  return worst;
}

std::vector<double> solve_balance(const BalanceSystem& system) {
  const auto dim = static_cast<Eigen::Index>(system.dimension);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(system.entries.size());
  for (const auto& e : system.entries)
    triplets.emplace_back(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col), e.value);
  Eigen::SparseMatrix<double> a(dim, dim);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "LU factorization failed");
  const Eigen::Map<const Eigen::VectorXd> b(system.rhs.data(), dim);
  const Eigen::VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw Error(ErrorCode::SingularSystem, "LU solve failed");
  std::vector<double> out(x.data(), x.data() + dim);
  const double res = residual_inf(system, out);
  if (!(res < 1e-10)) throw Error(ErrorCode::SingularSystem, "residual " + std::to_string(res));
  return out;
}

SteadyStateDistribution solve_direct(const ServiceSystem& sys, int max_units) {
  const auto x = solve_balance(assemble(sys, true, max_units));
  const int n_units = sys.n_units();
  const std::size_t hyper = sys.n_states();

  SteadyStateDistribution dist;
  dist.n_units = n_units;
  dist.state_probs.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(hyper));
  dist.queue_tail.assign(x.begin() + static_cast<std::ptrdiff_t>(hyper), x.end());

  auto& bd = dist.profile;
  const std::size_t layers = static_cast<std::size_t>(n_units) + 1 + dist.queue_tail.size();
  bd.p_n.assign(layers, 0.0);
  bd.lambda_n.assign(layers, 0.0);
  bd.mu_n.assign(layers, 0.0);
  for (std::size_t v = 0; v < hyper; ++v) {
    const StateIndex s{static_cast<std::uint32_t>(v)};
    const auto totals = total_rates(sys, s);
    const int n = s.busy_count();
    bd.p_n[n] += x[v];
    bd.lambda_n[n] += x[v] * totals.lambda;
    bd.mu_n[n] += x[v] * totals.mu;
  }
  for (int n = 0; n <= n_units; ++n) {
    if (bd.p_n[n] > 0.0) {
      bd.lambda_n[n] /= bd.p_n[n];
      bd.mu_n[n] /= bd.p_n[n];
    }
  }
  if (!dist.queue_tail.empty()) bd.lambda_n[n_units] = sys.arrival_rate();
  for (std::size_t c = 0; c < dist.queue_tail.size(); ++c) {
    const std::size_t n = static_cast<std::size_t>(n_units) + 1 + c;
    bd.p_n[n] = dist.queue_tail[c];
    bd.lambda_n[n] = c + 1 < dist.queue_tail.size() ? sys.arrival_rate() : 0.0;
    bd.mu_n[n] = sys.total_service_rate();
  }
  bd.g_n.assign(layers, 0.0);
  for (std::size_t n = 0; n < layers; ++n) bd.g_n[n] = bd.p_n[n] / bd.p_n[0];
  dist.saturation = dist.state_probs[full_state(n_units).value] +
                    std::accumulate(dist.queue_tail.begin(), dist.queue_tail.end(), 0.0);
  return dist;
}

}  // namespace hyperq

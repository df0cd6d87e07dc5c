#include "hyperq/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace hyperq {

void SolverConfig::validate() const {
  if (!(tol_outer > 0.0) || !(tol_inner > 0.0))
    throw Error(ErrorCode::InvalidSpec, "tolerances must be positive");
  if (tol_inner > tol_outer) throw Error(ErrorCode::InvalidSpec, "tol_inner must not exceed tol_outer");
  if (max_outer_iters < 1 || max_inner_iters < 1)
    throw Error(ErrorCode::InvalidSpec, "iteration limits must be positive");
}

std::vector<double> ConvergenceTrace::ratios() const {
  std::vector<double> out;
  for (std::size_t k = 1; k < max_layer_l1.size(); ++k)
    if (max_layer_l1[k - 1] > 0.0) out.push_back(max_layer_l1[k] / max_layer_l1[k - 1]);
  return out;
}

double SteadyStateDistribution::total() const noexcept {
  return std::accumulate(state_probs.begin(), state_probs.end(), 0.0) +
         std::accumulate(queue_tail.begin(), queue_tail.end(), 0.0);
}

AssumptionCheck check_assumption(const ServiceSystem& sys) {
  const int n_units = sys.n_units();
  const double lambda = sys.arrival_rate();
  std::vector<double> rates(sys.service_rates().begin(), sys.service_rates().end());
  std::sort(rates.begin(), rates.end());

  AssumptionCheck out;
  out.mu_max.assign(static_cast<std::size_t>(n_units) + 1, 0.0);
  out.mu_min.assign(static_cast<std::size_t>(n_units) + 1, 0.0);
  // The extremes of mu_m over layer n are the n fastest and n slowest units.
  for (int n = 1; n <= n_units; ++n) {
    out.mu_min[n] = out.mu_min[n - 1] + rates[n - 1];
    out.mu_max[n] = out.mu_max[n - 1] + rates[n_units - n];
  }
  auto gamma = [&](int n) { return n > n_units ? 1.0 : out.mu_max[n] / out.mu_min[n]; };

  out.phi.assign(static_cast<std::size_t>(n_units) + 1, 0.0);
  for (int n = 1; n <= n_units; ++n) {
    double inner = gamma(n + 1);
    for (int q = 2; q <= n; ++q) {
      double prod = gamma(q);
      for (int j = q; j <= n; ++j) prod *= out.mu_max[j] / (lambda + out.mu_min[j - 1]);
      inner += prod;
    }
    out.phi[n] = lambda / (lambda + out.mu_min[n]) * inner;
  }
  out.phi_max = *std::max_element(out.phi.begin() + 1, out.phi.end());
  out.ok = out.phi_max < 1.0;
  return out;
}

namespace detail {

CoefficientPartial layer_coefficients(const ServiceSystem& sys, std::span<const StateIndex> states,
                                      const InflowView& inflow, std::span<const double> cond,
                                      const LayerScalars& scalars, std::span<double> a, std::span<double> b,
                                      std::span<double> mu_m) {
  CoefficientPartial part;
  const double down_scale = scalars.lambda_here_prev / scalars.mu_above_prev;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const StateIndex m = states[i];
    const auto totals = total_rates(sys, m);
    const double out_rate = totals.lambda + totals.mu;

    double up_in = 0.0;
    for (auto t = inflow.up_offsets[i]; t < inflow.up_offsets[i + 1]; ++t)
      up_in += cond[inflow.upward[t].from] * inflow.upward[t].rate;
    double down_in = 0.0;
    for (auto t = inflow.down_offsets[i]; t < inflow.down_offsets[i + 1]; ++t)
      down_in += cond[inflow.downward[t].from] * inflow.downward[t].rate;

    a[i] = up_in / (scalars.lambda_below * out_rate);
    b[i] = down_scale * down_in / out_rate;
    mu_m[i] = totals.mu;

    part.sum_mu_a += totals.mu * a[i];
    part.sum_mu_b += totals.mu * b[i];
    part.max_a = std::max(part.max_a, a[i]);
    part.first_step_change =
        std::max(part.first_step_change, std::abs(a[i] * scalars.mu_start + b[i] - cond[m.value]));
  }
  return part;
}

FinalizePartial finalize_states(const ServiceSystem& sys, std::span<const StateIndex> states,
                                std::span<const double> a, std::span<const double> b,
                                std::span<const double> mu_m, double mu_for_p, std::span<double> cond) {
  FinalizePartial part;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const StateIndex m = states[i];
    const double p = a[i] * mu_for_p + b[i];
    const double change = std::abs(p - cond[m.value]);
    cond[m.value] = p;
    part.lambda_sum += p * (m.busy_count() < sys.n_units() ? sys.arrival_rate() : 0.0);
    part.mu_sum += p * mu_m[i];
    part.prob_sum += p;
    part.max_abs_change = std::max(part.max_abs_change, change);
    part.l1_change += change;
  }
  return part;
}

ScalarFixedPoint solve_layer_scalar(const CoefficientPartial& total, double mu_start, const SolverConfig& cfg,
                                    int layer) {
  if (cfg.inner_mode == InnerMode::ClosedForm) {
    const double denom = 1.0 - total.sum_mu_a;
    if (denom > 0.0) return {total.sum_mu_b / denom, 1};
    // Singular closed form: fall through to the iteration.
  }
  double mu_in = mu_start;
  double change = total.first_step_change;
  int r = 1;
  while (change > cfg.tol_inner) {
    if (r >= cfg.max_inner_iters)
      throw Error(ErrorCode::InnerDiverged, "layer " + std::to_string(layer) + " after " +
                                                std::to_string(r) + " inner updates");
    const double mu_next = total.sum_mu_a * mu_in + total.sum_mu_b;
    change = total.max_a * std::abs(mu_next - mu_in);
    mu_in = mu_next;
    ++r;
  }
  return {mu_in, r};
}

}  // namespace detail

LayerPassResult inner_layer_pass(const ServiceSystem& sys, int layer, const InflowView& inflow,
                                 ConditionalDistribution& cond, const LayerScalars& scalars,
                                 const SolverConfig& cfg) {
  if (layer <= 0 || layer >= sys.n_units()) {
    // Boundary layers hold a single state with probability one.
    return {0.0, 0.0, cond.layer_sum(std::clamp(layer, 0, sys.n_units())), 0.0, 0.0, 0};
  }
  const auto states = cond.layer(layer);
  const std::size_t size = states.size();
  std::vector<double> a(size), b(size), mu_m(size);
  const auto coeff = detail::layer_coefficients(sys, states, inflow, cond.values(), scalars, a, b, mu_m);

  double mu_for_p = scalars.mu_start;
  int iterations = 0;
  const bool closed_form = cfg.inner_mode == InnerMode::ClosedForm && 1.0 - coeff.sum_mu_a > 0.0;
  if (closed_form) {
    const auto fp = detail::solve_layer_scalar(coeff, scalars.mu_start, cfg, layer);
    mu_for_p = fp.mu_for_p;
    iterations = fp.iterations;
  } else {
    // Update every p_n(B_m) from mu^{k,r-1}(n), then recompute mu^{k,r}(n).
    std::vector<double> previous(size), current(size);
    for (std::size_t i = 0; i < size; ++i) previous[i] = cond[states[i]];
    double mu = scalars.mu_start;
    double change = 0.0;
    do {
      if (iterations >= cfg.max_inner_iters)
        throw Error(ErrorCode::InnerDiverged, "layer " + std::to_string(layer) + " after " +
                                                  std::to_string(iterations) + " inner updates");
      ++iterations;
      change = 0.0;
      double mu_next = 0.0;
      for (std::size_t i = 0; i < size; ++i) {
        current[i] = a[i] * mu + b[i];
        change = std::max(change, std::abs(current[i] - previous[i]));
        mu_next += mu_m[i] * current[i];
      }
      mu_for_p = mu;
      mu = mu_next;
      std::swap(previous, current);
    } while (change > cfg.tol_inner);
  }

  const auto fin = detail::finalize_states(sys, states, a, b, mu_m, mu_for_p, cond.values());
  return {fin.lambda_sum, fin.mu_sum, fin.prob_sum, fin.max_abs_change, fin.l1_change, iterations};
}

SteadyStateDistribution assemble_distribution(const ServiceSystem& sys, const ConditionalDistribution& cond,
                                              const LayerRates& rates) {
  const int n_units = sys.n_units();
  const int capacity = sys.buffer_capacity();
  SteadyStateDistribution dist;
  dist.n_units = n_units;
  dist.profile = stationary_finite_buffer(rates.lambda, rates.mu, sys.arrival_rate(), capacity);
  dist.state_probs.resize(sys.n_states());
  for (std::uint32_t v = 0; v < sys.n_states(); ++v) {
    const StateIndex s{v};
    dist.state_probs[v] = dist.profile.p_n[s.busy_count()] * cond[s];
  }
  dist.queue_tail.assign(dist.profile.p_n.begin() + n_units + 1, dist.profile.p_n.end());
  dist.saturation = dist.state_probs[full_state(n_units).value] +
                    std::accumulate(dist.queue_tail.begin(), dist.queue_tail.end(), 0.0);
  return dist;
}

namespace detail {

double total_probability(const ServiceSystem& sys, const LayerRates& rates, std::span<const double> layer_sums) {
  const auto bd = stationary_finite_buffer(rates.lambda, rates.mu, sys.arrival_rate(), sys.buffer_capacity());
  double total = 0.0;
  for (std::size_t n = 0; n < bd.p_n.size(); ++n)
    total += bd.p_n[n] * (n < layer_sums.size() ? layer_sums[n] : 1.0);
  return total;
}

}  // namespace detail

SolveResult solve(const ServiceSystem& sys, const TransitionSet& transitions, const SolverConfig& cfg) {
  cfg.validate();
  const int n_units = sys.n_units();
  SolveResult result{{}, {}, ConditionalDistribution(n_units), {}};
  auto& cond = result.conditional;
  auto& trace = result.trace;
  auto& rates = result.rates;

  std::vector<LayerInflow> inflows(static_cast<std::size_t>(n_units) + 1);
  for (int n = 1; n < n_units; ++n) inflows[n] = inflow_for_layer(transitions, cond.layer(n));

  rates = layer_rates(cond, sys);
  trace.assumption = check_assumption(sys);

  std::vector<double> layer_sums(static_cast<std::size_t>(n_units) + 1, 1.0);
  for (int sweep = 1; sweep <= cfg.max_outer_iters; ++sweep) {
    double max_abs = 0.0;
    double max_l1 = 0.0;
    std::vector<int> inner(static_cast<std::size_t>(std::max(n_units - 1, 0)), 0);
    for (int n = 1; n < n_units; ++n) {
      const LayerScalars scalars{rates.lambda[n - 1], rates.lambda[n], rates.mu[n + 1], rates.mu[n]};
      const auto pass = inner_layer_pass(sys, n, inflows[n].view(), cond, scalars, cfg);
      rates.lambda[n] = pass.lambda;
      rates.mu[n] = pass.mu;
      layer_sums[n] = pass.layer_sum;
      max_abs = std::max(max_abs, pass.max_abs_change);
      max_l1 = std::max(max_l1, pass.l1_change);
      inner[n - 1] = pass.inner_iterations;
    }
    trace.sweeps = sweep;
    trace.max_abs_change.push_back(max_abs);
    trace.max_layer_l1.push_back(max_l1);
    trace.inner_iterations.push_back(std::move(inner));
    trace.total_probability.push_back(detail::total_probability(sys, rates, layer_sums));
    if (max_abs <= cfg.tol_outer) {
      trace.converged = true;
      break;
    }
  }

  result.distribution = assemble_distribution(sys, cond, rates);
  return result;
}

SolveResult solve(const ServiceSystem& sys, const SolverConfig& cfg) {
  const auto transitions = generate_full(sys);
  return solve(sys, transitions, cfg);
}

}  // namespace hyperq

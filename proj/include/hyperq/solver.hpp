#pragma once

#include <span>
#include <vector>

#include "hyperq/birthdeath.hpp"
#include "hyperq/conditional.hpp"
#include "hyperq/model.hpp"
#include "hyperq/transitions.hpp"

namespace hyperq {

enum class InnerMode {
  /// Repeat the layer update until successive iterates differ by at most tol_inner.
  Iterative,
  /// Jump straight to the fixed point of the affine map in mu(n).
  ClosedForm,
};

struct SolverConfig {
  double tol_outer = 1e-9;
  double tol_inner = 1e-10;
  int max_outer_iters = 10'000;
  int max_inner_iters = 10'000;
  InnerMode inner_mode = InnerMode::Iterative;

  /// Throws InvalidSpec unless 0 < tol_inner <= tol_outer and limits are positive.
  void validate() const;
};

/// Per-layer contraction bounds; phi[n] for n = 1..N (phi[0] unused).
struct AssumptionCheck {
  std::vector<double> phi;
  std::vector<double> mu_max;  // largest mu_m in layer n
  std::vector<double> mu_min;  // smallest mu_m in layer n
  double phi_max = 0.0;
  bool ok = true;
};

/// phi_n from the extremal layer service rates. The value at n = N (with no
/// layer above, its gamma factor taken as 1) bounds the outer contraction.
AssumptionCheck check_assumption(const ServiceSystem& sys);

struct ConvergenceTrace {
  /// M_k: largest per-layer L1 change, one entry per sweep (k = 2, 3, ...).
  std::vector<double> max_layer_l1;
  /// Largest absolute change of any conditional probability, per sweep.
  std::vector<double> max_abs_change;
  /// sum_m P^k{B_m} (plus queue tail) after each sweep.
  std::vector<double> total_probability;
  /// inner_iterations[k][n-1]: updates spent on layer n in sweep k.
  std::vector<std::vector<int>> inner_iterations;
  AssumptionCheck assumption;
  int sweeps = 0;
  bool converged = false;

  /// M_{k+1} / M_k for consecutive sweeps.
  std::vector<double> ratios() const;
};

struct SteadyStateDistribution {
  int n_units = 0;
  /// P{B_m} by state value.
  std::vector<double> state_probs;
  /// Probability of c waiting calls, c = 1..C.
  std::vector<double> queue_tail;
  BirthDeathProfile profile;
  /// All units busy, including any queued states.
  double saturation = 0.0;

  double total() const noexcept;
};

struct SolveResult {
  SteadyStateDistribution distribution;
  ConvergenceTrace trace;
  ConditionalDistribution conditional;
  LayerRates rates;
};

/// Layer-level rates that stay fixed while layer n is updated in sweep k.
struct LayerScalars {
  double lambda_below = 0.0;     // lambda^k(n-1)
  double lambda_here_prev = 0.0; // lambda^{k-1}(n)
  double mu_above_prev = 0.0;    // mu^{k-1}(n+1)
  double mu_start = 0.0;         // mu^{k-1}(n)
};

struct LayerPassResult {
  double lambda = 0.0;   // lambda^k(n)
  double mu = 0.0;       // mu^k(n)
  double layer_sum = 0.0;
  double max_abs_change = 0.0;
  double l1_change = 0.0;
  int inner_iterations = 0;
};

/// One converged update of layer n (1 <= n <= N-1), in place. Reads only
/// layers n-1 and n+1 of `cond` besides layer n itself.
LayerPassResult inner_layer_pass(const ServiceSystem& sys, int layer, const InflowView& inflow,
                                 ConditionalDistribution& cond, const LayerScalars& scalars,
                                 const SolverConfig& cfg);

/// Conditional probability update over a precomputed transition set.
SolveResult solve(const ServiceSystem& sys, const TransitionSet& transitions, const SolverConfig& cfg = {});
/// Generates the transitions first.
SolveResult solve(const ServiceSystem& sys, const SolverConfig& cfg = {});

/// P{B_m} = p(n) p_n(B_m), with the queue tail for C >= 1.
SteadyStateDistribution assemble_distribution(const ServiceSystem& sys, const ConditionalDistribution& cond,
                                              const LayerRates& rates);

namespace detail {

/// Sums a worker hands back after computing a_m and b_m for a run of states.
struct CoefficientPartial {
  double sum_mu_a = 0.0;
  double sum_mu_b = 0.0;
  double max_a = 0.0;
  /// max |a_m mu_start + b_m - p^{k-1}_n(B_m)|: the first inner step's change.
  double first_step_change = 0.0;
};

/// Sums a worker hands back after writing p^k for a run of states.
struct FinalizePartial {
  double lambda_sum = 0.0;
  double mu_sum = 0.0;
  double prob_sum = 0.0;
  double max_abs_change = 0.0;
  double l1_change = 0.0;
};

/// p_n(B_m) = a_m * mu(n) + b_m for each state; fills a, b and mu_m.
CoefficientPartial layer_coefficients(const ServiceSystem& sys, std::span<const StateIndex> states,
                                      const InflowView& inflow, std::span<const double> cond,
                                      const LayerScalars& scalars, std::span<double> a, std::span<double> b,
                                      std::span<double> mu_m);

/// Writes p = a * mu_for_p + b into cond and reports layer sums and changes.
FinalizePartial finalize_states(const ServiceSystem& sys, std::span<const StateIndex> states,
                                std::span<const double> a, std::span<const double> b,
                                std::span<const double> mu_m, double mu_for_p, std::span<double> cond);

struct ScalarFixedPoint {
  double mu_for_p = 0.0;  // mu^{k,r-1}(n), the value the final p was built from
  int iterations = 0;
};

/// The layer-level fixed point on mu(n) from aggregated coefficients.
ScalarFixedPoint solve_layer_scalar(const CoefficientPartial& total, double mu_start, const SolverConfig& cfg,
                                    int layer);

/// Sum over layers of p(n) times the layer's conditional mass, plus the queue tail.
double total_probability(const ServiceSystem& sys, const LayerRates& rates, std::span<const double> layer_sums);

}  // namespace detail

}  // namespace hyperq

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hyperq/model.hpp"

namespace hyperq {

/// One COO entry: rate of the transition from -> to.
struct Transition {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  double rate = 0.0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct TransitionSet {
  int n_units = 0;
  /// Arrival transitions, sorted by (layer of `to`, `to`, `from`).
  std::vector<Transition> upward;
  /// Service completions, sorted the same way.
  std::vector<Transition> downward;
  /// Indexed by state value; zero-queue view.
  std::vector<double> lambda_total;
  std::vector<double> mu_total;
};

/// Transitions whose destination lies in a given batch of states.
struct BatchTransitions {
  std::vector<Transition> upward;
  std::vector<Transition> downward;
};

struct TotalRates {
  double lambda = 0.0;
  double mu = 0.0;
};

/// Default ceiling on the memory a full transition sweep may allocate.
inline constexpr std::size_t kDefaultTransitionBudget = std::size_t{4} << 30;

/// Arrival rate from l to its up-neighbour m.
double upward_rate(StateIndex l, StateIndex m, const ServiceSystem& sys);

/// Outflow totals of state m, ignoring any waiting room.
TotalRates total_rates(const ServiceSystem& sys, StateIndex m) noexcept;

/// Bytes a full sweep would need for its triples.
std::size_t estimated_transition_bytes(int n_units) noexcept;

/// Every transition of the hypercube, scanning each source state forward.
TransitionSet generate_full(const ServiceSystem& sys,
                            std::size_t memory_budget = kDefaultTransitionBudget);

/// Transitions into each state of `batch`, in batch order. Pure and reentrant.
BatchTransitions generate_for_states(const ServiceSystem& sys, std::span<const StateIndex> batch);

/// Triples grouped by destination with offsets aligned to a state list:
/// entries for states[i] are upward[up_offsets[i] .. up_offsets[i+1]).
struct InflowView {
  std::span<const Transition> upward;
  std::span<const Transition> downward;
  std::span<const std::uint32_t> up_offsets;
  std::span<const std::uint32_t> down_offsets;
};

/// Owning form, used for per-batch generation.
struct InflowBlock {
  std::vector<Transition> upward;
  std::vector<Transition> downward;
  std::vector<std::uint32_t> up_offsets;
  std::vector<std::uint32_t> down_offsets;

  InflowView view() const noexcept { return {upward, downward, up_offsets, down_offsets}; }
};

/// Offsets into a slice of a full TransitionSet, which must outlive it.
struct LayerInflow {
  std::span<const Transition> upward;
  std::span<const Transition> downward;
  std::vector<std::uint32_t> up_offsets;
  std::vector<std::uint32_t> down_offsets;

  InflowView view() const noexcept { return {upward, downward, up_offsets, down_offsets}; }
};

/// Requires triples already grouped by destination in the order of `states`.
InflowBlock make_inflow_block(BatchTransitions transitions, std::span<const StateIndex> states);

/// Slice of a full set covering the destinations in `states` (ascending, one layer).
LayerInflow inflow_for_layer(const TransitionSet& set, std::span<const StateIndex> states);

/// Binary cache: header {magic "HQTS", u32 version, u32 N, u32 J, u64 fingerprint,
/// u64 n_up, u64 n_down} then {u32 from, u32 to, f64 rate} records, all little-endian.
void save_transition_cache(const std::filesystem::path& path, const ServiceSystem& sys,
                           const TransitionSet& set);
/// Throws CacheMismatch if the file was written for a different instance.
TransitionSet load_transition_cache(const std::filesystem::path& path, const ServiceSystem& sys);

}  // namespace hyperq

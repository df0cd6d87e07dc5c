#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hyperq/error.hpp"

namespace hyperq {

/// Largest supported number of units; 2^N and C(N, n) stay within 64 bits.
inline constexpr int kMaxUnits = 30;

/// A hypercube state: bit i set means unit i (0-based) is busy.
struct StateIndex {
  std::uint32_t value = 0;

  constexpr bool busy(int unit) const noexcept { return (value >> unit) & 1u; }
  constexpr int busy_count() const noexcept { return std::popcount(value); }
  constexpr StateIndex toggled(int unit) const noexcept { return {value ^ (1u << unit)}; }

  friend constexpr bool operator==(StateIndex, StateIndex) = default;
  friend constexpr auto operator<=>(StateIndex, StateIndex) = default;
};

/// All-busy state of an N-unit system.
constexpr StateIndex full_state(int n_units) noexcept {
  return {n_units >= 32 ? ~0u : ((1u << n_units) - 1u)};
}

/// Bit-vector form with element 0 = unit 0.
std::vector<bool> decode(StateIndex s, int n_units);
StateIndex encode(std::span<const bool> busy);

struct Neighbor {
  StateIndex state;
  int unit = 0;  // 0-based unit whose status differs
};

/// States reached by one service completion, in ascending unit order.
std::vector<Neighbor> down_neighbors(StateIndex m);
/// States reached by one unit becoming busy, in ascending unit order.
std::vector<Neighbor> up_neighbors(StateIndex m, int n_units);

/// The states with exactly `layer` busy units, ascending by value.
struct LayerView {
  int layer = 0;
  std::vector<StateIndex> states;
};

std::uint64_t binomial(int n, int k);
LayerView layer_states(int n_units, int layer);

/// Instance as read from disk: preferences are 1-based unit ids.
struct RawInstance {
  int n_units = 0;
  int n_nodes = 0;
  double arrival_rate = 0.0;
  std::vector<double> demand_fractions;
  std::vector<double> service_rates;
  std::vector<std::vector<int>> preferences;
  int buffer_capacity = 0;
  /// N rows (units) by J columns (nodes).
  std::optional<std::vector<std::vector<double>>> travel_times;
};

/// A validated problem instance. Immutable; units and ranks are 0-based.
class ServiceSystem {
public:
  static ServiceSystem validate(const RawInstance& raw);

  int n_units() const noexcept { return n_units_; }
  int n_nodes() const noexcept { return n_nodes_; }
  double arrival_rate() const noexcept { return arrival_rate_; }
  int buffer_capacity() const noexcept { return buffer_capacity_; }
  std::uint64_t n_states() const noexcept { return std::uint64_t{1} << n_units_; }

  std::span<const double> demand_fractions() const noexcept { return demand_fractions_; }
  std::span<const double> service_rates() const noexcept { return service_rates_; }
  double service_rate(int unit) const noexcept { return service_rates_[unit]; }
  double total_service_rate() const noexcept { return total_service_rate_; }

  /// Preference list of node j, most preferred first.
  std::span<const std::uint8_t> preference(int node) const noexcept {
    return {preferences_.data() + static_cast<std::size_t>(node) * n_units_,
            static_cast<std::size_t>(n_units_)};
  }
  /// Position of `unit` in node j's preference list.
  int rank(int node, int unit) const noexcept {
    return ranks_[static_cast<std::size_t>(node) * n_units_ + unit];
  }

  bool has_travel_times() const noexcept { return !travel_times_.empty(); }
  double travel_time(int unit, int node) const noexcept {
    return travel_times_[static_cast<std::size_t>(unit) * n_nodes_ + node];
  }

  /// Same instance with a different waiting capacity.
  ServiceSystem with_buffer(int capacity) const;

  /// Back to the on-disk form (1-based preferences).
  RawInstance to_raw() const;

  /// Stable FNV-1a digest of every field that affects transition rates.
  std::uint64_t fingerprint() const noexcept;

private:
  ServiceSystem() = default;

  int n_units_ = 0;
  int n_nodes_ = 0;
  double arrival_rate_ = 0.0;
  int buffer_capacity_ = 0;
  double total_service_rate_ = 0.0;
  std::vector<double> demand_fractions_;
  std::vector<double> service_rates_;
  std::vector<std::uint8_t> preferences_;
  std::vector<std::uint8_t> ranks_;
  std::vector<double> travel_times_;
};

}  // namespace hyperq

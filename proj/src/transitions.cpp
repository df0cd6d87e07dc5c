#include "hyperq/transitions.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

namespace hyperq {

namespace {

// First free unit of node j's preference list in state s, or -1 if all busy.
int first_free(const ServiceSystem& sys, int node, StateIndex s) noexcept {
  for (auto unit : sys.preference(node))
    if (!s.busy(unit)) return unit;
  return -1;
}

bool layer_order_less(std::uint32_t a, std::uint32_t b) noexcept {
  const int pa = std::popcount(a);
  const int pb = std::popcount(b);
  return pa != pb ? pa < pb : a < b;
}

// Stable counting sort of triples by destination, destinations in layer order.
std::vector<Transition> sort_by_destination(std::vector<Transition> triples, int n_units) {
  const std::size_t n_states = std::size_t{1} << n_units;
  std::vector<std::size_t> start(n_states + 1, 0);
  for (const auto& t : triples) ++start[t.to];
  std::size_t running = 0;
  for (int layer = 0; layer <= n_units; ++layer) {
    for (auto s : layer_states(n_units, layer).states) {
      const std::size_t c = start[s.value];
      start[s.value] = running;
      running += c;
    }
  }
  std::vector<Transition> sorted(triples.size());
  for (const auto& t : triples) sorted[start[t.to]++] = t;
  return sorted;
}

}  // namespace

double upward_rate(StateIndex l, StateIndex m, const ServiceSystem& sys) {
  const std::uint32_t diff = l.value ^ m.value;
  if (std::popcount(diff) != 1 || (m.value & diff) == 0)
    throw Error(ErrorCode::NotUpwardNeighbor, "states " + std::to_string(l.value) + " -> " +
                                                  std::to_string(m.value));
  const int unit = std::countr_zero(diff);
  double rate = 0.0;
  for (int node = 0; node < sys.n_nodes(); ++node)
    if (first_free(sys, node, l) == unit) rate += sys.arrival_rate() * sys.demand_fractions()[node];
  return rate;
}

TotalRates total_rates(const ServiceSystem& sys, StateIndex m) noexcept {
  TotalRates r;
  r.lambda = m.busy_count() < sys.n_units() ? sys.arrival_rate() : 0.0;
  for (std::uint32_t rest = m.value; rest != 0; rest &= rest - 1)
    r.mu += sys.service_rate(std::countr_zero(rest));
  return r;
}

std::size_t estimated_transition_bytes(int n_units) noexcept {
  if (n_units <= 0) return 0;
  // N * 2^(N-1) triples in each direction plus per-state totals.
  const std::size_t per_direction = static_cast<std::size_t>(n_units) << (n_units - 1);
  return 2 * per_direction * sizeof(Transition) + (std::size_t{2} << n_units) * sizeof(double);
}

TransitionSet generate_full(const ServiceSystem& sys, std::size_t memory_budget) {
  const int n = sys.n_units();
  const std::size_t need = estimated_transition_bytes(n);
  if (need > memory_budget)
    throw Error(ErrorCode::StateSpaceTooLarge,
                "full transition set needs ~" + std::to_string(need >> 20) + " MiB");

  const std::uint32_t n_states = static_cast<std::uint32_t>(sys.n_states());
  TransitionSet set;
  set.n_units = n;
  set.lambda_total.resize(n_states);
  set.mu_total.resize(n_states);

  std::vector<Transition> up;
  std::vector<Transition> down;
  up.reserve(static_cast<std::size_t>(n) << (n - 1 > 0 ? n - 1 : 0));
  down.reserve(up.capacity());

  std::vector<double> acc(static_cast<std::size_t>(n));
  std::vector<char> hit(static_cast<std::size_t>(n));
  for (std::uint32_t v = 0; v < n_states; ++v) {
    const StateIndex l{v};
    const auto totals = total_rates(sys, l);
    set.lambda_total[v] = totals.lambda;
    set.mu_total[v] = totals.mu;

    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(hit.begin(), hit.end(), 0);
    for (int node = 0; node < sys.n_nodes(); ++node) {
      const int unit = first_free(sys, node, l);
      if (unit < 0) break;  // all busy: no node can dispatch
      acc[unit] += sys.arrival_rate() * sys.demand_fractions()[node];
      hit[unit] = 1;
    }
    for (int unit = 0; unit < n; ++unit)
      if (hit[unit]) up.push_back({v, l.toggled(unit).value, acc[unit]});
    for (std::uint32_t rest = v; rest != 0; rest &= rest - 1) {
      const int unit = std::countr_zero(rest);
      down.push_back({v, l.toggled(unit).value, sys.service_rate(unit)});
    }
  }
  set.upward = sort_by_destination(std::move(up), n);
  set.downward = sort_by_destination(std::move(down), n);
  return set;
}

BatchTransitions generate_for_states(const ServiceSystem& sys, std::span<const StateIndex> batch) {
  const int n = sys.n_units();
  BatchTransitions out;
  std::array<double, kMaxUnits> acc{};
  std::array<bool, kMaxUnits> hit{};
  for (const StateIndex m : batch) {
    // Service completions into m come from each up-neighbour.
    for (int unit = 0; unit < n; ++unit)
      if (!m.busy(unit)) out.downward.push_back({m.toggled(unit).value, m.value, sys.service_rate(unit)});

    // Arrivals into m: every busy unit in a node's preference prefix could
    // have been the one dispatched from the state where it was still free.
    acc.fill(0.0);
    hit.fill(false);
    for (int node = 0; node < sys.n_nodes(); ++node) {
      const double rate = sys.arrival_rate() * sys.demand_fractions()[node];
      for (auto unit : sys.preference(node)) {
        if (!m.busy(unit)) break;
        acc[unit] += rate;
        hit[unit] = true;
      }
    }
    // Descending unit gives ascending source index.
    for (int unit = n - 1; unit >= 0; --unit)
      if (hit[unit]) out.upward.push_back({m.toggled(unit).value, m.value, acc[unit]});
  }
  return out;
}

namespace {

void fill_offsets(std::span<const Transition> up, std::span<const Transition> down,
                  std::span<const StateIndex> states, std::vector<std::uint32_t>& up_offsets,
                  std::vector<std::uint32_t>& down_offsets) {
  up_offsets.assign(states.size() + 1, 0);
  down_offsets.assign(states.size() + 1, 0);
  std::size_t u = 0;
  std::size_t d = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    up_offsets[i] = static_cast<std::uint32_t>(u);
    down_offsets[i] = static_cast<std::uint32_t>(d);
    while (u < up.size() && up[u].to == states[i].value) ++u;
    while (d < down.size() && down[d].to == states[i].value) ++d;
  }
  up_offsets[states.size()] = static_cast<std::uint32_t>(u);
  down_offsets[states.size()] = static_cast<std::uint32_t>(d);
}

std::span<const Transition> layer_slice(const std::vector<Transition>& v, std::uint32_t lo,
                                        std::uint32_t hi) {
  auto first = std::partition_point(v.begin(), v.end(),
                                    [&](const Transition& t) { return layer_order_less(t.to, lo); });
  auto last = std::partition_point(first, v.end(),
                                   [&](const Transition& t) { return !layer_order_less(hi, t.to); });
  return {std::to_address(first), static_cast<std::size_t>(last - first)};
}

}  // namespace

InflowBlock make_inflow_block(BatchTransitions transitions, std::span<const StateIndex> states) {
  InflowBlock block;
  block.upward = std::move(transitions.upward);
  block.downward = std::move(transitions.downward);
  fill_offsets(block.upward, block.downward, states, block.up_offsets, block.down_offsets);
  return block;
}

LayerInflow inflow_for_layer(const TransitionSet& set, std::span<const StateIndex> states) {
  LayerInflow out;
  if (!states.empty()) {
    out.upward = layer_slice(set.upward, states.front().value, states.back().value);
    out.downward = layer_slice(set.downward, states.front().value, states.back().value);
  }
  fill_offsets(out.upward, out.downward, states, out.up_offsets, out.down_offsets);
  return out;
}

namespace {

constexpr char kCacheMagic[4] = {'H', 'Q', 'T', 'S'};
constexpr std::uint32_t kCacheVersion = 1;

template <class T>
void put_le(std::ostream& os, T value) {
  std::array<unsigned char, sizeof(T)> buf{};
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> buf{};
  if (!is.read(reinterpret_cast<char*>(buf.data()), sizeof(T)))
    throw Error(ErrorCode::CacheMismatch, "truncated transition cache");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  if constexpr (std::is_floating_point_v<T>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

void put_records(std::ostream& os, const std::vector<Transition>& v) {
  for (const auto& t : v) {
    put_le(os, t.from);
    put_le(os, t.to);
    put_le(os, t.rate);
  }
}

std::vector<Transition> get_records(std::istream& is, std::uint64_t count, std::uint32_t n_states) {
  std::vector<Transition> v;
  v.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Transition t;
    t.from = get_le<std::uint32_t>(is);
    t.to = get_le<std::uint32_t>(is);
    t.rate = get_le<double>(is);
    if (t.from >= n_states || t.to >= n_states)
      throw Error(ErrorCode::CacheMismatch, "state index out of range in transition cache");
    v.push_back(t);
  }
  return v;
}

}  // namespace

void save_transition_cache(const std::filesystem::path& path, const ServiceSystem& sys,
                           const TransitionSet& set) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  os.write(kCacheMagic, 4);
  put_le(os, kCacheVersion);
  put_le(os, static_cast<std::uint32_t>(sys.n_units()));
  put_le(os, static_cast<std::uint32_t>(sys.n_nodes()));
  put_le(os, sys.fingerprint());
  put_le(os, static_cast<std::uint64_t>(set.upward.size()));
  put_le(os, static_cast<std::uint64_t>(set.downward.size()));
  put_records(os, set.upward);
  put_records(os, set.downward);
}

TransitionSet load_transition_cache(const std::filesystem::path& path, const ServiceSystem& sys) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::CacheMismatch, "cannot open " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCacheMagic, 4) != 0)
    throw Error(ErrorCode::CacheMismatch, "not a transition cache");
  if (get_le<std::uint32_t>(is) != kCacheVersion)
    throw Error(ErrorCode::CacheMismatch, "unsupported cache version");
  const auto n = get_le<std::uint32_t>(is);
  const auto j = get_le<std::uint32_t>(is);
  const auto fp = get_le<std::uint64_t>(is);
  if (n != static_cast<std::uint32_t>(sys.n_units()) || j != static_cast<std::uint32_t>(sys.n_nodes()) ||
      fp != sys.fingerprint())
    throw Error(ErrorCode::CacheMismatch, "cache was written for a different instance");
  const auto n_up = get_le<std::uint64_t>(is);
  const auto n_down = get_le<std::uint64_t>(is);

  const auto n_states = static_cast<std::uint32_t>(sys.n_states());
  TransitionSet set;
  set.n_units = sys.n_units();
  set.upward = get_records(is, n_up, n_states);
  set.downward = get_records(is, n_down, n_states);
  set.lambda_total.resize(n_states);
  set.mu_total.resize(n_states);
  for (std::uint32_t v = 0; v < n_states; ++v) {
    const auto r = total_rates(sys, StateIndex{v});
    set.lambda_total[v] = r.lambda;
    set.mu_total[v] = r.mu;
  }
  return set;
}

}  // namespace hyperq

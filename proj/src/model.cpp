#include "hyperq/model.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace hyperq {

std::vector<bool> decode(StateIndex s, int n_units) {
  std::vector<bool> bits(static_cast<std::size_t>(n_units));
  for (int i = 0; i < n_units; ++i) bits[i] = s.busy(i);
  return bits;
}

StateIndex encode(std::span<const bool> busy) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < busy.size(); ++i)
    if (busy[i]) v |= 1u << i;
  return {v};
}

std::vector<Neighbor> down_neighbors(StateIndex m) {
  std::vector<Neighbor> out;
  out.reserve(static_cast<std::size_t>(m.busy_count()));
  for (std::uint32_t rest = m.value; rest != 0; rest &= rest - 1) {
    const int unit = std::countr_zero(rest);
    out.push_back({m.toggled(unit), unit});
  }
  return out;
}

std::vector<Neighbor> up_neighbors(StateIndex m, int n_units) {
  std::vector<Neighbor> out;
  for (int unit = 0; unit < n_units; ++unit)
    if (!m.busy(unit)) out.push_back({m.toggled(unit), unit});
  return out;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

LayerView layer_states(int n_units, int layer) {
  if (n_units < 0 || n_units > kMaxUnits || layer < 0 || layer > n_units)
    throw Error(ErrorCode::LayerOutOfRange,
                "layer " + std::to_string(layer) + " of N=" + std::to_string(n_units));
  LayerView view{layer, {}};
  const std::uint64_t count = binomial(n_units, layer);
  view.states.reserve(count);
  if (layer == 0) {
    view.states.push_back({0});
    return view;
  }
  // Gosper's hack: next integer with the same popcount.
  std::uint64_t v = (std::uint64_t{1} << layer) - 1;
  for (std::uint64_t i = 0; i < count; ++i) {
    view.states.push_back({static_cast<std::uint32_t>(v)});
    const std::uint64_t t = v | (v - 1);
    v = (t + 1) | (((~t & (t + 1)) - 1) >> (std::countr_zero(v) + 1));
  }
  return view;
}

ServiceSystem ServiceSystem::validate(const RawInstance& raw) {
  const int n = raw.n_units;
  const int j = raw.n_nodes;
  if (n < 1 || j < 1)
    throw Error(ErrorCode::DimensionMismatch, "n_units and n_nodes must be at least 1");
  if (n > kMaxUnits)
    throw Error(ErrorCode::StateSpaceTooLarge,
                "n_units=" + std::to_string(n) + " exceeds cap " + std::to_string(kMaxUnits));
  if (raw.demand_fractions.size() != static_cast<std::size_t>(j))
    throw Error(ErrorCode::DimensionMismatch, "demand_fractions must have n_nodes entries");
  if (raw.service_rates.size() != static_cast<std::size_t>(n))
    throw Error(ErrorCode::DimensionMismatch, "service_rates must have n_units entries");
  if (raw.preferences.size() != static_cast<std::size_t>(j))
    throw Error(ErrorCode::DimensionMismatch, "preferences must have n_nodes rows");
  if (raw.buffer_capacity < 0)
    throw Error(ErrorCode::DimensionMismatch, "buffer_capacity must be non-negative");

  if (!(raw.arrival_rate > 0.0) || !std::isfinite(raw.arrival_rate))
    throw Error(ErrorCode::NonPositiveRate, "arrival_rate must be positive");
  for (int i = 0; i < n; ++i)
    if (!(raw.service_rates[i] > 0.0) || !std::isfinite(raw.service_rates[i]))
      throw Error(ErrorCode::NonPositiveRate, "service rate of unit " + std::to_string(i + 1));

  double sum = 0.0;
  for (double f : raw.demand_fractions) {
    if (!(f >= 0.0) || !std::isfinite(f))
      throw Error(ErrorCode::FractionsNotNormalized, "negative demand fraction");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw Error(ErrorCode::FractionsNotNormalized, "demand fractions sum to " + std::to_string(sum));

  ServiceSystem sys;
  sys.n_units_ = n;
  sys.n_nodes_ = j;
  sys.arrival_rate_ = raw.arrival_rate;
  sys.buffer_capacity_ = raw.buffer_capacity;
  sys.demand_fractions_ = raw.demand_fractions;
  sys.service_rates_ = raw.service_rates;
  for (double v : raw.service_rates) sys.total_service_rate_ += v;

  sys.preferences_.resize(static_cast<std::size_t>(n) * j);
  sys.ranks_.resize(static_cast<std::size_t>(n) * j);
  for (int node = 0; node < j; ++node) {
    const auto& row = raw.preferences[node];
    if (row.size() != static_cast<std::size_t>(n))
      throw Error(ErrorCode::NonPermutationPreference,
                  "preference row " + std::to_string(node + 1) + " has wrong length");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int h = 0; h < n; ++h) {
      const int unit = row[h] - 1;
      if (unit < 0 || unit >= n || seen[unit])
        throw Error(ErrorCode::NonPermutationPreference,
                    "preference row " + std::to_string(node + 1) + " is not a permutation of 1..N");
      seen[unit] = true;
      sys.preferences_[static_cast<std::size_t>(node) * n + h] = static_cast<std::uint8_t>(unit);
      sys.ranks_[static_cast<std::size_t>(node) * n + unit] = static_cast<std::uint8_t>(h);
    }
  }

  if (raw.travel_times) {
    const auto& tt = *raw.travel_times;
    if (tt.size() != static_cast<std::size_t>(n))
      throw Error(ErrorCode::DimensionMismatch, "travel_times must have n_units rows");
    sys.travel_times_.reserve(static_cast<std::size_t>(n) * j);
    for (const auto& row : tt) {
      if (row.size() != static_cast<std::size_t>(j))
        throw Error(ErrorCode::DimensionMismatch, "travel_times rows must have n_nodes entries");
      for (double t : row) {
        if (!(t >= 0.0) || !std::isfinite(t))
          throw Error(ErrorCode::DimensionMismatch, "travel times must be finite and non-negative");
        sys.travel_times_.push_back(t);
      }
    }
  }
  return sys;
}

ServiceSystem ServiceSystem::with_buffer(int capacity) const {
  if (capacity < 0) throw Error(ErrorCode::DimensionMismatch, "buffer_capacity must be non-negative");
  ServiceSystem copy = *this;
  copy.buffer_capacity_ = capacity;
  return copy;
}

RawInstance ServiceSystem::to_raw() const {
  RawInstance raw;
  raw.n_units = n_units_;
  raw.n_nodes = n_nodes_;
  raw.arrival_rate = arrival_rate_;
  raw.demand_fractions = demand_fractions_;
  raw.service_rates = service_rates_;
  raw.buffer_capacity = buffer_capacity_;
  raw.preferences.resize(static_cast<std::size_t>(n_nodes_));
  for (int node = 0; node < n_nodes_; ++node)
    for (auto unit : preference(node)) raw.preferences[node].push_back(unit + 1);
  if (has_travel_times()) {
    std::vector<std::vector<double>> tt(static_cast<std::size_t>(n_units_));
    for (int i = 0; i < n_units_; ++i)
      for (int node = 0; node < n_nodes_; ++node) tt[i].push_back(travel_time(i, node));
    raw.travel_times = std::move(tt);
  }
  return raw;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  template <class T>
  void value(const T& v) {
    bytes(&v, sizeof v);
  }
};

}  // namespace

std::uint64_t ServiceSystem::fingerprint() const noexcept {
  Fnv1a f;
  f.value(n_units_);
  f.value(n_nodes_);
  f.value(arrival_rate_);
  for (double v : demand_fractions_) f.value(v);
  for (double v : service_rates_) f.value(v);
  f.bytes(preferences_.data(), preferences_.size());
  return f.h;
}

}  // namespace hyperq

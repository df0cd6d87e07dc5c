#include "hyperq/conditional.hpp"

namespace hyperq {

ConditionalDistribution::ConditionalDistribution(int n_units) : n_units_(n_units) {
  if (n_units < 0 || n_units > kMaxUnits)
    throw Error(ErrorCode::StateSpaceTooLarge, "unsupported number of units");
  auto layers = std::make_shared<std::vector<LayerView>>();
  layers->reserve(static_cast<std::size_t>(n_units) + 1);
  values_.assign(std::size_t{1} << n_units, 0.0);
  for (int n = 0; n <= n_units; ++n) {
    layers->push_back(layer_states(n_units, n));
    const double share = 1.0 / static_cast<double>(binomial(n_units, n));
    for (auto s : layers->back().states) values_[s.value] = share;
  }
  layers_ = std::move(layers);
}

double ConditionalDistribution::layer_sum(int n) const noexcept {
  double sum = 0.0;
  for (auto s : layer(n)) sum += values_[s.value];
  return sum;
}

}  // namespace hyperq

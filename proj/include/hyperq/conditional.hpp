#pragma once

#include <memory>
#include <span>
#include <vector>

#include "hyperq/model.hpp"

namespace hyperq {

/// Conditional probabilities p_n(B_m) of each state given its layer.
/// Values are stored by state value; layers share one immutable index.
class ConditionalDistribution {
public:
  /// Uniform start: every state in layer n gets 1 / C(N, n).
  explicit ConditionalDistribution(int n_units);

  int n_units() const noexcept { return n_units_; }
  std::span<const StateIndex> layer(int n) const noexcept { return (*layers_)[n].states; }

  double operator[](StateIndex s) const noexcept { return values_[s.value]; }
  double& operator[](StateIndex s) noexcept { return values_[s.value]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double layer_sum(int n) const noexcept;

private:
  int n_units_;
  std::shared_ptr<const std::vector<LayerView>> layers_;
  std::vector<double> values_;
};

}  // namespace hyperq

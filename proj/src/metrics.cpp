#include "hyperq/metrics.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <string>

namespace hyperq {

std::vector<double> utilization(const SteadyStateDistribution& dist, const ServiceSystem& sys) {
  const double queued = std::accumulate(dist.queue_tail.begin(), dist.queue_tail.end(), 0.0);
  std::vector<double> rho(static_cast<std::size_t>(sys.n_units()), queued);
  for (std::uint32_t v = 0; v < dist.state_probs.size(); ++v) {
    for (std::uint32_t bits = v; bits != 0; bits &= bits - 1) rho[std::countr_zero(bits)] += dist.state_probs[v];
  }
  return rho;
}

DispatchFractions dispatch_fractions(const SteadyStateDistribution& dist, const ServiceSystem& sys) {
  const int n_units = sys.n_units();
  const int n_nodes = sys.n_nodes();
  DispatchFractions df;
  df.fraction.assign(static_cast<std::size_t>(n_units), std::vector<double>(static_cast<std::size_t>(n_nodes), 0.0));
  df.blocking = dist.saturation;
  const double served = 1.0 - df.blocking;
  if (!(served > 1e-15)) throw Error(ErrorCode::SaturatedSystem, "every unit is busy with probability one");

  const std::uint32_t full = full_state(n_units).value;
  for (std::uint32_t v = 0; v < full; ++v) {
    const StateIndex s{v};
    for (int j = 0; j < n_nodes; ++j) {
      for (auto unit : sys.preference(j)) {
        if (!s.busy(unit)) {
          df.fraction[unit][j] += sys.demand_fractions()[j] * dist.state_probs[v];
          break;
        }
      }
    }
  }
  for (auto& row : df.fraction)
    for (auto& x : row) x /= served;
  return df;
}

std::vector<double> utilization_from_dispatch(const DispatchFractions& df, const ServiceSystem& sys) {
  const double served_rate = sys.arrival_rate() * (1.0 - df.blocking);
  std::vector<double> rho(df.fraction.size());
  for (std::size_t i = 0; i < rho.size(); ++i)
    rho[i] = served_rate * std::accumulate(df.fraction[i].begin(), df.fraction[i].end(), 0.0) /
             sys.service_rate(static_cast<int>(i));
  return rho;
}

namespace {

void require_travel_times(const ServiceSystem& sys) {
  if (!sys.has_travel_times()) throw Error(ErrorCode::MissingTravelTimes, "instance has no travel_times");
}

}  // namespace

double mean_response_time(const DispatchFractions& df, const ServiceSystem& sys) {
  require_travel_times(sys);
  double mrt = 0.0;
  for (std::size_t i = 0; i < df.fraction.size(); ++i)
    for (std::size_t j = 0; j < df.fraction[i].size(); ++j)
      mrt += df.fraction[i][j] * sys.travel_time(static_cast<int>(i), static_cast<int>(j));
  return mrt;
}

double coverage(const DispatchFractions& df, const ServiceSystem& sys, double threshold) {
  require_travel_times(sys);
  double covered = 0.0;
  for (std::size_t i = 0; i < df.fraction.size(); ++i)
    for (std::size_t j = 0; j < df.fraction[i].size(); ++j)
      if (sys.travel_time(static_cast<int>(i), static_cast<int>(j)) < threshold) covered += df.fraction[i][j];
  return covered;
}

PerformanceReport performance_report(const SteadyStateDistribution& dist, const ServiceSystem& sys,
                                     const std::vector<double>& coverage_thresholds) {
  PerformanceReport rep;
  rep.utilization = utilization(dist, sys);
  rep.dispatch = dispatch_fractions(dist, sys);
  rep.system_utilization = sys.arrival_rate() / sys.total_service_rate();
  rep.has_travel_times = sys.has_travel_times();
  if (rep.has_travel_times) {
    rep.mean_response_time = mean_response_time(rep.dispatch, sys);
    for (double t : coverage_thresholds) rep.coverage.emplace_back(t, coverage(rep.dispatch, sys, t));
  }
  return rep;
}

MpreResult mpre_detailed(const std::vector<double>& reference, const std::vector<double>& candidate) {
  if (reference.size() != candidate.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(reference.size()) + " vs " +
                                               std::to_string(candidate.size()));
  MpreResult out;
  std::size_t used = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (std::abs(reference[i]) < 1e-300) {
      ++out.excluded;
      continue;
    }
    ++used;
    out.percent = std::max(out.percent, std::abs((reference[i] - candidate[i]) / reference[i]) * 100.0);
  }
  if (used == 0) throw Error(ErrorCode::AllReferenceZero, "no usable reference entries");
  return out;
}

double mpre(const std::vector<double>& reference, const std::vector<double>& candidate) {
  return mpre_detailed(reference, candidate).percent;
}

}  // namespace hyperq

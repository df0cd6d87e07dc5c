#pragma once

#include <cstddef>
#include <vector>

#include "hyperq/solver.hpp"

namespace hyperq {

/// rho_i = P(unit i busy), counting queued states as all busy.
std::vector<double> utilization(const SteadyStateDistribution& dist, const ServiceSystem& sys);

struct DispatchFractions {
  /// fraction[i][j]: share of served calls that come from node j and go to unit i.
  std::vector<std::vector<double>> fraction;
  /// Probability that an arriving call finds every unit busy.
  double blocking = 0.0;
};

DispatchFractions dispatch_fractions(const SteadyStateDistribution& dist, const ServiceSystem& sys);

/// lambda (1 - Pi) sum_j rho_ij / nu_i: the busy fraction implied by dispatch flow.
std::vector<double> utilization_from_dispatch(const DispatchFractions& df, const ServiceSystem& sys);

double mean_response_time(const DispatchFractions& df, const ServiceSystem& sys);

/// Fraction of served calls answered by a unit with travel time below `threshold`.
double coverage(const DispatchFractions& df, const ServiceSystem& sys, double threshold);

struct PerformanceReport {
  std::vector<double> utilization;
  DispatchFractions dispatch;
  bool has_travel_times = false;
  double mean_response_time = 0.0;
  std::vector<std::pair<double, double>> coverage;  // (threshold, fraction)
  double system_utilization = 0.0;                  // lambda / sum nu
};

PerformanceReport performance_report(const SteadyStateDistribution& dist, const ServiceSystem& sys,
                                     const std::vector<double>& coverage_thresholds = {});

struct MpreResult {
  double percent = 0.0;
  std::size_t excluded = 0;  // reference entries too close to zero to divide by
};

MpreResult mpre_detailed(const std::vector<double>& reference, const std::vector<double>& candidate);
/// max_m |(ref_m - cand_m) / ref_m| * 100
double mpre(const std::vector<double>& reference, const std::vector<double>& candidate);

}  // namespace hyperq

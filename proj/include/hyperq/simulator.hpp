#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hyperq/model.hpp"

namespace hyperq {

enum class ServiceKind { Exponential, Uniform, Lognormal, Gamma };

/// Service-time family; every member has mean 1/nu_i for unit i.
struct ServiceDistributionSpec {
  ServiceKind kind = ServiceKind::Exponential;
  double gamma_shape = 1.0;  // alpha, used by Gamma only

  /// "exp", "uniform", "lognormal" or "gamma:<alpha>".
  static ServiceDistributionSpec parse(const std::string& text);
  std::string to_string() const;
  void validate() const;
};

/// One service duration for a unit with rate `nu`.
double sample_service(const ServiceDistributionSpec& dist, double nu, std::mt19937_64& rng);

struct SimConfig {
  std::uint64_t n_arrivals = 1'000'000;
  int n_replications = 20;
  std::uint64_t seed = 1;
  /// Share of arrivals (hence of the horizon) discarded before accounting starts.
  double warmup_fraction = 0.01;
  /// Replications run on this many threads.
  int threads = 1;
  bool response_time = false;
};

struct ReplicationResult {
  std::vector<double> state_probs;  // 2^N hypercube states then C queue levels
  std::vector<double> utilization;
  std::vector<std::uint64_t> dispatches;  // calls started per unit, queued ones included
  double horizon = 0.0;
  double lost_fraction = 0.0;
  double mean_response_time = 0.0;
};

struct SimEstimate {
  std::vector<ReplicationResult> replications;
  std::vector<double> state_probs;
  std::vector<double> state_half_width;
  std::vector<double> utilization;
  std::vector<double> utilization_half_width;
  double lost_fraction = 0.0;
  double lost_half_width = 0.0;
  double mean_response_time = 0.0;
  double response_half_width = 0.0;
};

/// 95% half-width of the mean of `values` (Student t); NaN for fewer than two.
double t_half_width(const std::vector<double>& values);

SimEstimate simulate(const ServiceSystem& sys, const ServiceDistributionSpec& dist, const SimConfig& cfg);

}  // namespace hyperq

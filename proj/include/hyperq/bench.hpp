#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hyperq/model.hpp"
#include "hyperq/parallel.hpp"

namespace hyperq {

struct InstanceGenerator {
  int n_units = 8;
  int n_nodes = 20;
  double rho = 0.5;
  double heterogeneity = 0.2;  // u_i ~ U[-h, h]
  std::uint64_t seed = 1;
  double base_rate = 1.0 / 34.15;
  /// Defaults to n_units * base_rate, so rho = 1 needs no rescaling on average.
  std::optional<double> arrival_rate;
  int buffer_capacity = 0;
};

/// Random demand, unit and node positions in the unit square, preferences by
/// travel time, service rates rescaled so that lambda / sum(nu) == rho.
RawInstance gen_raw_instance(const InstanceGenerator& gen);
ServiceSystem gen_instance(const InstanceGenerator& gen);

struct BenchRecord {
  std::string experiment;
  std::uint64_t instance_seed = 0;
  int n_units = 0;
  int n_nodes = 0;
  double rho = 0.0;
  int capacity = 0;
  std::string method;
  int workers = 0;
  std::size_t batch = 0;  // 0 for whole-layer batches or when not applicable
  double wall_ms = 0.0;
  int iters = 0;
  std::optional<double> mpre_pct;
  std::string notes;
};

bool same_record(const BenchRecord& a, const BenchRecord& b);

inline constexpr const char* kBenchCsvHeader =
    "experiment,instance_seed,N,J,rho,C,method,workers,batch,wall_ms,iters,mpre_pct,notes";

std::string format_csv(const std::vector<BenchRecord>& records);
std::vector<BenchRecord> parse_csv(const std::string& text);

/// One block of the suite: the cross product of sizes, loads, buffers and
/// seeds, each solved by every listed method.
struct Experiment {
  std::string id;
  std::vector<std::string> methods;  // cpu, parallel, oracle, sim
  std::vector<int> n_units;
  int n_nodes = 20;
  std::vector<double> rho;
  std::vector<int> capacity{0};
  std::vector<std::uint64_t> seeds{1};
  double heterogeneity = 0.2;
  std::vector<int> workers{1};
  std::vector<std::size_t> batch{kWholeLayer};
  int repetitions = 3;
  double tolerance = 1e-10;
  std::uint64_t sim_arrivals = 100'000;
  int sim_replications = 5;
};

/// Parses the JSON suite file body: {"experiments": [...]}.
std::vector<Experiment> parse_suite(const std::string& json_text);

struct StoredOutput {
  std::vector<double> probabilities;  // hypercube states then queue tail
  std::vector<double> utilization;
  bool simulated = false;  // compared on utilization only
};

struct SuiteResult {
  std::vector<BenchRecord> records;
  std::vector<StoredOutput> outputs;
  /// Per record: index of the record it is compared against, if any.
  std::vector<std::optional<std::size_t>> reference;
};

SuiteResult run_suite(const std::vector<Experiment>& experiments);

/// Recomputes every mpre_pct from the stored outputs.
void refresh_mpre(SuiteResult& result);

/// Amdahl fit over the parallel rows of one experiment and instance.
AmdahlFit fit_parallel_rows(const std::vector<BenchRecord>& records, const std::string& experiment,
                            std::uint64_t seed, int n_units);

}  // namespace hyperq

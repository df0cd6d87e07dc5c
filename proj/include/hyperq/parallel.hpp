#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <queue>
#include <thread>
#include <utility>
#include <vector>

#include "hyperq/solver.hpp"

namespace hyperq {

/// Fixed pool of worker threads fed from a FIFO task queue. `run` blocks until
/// every submitted task has finished, which is the per-layer barrier.
class ThreadPool {
 public:
  explicit ThreadPool(int workers);
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const noexcept { return static_cast<int>(threads_.size()); }

  /// Runs task(i) for every i in `order`. Rethrows the first failure as
  /// WorkerFailure naming the task index.
  void run(const std::vector<std::size_t>& order, const std::function<void(std::size_t)>& task);

 private:
  void worker_loop();

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable work_ready_;
  std::condition_variable work_done_;
  std::queue<std::size_t> pending_;
  const std::function<void(std::size_t)>* task_ = nullptr;
  std::size_t outstanding_ = 0;
  std::optional<std::pair<std::size_t, std::string>> failure_;
  bool stopping_ = false;
};

struct BatchRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const BatchRange&) const = default;
};

/// Contiguous ranges of size s over layer n (the last may be shorter).
std::vector<BatchRange> partition_layer(int n, int n_units, std::size_t batch_size);

enum class CachePolicy {
  RegenerateEachIteration,
  CacheAfterFirst,
};

inline constexpr std::size_t kWholeLayer = std::numeric_limits<std::size_t>::max();

struct ParallelConfig {
  int workers = 1;
  std::size_t batch_size = kWholeLayer;
  SolverConfig solver;
  CachePolicy cache = CachePolicy::CacheAfterFirst;
  /// Batch coefficients are kept only while their estimated size stays below this.
  std::size_t cache_budget_bytes = kDefaultTransitionBudget;
  /// If set, batches are queued in a seeded random order instead of ascending.
  std::optional<std::uint64_t> shuffle_seed;
  /// Called by the worker before each batch; a throw aborts the solve.
  std::function<void(int layer, std::size_t batch)> on_batch;

  void validate() const;
};

struct TimingReport {
  int workers = 0;
  std::size_t batch_size = 0;
  double first_iteration_seconds = 0.0;
  double total_seconds = 0.0;
  int outer_iterations = 0;
};

struct ParallelResult {
  SolveResult solve;
  TimingReport timing;
};

ParallelResult solve_parallel(const ServiceSystem& sys, const ParallelConfig& cfg);

struct AmdahlFit {
  double parallel_fraction = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double r_squared = 0.0;
};

/// Least squares of total time against 1/q.
AmdahlFit amdahl_fit(const std::vector<std::pair<int, double>>& samples);

}  // namespace hyperq

#include "hyperq/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <set>
#include <string>

namespace hyperq {

ThreadPool::ThreadPool(int workers) {
  if (workers < 1) throw Error(ErrorCode::InvalidSpec, "worker count must be positive");
  threads_.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  work_ready_.notify_all();
  for (auto& t : threads_) t.join();
}

void ThreadPool::run(const std::vector<std::size_t>& order, const std::function<void(std::size_t)>& task) {
  std::unique_lock lock(mutex_);
  task_ = &task;
  failure_.reset();
  for (auto i : order) pending_.push(i);
  outstanding_ = order.size();
  work_ready_.notify_all();
  work_done_.wait(lock, [this] { return outstanding_ == 0; });
  task_ = nullptr;
  if (failure_)
    throw Error(ErrorCode::WorkerFailure, "batch " + std::to_string(failure_->first) + ": " + failure_->second);
}

void ThreadPool::worker_loop() {
  std::unique_lock lock(mutex_);
  for (;;) {
    work_ready_.wait(lock, [this] { return stopping_ || !pending_.empty(); });
    if (pending_.empty()) return;
    const std::size_t index = pending_.front();
    pending_.pop();
    const auto* task = task_;
    const bool skip = failure_.has_value();
    lock.unlock();
    std::optional<std::string> error;
    if (!skip) {
      try {
        (*task)(index);
      } catch (const std::exception& e) {
        error = e.what();
      } catch (...) {
        error = "unknown exception";
      }
    }
    lock.lock();
    if (error && !failure_) failure_.emplace(index, *error);
    if (--outstanding_ == 0) work_done_.notify_all();
  }
}

std::vector<BatchRange> partition_layer(int n, int n_units, std::size_t batch_size) {
  if (batch_size == 0) throw Error(ErrorCode::InvalidSpec, "batch size must be positive");
  const std::size_t size = binomial(n_units, n);
  std::vector<BatchRange> out;
  for (std::size_t begin = 0; begin < size; begin += std::min(batch_size, size - begin))
    out.push_back({begin, begin + std::min(batch_size, size - begin)});
  return out;
}

void ParallelConfig::validate() const {
  if (workers < 1) throw Error(ErrorCode::InvalidSpec, "workers must be positive");
  if (batch_size < 1) throw Error(ErrorCode::InvalidSpec, "batch size must be positive");
  solver.validate();
}

namespace {

struct Batch {
  BatchRange range;
  std::span<const StateIndex> states;
  std::optional<InflowBlock> cached;
  std::vector<double> a, b, mu_m;
  detail::CoefficientPartial coeff;
  detail::FinalizePartial fin;
};

using Clock = std::chrono::steady_clock;

}  // namespace

ParallelResult solve_parallel(const ServiceSystem& sys, const ParallelConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  const int n_units = sys.n_units();
  const SolverConfig& scfg = cfg.solver;

  ParallelResult out{{{}, {}, ConditionalDistribution(n_units), {}}, {}};
  auto& result = out.solve;
  auto& cond = result.conditional;
  auto& trace = result.trace;
  auto& rates = result.rates;
  out.timing.workers = cfg.workers;
  out.timing.batch_size = cfg.batch_size;

  const bool keep = cfg.cache == CachePolicy::CacheAfterFirst &&
                    estimated_transition_bytes(n_units) < cfg.cache_budget_bytes;

  std::vector<std::vector<Batch>> layers(static_cast<std::size_t>(n_units) + 1);
  std::vector<std::vector<std::size_t>> orders(layers.size());
  std::mt19937_64 rng(cfg.shuffle_seed.value_or(0));
  for (int n = 1; n < n_units; ++n) {
    const auto states = cond.layer(n);
    for (auto r : partition_layer(n, n_units, cfg.batch_size)) {
      Batch batch;
      batch.range = r;
      batch.states = states.subspan(r.begin, r.end - r.begin);
      layers[n].push_back(std::move(batch));
    }
    orders[n].resize(layers[n].size());
    for (std::size_t i = 0; i < orders[n].size(); ++i) orders[n][i] = i;
    if (cfg.shuffle_seed) std::shuffle(orders[n].begin(), orders[n].end(), rng);
  }

  rates = layer_rates(cond, sys);
  trace.assumption = check_assumption(sys);

  ThreadPool pool(cfg.workers);
  std::vector<double> layer_sums(static_cast<std::size_t>(n_units) + 1, 1.0);
  for (int sweep = 1; sweep <= scfg.max_outer_iters; ++sweep) {
    double max_abs = 0.0;
    double max_l1 = 0.0;
    std::vector<int> inner(static_cast<std::size_t>(std::max(n_units - 1, 0)), 0);
    for (int n = 1; n < n_units; ++n) {
      auto& batches = layers[n];
      const LayerScalars scalars{rates.lambda[n - 1], rates.lambda[n], rates.mu[n + 1], rates.mu[n]};

      // Phase 1: per-batch coefficients from the neighbour layers.
      pool.run(orders[n], [&](std::size_t i) {
        auto& batch = batches[i];
        if (cfg.on_batch) cfg.on_batch(n, i);
        std::optional<InflowBlock> fresh;
        if (!batch.cached) fresh = make_inflow_block(generate_for_states(sys, batch.states), batch.states);
        const InflowBlock& block = batch.cached ? *batch.cached : *fresh;
        const std::size_t size = batch.states.size();
        batch.a.resize(size);
        batch.b.resize(size);
        batch.mu_m.resize(size);
        batch.coeff = detail::layer_coefficients(sys, batch.states, block.view(), cond.values(), scalars, batch.a,
                                                 batch.b, batch.mu_m);
        if (keep && fresh) batch.cached = std::move(fresh);
      });

      // Phase 2: the master reduces in batch order and solves for mu(n).
      detail::CoefficientPartial total;
      for (const auto& batch : batches) {
        total.sum_mu_a += batch.coeff.sum_mu_a;
        total.sum_mu_b += batch.coeff.sum_mu_b;
        total.max_a = std::max(total.max_a, batch.coeff.max_a);
        total.first_step_change = std::max(total.first_step_change, batch.coeff.first_step_change);
      }
      const auto fp = detail::solve_layer_scalar(total, scalars.mu_start, scfg, n);

      // Phase 3: write the layer.
      pool.run(orders[n], [&](std::size_t i) {
        auto& batch = batches[i];
        batch.fin = detail::finalize_states(sys, batch.states, batch.a, batch.b, batch.mu_m, fp.mu_for_p,
                                            cond.values());
      });

      detail::FinalizePartial fin;
      for (const auto& batch : batches) {
        fin.lambda_sum += batch.fin.lambda_sum;
        fin.mu_sum += batch.fin.mu_sum;
        fin.prob_sum += batch.fin.prob_sum;
        fin.max_abs_change = std::max(fin.max_abs_change, batch.fin.max_abs_change);
        fin.l1_change += batch.fin.l1_change;
      }
      rates.lambda[n] = fin.lambda_sum;
      rates.mu[n] = fin.mu_sum;
      layer_sums[n] = fin.prob_sum;
      max_abs = std::max(max_abs, fin.max_abs_change);
      max_l1 = std::max(max_l1, fin.l1_change);
      inner[n - 1] = fp.iterations;
    }
    if (sweep == 1)
      out.timing.first_iteration_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    trace.sweeps = sweep;
    trace.max_abs_change.push_back(max_abs);
    trace.max_layer_l1.push_back(max_l1);
    trace.inner_iterations.push_back(std::move(inner));
    trace.total_probability.push_back(detail::total_probability(sys, rates, layer_sums));
    if (max_abs <= scfg.tol_outer) {
      trace.converged = true;
      break;
    }
  }

  result.distribution = assemble_distribution(sys, cond, rates);
  out.timing.outer_iterations = trace.sweeps;
  out.timing.total_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

AmdahlFit amdahl_fit(const std::vector<std::pair<int, double>>& samples) {
  std::set<int> distinct;
  for (const auto& s : samples) distinct.insert(s.first);
  if (distinct.size() < 2) throw Error(ErrorCode::InsufficientSamples, "need at least two distinct worker counts");

  const double count = static_cast<double>(samples.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [q, t] : samples) {
    mx += 1.0 / q;
    my += t;
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [q, t] : samples) {
    const double dx = 1.0 / q - mx;
    sxx += dx * dx;
    sxy += dx * (t - my);
    syy += (t - my) * (t - my);
  }
  AmdahlFit fit;
  fit.c1 = sxy / sxx;
  fit.c0 = my - fit.c1 * mx;
  if (!(fit.c1 > 0.0)) throw Error(ErrorCode::NegativeSlope, "time does not fall with more workers");
  fit.parallel_fraction = std::clamp(fit.c1 / (fit.c0 + fit.c1), 0.0, 1.0);
  double ss_res = 0.0;
  for (const auto& [q, t] : samples) {
    const double e = t - (fit.c0 + fit.c1 / q);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

}  // namespace hyperq

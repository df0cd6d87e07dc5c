#include "hyperq/simulator.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <thread>

#include "hyperq/error.hpp"

namespace hyperq {

ServiceDistributionSpec ServiceDistributionSpec::parse(const std::string& text) {
  ServiceDistributionSpec spec;
  if (text == "exp" || text == "exponential") {
    spec.kind = ServiceKind::Exponential;
  } else if (text == "uniform") {
    spec.kind = ServiceKind::Uniform;
  } else if (text == "lognormal") {
    spec.kind = ServiceKind::Lognormal;
  } else if (text.rfind("gamma:", 0) == 0) {
    spec.kind = ServiceKind::Gamma;
    try {
      std::size_t used = 0;
      spec.gamma_shape = std::stod(text.substr(6), &used);
      if (used != text.size() - 6) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidSpec, "bad gamma shape in '" + text + "'");
    }
  } else {
    throw Error(ErrorCode::InvalidSpec, "unknown service distribution '" + text + "'");
  }
  spec.validate();
  return spec;
}

std::string ServiceDistributionSpec::to_string() const {
  switch (kind) {
    case ServiceKind::Exponential: return "exp";
    case ServiceKind::Uniform: return "uniform";
    case ServiceKind::Lognormal: return "lognormal";
    case ServiceKind::Gamma: {
      std::string s = std::to_string(gamma_shape);
      s.erase(s.find_last_not_of('0') + 1);
      if (s.back() == '.') s.pop_back();
      return "gamma:" + s;
    }
  }
  return "exp";
}

void ServiceDistributionSpec::validate() const {
  if (kind == ServiceKind::Gamma && !(gamma_shape > 0.0 && std::isfinite(gamma_shape)))
    throw Error(ErrorCode::InvalidSpec, "gamma shape must be positive");
}

double sample_service(const ServiceDistributionSpec& dist, double nu, std::mt19937_64& rng) {
  switch (dist.kind) {
    case ServiceKind::Exponential: return std::exponential_distribution<double>(nu)(rng);
    case ServiceKind::Uniform: return std::uniform_real_distribution<double>(0.75 / nu, 1.25 / nu)(rng);
    case ServiceKind::Lognormal: return std::lognormal_distribution<double>(-std::log(nu) - 0.5, 1.0)(rng);
    case ServiceKind::Gamma:
      return std::gamma_distribution<double>(dist.gamma_shape, 1.0 / (dist.gamma_shape * nu))(rng);
  }
  return 0.0;
}

double t_half_width(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t t(static_cast<double>(n - 1));
  return boost::math::quantile(boost::math::complement(t, 0.025)) * sd / std::sqrt(static_cast<double>(n));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t replication, std::uint64_t channel) {
  return std::mt19937_64(splitmix64(splitmix64(splitmix64(seed) ^ replication) ^ channel));
}

struct Event {
  double time;
  std::uint64_t seq;
  int unit;  // -1 for an arrival
  bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

ReplicationResult run_replication(const ServiceSystem& sys, const ServiceDistributionSpec& dist,
                                  const SimConfig& cfg, std::uint64_t rep) {
  const int n_units = sys.n_units();
  const std::size_t capacity = static_cast<std::size_t>(sys.buffer_capacity());
  const std::uint64_t hyper = sys.n_states();
  const std::uint64_t warmup =
      static_cast<std::uint64_t>(std::ceil(cfg.warmup_fraction * static_cast<double>(cfg.n_arrivals)));

  auto arrivals = stream(cfg.seed, rep, 0);
  auto nodes = stream(cfg.seed, rep, 1);
  std::vector<std::mt19937_64> service;
  for (int i = 0; i < n_units; ++i) service.push_back(stream(cfg.seed, rep, 2 + static_cast<std::uint64_t>(i)));
  std::exponential_distribution<double> gap(sys.arrival_rate());
  std::discrete_distribution<int> node_pick(sys.demand_fractions().begin(), sys.demand_fractions().end());

  ReplicationResult out;
  out.state_probs.assign(hyper + capacity, 0.0);
  out.dispatches.assign(static_cast<std::size_t>(n_units), 0);
  std::vector<double> busy_time(static_cast<std::size_t>(n_units), 0.0);

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  std::uint64_t seq = 0;
  std::uint32_t state = 0;
  std::size_t queued = 0;
  double now = 0.0;
  double start = 0.0;
  bool counting = warmup == 0;
  std::uint64_t arrived = 0;
  std::uint64_t counted = 0;
  std::uint64_t lost = 0;
  std::uint64_t responded = 0;
  double response_sum = 0.0;

  auto begin_service = [&](int unit) {
    state |= 1u << unit;
    if (counting) ++out.dispatches[unit];
    events.push({now + sample_service(dist, sys.service_rate(unit), service[unit]), seq++, unit});
  };

  events.push({gap(arrivals), seq++, -1});
  while (!events.empty()) {
    const Event ev = events.top();
    events.pop();
    if (counting) {
      const double dt = ev.time - now;
      out.state_probs[queued == 0 ? state : hyper + queued - 1] += dt;
      for (std::uint32_t bits = state; bits != 0; bits &= bits - 1) busy_time[std::countr_zero(bits)] += dt;
    }
    now = ev.time;

    if (ev.unit >= 0) {
      state &= ~(1u << ev.unit);
      if (queued > 0) {
        --queued;
        begin_service(ev.unit);
      }
      continue;
    }

    ++arrived;
    if (!counting && arrived > warmup) {
      counting = true;
      start = now;
    }
    // The horizon closes at the final arrival, before it is served.
    if (arrived == cfg.n_arrivals) break;
    if (counting) ++counted;
    const int node = node_pick(nodes);
    int unit = -1;
    for (auto u : sys.preference(node)) {
      if (!(state >> u & 1u)) {
        unit = u;
        break;
      }
    }
    if (unit >= 0) {
      begin_service(unit);
      if (counting && cfg.response_time) {
        response_sum += sys.travel_time(unit, node);
        ++responded;
      }
    } else if (queued < capacity) {
      ++queued;
    } else if (counting) {
      ++lost;
    }
    events.push({now + gap(arrivals), seq++, -1});
  }

  out.horizon = now - start;
  for (auto& p : out.state_probs) p /= out.horizon;
  out.utilization.resize(busy_time.size());
  for (std::size_t i = 0; i < busy_time.size(); ++i) out.utilization[i] = busy_time[i] / out.horizon;
  out.lost_fraction = counted > 0 ? static_cast<double>(lost) / static_cast<double>(counted) : 0.0;
  out.mean_response_time = responded > 0 ? response_sum / static_cast<double>(responded) : 0.0;
  return out;
}

}  // namespace

SimEstimate simulate(const ServiceSystem& sys, const ServiceDistributionSpec& dist, const SimConfig& cfg) {
  dist.validate();
  if (cfg.n_replications < 1 || cfg.threads < 1)
    throw Error(ErrorCode::InvalidSpec, "replications and threads must be positive");
  if (cfg.n_arrivals < 2 || !(cfg.warmup_fraction >= 0.0 && cfg.warmup_fraction < 1.0))
    throw Error(ErrorCode::InvalidSpec, "need at least two arrivals and a warm-up fraction in [0, 1)");
  if (dist.kind != ServiceKind::Exponential && sys.buffer_capacity() > 0)
    throw Error(ErrorCode::InvalidSpec, "non-exponential service needs a zero-queue system (buffer_capacity = 0)");
  if (cfg.response_time && !sys.has_travel_times())
    throw Error(ErrorCode::MissingTravelTimes, "response times need travel_times");
  if (static_cast<std::uint64_t>(std::ceil(cfg.warmup_fraction * static_cast<double>(cfg.n_arrivals))) >=
      cfg.n_arrivals - 1)
    throw Error(ErrorCode::InvalidSpec, "warm-up leaves no arrivals to observe");

  SimEstimate est;
  const auto reps = static_cast<std::size_t>(cfg.n_replications);
  est.replications.resize(reps);
  const int threads = std::min(cfg.threads, cfg.n_replications);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t r = static_cast<std::size_t>(t); r < reps; r += static_cast<std::size_t>(threads))
          est.replications[r] = run_replication(sys, dist, cfg, r);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  auto summarize = [&](auto pick, double& mean, double& hw) {
    std::vector<double> v;
    for (const auto& r : est.replications) v.push_back(pick(r));
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    hw = t_half_width(v);
  };
  const std::size_t dim = est.replications[0].state_probs.size();
  est.state_probs.resize(dim);
  est.state_half_width.resize(dim);
  for (std::size_t k = 0; k < dim; ++k)
    summarize([k](const ReplicationResult& r) { return r.state_probs[k]; }, est.state_probs[k],
              est.state_half_width[k]);
  const std::size_t units = static_cast<std::size_t>(sys.n_units());
  est.utilization.resize(units);
  est.utilization_half_width.resize(units);
  for (std::size_t i = 0; i < units; ++i)
    summarize([i](const ReplicationResult& r) { return r.utilization[i]; }, est.utilization[i],
              est.utilization_half_width[i]);
  summarize([](const ReplicationResult& r) { return r.lost_fraction; }, est.lost_fraction, est.lost_half_width);
  summarize([](const ReplicationResult& r) { return r.mean_response_time; }, est.mean_response_time,
            est.response_half_width);
  return est;
}

}  // namespace hyperq

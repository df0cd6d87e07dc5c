#include "hyperq/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "hyperq/baseline.hpp"
#include "hyperq/metrics.hpp"
#include "hyperq/simulator.hpp"

namespace hyperq {

RawInstance gen_raw_instance(const InstanceGenerator& gen) {
  if (gen.n_units < 1 || gen.n_nodes < 1 || !(gen.rho > 0.0) || !(gen.heterogeneity >= 0.0) ||
      gen.heterogeneity >= 1.0 || !(gen.base_rate > 0.0) || gen.buffer_capacity < 0)
    throw Error(ErrorCode::InvalidSpec, "generator parameters out of range");
  std::mt19937_64 rng(gen.seed);
  std::uniform_real_distribution<double> unit_interval(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);

  RawInstance raw;
  raw.n_units = gen.n_units;
  raw.n_nodes = gen.n_nodes;
  raw.buffer_capacity = gen.buffer_capacity;

  // Normalized exponentials are uniform on the simplex.
  raw.demand_fractions.resize(static_cast<std::size_t>(gen.n_nodes));
  for (auto& f : raw.demand_fractions) f = expo(rng);
  const double mass = std::accumulate(raw.demand_fractions.begin(), raw.demand_fractions.end(), 0.0);
  for (auto& f : raw.demand_fractions) f /= mass;

  std::vector<std::pair<double, double>> units(static_cast<std::size_t>(gen.n_units));
  std::vector<std::pair<double, double>> nodes(static_cast<std::size_t>(gen.n_nodes));
  for (auto& p : units) p = {unit_interval(rng), unit_interval(rng)};
  for (auto& p : nodes) p = {unit_interval(rng), unit_interval(rng)};
  raw.travel_times.emplace(units.size(), std::vector<double>(nodes.size()));
  for (std::size_t i = 0; i < units.size(); ++i)
    for (std::size_t j = 0; j < nodes.size(); ++j)
      (*raw.travel_times)[i][j] = std::hypot(units[i].first - nodes[j].first, units[i].second - nodes[j].second);

  for (std::size_t j = 0; j < nodes.size(); ++j) {
    std::vector<int> order(units.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return (*raw.travel_times)[a][j] < (*raw.travel_times)[b][j];
    });
    for (auto& u : order) ++u;
    raw.preferences.push_back(std::move(order));
  }

  std::uniform_real_distribution<double> perturb(-gen.heterogeneity, gen.heterogeneity);
  raw.service_rates.resize(units.size());
  for (auto& nu : raw.service_rates) nu = gen.base_rate * (1.0 + (gen.heterogeneity > 0.0 ? perturb(rng) : 0.0));
  raw.arrival_rate = gen.arrival_rate.value_or(gen.n_units * gen.base_rate);
  const double total = std::accumulate(raw.service_rates.begin(), raw.service_rates.end(), 0.0);
  const double scale = raw.arrival_rate / (gen.rho * total);
  for (auto& nu : raw.service_rates) nu *= scale;
  return raw;
}

ServiceSystem gen_instance(const InstanceGenerator& gen) { return ServiceSystem::validate(gen_raw_instance(gen)); }

namespace {

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s.empty()) return std::nan("");
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::ParseError, "bad number '" + s + "'");
  return x;
}

template <class T>
T parse_integer(const std::string& s) {
  T x{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::ParseError, "bad integer '" + s + "'");
  return x;
}

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::ParseError, "unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

bool same_record(const BenchRecord& a, const BenchRecord& b) {
  return a.experiment == b.experiment && a.instance_seed == b.instance_seed && a.n_units == b.n_units &&
         a.n_nodes == b.n_nodes && same_double(a.rho, b.rho) && a.capacity == b.capacity && a.method == b.method &&
         a.workers == b.workers && a.batch == b.batch && same_double(a.wall_ms, b.wall_ms) && a.iters == b.iters &&
         a.mpre_pct.has_value() == b.mpre_pct.has_value() &&
         (!a.mpre_pct || same_double(*a.mpre_pct, *b.mpre_pct)) && a.notes == b.notes;
}

std::string format_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream out;
  out << kBenchCsvHeader << '\n';
  for (const auto& r : records) {
    out << quote(r.experiment) << ',' << r.instance_seed << ',' << r.n_units << ',' << r.n_nodes << ','
        << format_double(r.rho) << ',' << r.capacity << ',' << quote(r.method) << ',' << r.workers << ','
        << r.batch << ',' << format_double(r.wall_ms) << ',' << r.iters << ','
        << (r.mpre_pct ? format_double(*r.mpre_pct) : std::string("")) << ',' << quote(r.notes) << '\n';
  }
  return out.str();
}

std::vector<BenchRecord> parse_csv(const std::string& text) {
  const auto rows = split_csv(text);
  if (rows.empty()) throw Error(ErrorCode::ParseError, "missing CSV header");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kBenchCsvHeader) throw Error(ErrorCode::ParseError, "unexpected CSV header");
  std::vector<BenchRecord> out;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& f = rows[k];
    if (f.size() != 13) throw Error(ErrorCode::ParseError, "row " + std::to_string(k) + " has " +
                                                               std::to_string(f.size()) + " fields");
    BenchRecord r;
    r.experiment = f[0];
    r.instance_seed = parse_integer<std::uint64_t>(f[1]);
    r.n_units = parse_integer<int>(f[2]);
    r.n_nodes = parse_integer<int>(f[3]);
    r.rho = parse_double(f[4]);
    r.capacity = parse_integer<int>(f[5]);
    r.method = f[6];
    r.workers = parse_integer<int>(f[7]);
    r.batch = parse_integer<std::size_t>(f[8]);
    r.wall_ms = parse_double(f[9]);
    r.iters = parse_integer<int>(f[10]);
    if (!f[11].empty()) r.mpre_pct = parse_double(f[11]);
    r.notes = f[12];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Experiment> parse_suite(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  std::vector<Experiment> out;
  try {
    for (const auto& e : doc.at("experiments")) {
      Experiment x;
      x.id = e.at("id").get<std::string>();
      x.methods = e.at("methods").get<std::vector<std::string>>();
      x.n_units = e.at("N").get<std::vector<int>>();
      x.rho = e.at("rho").get<std::vector<double>>();
      x.n_nodes = e.value("J", x.n_nodes);
      x.capacity = e.value("C", x.capacity);
      x.seeds = e.value("seeds", x.seeds);
      x.heterogeneity = e.value("h", x.heterogeneity);
      x.workers = e.value("workers", x.workers);
      if (e.contains("batch")) {
        x.batch.clear();
        for (const auto& b : e.at("batch"))
          x.batch.push_back(b.is_string() && b.get<std::string>() == "layer" ? kWholeLayer : b.get<std::size_t>());
      }
      x.repetitions = e.value("repetitions", x.repetitions);
      x.tolerance = e.value("tolerance", x.tolerance);
      x.sim_arrivals = e.value("sim_arrivals", x.sim_arrivals);
      x.sim_replications = e.value("sim_replications", x.sim_replications);
      for (const auto& m : x.methods)
        if (m != "cpu" && m != "parallel" && m != "oracle" && m != "sim")
          throw Error(ErrorCode::InvalidSpec, "unknown method '" + m + "'");
      if (x.repetitions < 1) throw Error(ErrorCode::InvalidSpec, "repetitions must be positive");
      out.push_back(std::move(x));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double median_ms(int repetitions, F&& run) {
  std::vector<double> times;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = Clock::now();
    run();
    times.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  return n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

std::vector<double> with_tail(const SteadyStateDistribution& d) {
  auto v = d.state_probs;
  v.insert(v.end(), d.queue_tail.begin(), d.queue_tail.end());
  return v;
}

std::string savings_note(double base_ms, double ms) {
  return "savings_vs_oracle_pct=" + format_double((base_ms - ms) / base_ms * 100.0);
}

}  // namespace

void refresh_mpre(SuiteResult& result) {
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    auto& rec = result.records[i];
    rec.mpre_pct.reset();
    if (!result.reference[i]) continue;
    const auto& ref = result.outputs[*result.reference[i]];
    const auto& out = result.outputs[i];
    try {
      rec.mpre_pct = out.simulated ? mpre(ref.utilization, out.utilization) : mpre(ref.probabilities, out.probabilities);
    } catch (const Error&) {
    }
  }
}

SuiteResult run_suite(const std::vector<Experiment>& experiments) {
  SuiteResult res;
  auto push = [&](BenchRecord rec, StoredOutput out) {
    res.records.push_back(std::move(rec));
    res.outputs.push_back(std::move(out));
    res.reference.emplace_back();
    return res.records.size() - 1;
  };

  for (const auto& ex : experiments) {
    for (int n : ex.n_units)
      for (double rho : ex.rho)
        for (int cap : ex.capacity)
          for (std::uint64_t seed : ex.seeds) {
            BenchRecord base;
            base.experiment = ex.id;
            base.instance_seed = seed;
            base.n_units = n;
            base.n_nodes = ex.n_nodes;
            base.rho = rho;
            base.capacity = cap;

            std::optional<ServiceSystem> sys;
            try {
              InstanceGenerator gen;
              gen.n_units = n;
              gen.n_nodes = ex.n_nodes;
              gen.rho = rho;
              gen.heterogeneity = ex.heterogeneity;
              gen.seed = seed;
              gen.buffer_capacity = cap;
              sys = gen_instance(gen);
            } catch (const std::exception& e) {
              BenchRecord rec = base;
              rec.method = "gen";
              rec.wall_ms = std::nan("");
              rec.notes = std::string("error: ") + e.what();
              push(rec, {});
              continue;
            }

            SolverConfig scfg;
            scfg.tol_outer = ex.tolerance;
            scfg.tol_inner = ex.tolerance / 10.0;
            std::optional<std::size_t> oracle_row;
            std::optional<std::size_t> cpu_row;
            std::vector<std::size_t> compared;

            auto fail = [&](BenchRecord rec, const std::exception& e) {
              rec.wall_ms = std::nan("");
              rec.notes = std::string("error: ") + e.what();
              push(rec, {});
            };

            // The oracle goes first so later rows can quote time savings.
            std::vector<std::string> order = ex.methods;
            std::stable_partition(order.begin(), order.end(), [](const std::string& m) { return m == "oracle"; });
            for (const auto& method : order) {
              if (method == "oracle") {
                BenchRecord rec = base;
                rec.method = method;
                rec.workers = 1;
                try {
                  SteadyStateDistribution d;
                  rec.wall_ms = median_ms(ex.repetitions, [&] { d = solve_direct(*sys); });
                  oracle_row = push(rec, {with_tail(d), utilization(d, *sys), false});
                } catch (const std::exception& e) {
                  fail(rec, e);
                }
              } else if (method == "cpu") {
                BenchRecord rec = base;
                rec.method = method;
                rec.workers = 1;
                try {
                  std::optional<SolveResult> r;
                  rec.wall_ms = median_ms(ex.repetitions, [&] { r.emplace(solve(*sys, scfg)); });
                  rec.iters = r->trace.sweeps;
                  if (!r->trace.converged) rec.notes = "not converged";
                  cpu_row = push(rec, {with_tail(r->distribution), utilization(r->distribution, *sys), false});
                  compared.push_back(*cpu_row);
                } catch (const std::exception& e) {
                  fail(rec, e);
                }
              } else if (method == "parallel") {
                for (int q : ex.workers)
                  for (std::size_t s : ex.batch) {
                    BenchRecord rec = base;
                    rec.method = method;
                    rec.workers = q;
                    rec.batch = s == kWholeLayer ? 0 : s;
                    try {
                      ParallelConfig pcfg;
                      pcfg.workers = q;
                      pcfg.batch_size = s;
                      pcfg.solver = scfg;
                      std::optional<ParallelResult> r;
                      rec.wall_ms = median_ms(ex.repetitions, [&] { r.emplace(solve_parallel(*sys, pcfg)); });
                      rec.iters = r->solve.trace.sweeps;
                      rec.notes = "first_iteration_ms=" + format_double(r->timing.first_iteration_seconds * 1e3);
                      if (!r->solve.trace.converged) rec.notes += "; not converged";
                      compared.push_back(push(rec, {with_tail(r->solve.distribution),
                                                    utilization(r->solve.distribution, *sys), false}));
                    } catch (const std::exception& e) {
                      fail(rec, e);
                    }
                  }
              } else if (method == "sim") {
                BenchRecord rec = base;
                rec.method = method;
                rec.workers = 1;
                try {
                  SimConfig cfg;
                  cfg.n_arrivals = ex.sim_arrivals;
                  cfg.n_replications = ex.sim_replications;
                  cfg.seed = seed;
                  SimEstimate est;
                  rec.wall_ms = median_ms(1, [&] { est = simulate(*sys, ServiceDistributionSpec{}, cfg); });
                  rec.notes = "utilization";
                  compared.push_back(push(rec, {est.state_probs, est.utilization, true}));
                } catch (const std::exception& e) {
                  fail(rec, e);
                }
              }
            }

            for (std::size_t row : compared) {
              if (res.outputs[row].simulated) {
                res.reference[row] = oracle_row ? oracle_row : cpu_row;
                if (res.reference[row] == cpu_row && cpu_row) res.records[row].notes += " vs cpu";
              } else {
                res.reference[row] = oracle_row;
              }
              if (oracle_row && !res.outputs[row].simulated) {
                auto& notes = res.records[row].notes;
                const auto note = savings_note(res.records[*oracle_row].wall_ms, res.records[row].wall_ms);
                notes = notes.empty() ? note : notes + "; " + note;
              }
            }
          }
  }
  refresh_mpre(res);
  return res;
}

AmdahlFit fit_parallel_rows(const std::vector<BenchRecord>& records, const std::string& experiment,
                            std::uint64_t seed, int n_units) {
  std::vector<std::pair<int, double>> samples;
  for (const auto& r : records)
    if (r.experiment == experiment && r.method == "parallel" && r.instance_seed == seed && r.n_units == n_units &&
        std::isfinite(r.wall_ms))
      samples.emplace_back(r.workers, r.wall_ms / 1e3);
  return amdahl_fit(samples);
}

}  // namespace hyperq

#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include "hyperq/baseline.hpp"
#include "hyperq/bench.hpp"
#include "hyperq/metrics.hpp"
#include "hyperq/parallel.hpp"
#include "hyperq/simulator.hpp"
#include "instance_io.hpp"

namespace hyperq::cli {

namespace {

using Json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

int default_workers() {
  if (const char* env = std::getenv("HYPERQ_THREADS")) {
    try {
      const int q = std::stoi(env);
      if (q >= 1) return q;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPermutationPreference:
    case ErrorCode::FractionsNotNormalized:
    case ErrorCode::NonPositiveRate:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::StateSpaceTooLarge:
    case ErrorCode::InvalidSpec:
    case ErrorCode::ParseError:
    case ErrorCode::MissingTravelTimes:
      return true;
    default:
      return false;
  }
}

ServiceSystem load_system(const std::string& path, bool lenient, std::ostream& err) {
  auto parsed = read_instance_file(path, lenient);
  for (const auto& key : parsed.unknown_keys) err << "warning: ignoring unknown key '" << key << "'\n";
  return ServiceSystem::validate(parsed.raw);
}

void emit(const Json& doc, const std::string& output, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (output.empty() || output == "-")
    out << text;
  else
    write_text_file(output, text);
}

Json sparse_probs(const std::vector<double>& probs, double threshold, bool full) {
  Json o = Json::object();
  for (std::size_t v = 0; v < probs.size(); ++v)
    if (full || probs[v] > threshold) o[std::to_string(v)] = probs[v];
  return o;
}

Json metrics_block(const SteadyStateDistribution& dist, const ServiceSystem& sys,
                   const std::vector<double>& thresholds) {
  Json m;
  m["utilization"] = utilization(dist, sys);
  m["system_utilization"] = sys.arrival_rate() / sys.total_service_rate();
  m["blocking"] = dist.saturation;
  try {
    const auto df = dispatch_fractions(dist, sys);
    m["dispatch_fractions"] = df.fraction;
    if (sys.has_travel_times()) {
      m["mean_response_time"] = mean_response_time(df, sys);
      Json cov = Json::array();
      for (double t : thresholds) cov.push_back({{"threshold", t}, {"fraction", coverage(df, sys, t)}});
      m["coverage"] = cov;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SaturatedSystem) throw;
    m["dispatch_fractions"] = nullptr;
  }
  return m;
}

std::string csv_dump(const SteadyStateDistribution& dist) {
  std::ostringstream out;
  out << "kind,index,busy_units,probability\n";
  for (std::size_t v = 0; v < dist.state_probs.size(); ++v) {
    out << "state," << v << ',';
    bool first = true;
    for (int i = 0; i < dist.n_units; ++i)
      if ((v >> i) & 1u) {
        out << (first ? "" : " ") << i + 1;
        first = false;
      }
    out << ',' << format_double(dist.state_probs[v]) << '\n';
  }
  for (std::size_t c = 0; c < dist.queue_tail.size(); ++c)
    out << "queue," << c + 1 << ",all," << format_double(dist.queue_tail[c]) << '\n';
  return out.str();
}

std::vector<double> with_tail(const SteadyStateDistribution& d) {
  auto v = d.state_probs;
  v.insert(v.end(), d.queue_tail.begin(), d.queue_tail.end());
  return v;
}

struct SolveOptions {
  std::string instance;
  std::string output;
  bool parallel = false;
  int workers = 1;
  std::size_t batch_size = kWholeLayer;
  double tol_outer = 1e-9;
  double tol_inner = 1e-10;
  int max_outer = 10'000;
  std::string inner_mode = "iterative";
  std::optional<int> buffer;
  bool oracle = false;
  double oracle_tol = 1e-6;
  std::string csv;
  bool full = false;
  double threshold = 1e-12;
  std::vector<double> coverage;
  bool lenient = false;
};

int cmd_solve(const SolveOptions& o, std::ostream& out, std::ostream& err) {
  auto sys = load_system(o.instance, o.lenient, err);
  if (o.buffer) sys = sys.with_buffer(*o.buffer);

  SolverConfig cfg;
  cfg.tol_outer = o.tol_outer;
  cfg.tol_inner = o.tol_inner;
  cfg.max_outer_iters = o.max_outer;
  cfg.inner_mode = o.inner_mode == "closed-form" ? InnerMode::ClosedForm : InnerMode::Iterative;

  std::optional<SolveResult> result;
  std::optional<TimingReport> timing;
  if (o.parallel) {
    ParallelConfig pcfg;
    pcfg.workers = o.workers;
    pcfg.batch_size = o.batch_size;
    pcfg.solver = cfg;
    auto par = solve_parallel(sys, pcfg);
    result.emplace(std::move(par.solve));
    timing = par.timing;
  } else {
    result.emplace(solve(sys, cfg));
  }
  const auto& dist = result->distribution;
  const auto& trace = result->trace;

  Json doc;
  doc["format"] = "hyperq-result";
  doc["version"] = kFormatVersion;
  doc["n_units"] = sys.n_units();
  doc["buffer_capacity"] = sys.buffer_capacity();
  doc["print_threshold"] = o.full ? 0.0 : o.threshold;
  doc["state_probabilities"] = sparse_probs(dist.state_probs, o.threshold, o.full);
  doc["queue_tail"] = dist.queue_tail;
  doc["layer_marginals"] = dist.profile.p_n;
  doc["metrics"] = metrics_block(dist, sys, o.coverage);
  Json conv;
  conv["iterations"] = trace.sweeps;
  conv["converged"] = trace.converged;
  conv["M_k"] = trace.max_layer_l1;
  conv["phi_max"] = trace.assumption.phi_max;
  conv["assumption_ok"] = trace.assumption.ok;
  doc["convergence"] = conv;
  if (timing) {
    doc["timing"] = {{"workers", timing->workers},
                     {"batch_size", timing->batch_size == kWholeLayer ? Json("layer") : Json(timing->batch_size)},
                     {"first_iteration_seconds", timing->first_iteration_seconds},
                     {"total_seconds", timing->total_seconds}};
  }

  bool mismatch = false;
  if (o.oracle) {
    const auto exact = solve_direct(sys);
    const auto m = mpre_detailed(with_tail(exact), with_tail(dist));
    mismatch = m.percent > o.oracle_tol;
    doc["oracle"] = {{"mpre_pct", m.percent}, {"tolerance_pct", o.oracle_tol}, {"excluded", m.excluded},
                     {"ok", !mismatch}};
  }

  if (!o.csv.empty()) write_text_file(o.csv, csv_dump(dist));
  emit(doc, o.output, out);

  if (!trace.converged) {
    err << "error: not converged after " << trace.sweeps << " sweeps\n";
    return kExitNotConverged;
  }
  if (mismatch) {
    err << "error: oracle mismatch, mpre " << doc["oracle"]["mpre_pct"].get<double>() << "% exceeds "
        << o.oracle_tol << "%\n";
    return kExitOracleMismatch;
  }
  return kExitOk;
}

struct SimulateOptions {
  std::string instance;
  std::string output;
  std::string dist = "exp";
  std::uint64_t arrivals = 1'000'000;
  int reps = 20;
  std::uint64_t seed = 1;
  double warmup = 0.01;
  int threads = 1;
  bool response_time = false;
  bool lenient = false;
  double threshold = 1e-12;
  bool full = false;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  const auto sys = load_system(o.instance, o.lenient, err);
  const auto spec = ServiceDistributionSpec::parse(o.dist);
  SimConfig cfg;
  cfg.n_arrivals = o.arrivals;
  cfg.n_replications = o.reps;
  cfg.seed = o.seed;
  cfg.warmup_fraction = o.warmup;
  cfg.threads = o.threads;
  cfg.response_time = o.response_time;
  const auto est = simulate(sys, spec, cfg);

  auto nan_to_null = [](double x) { return std::isnan(x) ? Json(nullptr) : Json(x); };
  auto vec = [&](const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(nan_to_null(x));
    return a;
  };

  Json doc;
  doc["format"] = "hyperq-simulation";
  doc["version"] = kFormatVersion;
  doc["distribution"] = spec.to_string();
  doc["arrivals"] = o.arrivals;
  doc["replications"] = o.reps;
  doc["seed"] = o.seed;
  doc["warmup_fraction"] = o.warmup;
  doc["print_threshold"] = o.full ? 0.0 : o.threshold;
  doc["state_probabilities"] = sparse_probs(est.state_probs, o.threshold, o.full);
  doc["state_half_width"] = vec(est.state_half_width);
  doc["utilization"] = est.utilization;
  doc["utilization_half_width"] = vec(est.utilization_half_width);
  doc["lost_fraction"] = est.lost_fraction;
  doc["lost_half_width"] = nan_to_null(est.lost_half_width);
  if (o.response_time) {
    doc["mean_response_time"] = est.mean_response_time;
    doc["response_half_width"] = nan_to_null(est.response_half_width);
  }
  if (spec.kind == ServiceKind::Exponential || sys.buffer_capacity() == 0) {
    const auto analytic = solve(sys);
    const auto rho = utilization(analytic.distribution, sys);
    double mean_pct = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) mean_pct += std::abs((rho[i] - est.utilization[i]) / rho[i]) * 100.0;
    doc["analytic"] = {{"utilization", rho},
                       {"utilization_mpre_pct", mpre(rho, est.utilization)},
                       {"utilization_mean_pct", mean_pct / static_cast<double>(rho.size())}};
  }
  emit(doc, o.output, out);
  return kExitOk;
}

struct GenOptions {
  InstanceGenerator gen;
  double arrival_rate = 0.0;
  std::string output;
};

int cmd_gen(const GenOptions& o, std::ostream& out) {
  auto gen = o.gen;
  if (o.arrival_rate > 0.0) gen.arrival_rate = o.arrival_rate;
  const auto raw = gen_raw_instance(gen);
  ServiceSystem::validate(raw);
  nlohmann::json meta;
  meta["generator"] = {{"n_units", gen.n_units},      {"n_nodes", gen.n_nodes},
                       {"rho", gen.rho},              {"heterogeneity", gen.heterogeneity},
                       {"seed", gen.seed},            {"base_rate", gen.base_rate},
                       {"arrival_rate", raw.arrival_rate}};
  const std::string text = instance_to_json(raw, meta).dump(2) + "\n";
  if (o.output.empty() || o.output == "-")
    out << text;
  else
    write_text_file(o.output, text);
  return kExitOk;
}

int cmd_check(const std::string& path, bool lenient, bool json, std::ostream& out, std::ostream& err) {
  const auto sys = load_system(path, lenient, err);
  const auto chk = check_assumption(sys);
  if (json) {
    Json doc;
    doc["phi"] = std::vector<double>(chk.phi.begin() + 1, chk.phi.end());
    doc["phi_max"] = chk.phi_max;
    doc["ok"] = chk.ok;
    out << doc.dump(2) << "\n";
  } else {
    for (int n = 1; n <= sys.n_units(); ++n) out << "phi_" << n << " = " << format_double(chk.phi[n]) << "\n";
    out << "phi_max = " << format_double(chk.phi_max) << "\n";
    out << (chk.ok ? "ok" : "violated") << "\n";
  }
  return kExitOk;
}

int cmd_bench(const std::string& suite_path, const std::string& output, std::ostream& out, std::ostream& err) {
  const auto suite = parse_suite(read_text_file(suite_path));
  const auto res = run_suite(suite);
  const std::string csv = format_csv(res.records);
  if (output.empty() || output == "-")
    out << csv;
  else
    write_text_file(output, csv);

  // Amdahl fits wherever an instance ran with several worker counts.
  for (const auto& ex : suite) {
    if (std::find(ex.methods.begin(), ex.methods.end(), "parallel") == ex.methods.end() || ex.workers.size() < 2)
      continue;
    for (int n : ex.n_units)
      for (auto seed : ex.seeds) {
        try {
          const auto fit = fit_parallel_rows(res.records, ex.id, seed, n);
          err << "amdahl " << ex.id << " N=" << n << " seed=" << seed << ": P=" << fit.parallel_fraction
              << " c0=" << fit.c0 << " c1=" << fit.c1 << " R2=" << fit.r_squared << "\n";
        } catch (const Error& e) {
          err << "amdahl " << ex.id << " N=" << n << " seed=" << seed << ": " << e.what() << "\n";
        }
      }
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hypercube queueing solver"};
  app.name("hyperq");
  app.require_subcommand(1);

  SolveOptions so;
  so.workers = default_workers();
  std::string batch_text = "layer";
  auto* solve_cmd = app.add_subcommand("solve", "Stationary distribution of an instance");
  solve_cmd->add_option("instance", so.instance, "Instance JSON file")->required();
  solve_cmd->add_option("-o,--output", so.output, "Result JSON path (default stdout)");
  solve_cmd->add_flag("--parallel", so.parallel, "Use the master/worker solver");
  solve_cmd->add_option("--workers", so.workers, "Worker threads (default HYPERQ_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  solve_cmd->add_option("--batch-size", batch_text, "States per batch, or 'layer'");
  solve_cmd->add_option("--tol-outer", so.tol_outer, "Outer tolerance")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--tol-inner", so.tol_inner, "Inner tolerance")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--max-outer", so.max_outer, "Sweep limit before giving up")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--inner-mode", so.inner_mode, "iterative or closed-form")
      ->check(CLI::IsMember({"iterative", "closed-form"}));
  solve_cmd->add_option("--buffer", so.buffer, "Override buffer_capacity")->check(CLI::NonNegativeNumber);
  solve_cmd->add_flag("--oracle", so.oracle, "Cross-check against the direct solve");
  solve_cmd->add_option("--oracle-tol", so.oracle_tol, "Largest accepted oracle MPRE in percent");
  solve_cmd->add_option("--csv", so.csv, "Write the full distribution as CSV");
  solve_cmd->add_flag("--full", so.full, "Print every state probability");
  solve_cmd->add_option("--threshold", so.threshold, "Print threshold for state probabilities");
  solve_cmd->add_option("--coverage", so.coverage, "Coverage thresholds on travel time");
  solve_cmd->add_flag("--lenient", so.lenient, "Warn about unknown instance keys instead of failing");

  SimulateOptions sim;
  sim.threads = default_workers();
  auto* sim_cmd = app.add_subcommand("simulate", "Discrete-event simulation of an instance");
  sim_cmd->add_option("instance", sim.instance, "Instance JSON file")->required();
  sim_cmd->add_option("-o,--output", sim.output, "Estimate JSON path (default stdout)");
  sim_cmd->add_option("--dist", sim.dist, "exp, uniform, lognormal or gamma:<alpha>");
  sim_cmd->add_option("--arrivals", sim.arrivals, "Arrivals per replication");
  sim_cmd->add_option("--reps", sim.reps, "Replications")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed, "Random seed");
  sim_cmd->add_option("--warmup", sim.warmup, "Share of arrivals discarded as warm-up");
  sim_cmd->add_option("--threads", sim.threads, "Threads for replications")->check(CLI::PositiveNumber);
  sim_cmd->add_flag("--response-time", sim.response_time, "Estimate mean response time (needs travel_times)");
  sim_cmd->add_option("--threshold", sim.threshold, "Print threshold for state probabilities");
  sim_cmd->add_flag("--full", sim.full, "Print every state probability");
  sim_cmd->add_flag("--lenient", sim.lenient, "Warn about unknown instance keys instead of failing");

  GenOptions go;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a random instance");
  gen_cmd->add_option("--units", go.gen.n_units, "Units N")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--nodes", go.gen.n_nodes, "Demand nodes J")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--rho", go.gen.rho, "System utilization lambda / sum(nu)");
  gen_cmd->add_option("--heterogeneity", go.gen.heterogeneity, "Rate perturbation half-width h");
  gen_cmd->add_option("--seed", go.gen.seed, "Random seed");
  gen_cmd->add_option("--base-rate", go.gen.base_rate, "Service rate before perturbation");
  gen_cmd->add_option("--arrival-rate", go.arrival_rate, "Arrival rate (default N * base rate)");
  gen_cmd->add_option("--buffer", go.gen.buffer_capacity, "Buffer capacity C");
  gen_cmd->add_option("-o,--output", go.output, "Instance path (default stdout)");

  std::string check_path;
  bool check_lenient = false;
  bool check_json = false;
  auto* check_cmd = app.add_subcommand("check-assumption", "Per-layer contraction bounds");
  check_cmd->add_option("instance", check_path, "Instance JSON file")->required();
  check_cmd->add_flag("--json", check_json, "JSON output");
  check_cmd->add_flag("--lenient", check_lenient, "Warn about unknown instance keys instead of failing");

  std::string suite_path;
  std::string bench_output;
  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark suite");
  bench_cmd->add_option("suite", suite_path, "Suite JSON file")->required();
  bench_cmd->add_option("-o,--output", bench_output, "CSV path (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    if (*solve_cmd) {
      if (batch_text != "layer") {
        try {
          std::size_t used = 0;
          const long long s = std::stoll(batch_text, &used);
          if (used != batch_text.size() || s < 1) throw std::invalid_argument("");
          so.batch_size = static_cast<std::size_t>(s);
        } catch (const std::exception&) {
          throw Error(ErrorCode::InvalidSpec, "--batch-size must be a positive integer or 'layer'");
        }
      }
      return cmd_solve(so, out, err);
    }
    if (*sim_cmd) return cmd_simulate(sim, out, err);
    if (*gen_cmd) return cmd_gen(go, out);
    if (*check_cmd) return cmd_check(check_path, check_lenient, check_json, out, err);
    if (*bench_cmd) return cmd_bench(suite_path, bench_output, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kExitInvalid : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace hyperq::cli

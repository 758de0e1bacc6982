#include "dobs/harness.hpp"

#include "dobs/error.hpp"
#include "dobs/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <ostream>
#include <random>
#include <string>
#include <thread>

namespace dobs {
namespace {

using json = nlohmann::json;

std::string estimator_file(EstimatorKind k) {
  return std::string(to_string(k)) + ".dat";
}

json validation_json(const ValidationReport& report) {
  return {{"collective_detectability", report.collective_detectability},
          {"per_node_observability", report.per_node_observability},
          {"strongly_connected", report.strongly_connected},
          {"warnings", report.warnings}};
}

ValidationReport validate_or_throw(const NetworkModel& model) {
  ValidationReport report = validate(model);
  if (!report.collective_detectability) {
    throw Error(ErrorKind::InvalidArgument,
                "scenario is not collectively detectable: (A, col(C^i)) fails "
                "the PBH test");
  }
  return report;
}

int fail(const Error& e, std::ostream& err) {
  err << error_json(e) << "\n";
  return exit_code_for(e);
}

}  // namespace

int exit_code_for(const Error& error) {
  switch (error.kind()) {
    case ErrorKind::MaxIterationsExceeded:
    case ErrorKind::Diverged:
      return exit_code::not_converged;
    case ErrorKind::SingularInformation:
      return exit_code::singular_information;
    case ErrorKind::DimensionMismatch:
    case ErrorKind::NotPositiveDefinite:
    case ErrorKind::RankDeficient:
    case ErrorKind::InvalidArgument:
    case ErrorKind::UnknownEstimator:
    case ErrorKind::Parse:
    case ErrorKind::Io:
      return exit_code::invalid_input;
  }
  return exit_code::failure;
}

std::string error_json(const Error& error) {
  json doc{{"error", std::string(to_string(error.kind()))},
           {"message", error.what()},
           {"exit_code", exit_code_for(error)}};
  if (error.node()) doc["node"] = *error.node() + 1;
  if (error.value()) doc["value"] = *error.value();
  return doc.dump();
}

McAggregate aggregate_runs(const std::vector<McRun>& rows) {
  McAggregate agg;
  agg.runs = static_cast<int>(rows.size());
  std::vector<int> iters;
  for (const auto& r : rows) {
    if (r.converged) iters.push_back(r.iterations);
  }
  agg.converged = static_cast<int>(iters.size());
  if (iters.empty()) return agg;
  std::sort(iters.begin(), iters.end());
  agg.min_iterations = iters.front();
  agg.max_iterations = iters.back();
  double sum = 0.0;
  for (int k : iters) sum += k;
  agg.mean_iterations = sum / static_cast<double>(iters.size());
  const std::size_t mid = iters.size() / 2;
  agg.median_iterations = iters.size() % 2 == 1
                              ? iters[mid]
                              : 0.5 * (iters[mid - 1] + iters[mid]);
  return agg;
}

NetworkModel perturb_measurements(const NetworkModel& model,
                                  std::uint64_t seed, std::uint64_t run) {
  auto engine = substream(seed, Stream::MonteCarlo, run);
  std::uniform_real_distribution<double> factor(0.5, 1.5);
  std::vector<SensorSpec> nodes = model.nodes();
  for (auto& s : nodes) {
    for (Eigen::Index r = 0; r < s.C.rows(); ++r) {
      for (Eigen::Index c = 0; c < s.C.cols(); ++c) {
        if (s.C(r, c) != 0.0) s.C(r, c) *= factor(engine);
      }
    }
  }
  return NetworkModel(model.A(), model.Q(), std::move(nodes), model.edges());
}

unsigned worker_count() {
  unsigned requested = 0;
  if (const char* env = std::getenv("DOBS_THREADS")) {
    requested = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
  }
  if (requested == 0) requested = std::thread::hardware_concurrency();
  return std::max(1u, requested);
}

McReport monte_carlo_convergence(const Scenario& scenario,
                                 const RunConfig& config) {
  if (config.runs < 1) {
    throw Error(ErrorKind::InvalidArgument, "runs must be >= 1");
  }
  SynthesisConfig synth;
  synth.epsilon = config.epsilon;
  synth.max_iterations = config.max_iter;
  synth.prior_mode = config.prior_mode;
  synth.P0 = scenario.P0;
  synth.numeric.ridge = config.ridge;

  McReport report;
  report.rows.resize(static_cast<std::size_t>(config.runs));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < config.runs; r = next++) {
      McRun& row = report.rows[static_cast<std::size_t>(r)];
      row.run = r;
      try {
        const NetworkModel model =
            config.perturb ? perturb_measurements(scenario.model, config.seed,
                                                  static_cast<std::uint64_t>(r))
                           : scenario.model;
        const FixedPointResult fp = iterate_to_fixed_point(model, synth);
        row.converged = true;
        row.iterations = fp.iterations;
        row.final_delta = fp.final_delta;
      } catch (const Error& e) {
        row.converged = false;
        row.error = e.what();
        row.final_delta = e.value().value_or(0.0);
      }
    }
  };
  const unsigned workers =
      std::min(worker_count(), static_cast<unsigned>(config.runs));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  report.aggregate = aggregate_runs(report.rows);
  return report;
}

std::string mc_report_json(const McReport& report, const RunConfig& config) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row{{"run", r.run},
             {"converged", r.converged},
             {"iterations", r.iterations},
             {"final_delta", r.final_delta}};
    if (!r.error.empty()) row["error"] = r.error;
    rows.push_back(std::move(row));
  }
  const McAggregate& a = report.aggregate;
  json doc{{"config",
            {{"runs", config.runs},
             {"epsilon", config.epsilon},
             {"seed", config.seed},
             {"perturb", config.perturb}}},
           {"runs", std::move(rows)},
           {"aggregate",
            {{"runs", a.runs},
             {"converged", a.converged},
             {"min_iterations", a.min_iterations},
             {"max_iterations", a.max_iterations},
             {"mean_iterations", a.mean_iterations},
             {"median_iterations", a.median_iterations}}}};
  return doc.dump(2) + "\n";
}

std::string mc_report_csv(const McReport& report) {
  std::string out = "run,converged,iterations,final_delta\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.run) + "," + (r.converged ? "1" : "0") + "," +
           std::to_string(r.iterations) + "," + format_double(r.final_delta) +
           "\n";
  }
  return out;
}

int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const Scenario scenario = load_scenario(config.scenario_path);
    const ValidationReport validation = validate_or_throw(scenario.model);

    SynthesisConfig synth;
    synth.epsilon = config.epsilon;
    synth.max_iterations = config.max_iter;
    synth.prior_mode = config.prior_mode;
    synth.P0 = scenario.P0;
    synth.numeric.ridge = config.ridge;

    FixedPointResult fp = iterate_to_fixed_point(scenario.model, synth);
    GainSet gains = compute_gains(fp.covariance, scenario.model,
                                  build_selectors(scenario.model), synth.numeric);
    gains.iterations = fp.iterations;
    gains.final_delta = fp.final_delta;
    gains.epsilon = synth.epsilon;

    json traces = json::array();
    for (NodeIndex i = 0; i < scenario.model.node_count(); ++i) {
      traces.push_back(fp.covariance.block(i, i).trace());
    }
    std::vector<std::string> warnings = validation.warnings;
    warnings.insert(warnings.end(), fp.warnings.begin(), fp.warnings.end());
    json report{
        {"iterations", fp.iterations},
        {"final_delta", fp.final_delta},
        {"epsilon", synth.epsilon},
        {"spectral_radius", closed_loop_spectral_radius(gains, scenario.model)},
        {"unbiasedness_residual", unbiasedness_residual(gains, scenario.model)},
        {"node_covariance_traces", std::move(traces)},
        {"validation", validation_json(validation)},
        {"warnings", warnings}};

    write_file_atomic(config.output_dir / "gains.json", gains_to_json(gains));
    write_file_atomic(config.output_dir / "synth_report.json",
                      report.dump(2) + "\n");
    out << report.dump(2) << "\n";
    return exit_code::ok;
  } catch (const Error& e) {
    return fail(e, err);
  }
}

int cmd_sim(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const Scenario scenario = load_scenario(config.scenario_path);
    validate_or_throw(scenario.model);
    if (config.horizon < 1) {
      throw Error(ErrorKind::InvalidArgument, "horizon must be >= 1");
    }

    EstimatorSet estimators;
    estimators.kinds = config.estimators;
    estimators.consensus.rounds = config.consensus_rounds;
    estimators.numeric.ridge = config.ridge;
    GainSet gains;
    const bool wants_fixed =
        std::find(config.estimators.begin(), config.estimators.end(),
                  EstimatorKind::FixedGain) != config.estimators.end();
    if (wants_fixed) {
      if (config.gains_path.empty()) {
        throw Error(ErrorKind::InvalidArgument,
                    "fixed_gain estimator requires --gains");
      }
      gains = load_gains(config.gains_path);
      check_gains_match(gains, scenario.model);
      estimators.gains = &gains;
    }

    const SimulationScenario sim{scenario.model,  config.horizon,
                                 config.seed,     scenario.x0_mean,
                                 scenario.P0,     config.init_policy};
    const SimulationTrace trace = run_checked(sim, estimators);

    const auto steps = trace.steps();
    const std::size_t window = std::max<std::size_t>(1, steps / 4);
    json summary = json::object();
    for (const auto& [kind, et] : trace.estimators) {
      double sum = 0.0;
      for (std::size_t t = steps - std::min(window, steps); t < steps; ++t) {
        sum += et.avg_error_norm[t];
      }
      summary[std::string(to_string(kind))] = {
          {"steady_state_avg_error_norm",
           steps ? sum / static_cast<double>(std::min(window, steps)) : 0.0},
          {"fallback_steps", et.fallback_count}};
    }
    json doc{{"horizon", config.horizon},
             {"seed", config.seed},
             {"steps", steps},
             {"steady_state_window", window},
             {"estimators", summary}};
    if (trace.truncated_at) {
      doc["truncated_at"] = *trace.truncated_at;
      doc["failure"] = trace.failure;
    }

    write_file_atomic(config.output_dir / "trace.csv", trace_csv(trace));
    write_file_atomic(config.output_dir / "trace_nodes.csv",
                      trace_nodes_csv(trace));
    for (const auto& [kind, et] : trace.estimators) {
      write_file_atomic(config.output_dir / estimator_file(kind),
                        trace_dat(trace, kind));
    }
    write_file_atomic(config.output_dir / "sim_summary.json",
                      doc.dump(2) + "\n");
    out << doc.dump(2) << "\n";

    if (trace.truncated_at) {
      err << json{{"error", std::string(to_string(trace.failure_kind))},
                  {"message", trace.failure},
                  {"exit_code", exit_code::estimator_failure},
                  {"truncated_at", *trace.truncated_at}}
                 .dump()
          << "\n";
      return exit_code::estimator_failure;
    }
    return exit_code::ok;
  } catch (const Error& e) {
    return fail(e, err);
  }
}

int cmd_mc(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const Scenario scenario = load_scenario(config.scenario_path);
    validate_or_throw(scenario.model);
    const McReport report = monte_carlo_convergence(scenario, config);
    write_file_atomic(config.output_dir / "mc_report.json",
                      mc_report_json(report, config));
    write_file_atomic(config.output_dir / "mc_report.csv",
                      mc_report_csv(report));
    const McAggregate& a = report.aggregate;
    out << json{{"runs", a.runs},
                {"converged", a.converged},
                {"min_iterations", a.min_iterations},
                {"max_iterations", a.max_iterations},
                {"mean_iterations", a.mean_iterations},
                {"median_iterations", a.median_iterations}}
               .dump(2)
        << "\n";
    return exit_code::ok;
  } catch (const Error& e) {
    return fail(e, err);
  }
}

}  // namespace dobs

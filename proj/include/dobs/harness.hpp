#pragma once

#include "dobs/io.hpp"
#include "dobs/observer.hpp"
#include "dobs/synthesis.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dobs {

enum class Command { Synth, Sim, Mc };

struct RunConfig {
  Command command = Command::Synth;
  std::filesystem::path scenario_path;
  std::filesystem::path gains_path;
  std::uint64_t seed = 1;
  int horizon = 80;
  double epsilon = 1e-4;
  int max_iter = 10000;
  int runs = 10;
  std::filesystem::path output_dir = ".";
  std::vector<EstimatorKind> estimators = {
      EstimatorKind::Centralized, EstimatorKind::Consensus,
      EstimatorKind::TimeVaryingBlue, EstimatorKind::FixedGain};
  PriorMode prior_mode = PriorMode::CommonPrior;
  InitialEstimatePolicy init_policy = InitialEstimatePolicy::PriorMean;
  int consensus_rounds = 1;
  bool perturb = true;
  bool ridge = false;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int invalid_input = 2;
inline constexpr int not_converged = 3;
inline constexpr int singular_information = 4;
inline constexpr int estimator_failure = 5;
}  // namespace exit_code

int exit_code_for(const Error& error);

/// Machine-readable error object: {"error", "message", "exit_code", ...}.
std::string error_json(const Error& error);

struct McRun {
  int run = 0;
  bool converged = false;
  int iterations = 0;
  double final_delta = 0.0;
  std::string error;
};

struct McAggregate {
  int runs = 0;
  int converged = 0;
  int min_iterations = 0;
  int max_iterations = 0;
  double mean_iterations = 0.0;
  double median_iterations = 0.0;
};

struct McReport {
  std::vector<McRun> rows;
  McAggregate aggregate;
};

/// Aggregate statistics over the converged rows.
McAggregate aggregate_runs(const std::vector<McRun>& rows);

/// Multiplies every nonzero entry of every C^i by an independent
/// Uniform[0.5, 1.5] draw from substream (mc, run).
NetworkModel perturb_measurements(const NetworkModel& model,
                                  std::uint64_t seed, std::uint64_t run);

McReport monte_carlo_convergence(const Scenario& scenario,
                                 const RunConfig& config);

std::string mc_report_json(const McReport& report, const RunConfig& config);
std::string mc_report_csv(const McReport& report);

/// Worker count from DOBS_THREADS (0 or unset = hardware concurrency).
unsigned worker_count();

/// Subcommands. Each returns the process exit code; reports go to `out`,
/// error JSON to `err`.
int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_sim(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_mc(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace dobs

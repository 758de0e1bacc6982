#pragma once

#include "dobs/baselines.hpp"
#include "dobs/blue.hpp"
#include "dobs/error.hpp"
#include "dobs/model.hpp"
#include "dobs/synthesis.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dobs {

enum class InitialEstimatePolicy {
  PriorMean,   // every node starts at the prior mean
  SharedDraw,  // every node starts at one common draw from N(mean, P0)
};

struct SimulationScenario {
  NetworkModel model;
  int horizon = 80;
  std::uint64_t seed = 1;
  Vector x0_prior_mean;
  Matrix P0;
  InitialEstimatePolicy initial_estimate_policy =
      InitialEstimatePolicy::PriorMean;
};

/// truth[t] = x_t and measurements[t][i] = y^i_t for t = 0..horizon-1.
struct Realization {
  std::vector<Vector> truth;
  std::vector<std::vector<Vector>> measurements;
};

Realization simulate_truth(const SimulationScenario& scenario);

/// The estimates node i is allowed to read: its neighbors' broadcasts, in
/// neighbor-list order. `broadcasts` has one column per node.
std::vector<Vector> collect_inbox(const NetworkModel& model, NodeIndex i,
                                  const Matrix& broadcasts);

Vector fixed_gain_step(const NodeGains& gains,
                       std::span<const Vector> neighbor_estimates,
                       const Vector& y);

/// fuse → correct → predict for node i at covariance P̄_t.
Vector time_varying_step(NodeIndex i, const GlobalCovariance& P,
                         std::span<const Vector> neighbor_estimates,
                         const Vector& y, const NetworkModel& model,
                         const SelectorSet& selectors,
                         const NumericOptions& opts = {});

/// Same step with the fusion weights for P̄_t already computed.
Vector time_varying_step(NodeIndex i, const NeighborhoodFusion& fusion,
                         std::span<const Vector> neighbor_estimates,
                         const Vector& y, const NetworkModel& model,
                         const NumericOptions& opts = {});

/// Covariance sequence P̄_0..P̄_{horizon-2} of the time-varying observer with
/// the per-node fusion weights at each step. Data independent, so it can be
/// shared across simulations of one model.
struct TimeVaryingSchedule {
  std::vector<GlobalCovariance> covariance;
  std::vector<std::vector<NeighborhoodFusion>> fusion;
};

TimeVaryingSchedule build_time_varying_schedule(
    const NetworkModel& model, const GlobalCovariance& P0, int horizon,
    const NumericOptions& opts = {});

enum class EstimatorKind { Centralized, Consensus, TimeVaryingBlue, FixedGain };

std::string_view to_string(EstimatorKind kind);
EstimatorKind parse_estimator(std::string_view name);

struct EstimatorSet {
  std::vector<EstimatorKind> kinds;
  const GainSet* gains = nullptr;  // required for FixedGain
  /// Initial global covariance for TimeVaryingBlue; defaults to the common
  /// prior (1 1^T) ⊗ P0.
  std::optional<GlobalCovariance> tv_initial;
  std::shared_ptr<const TimeVaryingSchedule> tv_schedule;
  ConsensusConfig consensus;
  NumericOptions numeric;
};

struct EstimatorTrace {
  std::vector<Matrix> estimates;  // per t, n × N (column i = node i)
  std::vector<double> avg_error_norm;
  /// Number of consensus node-steps that fell back to prediction only.
  int fallback_count = 0;

  Matrix errors(std::size_t t, const Vector& truth) const;
};

struct SimulationTrace {
  std::vector<Vector> truth;
  std::map<EstimatorKind, EstimatorTrace> estimators;
  /// Set when an estimator failed: steps [0, truncated_at) are valid.
  std::optional<int> truncated_at;
  std::string failure;
  ErrorKind failure_kind = ErrorKind::SingularInformation;

  std::size_t steps() const { return truth.size(); }
};

/// Lock-step simulation of every requested estimator on one realization.
/// Each node reads only its neighbors' estimates from the same step.
/// Throws on estimator failure.
SimulationTrace run(const SimulationScenario& scenario,
                    const EstimatorSet& estimators);

/// Like run() but returns the partial trace on estimator failure.
SimulationTrace run_checked(const SimulationScenario& scenario,
                            const EstimatorSet& estimators);

/// (1/N) Σ_i ‖x̂^i_t − x_t‖₂ for every t. Throws UnknownEstimator.
std::vector<double> avg_error_norm(const SimulationTrace& trace,
                                   EstimatorKind estimator);

}  // namespace dobs

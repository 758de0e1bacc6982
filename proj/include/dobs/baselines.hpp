#pragma once

#include "dobs/model.hpp"
#include "dobs/types.hpp"

#include <span>
#include <vector>

namespace dobs {

/// Predicted estimate and covariance of the centralized Kalman filter.
struct CentralizedKfState {
  Vector xbar;
  Matrix Pbar;
};

/// Correction with the stacked measurement col(y^i), then prediction.
CentralizedKfState centralized_step(const CentralizedKfState& state,
                                    const Vector& y_all,
                                    const NetworkModel& model);

/// Predicted-covariance recursion only.
Matrix centralized_covariance_step(const Matrix& Pbar, const NetworkModel& model);

/// Steady-state predicted covariance, iterating from P̄ = I until the
/// Frobenius delta drops below `tol`.
Matrix centralized_steady_covariance(const NetworkModel& model, double tol,
                                     int max_iterations = 100000);

/// Metropolis weights over each closed neighborhood: row i is parallel to
/// model.neighbors(i).
std::vector<std::vector<double>> metropolis_weights(const NetworkModel& model);

struct ConsensusNodeState {
  Vector xbar;     // predicted estimate
  Matrix omega;    // predicted information Ω̄ = P̄^{-1}
  bool fallback = false;  // last step was prediction-only
};

struct ConsensusConfig {
  int rounds = 1;
  /// Scale local measurement information by N before averaging so that a
  /// fully averaged network recovers the sum of all measurement information.
  bool n_fold_reweighting = true;
};

/// Consensus-on-information filter step for every node: local information
/// correction, `rounds` Metropolis averaging rounds over neighborhoods, then
/// prediction. A node whose averaged information is singular falls back to a
/// prediction-only update and has `fallback` set.
std::vector<ConsensusNodeState> consensus_dkf_step(
    std::span<const ConsensusNodeState> states,
    std::span<const Vector> measurements, const NetworkModel& model,
    const std::vector<std::vector<double>>& weights,
    const ConsensusConfig& config = {});

std::vector<ConsensusNodeState> consensus_dkf_step(
    std::span<const ConsensusNodeState> states,
    std::span<const Vector> measurements, const NetworkModel& model,
    const ConsensusConfig& config = {});

}  // namespace dobs

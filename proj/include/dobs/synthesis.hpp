#pragma once

#include "dobs/blue.hpp"
#include "dobs/linalg.hpp"
#include "dobs/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dobs {

enum class PriorMode {
  /// All nodes start from one shared estimate: P̄_0 = (1 1^T) ⊗ P0.
  CommonPrior,
  /// Independent node priors: P̄_0 = I_N ⊗ P0.
  BlockDiagonal,
};

struct SynthesisConfig {
  double epsilon = 1e-4;
  int max_iterations = 10000;
  /// Defaults to 1e12 · ‖P̄_0‖_F.
  std::optional<double> divergence_threshold;
  PriorMode prior_mode = PriorMode::CommonPrior;
  Matrix P0;
  NumericOptions numeric;
};

GlobalCovariance initial_global_covariance(const NetworkModel& model,
                                           const SynthesisConfig& config);

/// Error transition of the distributed BLUE at one covariance:
///   ē_{t+1} = T ē_t + K v_t + (1 ⊗ I) w_t
/// T is stored dense; blocks (i, j) with j outside N^i are zero.
struct TransitionOperator {
  Matrix T;
  std::vector<Matrix> K;  // per node, n × m_i
};

struct TransitionResult {
  TransitionOperator transition;
  std::vector<NodeInformation> infos;
  std::vector<NeighborhoodFusion> fusion;
  std::vector<std::string> warnings;
};

/// Throws SingularInformation(i) when Ω^i = Ω̃^i + S^i is singular (unless
/// ridge regularization is enabled, in which case a warning is recorded).
TransitionResult build_transition(const GlobalCovariance& P,
                                  const NetworkModel& model,
                                  const SelectorSet& selectors,
                                  const NumericOptions& opts = {});

/// T P̄ T^T + blkdiag(A Ω^{-1} S Ω^{-1} A^T) + (1 1^T) ⊗ Q, symmetrized.
GlobalCovariance covariance_step(const GlobalCovariance& P,
                                 const NetworkModel& model,
                                 const SelectorSet& selectors,
                                 const NumericOptions& opts = {});

/// Same update from an already built transition.
GlobalCovariance covariance_step(const GlobalCovariance& P,
                                 const NetworkModel& model,
                                 const TransitionResult& transition);

struct FixedPointResult {
  GlobalCovariance covariance;
  int iterations = 0;
  double final_delta = 0.0;
  std::vector<std::string> warnings;
};

/// Called with (k, P̄_k) for k = 0 (initial) and after every step.
using IterateCallback = std::function<void(int, const GlobalCovariance&)>;

/// Iterates covariance_step from P̄_0 until ‖P̄_{k+1} − P̄_k‖_F < ε.
/// Throws MaxIterationsExceeded (value = last delta), Diverged (value = norm)
/// or SingularInformation.
FixedPointResult iterate_to_fixed_point(const NetworkModel& model,
                                        const SynthesisConfig& config,
                                        const IterateCallback& on_iterate = {});

struct NodeGains {
  std::vector<NodeIndex> neighbors;
  std::vector<Matrix> D;  // parallel to neighbors
  Matrix F;               // n × m_i
  Matrix omega;
};

/// Fixed observer gains x̂^i_{t+1} = Σ_j D^{ij} x̂^j_t + F^i y^i_t.
struct GainSet {
  Eigen::Index n = 0;
  std::size_t N = 0;
  std::vector<NodeGains> nodes;
  std::optional<GlobalCovariance> covariance;
  int iterations = 0;
  double final_delta = 0.0;
  double epsilon = 0.0;
};

GainSet compute_gains(const GlobalCovariance& P, const NetworkModel& model,
                      const SelectorSet& selectors,
                      const NumericOptions& opts = {});

/// Convenience: iterate to the fixed point and freeze the gains there.
GainSet synthesize(const NetworkModel& model, const SynthesisConfig& config);

/// Block matrix [D^{ij}] assembled over the graph.
Matrix closed_loop_matrix(const GainSet& gains);

double closed_loop_spectral_radius(const GainSet& gains,
                                   const NetworkModel& model);

/// max_i ‖Σ_j D^{ij} + F^i C^i − A‖_max.
double unbiasedness_residual(const GainSet& gains, const NetworkModel& model);

}  // namespace dobs

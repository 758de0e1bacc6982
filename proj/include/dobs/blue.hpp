#pragma once

#include "dobs/linalg.hpp"
#include "dobs/model.hpp"
#include "dobs/types.hpp"

#include <span>
#include <vector>

namespace dobs {

struct BlueEstimate {
  Vector estimate;
  Matrix covariance;
};

/// Best linear unbiased estimate of x from y = F x + ε, ε ~ N(0, P).
BlueEstimate blue(const Matrix& F, const Matrix& P, const Vector& y,
                  const NumericOptions& opts = {});

/// Global N·n × N·n error covariance, viewed as an N × N grid of n × n blocks.
struct GlobalCovariance {
  Matrix P;
  std::size_t nodes = 0;
  Eigen::Index dim = 0;

  GlobalCovariance() = default;
  GlobalCovariance(Matrix p, std::size_t node_count, Eigen::Index state_dim);

  auto block(NodeIndex i, NodeIndex j) const {
    return P.block(static_cast<Eigen::Index>(i) * dim,
                   static_cast<Eigen::Index>(j) * dim, dim, dim);
  }
};

/// Structural 0/1 matrices for one node:
///   eta   = row(e_j, j ∈ N^i) ⊗ I_n     (|N^i|·n × N·n)
///   one   = 1 ⊗ I_n                      (|N^i|·n × n)
///   gamma = eta (e_j ⊗ I_n), per neighbor
struct NodeSelectors {
  std::vector<NodeIndex> neighbors;
  Matrix eta;
  Matrix one;
  std::vector<Matrix> gamma;
};

struct SelectorSet {
  std::size_t nodes = 0;
  Eigen::Index dim = 0;
  std::vector<NodeSelectors> per_node;

  const NodeSelectors& operator[](NodeIndex i) const { return per_node.at(i); }

  /// eta_i P eta_i^T, formed by block gathering.
  Matrix neighborhood_covariance(NodeIndex i, const GlobalCovariance& P) const;
};

SelectorSet build_selectors(const NetworkModel& model);

/// Time-invariant measurement information of a node.
struct NodeInformation {
  Matrix omega_tilde;  // fused prior information from the neighborhood
  Matrix S;            // C^T R^{-1} C
  Matrix omega;        // omega_tilde + S
};

Matrix measurement_information(const SensorSpec& sensor);
Vector measurement_correction(const SensorSpec& sensor, const Vector& y);

/// Per-neighbor fusion weights W_j = 1^T (eta P eta^T)^† Γ_ij and their sum
/// Ω̃ = 1^T (eta P eta^T)^† 1, for one node at one covariance.
struct NeighborhoodFusion {
  Matrix omega_tilde;
  std::vector<Matrix> weights;
};

NeighborhoodFusion neighborhood_fusion(const SelectorSet& selectors,
                                       NodeIndex i, const GlobalCovariance& P,
                                       const NumericOptions& opts = {});

/// Information-form fusion: returns Σ_j W_j x̄^j (= Ω̃ x̃) without inverting Ω̃.
Vector fused_information(const NeighborhoodFusion& fusion,
                         std::span<const Vector> neighbor_estimates);

struct FusedEstimate {
  Vector estimate;
  Matrix omega_tilde;
};

/// BLUE of x from the neighbors' estimates (ordered as the neighbor list).
/// Throws SingularInformation if Ω̃ is not invertible.
FusedEstimate fuse_neighbors(NodeIndex i, const SelectorSet& selectors,
                             const GlobalCovariance& P,
                             std::span<const Vector> neighbor_estimates,
                             const NumericOptions& opts = {});

struct CorrectedEstimate {
  Vector estimate;
  Matrix omega;
};

/// Combines the fused prior (x̃, Ω̃) with the local measurement.
CorrectedEstimate correct(const Vector& xtilde, const Matrix& omega_tilde,
                          const SensorSpec& sensor, const Vector& y,
                          const NumericOptions& opts = {});

/// Same as correct() with the prior given as the information vector Ω̃ x̃.
CorrectedEstimate correct_information(const Vector& prior_information,
                                      const Matrix& omega_tilde,
                                      const SensorSpec& sensor, const Vector& y,
                                      const NumericOptions& opts = {});

Vector predict(const Vector& xhat, const Matrix& A);

}  // namespace dobs

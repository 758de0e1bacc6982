#pragma once

#include "dobs/linalg.hpp"
#include "dobs/types.hpp"

#include <string>
#include <vector>

namespace dobs {

/// Local sensing at one node: y = C x + v, v ~ N(0, R). A node with zero
/// measurement rows is a relay.
struct SensorSpec {
  Matrix C;
  Matrix R;

  Eigen::Index measurements() const { return C.rows(); }
};

/// Directed communication edge: `to` receives from `from`.
struct Edge {
  NodeIndex from = 0;
  NodeIndex to = 0;
};

/// Networked LTI estimation problem
///
///   x_{t+1} = A x_t + w_t,        w_t ~ N(0, Q)
///   y^i_t   = C^i x_t + v^i_t,    v^i_t ~ N(0, R^i)
///
/// over a directed graph. Neighborhoods are closed (every node hears itself)
/// and stored sorted ascending. Construction checks shapes and edge indices;
/// noise positivity and detectability are left to validate().
class NetworkModel {
 public:
  NetworkModel(Matrix A, Matrix Q, std::vector<SensorSpec> nodes,
               const std::vector<Edge>& edges);

  const Matrix& A() const { return A_; }
  const Matrix& Q() const { return Q_; }
  const std::vector<SensorSpec>& nodes() const { return nodes_; }
  const SensorSpec& node(NodeIndex i) const { return nodes_.at(i); }

  Eigen::Index state_dim() const { return A_.rows(); }
  std::size_t node_count() const { return nodes_.size(); }

  /// Closed in-neighborhood {i} ∪ {j : j→i}, ascending.
  const std::vector<NodeIndex>& neighbors(NodeIndex i) const;

  /// Directed edges excluding self-loops, sorted by (to, from).
  std::vector<Edge> edges() const;

  /// col(C^i) and blkdiag(R^i).
  Matrix stacked_C() const;
  Matrix stacked_R() const;

 private:
  Matrix A_;
  Matrix Q_;
  std::vector<SensorSpec> nodes_;
  std::vector<std::vector<NodeIndex>> neighborhoods_;
};

const std::vector<NodeIndex>& neighbors(const NetworkModel& model, NodeIndex i);

struct ValidationReport {
  bool collective_detectability = false;
  std::vector<bool> per_node_observability;
  bool strongly_connected = false;
  std::vector<std::string> warnings;
};

/// PBH test on every eigenvalue of A with |λ| ≥ 1 (detectability of (A, C)).
bool is_detectable(const Matrix& A, const Matrix& C,
                   const NumericOptions& opts = {});

bool is_strongly_connected(const NetworkModel& model);

/// Checks noise covariances (NotPositiveDefinite) and reports detectability
/// and connectivity. Lack of detectability or connectivity is reported, not
/// thrown.
ValidationReport validate(const NetworkModel& model,
                          const NumericOptions& opts = {});

/// The N-node ring benchmark: A = Q = I_N, difference measurements between
/// ring neighbors, the last node measuring its own coordinate, R^i = I.
NetworkModel build_ring_benchmark(std::size_t N);

}  // namespace dobs

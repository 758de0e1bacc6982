#include "dobs/blue.hpp"

#include "dobs/error.hpp"

#include <algorithm>
#include <string>

namespace dobs {

BlueEstimate blue(const Matrix& F, const Matrix& P, const Vector& y,
                  const NumericOptions& opts) {
  if (P.rows() != F.rows() || y.size() != F.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "blue: F, P and y disagree");
  }
  require_spd(P, "P");
  const Eigen::LLT<Matrix> llt(P);
  const Matrix PinvF = llt.solve(F);
  const Matrix information = symmetrize(F.transpose() * PinvF);
  Matrix covariance;
  if (!try_inverse_symmetric(information, covariance, opts)) {
    throw Error(ErrorKind::RankDeficient, "blue: F^T P^-1 F is singular");
  }
  return {covariance * (PinvF.transpose() * y), covariance};
}

GlobalCovariance::GlobalCovariance(Matrix p, std::size_t node_count,
                                   Eigen::Index state_dim)
    : P(std::move(p)), nodes(node_count), dim(state_dim) {
  const auto size = static_cast<Eigen::Index>(node_count) * state_dim;
  if (P.rows() != size || P.cols() != size) {
    throw Error(ErrorKind::DimensionMismatch,
                "global covariance must be " + std::to_string(size) + "x" +
                    std::to_string(size));
  }
}

Matrix SelectorSet::neighborhood_covariance(NodeIndex i,
                                            const GlobalCovariance& P) const {
  const auto& nb = per_node.at(i).neighbors;
  const auto k = static_cast<Eigen::Index>(nb.size());
  Matrix out(k * dim, k * dim);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      out.block(a * dim, b * dim, dim, dim) = P.block(nb[a], nb[b]);
    }
  }
  return out;
}

SelectorSet build_selectors(const NetworkModel& model) {
  SelectorSet set;
  set.nodes = model.node_count();
  set.dim = model.state_dim();
  const Eigen::Index n = set.dim;
  const auto N = static_cast<Eigen::Index>(set.nodes);
  const Matrix I = Matrix::Identity(n, n);
  set.per_node.reserve(set.nodes);
  for (NodeIndex i = 0; i < set.nodes; ++i) {
    NodeSelectors s;
    s.neighbors = model.neighbors(i);
    const auto k = static_cast<Eigen::Index>(s.neighbors.size());
    Matrix rows = Matrix::Zero(k, N);  // row(e_j, j ∈ N^i)^T, one row per neighbor
    for (Eigen::Index a = 0; a < k; ++a) {
      rows(a, static_cast<Eigen::Index>(s.neighbors[a])) = 1.0;
    }
    s.eta = kron(rows, I);
    s.one = kron(Matrix::Ones(k, 1), I);
    s.gamma.reserve(s.neighbors.size());
    for (NodeIndex j : s.neighbors) {
      Matrix e = Matrix::Zero(N, 1);
      e(static_cast<Eigen::Index>(j)) = 1.0;
      s.gamma.push_back(s.eta * kron(e, I));
    }
    set.per_node.push_back(std::move(s));
  }
  return set;
}

Matrix measurement_information(const SensorSpec& sensor) {
  if (sensor.measurements() == 0) {
    return Matrix::Zero(sensor.C.cols(), sensor.C.cols());
  }
  const Eigen::LLT<Matrix> llt(sensor.R);
  return symmetrize(sensor.C.transpose() * llt.solve(sensor.C));
}

Vector measurement_correction(const SensorSpec& sensor, const Vector& y) {
  if (y.size() != sensor.measurements()) {
    throw Error(ErrorKind::DimensionMismatch,
                "measurement has " + std::to_string(y.size()) +
                    " entries, sensor expects " +
                    std::to_string(sensor.measurements()));
  }
  if (sensor.measurements() == 0) return Vector::Zero(sensor.C.cols());
  const Eigen::LLT<Matrix> llt(sensor.R);
  return sensor.C.transpose() * llt.solve(y);
}

NeighborhoodFusion neighborhood_fusion(const SelectorSet& selectors,
                                       NodeIndex i, const GlobalCovariance& P,
                                       const NumericOptions& opts) {
  const Eigen::Index n = selectors.dim;
  const auto& nb = selectors[i].neighbors;
  const Matrix M_pinv =
      pinv_symmetric(selectors.neighborhood_covariance(i, P), opts);

  // 1^T M^† is the sum of the block rows of M^†; W_j is its block column j.
  Matrix row_sum = Matrix::Zero(n, M_pinv.cols());
  for (std::size_t a = 0; a < nb.size(); ++a) {
    row_sum += M_pinv.middleRows(static_cast<Eigen::Index>(a) * n, n);
  }
  NeighborhoodFusion out;
  out.omega_tilde = Matrix::Zero(n, n);
  out.weights.reserve(nb.size());
  for (std::size_t a = 0; a < nb.size(); ++a) {
    out.weights.push_back(
        row_sum.middleCols(static_cast<Eigen::Index>(a) * n, n));
    out.omega_tilde += out.weights.back();
  }
  // Rounding makes the block sum slightly skew when M is ill conditioned.
  // Fold the skew part into the node's own weight so Σ_j W_j = Ω̃ still holds.
  const Matrix sym = symmetrize(out.omega_tilde);
  const auto self = static_cast<std::size_t>(
      std::find(nb.begin(), nb.end(), i) - nb.begin());
  out.weights[self] += sym - out.omega_tilde;
  out.omega_tilde = sym;
  return out;
}

Vector fused_information(const NeighborhoodFusion& fusion,
                         std::span<const Vector> neighbor_estimates) {
  if (neighbor_estimates.size() != fusion.weights.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "expected " + std::to_string(fusion.weights.size()) +
                    " neighbor estimates, got " +
                    std::to_string(neighbor_estimates.size()));
  }
  Vector info = Vector::Zero(fusion.omega_tilde.rows());
  for (std::size_t a = 0; a < neighbor_estimates.size(); ++a) {
    info += fusion.weights[a] * neighbor_estimates[a];
  }
  return info;
}

FusedEstimate fuse_neighbors(NodeIndex i, const SelectorSet& selectors,
                             const GlobalCovariance& P,
                             std::span<const Vector> neighbor_estimates,
                             const NumericOptions& opts) {
  const NeighborhoodFusion fusion = neighborhood_fusion(selectors, i, P, opts);
  const Vector info = fused_information(fusion, neighbor_estimates);
  Matrix cov;
  if (!try_inverse_symmetric(fusion.omega_tilde, cov, opts)) {
    throw Error(ErrorKind::SingularInformation,
                "fused neighborhood information of node " +
                    std::to_string(i + 1) + " is singular",
                i);
  }
  return {cov * info, fusion.omega_tilde};
}

CorrectedEstimate correct_information(const Vector& prior_information,
                                      const Matrix& omega_tilde,
                                      const SensorSpec& sensor, const Vector& y,
                                      const NumericOptions& opts) {
  const Matrix omega =
      symmetrize(omega_tilde + measurement_information(sensor));
  Matrix cov;
  if (!try_inverse_symmetric(omega, cov, opts)) {
    throw Error(ErrorKind::SingularInformation,
                "combined prior and measurement information is singular");
  }
  return {cov * (prior_information + measurement_correction(sensor, y)), omega};
}

CorrectedEstimate correct(const Vector& xtilde, const Matrix& omega_tilde,
                          const SensorSpec& sensor, const Vector& y,
                          const NumericOptions& opts) {
  return correct_information(omega_tilde * xtilde, omega_tilde, sensor, y,
                             opts);
}

Vector predict(const Vector& xhat, const Matrix& A) { return A * xhat; }

}  // namespace dobs

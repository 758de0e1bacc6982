#include "dobs/baselines.hpp"

#include "dobs/blue.hpp"
#include "dobs/error.hpp"
#include "dobs/linalg.hpp"

#include <algorithm>
#include <string>

namespace dobs {
namespace {

Matrix spd_inverse(const Matrix& m, std::string_view what) {
  const Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite,
                std::string(what) + " is not positive definite");
  }
  return symmetrize(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

}  // namespace

Matrix centralized_covariance_step(const Matrix& Pbar,
                                   const NetworkModel& model) {
  const Matrix C = model.stacked_C();
  Matrix information = spd_inverse(Pbar, "predicted covariance");
  if (C.rows() > 0) {
    information += C.transpose() * model.stacked_R().llt().solve(C);
  }
  const Matrix P = spd_inverse(symmetrize(information), "posterior information");
  return symmetrize(model.A() * P * model.A().transpose() + model.Q());
}

CentralizedKfState centralized_step(const CentralizedKfState& state,
                                    const Vector& y_all,
                                    const NetworkModel& model) {
  const Matrix C = model.stacked_C();
  if (y_all.size() != C.rows()) {
    throw Error(ErrorKind::DimensionMismatch,
                "stacked measurement has wrong length");
  }
  Vector xhat = state.xbar;
  Matrix P = state.Pbar;
  if (C.rows() > 0) {
    const Eigen::LLT<Matrix> R_llt(model.stacked_R());
    const Matrix RinvC = R_llt.solve(C);
    const Matrix information =
        symmetrize(C.transpose() * RinvC +
                   spd_inverse(state.Pbar, "predicted covariance"));
    P = spd_inverse(information, "posterior information");
    xhat = state.xbar + P * (RinvC.transpose() * (y_all - C * state.xbar));
  }
  return {model.A() * xhat,
          symmetrize(model.A() * P * model.A().transpose() + model.Q())};
}

Matrix centralized_steady_covariance(const NetworkModel& model, double tol,
                                     int max_iterations) {
  Matrix P = Matrix::Identity(model.state_dim(), model.state_dim());
  double delta = 0.0;
  for (int k = 0; k < max_iterations; ++k) {
    Matrix next = centralized_covariance_step(P, model);
    delta = (next - P).norm();
    P = std::move(next);
    if (delta < tol) return P;
  }
  throw Error(ErrorKind::MaxIterationsExceeded,
              "centralized Riccati iteration did not converge", std::nullopt,
              delta);
}

std::vector<std::vector<double>> metropolis_weights(const NetworkModel& model) {
  const std::size_t N = model.node_count();
  std::vector<std::size_t> degree(N);
  for (NodeIndex i = 0; i < N; ++i) degree[i] = model.neighbors(i).size() - 1;

  std::vector<std::vector<double>> weights(N);
  for (NodeIndex i = 0; i < N; ++i) {
    const auto& nb = model.neighbors(i);
    auto& row = weights[i];
    row.assign(nb.size(), 0.0);
    double off_diagonal = 0.0;
    std::size_t self = 0;
    for (std::size_t a = 0; a < nb.size(); ++a) {
      if (nb[a] == i) {
        self = a;
        continue;
      }
      row[a] = 1.0 / (1.0 + static_cast<double>(
                                std::max(degree[i], degree[nb[a]])));
      off_diagonal += row[a];
    }
    row[self] = 1.0 - off_diagonal;
  }
  return weights;
}

std::vector<ConsensusNodeState> consensus_dkf_step(
    std::span<const ConsensusNodeState> states,
    std::span<const Vector> measurements, const NetworkModel& model,
    const std::vector<std::vector<double>>& weights,
    const ConsensusConfig& config) {
  const std::size_t N = model.node_count();
  if (states.size() != N || measurements.size() != N || weights.size() != N) {
    throw Error(ErrorKind::DimensionMismatch,
                "consensus step needs one state, measurement and weight row "
                "per node");
  }
  if (config.rounds < 1) {
    throw Error(ErrorKind::InvalidArgument, "consensus rounds must be >= 1");
  }
  const double scale =
      config.n_fold_reweighting ? static_cast<double>(N) : 1.0;

  std::vector<Matrix> omega(N);
  std::vector<Vector> q(N);
  for (NodeIndex i = 0; i < N; ++i) {
    const SensorSpec& sensor = model.node(i);
    omega[i] = states[i].omega + scale * measurement_information(sensor);
    q[i] = states[i].omega * states[i].xbar +
           scale * measurement_correction(sensor, measurements[i]);
  }

  for (int round = 0; round < config.rounds; ++round) {
    std::vector<Matrix> omega_next(N);
    std::vector<Vector> q_next(N);
    for (NodeIndex i = 0; i < N; ++i) {
      const auto& nb = model.neighbors(i);
      omega_next[i] = Matrix::Zero(omega[i].rows(), omega[i].cols());
      q_next[i] = Vector::Zero(q[i].size());
      for (std::size_t a = 0; a < nb.size(); ++a) {
        omega_next[i] += weights[i][a] * omega[nb[a]];
        q_next[i] += weights[i][a] * q[nb[a]];
      }
      omega_next[i] = symmetrize(omega_next[i]);
    }
    omega = std::move(omega_next);
    q = std::move(q_next);
  }

  const Matrix& A = model.A();
  std::vector<ConsensusNodeState> out(N);
  for (NodeIndex i = 0; i < N; ++i) {
    Matrix P;
    Vector xhat;
    if (try_inverse_symmetric(omega[i], P)) {
      xhat = P * q[i];
      out[i].fallback = false;
    } else {
      P = spd_inverse(states[i].omega, "predicted information");
      xhat = states[i].xbar;
      out[i].fallback = true;
    }
    const Matrix Pbar = symmetrize(A * P * A.transpose() + model.Q());
    out[i].xbar = A * xhat;
    out[i].omega = spd_inverse(Pbar, "predicted covariance");
  }
  return out;
}

std::vector<ConsensusNodeState> consensus_dkf_step(
    std::span<const ConsensusNodeState> states,
    std::span<const Vector> measurements, const NetworkModel& model,
    const ConsensusConfig& config) {
  return consensus_dkf_step(states, measurements, model,
                            metropolis_weights(model), config);
}

}  // namespace dobs

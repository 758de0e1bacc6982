#include "dobs/synthesis.hpp"

#include "dobs/error.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace dobs {
namespace {

Eigen::Index offset(NodeIndex i, Eigen::Index n) {
  return static_cast<Eigen::Index>(i) * n;
}

std::string format_delta(double delta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", delta);
  return buf;
}

}  // namespace

GlobalCovariance initial_global_covariance(const NetworkModel& model,
                                           const SynthesisConfig& config) {
  const Eigen::Index n = model.state_dim();
  const auto N = static_cast<Eigen::Index>(model.node_count());
  if (config.P0.rows() != n || config.P0.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "P0 must be n x n");
  }
  require_spd(config.P0, "P0");
  const Matrix pattern = config.prior_mode == PriorMode::CommonPrior
                             ? Matrix(Matrix::Ones(N, N))
                             : Matrix(Matrix::Identity(N, N));
  return GlobalCovariance(kron(pattern, config.P0), model.node_count(), n);
}

TransitionResult build_transition(const GlobalCovariance& P,
                                  const NetworkModel& model,
                                  const SelectorSet& selectors,
                                  const NumericOptions& opts) {
  const Eigen::Index n = model.state_dim();
  const std::size_t N = model.node_count();
  if (P.nodes != N || P.dim != n) {
    throw Error(ErrorKind::DimensionMismatch,
                "global covariance does not match the model");
  }
  TransitionResult out;
  out.transition.T = Matrix::Zero(P.P.rows(), P.P.cols());
  out.transition.K.reserve(N);
  out.infos.reserve(N);
  out.fusion.reserve(N);

  for (NodeIndex i = 0; i < N; ++i) {
    const SensorSpec& sensor = model.node(i);
    NeighborhoodFusion fusion = neighborhood_fusion(selectors, i, P, opts);
    NodeInformation info;
    info.omega_tilde = fusion.omega_tilde;
    info.S = measurement_information(sensor);
    info.omega = symmetrize(info.omega_tilde + info.S);

    Matrix omega_inv;
    if (!try_inverse_symmetric(info.omega, omega_inv, opts)) {
      if (!opts.ridge) {
        throw Error(ErrorKind::SingularInformation,
                    "information matrix of node " + std::to_string(i + 1) +
                        " is singular",
                    i);
      }
      info.omega += opts.ridge_delta * Matrix::Identity(n, n);
      if (!try_inverse_symmetric(info.omega, omega_inv, opts)) {
        throw Error(ErrorKind::SingularInformation,
                    "information matrix of node " + std::to_string(i + 1) +
                        " is singular after ridge",
                    i);
      }
      out.warnings.push_back("ridge added to information matrix of node " +
                             std::to_string(i + 1));
    }

    const Matrix gain_base = model.A() * omega_inv;
    const auto& nb = selectors[i].neighbors;
    for (std::size_t a = 0; a < nb.size(); ++a) {
      out.transition.T.block(offset(i, n), offset(nb[a], n), n, n) =
          gain_base * fusion.weights[a];
    }
    if (sensor.measurements() > 0) {
      const Eigen::LLT<Matrix> llt(sensor.R);
      out.transition.K.push_back(gain_base *
                                 llt.solve(sensor.C).transpose());
    } else {
      out.transition.K.push_back(Matrix::Zero(n, 0));
    }
    out.infos.push_back(std::move(info));
    out.fusion.push_back(std::move(fusion));
  }
  return out;
}

GlobalCovariance covariance_step(const GlobalCovariance& P,
                                 const NetworkModel& model,
                                 const TransitionResult& tr) {
  const Eigen::Index n = model.state_dim();
  const std::size_t N = model.node_count();
  const Matrix& T = tr.transition.T;
  const Eigen::Index size = P.P.rows();

  // T is block sparse over the graph; form T P T^T block row/column-wise.
  Matrix TP = Matrix::Zero(size, size);
  for (NodeIndex i = 0; i < N; ++i) {
    for (NodeIndex j : model.neighbors(i)) {
      TP.middleRows(offset(i, n), n).noalias() +=
          T.block(offset(i, n), offset(j, n), n, n) *
          P.P.middleRows(offset(j, n), n);
    }
  }
  Matrix next = kron(Matrix::Ones(static_cast<Eigen::Index>(N),
                                  static_cast<Eigen::Index>(N)),
                     model.Q());
  for (NodeIndex i = 0; i < N; ++i) {
    for (NodeIndex j : model.neighbors(i)) {
      next.middleCols(offset(i, n), n).noalias() +=
          TP.middleCols(offset(j, n), n) *
          T.block(offset(i, n), offset(j, n), n, n).transpose();
    }
  }
  // Measurement noise: A Ω^{-1} S Ω^{-1} A^T = K R K^T on the diagonal.
  for (NodeIndex i = 0; i < N; ++i) {
    if (model.node(i).measurements() == 0) continue;
    const Matrix& K = tr.transition.K[i];
    next.block(offset(i, n), offset(i, n), n, n) +=
        K * model.node(i).R * K.transpose();
  }
  return GlobalCovariance(symmetrize(next), N, n);
}

GlobalCovariance covariance_step(const GlobalCovariance& P,
                                 const NetworkModel& model,
                                 const SelectorSet& selectors,
                                 const NumericOptions& opts) {
  return covariance_step(P, model, build_transition(P, model, selectors, opts));
}

FixedPointResult iterate_to_fixed_point(const NetworkModel& model,
                                        const SynthesisConfig& config,
                                        const IterateCallback& on_iterate) {
  if (!(config.epsilon > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  }
  if (config.max_iterations < 1) {
    throw Error(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
  }
  const SelectorSet selectors = build_selectors(model);
  GlobalCovariance P = initial_global_covariance(model, config);
  const double threshold =
      config.divergence_threshold.value_or(1e12 * P.P.norm());
  if (on_iterate) on_iterate(0, P);

  FixedPointResult result;
  double delta = 0.0;
  for (int k = 1; k <= config.max_iterations; ++k) {
    TransitionResult tr = build_transition(P, model, selectors, config.numeric);
    for (auto& w : tr.warnings) result.warnings.push_back(std::move(w));
    GlobalCovariance next = covariance_step(P, model, tr);
    const double norm = next.P.norm();
    if (!std::isfinite(norm) || norm > threshold) {
      throw Error(ErrorKind::Diverged,
                  "covariance iteration diverged at step " + std::to_string(k),
                  std::nullopt, norm);
    }
    delta = (next.P - P.P).norm();
    P = std::move(next);
    if (on_iterate) on_iterate(k, P);
    if (delta < config.epsilon) {
      result.covariance = std::move(P);
      result.iterations = k;
      result.final_delta = delta;
      return result;
    }
  }
  throw Error(ErrorKind::MaxIterationsExceeded,
              "covariance iteration did not converge in " +
                  std::to_string(config.max_iterations) +
                  " iterations (last delta " + format_delta(delta) + ")",
              std::nullopt, delta);
}

GainSet compute_gains(const GlobalCovariance& P, const NetworkModel& model,
                      const SelectorSet& selectors,
                      const NumericOptions& opts) {
  const Eigen::Index n = model.state_dim();
  const TransitionResult tr = build_transition(P, model, selectors, opts);
  GainSet gains;
  gains.n = n;
  gains.N = model.node_count();
  gains.nodes.reserve(gains.N);
  for (NodeIndex i = 0; i < gains.N; ++i) {
    NodeGains g;
    g.neighbors = model.neighbors(i);
    for (NodeIndex j : g.neighbors) {
      g.D.push_back(tr.transition.T.block(offset(i, n), offset(j, n), n, n));
    }
    g.F = tr.transition.K[i];
    g.omega = tr.infos[i].omega;
    gains.nodes.push_back(std::move(g));
  }
  gains.covariance = P;
  return gains;
}

GainSet synthesize(const NetworkModel& model, const SynthesisConfig& config) {
  FixedPointResult fp = iterate_to_fixed_point(model, config);
  GainSet gains = compute_gains(fp.covariance, model, build_selectors(model),
                                config.numeric);
  gains.iterations = fp.iterations;
  gains.final_delta = fp.final_delta;
  gains.epsilon = config.epsilon;
  return gains;
}

Matrix closed_loop_matrix(const GainSet& gains) {
  const Eigen::Index n = gains.n;
  const auto size = static_cast<Eigen::Index>(gains.N) * n;
  Matrix M = Matrix::Zero(size, size);
  for (NodeIndex i = 0; i < gains.N; ++i) {
    const NodeGains& g = gains.nodes[i];
    for (std::size_t a = 0; a < g.neighbors.size(); ++a) {
      M.block(offset(i, n), offset(g.neighbors[a], n), n, n) = g.D[a];
    }
  }
  return M;
}

double closed_loop_spectral_radius(const GainSet& gains,
                                   const NetworkModel& model) {
  if (gains.N != model.node_count() || gains.n != model.state_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "gains do not match the model");
  }
  return spectral_radius(closed_loop_matrix(gains));
}

double unbiasedness_residual(const GainSet& gains, const NetworkModel& model) {
  double worst = 0.0;
  for (NodeIndex i = 0; i < gains.N; ++i) {
    const NodeGains& g = gains.nodes[i];
    Matrix sum = g.F * model.node(i).C;
    for (const Matrix& D : g.D) sum += D;
    worst = std::max(worst, (sum - model.A()).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace dobs

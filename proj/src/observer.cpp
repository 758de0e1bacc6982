#include "dobs/observer.hpp"

#include "dobs/error.hpp"
#include "dobs/rng.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace dobs {
namespace {

Matrix cholesky_factor(const Matrix& m, std::string_view what) {
  if (m.size() == 0) return Matrix(0, 0);
  const Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite,
                std::string(what) + " is not positive definite");
  }
  return llt.matrixL();
}

Vector standard_normal(std::mt19937_64& engine, Eigen::Index size) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(size);
  for (Eigen::Index k = 0; k < size; ++k) z(k) = normal(engine);
  return z;
}

Vector prior_mean(const SimulationScenario& scenario) {
  const Eigen::Index n = scenario.model.state_dim();
  if (scenario.x0_prior_mean.size() == 0) return Vector::Zero(n);
  if (scenario.x0_prior_mean.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "prior mean must have n entries");
  }
  return scenario.x0_prior_mean;
}

Vector initial_estimate(const SimulationScenario& scenario) {
  const Vector mean = prior_mean(scenario);
  if (scenario.initial_estimate_policy == InitialEstimatePolicy::PriorMean) {
    return mean;
  }
  auto engine = substream(scenario.seed, Stream::InitialEstimate);
  return mean + cholesky_factor(scenario.P0, "P0") *
                    standard_normal(engine, mean.size());
}

std::vector<double> error_norms(const std::vector<Matrix>& estimates,
                                const std::vector<Vector>& truth) {
  std::vector<double> out(estimates.size());
  for (std::size_t t = 0; t < estimates.size(); ++t) {
    const Matrix e = estimates[t].colwise() - truth.at(t);
    out[t] = e.colwise().norm().mean();
  }
  return out;
}

void dedupe(std::vector<EstimatorKind>& kinds) {
  std::vector<EstimatorKind> out;
  for (auto k : kinds) {
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  kinds = std::move(out);
}

}  // namespace

Realization simulate_truth(const SimulationScenario& scenario) {
  const NetworkModel& model = scenario.model;
  if (scenario.horizon < 1) {
    throw Error(ErrorKind::InvalidArgument, "horizon must be >= 1");
  }
  const Eigen::Index n = model.state_dim();
  const std::size_t N = model.node_count();
  const auto T = static_cast<std::size_t>(scenario.horizon);

  const Matrix L0 = cholesky_factor(scenario.P0, "P0");
  const Matrix LQ = cholesky_factor(model.Q(), "Q");
  std::vector<Matrix> LR(N);
  for (NodeIndex i = 0; i < N; ++i) {
    LR[i] = cholesky_factor(model.node(i).R,
                            "R of node " + std::to_string(i + 1));
  }

  Realization out;
  out.truth.reserve(T);
  out.measurements.reserve(T);
  auto init = substream(scenario.seed, Stream::InitialState);
  Vector x = prior_mean(scenario) + L0 * standard_normal(init, n);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<Vector> ys(N);
    for (NodeIndex i = 0; i < N; ++i) {
      const SensorSpec& s = model.node(i);
      auto engine = substream(scenario.seed, Stream::Measurement, i, t);
      ys[i] = s.C * x + LR[i] * standard_normal(engine, s.measurements());
    }
    out.truth.push_back(x);
    out.measurements.push_back(std::move(ys));
    auto engine = substream(scenario.seed, Stream::Process, 0, t);
    x = model.A() * x + LQ * standard_normal(engine, n);
  }
  return out;
}

std::vector<Vector> collect_inbox(const NetworkModel& model, NodeIndex i,
                                  const Matrix& broadcasts) {
  const auto& nb = model.neighbors(i);
  std::vector<Vector> inbox;
  inbox.reserve(nb.size());
  for (NodeIndex j : nb) {
    inbox.push_back(broadcasts.col(static_cast<Eigen::Index>(j)));
  }
  return inbox;
}

Vector fixed_gain_step(const NodeGains& gains,
                       std::span<const Vector> neighbor_estimates,
                       const Vector& y) {
  if (neighbor_estimates.size() != gains.D.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "fixed-gain step: neighbor count does not match gains");
  }
  if (y.size() != gains.F.cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                "fixed-gain step: measurement size does not match F");
  }
  Vector next = gains.F * y;
  for (std::size_t a = 0; a < gains.D.size(); ++a) {
    next.noalias() += gains.D[a] * neighbor_estimates[a];
  }
  return next;
}

Vector time_varying_step(NodeIndex i, const NeighborhoodFusion& fusion,
                         std::span<const Vector> neighbor_estimates,
                         const Vector& y, const NetworkModel& model,
                         const NumericOptions& opts) {
  const Vector prior_information = fused_information(fusion, neighbor_estimates);
  try {
    const CorrectedEstimate corrected = correct_information(
        prior_information, fusion.omega_tilde, model.node(i), y, opts);
    return predict(corrected.estimate, model.A());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SingularInformation) throw;
    throw Error(ErrorKind::SingularInformation,
                "information matrix of node " + std::to_string(i + 1) +
                    " is singular",
                i);
  }
}

Vector time_varying_step(NodeIndex i, const GlobalCovariance& P,
                         std::span<const Vector> neighbor_estimates,
                         const Vector& y, const NetworkModel& model,
                         const SelectorSet& selectors,
                         const NumericOptions& opts) {
  return time_varying_step(i, neighborhood_fusion(selectors, i, P, opts),
                           neighbor_estimates, y, model, opts);
}

TimeVaryingSchedule build_time_varying_schedule(const NetworkModel& model,
                                                const GlobalCovariance& P0,
                                                int horizon,
                                                const NumericOptions& opts) {
  const SelectorSet selectors = build_selectors(model);
  TimeVaryingSchedule schedule;
  GlobalCovariance P = P0;
  for (int t = 0; t + 1 < horizon; ++t) {
    TransitionResult tr = build_transition(P, model, selectors, opts);
    GlobalCovariance next = covariance_step(P, model, tr);
    schedule.covariance.push_back(std::move(P));
    schedule.fusion.push_back(std::move(tr.fusion));
    P = std::move(next);
  }
  return schedule;
}

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Centralized: return "centralized";
    case EstimatorKind::Consensus: return "consensus";
    case EstimatorKind::TimeVaryingBlue: return "tv_blue";
    case EstimatorKind::FixedGain: return "fixed_gain";
  }
  return "unknown";
}

EstimatorKind parse_estimator(std::string_view name) {
  for (auto k : {EstimatorKind::Centralized, EstimatorKind::Consensus,
                 EstimatorKind::TimeVaryingBlue, EstimatorKind::FixedGain}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorKind::UnknownEstimator,
              "unknown estimator '" + std::string(name) + "'");
}

Matrix EstimatorTrace::errors(std::size_t t, const Vector& truth) const {
  return estimates.at(t).colwise() - truth;
}

SimulationTrace run_checked(const SimulationScenario& scenario,
                            const EstimatorSet& estimators) {
  const NetworkModel& model = scenario.model;
  const Eigen::Index n = model.state_dim();
  const std::size_t N = model.node_count();
  const auto Nn = static_cast<Eigen::Index>(N);
  std::vector<EstimatorKind> kinds = estimators.kinds;
  dedupe(kinds);

  const auto has = [&](EstimatorKind k) {
    return std::find(kinds.begin(), kinds.end(), k) != kinds.end();
  };
  if (has(EstimatorKind::FixedGain)) {
    if (estimators.gains == nullptr) {
      throw Error(ErrorKind::InvalidArgument,
                  "fixed_gain estimator requires a gain set");
    }
    if (estimators.gains->N != N || estimators.gains->n != n) {
      throw Error(ErrorKind::DimensionMismatch, "gains do not match the model");
    }
  }

  const Realization world = simulate_truth(scenario);
  const auto T = world.truth.size();
  const Vector x0 = initial_estimate(scenario);
  const Matrix start = x0.replicate(1, Nn);

  SimulationTrace trace;
  trace.truth = world.truth;

  // Per-estimator state.
  CentralizedKfState central{x0, scenario.P0};
  std::vector<ConsensusNodeState> consensus;
  std::vector<std::vector<double>> weights;
  if (has(EstimatorKind::Consensus)) {
    require_spd(scenario.P0, "P0");
    const Matrix info0 = scenario.P0.llt().solve(Matrix::Identity(n, n));
    consensus.assign(N, ConsensusNodeState{x0, symmetrize(info0), false});
    weights = metropolis_weights(model);
  }
  std::optional<SelectorSet> selectors;
  std::optional<GlobalCovariance> tv_P;
  if (has(EstimatorKind::TimeVaryingBlue) && !estimators.tv_schedule) {
    selectors = build_selectors(model);
    tv_P = estimators.tv_initial.value_or(GlobalCovariance(
        kron(Matrix::Ones(Nn, Nn), scenario.P0), N, n));
  }
  if (estimators.tv_schedule && estimators.tv_schedule->fusion.size() + 1 < T &&
      has(EstimatorKind::TimeVaryingBlue)) {
    throw Error(ErrorKind::InvalidArgument,
                "time-varying schedule is shorter than the horizon");
  }

  std::map<EstimatorKind, Matrix> current;
  for (auto k : kinds) {
    current[k] = start;
    trace.estimators[k].estimates.reserve(T);
  }

  std::size_t t = 0;
  try {
    for (t = 0; t < T; ++t) {
      for (auto k : kinds) trace.estimators[k].estimates.push_back(current[k]);
      if (t + 1 == T) break;
      const std::vector<Vector>& ys = world.measurements[t];

      for (auto k : kinds) {
        Matrix& est = current[k];
        switch (k) {
          case EstimatorKind::Centralized: {
            Eigen::Index rows = 0;
            for (const auto& y : ys) rows += y.size();
            Vector y_all(rows);
            Eigen::Index r = 0;
            for (const auto& y : ys) {
              y_all.segment(r, y.size()) = y;
              r += y.size();
            }
            central = centralized_step(central, y_all, model);
            est = central.xbar.replicate(1, Nn);
            break;
          }
          case EstimatorKind::Consensus: {
            consensus = consensus_dkf_step(consensus, ys, model, weights,
                                           estimators.consensus);
            for (NodeIndex i = 0; i < N; ++i) {
              est.col(static_cast<Eigen::Index>(i)) = consensus[i].xbar;
              if (consensus[i].fallback) {
                ++trace.estimators[k].fallback_count;
              }
            }
            break;
          }
          case EstimatorKind::TimeVaryingBlue: {
            Matrix next(n, Nn);
            if (estimators.tv_schedule) {
              const auto& fusion = estimators.tv_schedule->fusion[t];
              for (NodeIndex i = 0; i < N; ++i) {
                next.col(static_cast<Eigen::Index>(i)) = time_varying_step(
                    i, fusion[i], collect_inbox(model, i, est), ys[i], model,
                    estimators.numeric);
              }
            } else {
              TransitionResult tr =
                  build_transition(*tv_P, model, *selectors, estimators.numeric);
              for (NodeIndex i = 0; i < N; ++i) {
                next.col(static_cast<Eigen::Index>(i)) = time_varying_step(
                    i, tr.fusion[i], collect_inbox(model, i, est), ys[i],
                    model, estimators.numeric);
              }
              *tv_P = covariance_step(*tv_P, model, tr);
            }
            est = std::move(next);
            break;
          }
          case EstimatorKind::FixedGain: {
            Matrix next(n, Nn);
            for (NodeIndex i = 0; i < N; ++i) {
              next.col(static_cast<Eigen::Index>(i)) =
                  fixed_gain_step(estimators.gains->nodes[i],
                                  collect_inbox(model, i, est), ys[i]);
            }
            est = std::move(next);
            break;
          }
        }
      }
    }
  } catch (const Error& e) {
    const auto valid = t + 1;
    trace.truncated_at = static_cast<int>(valid);
    trace.failure = e.what();
    trace.failure_kind = e.kind();
    trace.truth.resize(valid);
    for (auto& [k, et] : trace.estimators) et.estimates.resize(valid);
  }

  for (auto& [k, et] : trace.estimators) {
    et.avg_error_norm = error_norms(et.estimates, trace.truth);
  }
  return trace;
}

SimulationTrace run(const SimulationScenario& scenario,
                    const EstimatorSet& estimators) {
  SimulationTrace trace = run_checked(scenario, estimators);
  if (trace.truncated_at) {
    throw Error(trace.failure_kind,
                "simulation aborted at step " +
                    std::to_string(*trace.truncated_at) + ": " + trace.failure);
  }
  return trace;
}

std::vector<double> avg_error_norm(const SimulationTrace& trace,
                                   EstimatorKind estimator) {
  const auto it = trace.estimators.find(estimator);
  if (it == trace.estimators.end()) {
    throw Error(ErrorKind::UnknownEstimator,
                "trace has no estimator '" + std::string(to_string(estimator)) +
                    "'");
  }
  return error_norms(it->second.estimates, trace.truth);
}

}  // namespace dobs

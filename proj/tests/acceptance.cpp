// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include "dobs/baselines.hpp"
#include "dobs/harness.hpp"
#include "dobs/io.hpp"
#include "dobs/observer.hpp"
#include "dobs/synthesis.hpp"

#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>

using namespace dobs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.size(), b.data());
}

SynthesisConfig config_with(const Matrix& P0, double epsilon = 1e-4) {
  SynthesisConfig c;
  c.P0 = P0;
  c.epsilon = epsilon;
  return c;
}

Matrix ring_P0() { return 1e6 * Matrix::Identity(20, 20); }

Outcome scalar_oracle() {
  const Matrix one = Matrix::Identity(1, 1);
  const NetworkModel m(one, one, {{one, one}}, {});
  const auto fp = iterate_to_fixed_point(m, config_with(one, 1e-10));
  const GainSet g = compute_gains(fp.covariance, m, build_selectors(m));
  const double p = fp.covariance.P(0, 0);
  const double sum = g.nodes[0].D[0](0, 0) + (g.nodes[0].F * m.node(0).C)(0, 0);
  const double rho = closed_loop_spectral_radius(g, m);
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  const double rho_ref = (3.0 - std::sqrt(5.0)) / 2.0;
  Outcome o;
  o.pass = std::abs(p - golden) < 1e-8 && std::abs(sum - 1.0) < 1e-12 &&
           std::abs(rho - rho_ref) < 1e-6;
  o.detail = "P*=" + fmt("%.12f", p) + " |D+FC-1|=" + fmt("%.2e", std::abs(sum - 1.0)) +
             " rho=" + fmt("%.9f", rho);
  return o;
}

Outcome single_node_equivalence() {
  double worst = 0.0;
  int models = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    testing::RandomModelSpec spec;
    spec.nodes = 1;
    spec.dim = 1 + static_cast<Eigen::Index>(seed % 4);
    spec.allow_relays = false;
    const NetworkModel m = testing::random_model(1000 + seed, spec);
    std::mt19937_64 rng(seed);
    const Matrix P0 = testing::random_spd(rng, spec.dim, 1.0);
    Matrix central = P0;
    iterate_to_fixed_point(m, config_with(P0, 1e-10), [&](int k, const GlobalCovariance& P) {
      if (k > 0) central = centralized_covariance_step(central, m);
      worst = std::max(worst, (P.P - central).cwiseAbs().maxCoeff());
    });
    ++models;
  }
  return {worst <= 1e-10, std::to_string(models) + " models, max elementwise gap " + fmt("%.2e", worst)};
}

Outcome ring_convergence() {
  const NetworkModel ring = build_ring_benchmark(20);
  const auto fp = iterate_to_fixed_point(ring, config_with(ring_P0()));
  RunConfig rc;
  rc.command = Command::Mc;
  const Scenario s{ring, ring_P0(), Vector::Zero(20)};
  const McReport report = monte_carlo_convergence(s, rc);
  bool band = report.aggregate.converged == 10;
  for (const auto& r : report.rows) band = band && r.converged && r.iterations >= 10 && r.iterations <= 500;
  const auto& a = report.aggregate;
  return {fp.iterations <= 500 && band,
          "nominal " + std::to_string(fp.iterations) + " iterations; mc " +
              std::to_string(a.converged) + "/10 converged, range " +
              std::to_string(a.min_iterations) + "-" + std::to_string(a.max_iterations) +
              ", mean " + fmt("%.1f", a.mean_iterations) + ", median " +
              fmt("%.1f", a.median_iterations)};
}

Outcome error_ordering() {
  const NetworkModel ring = build_ring_benchmark(20);
  const GainSet gains = synthesize(ring, config_with(ring_P0()));
  EstimatorSet set;
  set.kinds = {EstimatorKind::Centralized, EstimatorKind::Consensus,
               EstimatorKind::TimeVaryingBlue, EstimatorKind::FixedGain};
  set.gains = &gains;
  set.tv_schedule = std::make_shared<const TimeVaryingSchedule>(build_time_varying_schedule(
      ring, GlobalCovariance(kron(Matrix::Ones(20, 20), ring_P0()), 20, 20), 80));
  std::map<EstimatorKind, double> mean;
  const int seeds = 20;
  for (int seed = 1; seed <= seeds; ++seed) {
    const SimulationScenario sc{ring, 80, static_cast<std::uint64_t>(seed), Vector::Zero(20),
                                ring_P0(), InitialEstimatePolicy::PriorMean};
    const SimulationTrace trace = run(sc, set);
    for (auto k : set.kinds) {
      const auto series = avg_error_norm(trace, k);
      double sum = 0.0;
      for (std::size_t t = 60; t < 80; ++t) sum += series[t];
      mean[k] += sum / 20.0 / seeds;
    }
  }
  const double c = mean[EstimatorKind::Centralized];
  const double f = mean[EstimatorKind::FixedGain];
  const double b = mean[EstimatorKind::Consensus];
  const double tv = mean[EstimatorKind::TimeVaryingBlue];
  const double rel = std::abs(f - tv) / tv;
  return {c <= f && f <= b && rel <= 0.10,
          "centralized " + fmt("%.3f", c) + ", fixed_gain " + fmt("%.3f", f) + ", tv_blue " +
              fmt("%.3f", tv) + ", consensus " + fmt("%.3f", b) + ", |fg-tv|/tv " + fmt("%.4f", rel)};
}

Outcome gain_identity() {
  const NetworkModel ring = build_ring_benchmark(20);
  double worst = unbiasedness_residual(synthesize(ring, config_with(ring_P0())), ring);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    testing::RandomModelSpec spec;
    spec.nodes = 2 + seed % 5;
    spec.dim = 1 + static_cast<Eigen::Index>(seed % 4);
    spec.extra_edges = static_cast<int>(seed % 3);
    const NetworkModel m = testing::random_model(5000 + seed, spec);
    const GainSet g = synthesize(m, config_with(Matrix::Identity(spec.dim, spec.dim)));
    worst = std::max(worst, unbiasedness_residual(g, m));
  }
  return {worst <= 1e-8, "ring + 50 random models, max residual " + fmt("%.2e", worst)};
}

Outcome statistical_consistency() {
  const NetworkModel ring = build_ring_benchmark(20);
  const GainSet gains = synthesize(ring, config_with(ring_P0()));
  EstimatorSet set;
  set.kinds = {EstimatorKind::FixedGain};
  set.gains = &gains;
  const int M = 2000;
  const std::size_t tstar = 60;
  std::vector<Vector> sum(20, Vector::Zero(20));
  std::vector<Matrix> outer(20, Matrix::Zero(20, 20));
  for (int r = 0; r < M; ++r) {
    const SimulationScenario sc{ring, static_cast<int>(tstar) + 1,
                                static_cast<std::uint64_t>(100000 + r), Vector::Zero(20),
                                ring_P0(), InitialEstimatePolicy::PriorMean};
    const SimulationTrace trace = run(sc, set);
    const Matrix e = trace.estimators.at(EstimatorKind::FixedGain).errors(tstar, trace.truth[tstar]);
    for (NodeIndex i = 0; i < 20; ++i) {
      const Vector ei = e.col(static_cast<Eigen::Index>(i));
      sum[i] += ei;
      outer[i] += ei * ei.transpose();
    }
  }
  double worst_trace = 0.0;
  double worst_mean = 0.0;
  bool pass = true;
  for (NodeIndex i = 0; i < 20; ++i) {
    const Vector mean = sum[i] / M;
    const Matrix cov = (outer[i] - M * mean * mean.transpose()) / (M - 1);
    const double ref = gains.covariance->block(i, i).trace();
    const double rel = std::abs(cov.trace() - ref) / ref;
    const double ratio = mean.norm() / (4.0 * std::sqrt(ref / M));
    worst_trace = std::max(worst_trace, rel);
    worst_mean = std::max(worst_mean, ratio);
    pass = pass && rel <= 0.15 && ratio <= 1.0;
  }
  return {pass, "M=2000, t*=60: max trace deviation " + fmt("%.4f", worst_trace) +
                    ", max |mean|/bound " + fmt("%.3f", worst_mean)};
}

Outcome structural() {
  std::vector<std::string> failures;

  // Sum of Γ equals 1 for every selector set generated here.
  std::vector<NetworkModel> models{build_ring_benchmark(20), build_ring_benchmark(3)};
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    testing::RandomModelSpec spec;
    spec.nodes = 1 + seed % 7;
    spec.dim = 1 + static_cast<Eigen::Index>(seed % 3);
    spec.extra_edges = static_cast<int>(seed % 4);
    models.push_back(testing::random_model(9000 + seed, spec));
  }
  for (const auto& m : models) {
    for (const auto& node : build_selectors(m).per_node) {
      Matrix s = Matrix::Zero(node.one.rows(), node.one.cols());
      for (const Matrix& g : node.gamma) s += g;
      if (s != node.one) failures.push_back("sum of gamma");
    }
  }

  // Sentinels outside the neighborhood.
  const NetworkModel ring = build_ring_benchmark(20);
  const GainSet gains = synthesize(ring, config_with(ring_P0()));
  const auto sel = build_selectors(ring);
  std::mt19937_64 rng(77);
  const Matrix clean = testing::random_matrix(rng, 20, 20);
  for (NodeIndex i = 0; i < 20; ++i) {
    Matrix poisoned = Matrix::Constant(20, 20, std::numeric_limits<double>::quiet_NaN());
    for (NodeIndex j : ring.neighbors(i)) poisoned.col(j) = clean.col(j);
    const Vector y = testing::random_matrix(rng, ring.node(i).measurements(), 1);
    const auto a = fixed_gain_step(gains.nodes[i], collect_inbox(ring, i, clean), y);
    const auto b = fixed_gain_step(gains.nodes[i], collect_inbox(ring, i, poisoned), y);
    const auto c = time_varying_step(i, *gains.covariance, collect_inbox(ring, i, clean), y, ring, sel);
    const auto d = time_varying_step(i, *gains.covariance, collect_inbox(ring, i, poisoned), y, ring, sel);
    if (!bitwise_equal(a, b) || !bitwise_equal(c, d)) failures.push_back("message discipline");
  }

  // Lossless round-trips.
  const std::string gtext = gains_to_json(gains);
  const GainSet gback = parse_gains(gtext);
  if (gains_to_json(gback) != gtext) failures.push_back("gain round-trip");
  for (NodeIndex i = 0; i < 20; ++i) {
    for (std::size_t a = 0; a < 3; ++a)
      if (!bitwise_equal(gback.nodes[i].D[a], gains.nodes[i].D[a])) failures.push_back("gain D");
    if (!bitwise_equal(gback.nodes[i].F, gains.nodes[i].F)) failures.push_back("gain F");
    if (!bitwise_equal(gback.nodes[i].omega, gains.nodes[i].omega)) failures.push_back("gain Omega");
  }
  for (const auto& m : models) {
    const Scenario s{m, Matrix::Identity(m.state_dim(), m.state_dim()) / 3.0,
                     Vector::Constant(m.state_dim(), 0.1)};
    const std::string text = scenario_to_json(s);
    const Scenario back = parse_scenario(text);
    if (scenario_to_json(back) != text || !bitwise_equal(back.model.A(), m.A()) ||
        !bitwise_equal(back.P0, s.P0))
      failures.push_back("scenario round-trip");
  }

  // Identical seeds give identical traces and reports.
  EstimatorSet set;
  set.kinds = {EstimatorKind::Centralized, EstimatorKind::Consensus,
               EstimatorKind::TimeVaryingBlue, EstimatorKind::FixedGain};
  set.gains = &gains;
  const SimulationScenario sc{ring, 40, 3, Vector::Zero(20), ring_P0(),
                              InitialEstimatePolicy::SharedDraw};
  const auto t1 = run(sc, set);
  const auto t2 = run(sc, set);
  if (trace_nodes_csv(t1) != trace_nodes_csv(t2)) failures.push_back("trace determinism");
  for (auto k : set.kinds)
    for (std::size_t t = 0; t < 40; ++t)
      if (!bitwise_equal(t1.estimators.at(k).estimates[t], t2.estimators.at(k).estimates[t]))
        failures.push_back("trace determinism");

  const fs::path dir = fs::temp_directory_path() / "dobs_acceptance_structural";
  fs::remove_all(dir);
  write_file_atomic(dir / "ring.json", scenario_to_json({ring, ring_P0(), Vector::Zero(20)}));
  RunConfig rc;
  rc.scenario_path = dir / "ring.json";
  std::ostringstream sink;
  std::string reports[2];
  for (int k = 0; k < 2; ++k) {
    rc.output_dir = dir / std::to_string(k);
    rc.command = Command::Mc;
    rc.runs = 3;
    if (cmd_mc(rc, sink, sink) != 0) failures.push_back("mc command");
    rc.command = Command::Synth;
    if (cmd_synth(rc, sink, sink) != 0) failures.push_back("synth command");
    reports[k] = read_file(rc.output_dir / "synth_report.json") +
                 read_file(rc.output_dir / "gains.json") +
                 read_file(rc.output_dir / "mc_report.json");
  }
  if (reports[0] != reports[1]) failures.push_back("report determinism");
  fs::remove_all(dir);

  std::string detail = std::to_string(models.size()) + " selector sets, 20 sentinel nodes, round-trips, determinism";
  if (!failures.empty()) detail = "failed: " + failures.front() + " (" + std::to_string(failures.size()) + " issues)";
  return {failures.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "scalar oracle", 1.0, scalar_oracle},
      {2, "single-node / centralized equivalence", 10.0, single_node_equivalence},
      {3, "ring benchmark convergence", 120.0, ring_convergence},
      {4, "average error ordering", 120.0, error_ordering},
      {5, "gain identity", 30.0, gain_identity},
      {6, "statistical consistency", 300.0, statistical_consistency},
      {7, "structural checks", std::numeric_limits<double>::infinity(), structural},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %d %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, in_time ? "" : ", over time limit");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed,
              std::size(criteria));
  return failed == 0 ? 0 : 1;
}

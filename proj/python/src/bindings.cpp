#include "dobs/baselines.hpp"
#include "dobs/blue.hpp"
#include "dobs/error.hpp"
#include "dobs/io.hpp"
#include "dobs/model.hpp"
#include "dobs/observer.hpp"
#include "dobs/synthesis.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
using namespace dobs;

namespace {

PriorMode prior_mode_from(const std::string& name) {
  if (name == "common") return PriorMode::CommonPrior;
  if (name == "block_diagonal") return PriorMode::BlockDiagonal;
  throw Error(ErrorKind::InvalidArgument, "unknown prior mode '" + name + "'");
}

InitialEstimatePolicy policy_from(const std::string& name) {
  if (name == "prior_mean") return InitialEstimatePolicy::PriorMean;
  if (name == "shared_draw") return InitialEstimatePolicy::SharedDraw;
  throw Error(ErrorKind::InvalidArgument, "unknown init policy '" + name + "'");
}

SynthesisConfig make_config(const Matrix& P0, double epsilon, int max_iterations,
                            const std::string& prior_mode, bool ridge) {
  SynthesisConfig c;
  c.P0 = P0;
  c.epsilon = epsilon;
  c.max_iterations = max_iterations;
  c.prior_mode = prior_mode_from(prior_mode);
  c.numeric.ridge = ridge;
  return c;
}

NetworkModel make_model(const Matrix& A, const Matrix& Q,
                        const std::vector<SensorSpec>& nodes,
                        const std::vector<std::pair<NodeIndex, NodeIndex>>& edges) {
  std::vector<Edge> e;
  e.reserve(edges.size());
  for (const auto& [from, to] : edges) e.push_back({from, to});
  return NetworkModel(A, Q, nodes, e);
}

/// Simulation output with numpy-friendly shapes.
struct PyTrace {
  Matrix truth;                            // T x n
  std::map<std::string, py::array_t<double>> estimates;  // T x N x n
  std::map<std::string, Vector> avg_error_norm;
  std::map<std::string, int> fallback_count;
  std::optional<int> truncated_at;
  std::string failure;
};

PyTrace to_py(const SimulationTrace& trace) {
  PyTrace out;
  const auto T = static_cast<Eigen::Index>(trace.steps());
  const Eigen::Index n = T ? trace.truth[0].size() : 0;
  out.truth.resize(T, n);
  for (Eigen::Index t = 0; t < T; ++t) out.truth.row(t) = trace.truth[t].transpose();
  for (const auto& [kind, et] : trace.estimators) {
    const std::string name(to_string(kind));
    const Eigen::Index N = T ? et.estimates[0].cols() : 0;
    py::array_t<double> arr({T, N, n});
    auto view = arr.mutable_unchecked<3>();
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index k = 0; k < n; ++k) view(t, i, k) = et.estimates[t](k, i);
    out.estimates[name] = std::move(arr);
    const auto series = avg_error_norm(trace, kind);
    out.avg_error_norm[name] = Eigen::Map<const Vector>(series.data(), static_cast<Eigen::Index>(series.size()));
    out.fallback_count[name] = et.fallback_count;
  }
  out.truncated_at = trace.truncated_at;
  out.failure = trace.failure;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fixed-gain distributed observers: synthesis, simulation and baselines";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::exception<Error>(m, "DobsError"); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object inst = type(e.what());
      inst.attr("kind") = std::string(to_string(e.kind()));
      inst.attr("node") = e.node() ? py::cast(*e.node()) : py::none();
      inst.attr("value") = e.value() ? py::cast(*e.value()) : py::none();
      PyErr_SetObject(type.ptr(), inst.ptr());
    }
  });

  py::class_<SensorSpec>(m, "SensorSpec")
      .def(py::init([](const Matrix& C, const Matrix& R) { return SensorSpec{C, R}; }),
           py::arg("C"), py::arg("R"))
      .def_readwrite("C", &SensorSpec::C)
      .def_readwrite("R", &SensorSpec::R)
      .def_property_readonly("measurements", &SensorSpec::measurements);

  py::class_<NetworkModel>(m, "NetworkModel")
      .def(py::init(&make_model), py::arg("A"), py::arg("Q"), py::arg("nodes"),
           py::arg("edges") = std::vector<std::pair<NodeIndex, NodeIndex>>{},
           "Edges are (from, to) pairs of zero-based node indices.")
      .def_property_readonly("A", &NetworkModel::A)
      .def_property_readonly("Q", &NetworkModel::Q)
      .def_property_readonly("nodes", &NetworkModel::nodes)
      .def_property_readonly("state_dim", &NetworkModel::state_dim)
      .def_property_readonly("node_count", &NetworkModel::node_count)
      .def("neighbors", &NetworkModel::neighbors, py::arg("i"))
      .def_property_readonly("edges", [](const NetworkModel& model) {
        std::vector<std::pair<NodeIndex, NodeIndex>> out;
        for (const Edge& e : model.edges()) out.emplace_back(e.from, e.to);
        return out;
      });

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("collective_detectability", &ValidationReport::collective_detectability)
      .def_readonly("per_node_observability", &ValidationReport::per_node_observability)
      .def_readonly("strongly_connected", &ValidationReport::strongly_connected)
      .def_readonly("warnings", &ValidationReport::warnings);

  m.def("validate", [](const NetworkModel& model) { return validate(model); }, py::arg("model"));
  m.def("build_ring_benchmark", &build_ring_benchmark, py::arg("N"));

  m.def("blue", [](const Matrix& F, const Matrix& P, const Vector& y) {
        const BlueEstimate r = blue(F, P, y);
        return py::make_tuple(r.estimate, r.covariance);
      },
      py::arg("F"), py::arg("P"), py::arg("y"),
      "Best linear unbiased estimate from y = F x + e, e ~ N(0, P). Returns (xhat, cov).");

  py::class_<FixedPointResult>(m, "FixedPointResult")
      .def_property_readonly("covariance", [](const FixedPointResult& r) { return r.covariance.P; })
      .def_readonly("iterations", &FixedPointResult::iterations)
      .def_readonly("final_delta", &FixedPointResult::final_delta)
      .def_readonly("warnings", &FixedPointResult::warnings);

  m.def("iterate_to_fixed_point",
        [](const NetworkModel& model, const Matrix& P0, double epsilon, int max_iterations,
           const std::string& prior_mode, bool ridge) {
          return iterate_to_fixed_point(model, make_config(P0, epsilon, max_iterations, prior_mode, ridge));
        },
        py::arg("model"), py::arg("P0"), py::arg("epsilon") = 1e-4,
        py::arg("max_iterations") = 10000, py::arg("prior_mode") = "common",
        py::arg("ridge") = false);

  py::class_<NodeGains>(m, "NodeGains")
      .def_readonly("neighbors", &NodeGains::neighbors)
      .def_readonly("D", &NodeGains::D)
      .def_readonly("F", &NodeGains::F)
      .def_readonly("omega", &NodeGains::omega);

  py::class_<GainSet>(m, "GainSet")
      .def_readonly("n", &GainSet::n)
      .def_readonly("N", &GainSet::N)
      .def_readonly("nodes", &GainSet::nodes)
      .def_readonly("iterations", &GainSet::iterations)
      .def_readonly("final_delta", &GainSet::final_delta)
      .def_readonly("epsilon", &GainSet::epsilon)
      .def_property_readonly("covariance", [](const GainSet& g) -> std::optional<Matrix> {
        if (g.covariance) return g.covariance->P;
        return std::nullopt;
      })
      .def("closed_loop_matrix", &closed_loop_matrix);

  m.def("synthesize",
        [](const NetworkModel& model, const Matrix& P0, double epsilon, int max_iterations,
           const std::string& prior_mode, bool ridge) {
          return synthesize(model, make_config(P0, epsilon, max_iterations, prior_mode, ridge));
        },
        py::arg("model"), py::arg("P0"), py::arg("epsilon") = 1e-4,
        py::arg("max_iterations") = 10000, py::arg("prior_mode") = "common",
        py::arg("ridge") = false);
  m.def("closed_loop_spectral_radius", &closed_loop_spectral_radius,
        py::arg("gains"), py::arg("model"));
  m.def("unbiasedness_residual", &unbiasedness_residual, py::arg("gains"), py::arg("model"));
  m.def("centralized_steady_covariance", &centralized_steady_covariance,
        py::arg("model"), py::arg("tol") = 1e-10, py::arg("max_iterations") = 100000);

  py::class_<PyTrace>(m, "Trace")
      .def_readonly("truth", &PyTrace::truth)
      .def_readonly("estimates", &PyTrace::estimates)
      .def_readonly("avg_error_norm", &PyTrace::avg_error_norm)
      .def_readonly("fallback_count", &PyTrace::fallback_count)
      .def_readonly("truncated_at", &PyTrace::truncated_at)
      .def_readonly("failure", &PyTrace::failure);

  m.def("simulate",
        [](const NetworkModel& model, int horizon, std::uint64_t seed, const Matrix& P0,
           std::optional<Vector> x0_mean, const std::vector<std::string>& estimators,
           const GainSet* gains, const std::string& init_policy, int consensus_rounds,
           bool allow_partial) {
          const SimulationScenario scenario{
              model, horizon, seed,
              x0_mean.value_or(Vector::Zero(model.state_dim())), P0, policy_from(init_policy)};
          EstimatorSet set;
          for (const auto& name : estimators) set.kinds.push_back(parse_estimator(name));
          set.gains = gains;
          set.consensus.rounds = consensus_rounds;
          SimulationTrace trace;
          {
            py::gil_scoped_release release;
            trace = allow_partial ? run_checked(scenario, set) : run(scenario, set);
          }
          return to_py(trace);
        },
        py::arg("model"), py::arg("horizon"), py::arg("seed"), py::arg("P0"),
        py::arg("x0_mean") = py::none(),
        py::arg("estimators") = std::vector<std::string>{"centralized", "consensus", "tv_blue", "fixed_gain"},
        py::arg("gains") = nullptr, py::arg("init_policy") = "prior_mean",
        py::arg("consensus_rounds") = 1, py::arg("allow_partial") = false,
        "Runs the requested estimators on one realization. Estimates have shape (T, N, n).");

  py::class_<Scenario>(m, "Scenario")
      .def(py::init([](const NetworkModel& model, const Matrix& P0, std::optional<Vector> x0) {
             return Scenario{model, P0, x0.value_or(Vector::Zero(model.state_dim()))};
           }),
           py::arg("model"), py::arg("P0"), py::arg("x0_mean") = py::none())
      .def_readonly("model", &Scenario::model)
      .def_readonly("P0", &Scenario::P0)
      .def_readonly("x0_mean", &Scenario::x0_mean);

  m.def("parse_scenario", [](const std::string& text) { return parse_scenario(text); }, py::arg("text"));
  m.def("load_scenario", &load_scenario, py::arg("path"));
  m.def("scenario_to_json", &scenario_to_json, py::arg("scenario"));
  m.def("gains_to_json", &gains_to_json, py::arg("gains"));
  m.def("parse_gains", [](const std::string& text) { return parse_gains(text); }, py::arg("text"));
  m.def("load_gains", &load_gains, py::arg("path"));

#ifdef VERSION_INFO
  m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}

#include "dobs/model.hpp"

#include "dobs/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <queue>
#include <string>

namespace dobs {
namespace {

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                   const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorKind::DimensionMismatch,
                what + " has shape " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + ", expected " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
}

std::vector<bool> reachable(const std::vector<std::vector<NodeIndex>>& adj,
                            NodeIndex start) {
  std::vector<bool> seen(adj.size(), false);
  std::queue<NodeIndex> frontier;
  seen[start] = true;
  frontier.push(start);
  while (!frontier.empty()) {
    const NodeIndex u = frontier.front();
    frontier.pop();
    for (NodeIndex v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        frontier.push(v);
      }
    }
  }
  return seen;
}

}  // namespace

NetworkModel::NetworkModel(Matrix A, Matrix Q, std::vector<SensorSpec> nodes,
                           const std::vector<Edge>& edges)
    : A_(std::move(A)), Q_(std::move(Q)), nodes_(std::move(nodes)) {
  const Eigen::Index n = A_.rows();
  if (n == 0) throw Error(ErrorKind::DimensionMismatch, "A is empty");
  require_shape(A_, n, n, "A");
  require_shape(Q_, n, n, "Q");
  if (nodes_.empty()) {
    throw Error(ErrorKind::InvalidArgument, "model has no nodes");
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const SensorSpec& s = nodes_[i];
    const std::string tag = "node " + std::to_string(i + 1);
    // A relay may carry a 0x0 C; normalize it to 0xn.
    if (s.C.rows() == 0) nodes_[i].C.resize(0, n);
    require_shape(nodes_[i].C, nodes_[i].C.rows(), n, tag + " C");
    require_shape(s.R, nodes_[i].C.rows(), nodes_[i].C.rows(), tag + " R");
  }

  const std::size_t N = nodes_.size();
  neighborhoods_.assign(N, {});
  for (NodeIndex i = 0; i < N; ++i) neighborhoods_[i].push_back(i);
  for (const Edge& e : edges) {
    if (e.from >= N || e.to >= N) {
      throw Error(ErrorKind::InvalidArgument,
                  "edge references node outside 1.." + std::to_string(N));
    }
    neighborhoods_[e.to].push_back(e.from);
  }
  for (auto& nb : neighborhoods_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
}

const std::vector<NodeIndex>& NetworkModel::neighbors(NodeIndex i) const {
  if (i >= neighborhoods_.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "node index " + std::to_string(i) + " out of range");
  }
  return neighborhoods_[i];
}

std::vector<Edge> NetworkModel::edges() const {
  std::vector<Edge> out;
  for (NodeIndex i = 0; i < neighborhoods_.size(); ++i) {
    for (NodeIndex j : neighborhoods_[i]) {
      if (j != i) out.push_back({j, i});
    }
  }
  return out;
}

Matrix NetworkModel::stacked_C() const {
  Eigen::Index rows = 0;
  for (const auto& s : nodes_) rows += s.measurements();
  Matrix C(rows, state_dim());
  Eigen::Index r = 0;
  for (const auto& s : nodes_) {
    C.middleRows(r, s.measurements()) = s.C;
    r += s.measurements();
  }
  return C;
}

Matrix NetworkModel::stacked_R() const {
  Eigen::Index rows = 0;
  for (const auto& s : nodes_) rows += s.measurements();
  Matrix R = Matrix::Zero(rows, rows);
  Eigen::Index r = 0;
  for (const auto& s : nodes_) {
    R.block(r, r, s.measurements(), s.measurements()) = s.R;
    r += s.measurements();
  }
  return R;
}

const std::vector<NodeIndex>& neighbors(const NetworkModel& model,
                                        NodeIndex i) {
  return model.neighbors(i);
}

bool is_detectable(const Matrix& A, const Matrix& C,
                   const NumericOptions& opts) {
  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<Matrix> eig(A, false);
  const Eigen::VectorXcd lambda = eig.eigenvalues();
  Eigen::MatrixXcd pbh(n + C.rows(), n);
  pbh.bottomRows(C.rows()) = C.cast<std::complex<double>>();
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    // Unit-circle test with a little slack so marginal modes count as
    // unstable (A = I must be observed).
    if (std::abs(lambda(k)) < 1.0 - 1e-12) continue;
    pbh.topRows(n) = A.cast<std::complex<double>>();
    pbh.topRows(n).diagonal().array() -= lambda(k);
    if (numerical_rank(pbh, opts) < n) return false;
  }
  return true;
}

bool is_strongly_connected(const NetworkModel& model) {
  const std::size_t N = model.node_count();
  std::vector<std::vector<NodeIndex>> forward(N), backward(N);
  for (NodeIndex i = 0; i < N; ++i) {
    for (NodeIndex j : model.neighbors(i)) {
      forward[j].push_back(i);  // information flows j -> i
      backward[i].push_back(j);
    }
  }
  const auto f = reachable(forward, 0);
  const auto b = reachable(backward, 0);
  return std::all_of(f.begin(), f.end(), [](bool x) { return x; }) &&
         std::all_of(b.begin(), b.end(), [](bool x) { return x; });
}

ValidationReport validate(const NetworkModel& model,
                          const NumericOptions& opts) {
  require_spd(model.Q(), "Q");
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    require_spd(model.node(i).R, "R of node " + std::to_string(i + 1));
  }

  ValidationReport report;
  report.collective_detectability =
      is_detectable(model.A(), model.stacked_C(), opts);
  report.per_node_observability.reserve(model.node_count());
  for (const auto& s : model.nodes()) {
    report.per_node_observability.push_back(is_detectable(model.A(), s.C, opts));
  }
  report.strongly_connected = is_strongly_connected(model);
  if (!report.collective_detectability) {
    report.warnings.push_back("(A, col(C^i)) is not detectable");
  }
  if (!report.strongly_connected) {
    report.warnings.push_back("communication graph is not strongly connected");
  }
  return report;
}

NetworkModel build_ring_benchmark(std::size_t N) {
  if (N < 3) {
    throw Error(ErrorKind::InvalidArgument, "ring benchmark needs N >= 3");
  }
  const auto n = static_cast<Eigen::Index>(N);
  std::vector<SensorSpec> nodes;
  nodes.reserve(N);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == n - 1) {
      Matrix C = Matrix::Zero(1, n);
      C(0, i) = 1.0;
      nodes.push_back({C, Matrix::Identity(1, 1)});
      continue;
    }
    const Eigen::Index next = i + 1;
    const Eigen::Index prev = (i == 0) ? n - 1 : i - 1;
    Matrix C = Matrix::Zero(2, n);
    C(0, i) = 1.0;
    C(0, next) = -1.0;
    C(1, prev) = 1.0;
    C(1, i) = -1.0;
    nodes.push_back({C, Matrix::Identity(2, 2)});
  }
  std::vector<Edge> edges;
  for (NodeIndex i = 0; i < N; ++i) {
    const NodeIndex next = (i + 1) % N;
    edges.push_back({i, next});
    edges.push_back({next, i});
  }
  return NetworkModel(Matrix::Identity(n, n), Matrix::Identity(n, n),
                      std::move(nodes), edges);
}

}  // namespace dobs

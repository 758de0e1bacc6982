#include "dobs/io.hpp"

#include "dobs/error.hpp"

#include "json.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace dobs {
namespace {

using json = nlohmann::json;

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("invalid JSON: ") + e.what());
  }
}

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorKind::Parse, std::string("missing field '") + key + "'");
  }
  return obj.at(key);
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw Error(ErrorKind::Parse, where + ": expected a number");
  return v.get<double>();
}

Matrix matrix_from_json(const json& v, const std::string& where) {
  if (!v.is_array()) {
    throw Error(ErrorKind::Parse, where + ": expected an array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(v.size());
  if (rows == 0) return Matrix(0, 0);
  if (!v[0].is_array()) {
    throw Error(ErrorKind::Parse, where + ": expected an array of rows");
  }
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorKind::Parse, where + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = number(row[static_cast<std::size_t>(c)], where);
    }
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::size_t one_based(const json& v, std::size_t N, const std::string& where) {
  if (!v.is_number_integer()) {
    throw Error(ErrorKind::Parse, where + ": node index must be an integer");
  }
  const auto k = v.get<long long>();
  if (k < 1 || static_cast<std::size_t>(k) > N) {
    throw Error(ErrorKind::Parse, where + ": node index " + std::to_string(k) +
                                      " outside 1.." + std::to_string(N));
  }
  return static_cast<std::size_t>(k - 1);
}

}  // namespace

Scenario parse_scenario(std::string_view json_text) {
  const json doc = parse_json(json_text);
  Matrix A = matrix_from_json(require(doc, "A"), "A");
  Matrix Q = matrix_from_json(require(doc, "Q"), "Q");
  const Eigen::Index n = A.rows();

  const json& jnodes = require(doc, "nodes");
  if (!jnodes.is_array() || jnodes.empty()) {
    throw Error(ErrorKind::Parse, "'nodes' must be a non-empty array");
  }
  std::vector<SensorSpec> nodes;
  for (std::size_t i = 0; i < jnodes.size(); ++i) {
    const std::string tag = "nodes[" + std::to_string(i) + "]";
    nodes.push_back({matrix_from_json(require(jnodes[i], "C"), tag + ".C"),
                     matrix_from_json(require(jnodes[i], "R"), tag + ".R")});
  }
  const std::size_t N = nodes.size();

  std::vector<Edge> edges;
  if (doc.contains("edges")) {
    const json& jedges = doc.at("edges");
    if (!jedges.is_array()) throw Error(ErrorKind::Parse, "'edges' must be an array");
    for (const json& e : jedges) {
      if (!e.is_array() || e.size() != 2) {
        throw Error(ErrorKind::Parse, "each edge must be [j, i]");
      }
      edges.push_back({one_based(e[0], N, "edges"), one_based(e[1], N, "edges")});
    }
  }

  Matrix P0 = Matrix::Identity(n, n);
  if (doc.contains("P0")) {
    const json& jp = doc.at("P0");
    if (jp.is_object()) {
      P0 = number(require(jp, "scaled_identity"), "P0.scaled_identity") *
           Matrix::Identity(n, n);
    } else {
      P0 = matrix_from_json(jp, "P0");
    }
  }
  Vector x0 = Vector::Zero(n);
  if (doc.contains("x0_mean")) {
    const json& jx = doc.at("x0_mean");
    if (!jx.is_array() || static_cast<Eigen::Index>(jx.size()) != n) {
      throw Error(ErrorKind::Parse, "'x0_mean' must have n entries");
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      x0(k) = number(jx[static_cast<std::size_t>(k)], "x0_mean");
    }
  }

  NetworkModel model(std::move(A), std::move(Q), std::move(nodes), edges);
  if (P0.rows() != n || P0.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "P0 must be n x n");
  }
  return Scenario{std::move(model), std::move(P0), std::move(x0)};
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path));
}

std::string scenario_to_json(const Scenario& scenario) {
  const NetworkModel& m = scenario.model;
  json doc;
  doc["A"] = matrix_to_json(m.A());
  doc["Q"] = matrix_to_json(m.Q());
  doc["nodes"] = json::array();
  for (const auto& s : m.nodes()) {
    doc["nodes"].push_back({{"C", matrix_to_json(s.C)}, {"R", matrix_to_json(s.R)}});
  }
  doc["edges"] = json::array();
  for (const Edge& e : m.edges()) doc["edges"].push_back({e.from + 1, e.to + 1});
  doc["P0"] = matrix_to_json(scenario.P0);
  json x0 = json::array();
  for (Eigen::Index k = 0; k < scenario.x0_mean.size(); ++k) {
    x0.push_back(scenario.x0_mean(k));
  }
  doc["x0_mean"] = std::move(x0);
  return doc.dump() + "\n";
}

std::string gains_to_json(const GainSet& gains) {
  json doc;
  doc["n"] = gains.n;
  doc["N"] = gains.N;
  doc["nodes"] = json::array();
  for (NodeIndex i = 0; i < gains.N; ++i) {
    const NodeGains& g = gains.nodes[i];
    json node;
    node["i"] = i + 1;
    node["neighbors"] = json::array();
    node["D"] = json::object();
    for (std::size_t a = 0; a < g.neighbors.size(); ++a) {
      node["neighbors"].push_back(g.neighbors[a] + 1);
      node["D"][std::to_string(g.neighbors[a] + 1)] = matrix_to_json(g.D[a]);
    }
    node["F"] = matrix_to_json(g.F);
    node["Omega"] = matrix_to_json(g.omega);
    doc["nodes"].push_back(std::move(node));
  }
  doc["meta"] = {{"iterations", gains.iterations},
                 {"final_delta", gains.final_delta},
                 {"epsilon", gains.epsilon}};
  return doc.dump() + "\n";
}

GainSet parse_gains(std::string_view json_text) {
  const json doc = parse_json(json_text);
  GainSet gains;
  const json& jn = require(doc, "n");
  const json& jN = require(doc, "N");
  if (!jn.is_number_integer() || !jN.is_number_integer() ||
      jn.get<long long>() < 1 || jN.get<long long>() < 1) {
    throw Error(ErrorKind::Parse, "'n' and 'N' must be positive integers");
  }
  gains.n = jn.get<Eigen::Index>();
  gains.N = jN.get<std::size_t>();
  const json& jnodes = require(doc, "nodes");
  if (!jnodes.is_array() || jnodes.size() != gains.N) {
    throw Error(ErrorKind::Parse, "'nodes' must have N entries");
  }
  gains.nodes.resize(gains.N);
  std::vector<bool> seen(gains.N, false);
  for (const json& node : jnodes) {
    const NodeIndex i = one_based(require(node, "i"), gains.N, "nodes.i");
    if (seen[i]) throw Error(ErrorKind::Parse, "duplicate node entry");
    seen[i] = true;
    const std::string tag = "node " + std::to_string(i + 1);
    NodeGains& g = gains.nodes[i];
    const json& jd = require(node, "D");
    for (const json& j : require(node, "neighbors")) {
      const NodeIndex nb = one_based(j, gains.N, tag + " neighbors");
      g.neighbors.push_back(nb);
      const std::string key = std::to_string(nb + 1);
      if (!jd.is_object() || !jd.contains(key)) {
        throw Error(ErrorKind::Parse, tag + ": missing D block " + key);
      }
      g.D.push_back(matrix_from_json(jd.at(key), tag + " D"));
      if (g.D.back().rows() != gains.n || g.D.back().cols() != gains.n) {
        throw Error(ErrorKind::DimensionMismatch, tag + ": D block must be n x n");
      }
    }
    g.F = matrix_from_json(require(node, "F"), tag + " F");
    if (g.F.rows() == 0) g.F.resize(gains.n, 0);
    if (g.F.rows() != gains.n) {
      throw Error(ErrorKind::DimensionMismatch, tag + ": F must have n rows");
    }
    g.omega = matrix_from_json(require(node, "Omega"), tag + " Omega");
  }
  if (doc.contains("meta")) {
    const json& meta = doc.at("meta");
    if (meta.contains("iterations")) gains.iterations = meta.at("iterations").get<int>();
    if (meta.contains("final_delta")) gains.final_delta = number(meta.at("final_delta"), "meta");
    if (meta.contains("epsilon")) gains.epsilon = number(meta.at("epsilon"), "meta");
  }
  return gains;
}

GainSet load_gains(const std::filesystem::path& path) {
  return parse_gains(read_file(path));
}

void check_gains_match(const GainSet& gains, const NetworkModel& model) {
  if (gains.N != model.node_count() || gains.n != model.state_dim()) {
    throw Error(ErrorKind::InvalidArgument,
                "gain file dimensions do not match the scenario");
  }
  for (NodeIndex i = 0; i < gains.N; ++i) {
    if (gains.nodes[i].neighbors != model.neighbors(i)) {
      throw Error(ErrorKind::InvalidArgument,
                  "gain file neighborhood of node " + std::to_string(i + 1) +
                      " does not match the scenario graph");
    }
    if (gains.nodes[i].F.cols() != model.node(i).measurements()) {
      throw Error(ErrorKind::InvalidArgument,
                  "gain file F of node " + std::to_string(i + 1) +
                      " does not match the sensor");
    }
  }
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string trace_csv(const SimulationTrace& trace) {
  std::string out = "t,estimator,avg_error_norm\n";
  for (std::size_t t = 0; t < trace.steps(); ++t) {
    for (const auto& [kind, et] : trace.estimators) {
      out += std::to_string(t) + "," + std::string(to_string(kind)) + "," +
             format_double(et.avg_error_norm[t]) + "\n";
    }
  }
  if (trace.truncated_at) {
    out += "# truncated_at=" + std::to_string(*trace.truncated_at) + "\n";
  }
  return out;
}

std::string trace_nodes_csv(const SimulationTrace& trace) {
  std::string out = "t,node,estimator,err_norm\n";
  for (std::size_t t = 0; t < trace.steps(); ++t) {
    for (const auto& [kind, et] : trace.estimators) {
      const Vector norms = et.errors(t, trace.truth[t]).colwise().norm();
      for (Eigen::Index i = 0; i < norms.size(); ++i) {
        out += std::to_string(t) + "," + std::to_string(i + 1) + "," +
               std::string(to_string(kind)) + "," + format_double(norms(i)) +
               "\n";
      }
    }
  }
  if (trace.truncated_at) {
    out += "# truncated_at=" + std::to_string(*trace.truncated_at) + "\n";
  }
  return out;
}

std::string trace_dat(const SimulationTrace& trace, EstimatorKind estimator) {
  std::string out;
  for (double v : avg_error_norm(trace, estimator)) out += format_double(v) + "\n";
  return out;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    f.flush();
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot rename into " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace dobs

#pragma once

#include "dobs/model.hpp"
#include "dobs/types.hpp"

#include <random>
#include <vector>

namespace dobs::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows,
                            Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

inline Matrix random_spd(std::mt19937_64& rng, Eigen::Index n, double floor) {
  const Matrix B = random_matrix(rng, n, n);
  return 0.5 * B * B.transpose() / static_cast<double>(n) +
         floor * Matrix::Identity(n, n);
}

struct RandomModelSpec {
  std::size_t nodes = 3;
  Eigen::Index dim = 2;
  double max_radius = 1.05;
  bool allow_relays = true;
  int extra_edges = 1;
};

/// Seeded random networked model: bidirectional ring plus a few directed
/// chords, random A scaled to spectral radius in [0.5, max_radius], random
/// sensors (some relays). Redraws until (A, col(C^i)) is detectable.
inline NetworkModel random_model(std::uint64_t seed,
                                 const RandomModelSpec& spec = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Index n = spec.dim;
  const std::size_t N = spec.nodes;
  for (;;) {
    Matrix A = random_matrix(rng, n, n);
    const double rho = spectral_radius(A);
    const double target = 0.5 + (spec.max_radius - 0.5) * unit(rng);
    if (rho > 1e-9) A *= target / rho;
    const Matrix Q = random_spd(rng, n, 0.1);

    std::vector<SensorSpec> sensors;
    for (std::size_t i = 0; i < N; ++i) {
      std::uniform_int_distribution<int> rows(spec.allow_relays ? 0 : 1, 2);
      const Eigen::Index m = rows(rng);
      sensors.push_back({random_matrix(rng, m, n), random_spd(rng, m, 0.2)});
    }
    std::vector<Edge> edges;
    if (N > 1) {
      for (std::size_t i = 0; i < N; ++i) {
        const std::size_t next = (i + 1) % N;
        edges.push_back({i, next});
        edges.push_back({next, i});
      }
      std::uniform_int_distribution<std::size_t> pick(0, N - 1);
      for (int e = 0; e < spec.extra_edges; ++e) {
        edges.push_back({pick(rng), pick(rng)});
      }
    }
    NetworkModel model(A, Q, std::move(sensors), edges);
    if (validate(model).collective_detectability) return model;
  }
}

}  // namespace dobs::testing

#include "dobs/blue.hpp"
#include "dobs/error.hpp"
#include "dobs/synthesis.hpp"

#include "doctest.h"
#include "support.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

using namespace dobs;

namespace {

NetworkModel line_model(std::size_t N, Eigen::Index n,
                        const std::vector<Edge>& edges) {
  std::vector<SensorSpec> nodes(
      N, {Matrix::Identity(n, n), Matrix::Identity(n, n)});
  return NetworkModel(Matrix::Identity(n, n), Matrix::Identity(n, n), nodes,
                      edges);
}

// Whitened least squares solved by Householder QR.
BlueEstimate qr_oracle(const Matrix& F, const Matrix& P, const Vector& y) {
  const Eigen::LLT<Matrix> llt(P);
  const Matrix Fw = llt.matrixL().solve(F);
  const Vector yw = llt.matrixL().solve(y);
  const Eigen::HouseholderQR<Matrix> qr(Fw);
  BlueEstimate out;
  out.estimate = qr.solve(yw);
  out.covariance = (Fw.transpose() * Fw).inverse();
  return out;
}

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double x : values) v(k++) = x;
  return v;
}

}  // namespace

TEST_CASE("blue identity case") {
  const auto r = blue(Matrix::Identity(2, 2), Matrix::Identity(2, 2), vec({3, 4}));
  CHECK((r.estimate - vec({3, 4})).norm() < 1e-14);
  CHECK((r.covariance - Matrix::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("blue equal-weight average") {
  const auto r = blue(Matrix::Ones(2, 1), Matrix::Identity(2, 2), vec({1, 3}));
  CHECK(r.estimate(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.covariance(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("blue matches a whitened QR least-squares solution") {
  Matrix P = Matrix::Zero(2, 2);
  P(0, 0) = 1.0;
  P(1, 1) = 4.0;
  const Vector y = vec({0, 5});
  const auto r = blue(Matrix::Ones(2, 1), P, y);
  const auto o = qr_oracle(Matrix::Ones(2, 1), P, y);
  CHECK(std::abs(r.estimate(0) - o.estimate(0)) < 1e-12);
  CHECK(std::abs(r.covariance(0, 0) - o.covariance(0, 0)) < 1e-12);
  // Frozen oracle output.
  CHECK(std::abs(r.estimate(0) - 1.0) < 1e-12);
  CHECK(std::abs(r.covariance(0, 0) - 0.8) < 1e-12);
}

TEST_CASE("blue matches QR oracle on random correlated problems") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix F = testing::random_matrix(rng, 5, 3);
    const Matrix P = testing::random_spd(rng, 5, 0.3);
    const Vector y = testing::random_matrix(rng, 5, 1);
    const auto r = blue(F, P, y);
    const auto o = qr_oracle(F, P, y);
    CHECK((r.estimate - o.estimate).norm() < 1e-10 * (1 + o.estimate.norm()));
    CHECK((r.covariance - o.covariance).norm() < 1e-10 * (1 + o.covariance.norm()));
  }
}

TEST_CASE("blue rejects mismatched shapes") {
  CHECK_THROWS_AS(blue(Matrix::Ones(2, 1), Matrix::Identity(3, 3), vec({1, 2})),
                  Error);
}

TEST_CASE("selectors for a full two-node neighborhood") {
  const auto model = line_model(2, 1, {{0, 1}, {1, 0}});
  const auto sel = build_selectors(model);
  CHECK(sel[0].eta == Matrix::Identity(2, 2));
  CHECK(sel[0].one == Matrix::Ones(2, 1));
}

TEST_CASE("selectors for a self-only neighborhood") {
  const auto model = line_model(3, 1, {{1, 0}, {2, 0}});
  const auto sel = build_selectors(model);
  Matrix expected = Matrix::Zero(1, 3);
  expected(0, 1) = 1.0;
  CHECK(sel[1].eta == expected);
  CHECK(sel[1].one == Matrix::Ones(1, 1));
}

TEST_CASE("selectors with a gap in the neighborhood") {
  const auto model = line_model(3, 2, {{2, 0}});
  const auto sel = build_selectors(model);
  const Matrix& eta = sel[0].eta;
  REQUIRE(eta.rows() == 4);
  REQUIRE(eta.cols() == 6);
  Matrix expected = Matrix::Zero(4, 6);
  expected.block(0, 0, 2, 2) = Matrix::Identity(2, 2);
  expected.block(2, 4, 2, 2) = Matrix::Identity(2, 2);
  CHECK(eta == expected);
  Matrix sum = Matrix::Zero(4, 2);
  for (const Matrix& g : sel[0].gamma) sum += g;
  CHECK(sum == sel[0].one);
}

TEST_CASE("sum of gamma equals one on random models") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    testing::RandomModelSpec spec;
    spec.nodes = 2 + seed % 6;
    spec.dim = 1 + static_cast<Eigen::Index>(seed % 3);
    spec.extra_edges = static_cast<int>(seed % 4);
    const auto sel = build_selectors(testing::random_model(seed, spec));
    for (const auto& node : sel.per_node) {
      Matrix sum = Matrix::Zero(node.one.rows(), node.one.cols());
      for (const Matrix& g : node.gamma) sum += g;
      CHECK(sum == node.one);
    }
  }
}

TEST_CASE("neighborhood covariance gather equals eta P eta^T") {
  std::mt19937_64 rng(3);
  const auto model = testing::random_model(11, {4, 2, 1.0, true, 2});
  const auto sel = build_selectors(model);
  const GlobalCovariance P(testing::random_spd(rng, 8, 0.5), 4, 2);
  for (NodeIndex i = 0; i < 4; ++i) {
    const Matrix direct = sel[i].eta * P.P * sel[i].eta.transpose();
    CHECK((sel.neighborhood_covariance(i, P) - direct).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("fusion of one estimate returns it") {
  const auto model = line_model(1, 1, {});
  const auto sel = build_selectors(model);
  const GlobalCovariance P(Matrix::Constant(1, 1, 2.0), 1, 1);
  const std::vector<Vector> xs{vec({5})};
  const auto r = fuse_neighbors(0, sel, P, xs);
  CHECK(r.estimate(0) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(r.omega_tilde(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("fusion of two independent equal-variance estimates") {
  const auto model = line_model(2, 1, {{0, 1}, {1, 0}});
  const auto sel = build_selectors(model);
  const GlobalCovariance P(Matrix::Identity(2, 2), 2, 1);
  const std::vector<Vector> xs{vec({0}), vec({4})};
  const auto r = fuse_neighbors(0, sel, P, xs);
  CHECK(r.estimate(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.omega_tilde(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("fusion of fully correlated estimates uses the pseudo-inverse") {
  const auto model = line_model(2, 1, {{0, 1}, {1, 0}});
  const auto sel = build_selectors(model);
  const Matrix J = Matrix::Ones(2, 2);
  const GlobalCovariance P(J, 2, 1);
  const std::vector<Vector> xs{vec({3}), vec({3})};
  const auto r = fuse_neighbors(0, sel, P, xs);

  // Oracle: WLS on the Tikhonov-regularized joint covariance as delta -> 0.
  const Vector ones = Vector::Ones(2);
  const Vector y = vec({3, 3});
  double omega_limit = 0.0;
  double x_limit = 0.0;
  for (double delta : {1e-4, 1e-6, 1e-8}) {
    const Matrix W = (J + delta * Matrix::Identity(2, 2)).inverse();
    omega_limit = ones.dot(W * ones);
    x_limit = ones.dot(W * y) / omega_limit;
  }
  CHECK(std::abs(r.omega_tilde(0, 0) - omega_limit) < 1e-7);
  CHECK(std::abs(r.estimate(0) - x_limit) < 1e-7);
  // Frozen oracle output.
  CHECK(std::abs(r.omega_tilde(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(r.estimate(0) - 3.0) < 1e-12);
}

TEST_CASE("fused_information equals omega_tilde times the fused estimate") {
  std::mt19937_64 rng(5);
  const auto model = testing::random_model(4, {3, 2, 1.0, false, 1});
  const auto sel = build_selectors(model);
  const GlobalCovariance P(testing::random_spd(rng, 6, 0.5), 3, 2);
  for (NodeIndex i = 0; i < 3; ++i) {
    std::vector<Vector> xs;
    for (std::size_t k = 0; k < sel[i].neighbors.size(); ++k)
      xs.push_back(testing::random_matrix(rng, 2, 1));
    const auto fusion = neighborhood_fusion(sel, i, P);
    const auto fused = fuse_neighbors(i, sel, P, xs);
    const Vector info = fused_information(fusion, xs);
    CHECK((info - fused.omega_tilde * fused.estimate).norm() < 1e-10);
    Matrix sum = Matrix::Zero(2, 2);
    for (const Matrix& w : fusion.weights) sum += w;
    CHECK((sum - fusion.omega_tilde).norm() < 1e-12);
  }
}

TEST_CASE("fusion with zero information is singular") {
  const auto model = line_model(1, 2, {});
  const auto sel = build_selectors(model);
  const GlobalCovariance P(Matrix::Zero(2, 2), 1, 2);
  const std::vector<Vector> xs{vec({1, 1})};
  try {
    fuse_neighbors(0, sel, P, xs);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularInformation);
  }
}

TEST_CASE("correction with equal information") {
  const SensorSpec s{Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  const auto r = correct(vec({0}), Matrix::Identity(1, 1), s, vec({2}));
  CHECK(r.omega(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.estimate(0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("relay correction is the identity") {
  const SensorSpec relay{Matrix(0, 2), Matrix(0, 0)};
  Matrix omega(2, 2);
  omega << 2, 0.5, 0.5, 1;
  const auto r = correct(vec({1, -2}), omega, relay, Vector(0));
  CHECK((r.estimate - vec({1, -2})).norm() < 1e-14);
  CHECK((r.omega - omega).norm() == 0.0);
}

TEST_CASE("correction without prior information") {
  const SensorSpec s{Matrix::Identity(1, 1), Matrix::Constant(1, 1, 4.0)};
  const auto r = correct(vec({0}), Matrix::Zero(1, 1), s, vec({8}));
  CHECK(r.omega(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(r.estimate(0) == doctest::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("correct_information agrees with correct") {
  std::mt19937_64 rng(9);
  const SensorSpec s{testing::random_matrix(rng, 2, 3), testing::random_spd(rng, 2, 0.2)};
  const Matrix omega = testing::random_spd(rng, 3, 0.4);
  const Vector x = testing::random_matrix(rng, 3, 1);
  const Vector y = testing::random_matrix(rng, 2, 1);
  const auto a = correct(x, omega, s, y);
  const auto b = correct_information(omega * x, omega, s, y);
  CHECK((a.estimate - b.estimate).norm() < 1e-12);
  CHECK((a.omega - b.omega).norm() < 1e-12);
}

TEST_CASE("prediction") {
  CHECK(predict(vec({1, 2}), Matrix::Identity(2, 2)) == vec({1, 2}));
  Matrix shift(2, 2);
  shift << 0, 1, 0, 0;
  CHECK(predict(vec({1, 2}), shift) == vec({2, 0}));
  CHECK(predict(vec({3}), Matrix::Constant(1, 1, 2.0)) == vec({6}));
}

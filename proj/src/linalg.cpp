#include "dobs/linalg.hpp"

#include "dobs/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dobs {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::SingularInformation: return "SingularInformation";
    case ErrorKind::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UnknownEstimator: return "UnknownEstimator";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

double rank_threshold(double sigma_max, Eigen::Index dim,
                      const NumericOptions& opts) {
  const double eps = std::numeric_limits<double>::epsilon();
  return std::max(opts.pinv_rel_tol, static_cast<double>(dim) * eps) *
         sigma_max;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix pinv(const Matrix& m, const NumericOptions& opts) {
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double tau =
      rank_threshold(s.size() ? s(0) : 0.0, std::max(m.rows(), m.cols()), opts);
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > tau) inv(k) = 1.0 / s(k);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix pinv_symmetric(const Matrix& m, const NumericOptions& opts) {
  if (m.size() == 0) return Matrix(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  const Vector& lambda = eig.eigenvalues();
  const double sigma_max = lambda.cwiseAbs().maxCoeff();
  const double tau = rank_threshold(sigma_max, m.rows(), opts);
  Vector inv = Vector::Zero(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (std::abs(lambda(k)) > tau) inv(k) = 1.0 / lambda(k);
  }
  const Matrix& V = eig.eigenvectors();
  return symmetrize(V * inv.asDiagonal() * V.transpose());
}

Eigen::Index numerical_rank(const Eigen::MatrixXcd& m,
                            const NumericOptions& opts) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const Vector s = svd.singularValues();
  const double tau = rank_threshold(s(0), std::max(m.rows(), m.cols()), opts);
  return (s.array() > tau).count();
}

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

bool is_spd(const Matrix& m) {
  if (m.rows() != m.cols() || !is_symmetric(m)) return false;
  if (m.size() == 0) return true;
  if (!m.allFinite()) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m),
                                            Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0) > 0.0;
}

void require_spd(const Matrix& m, std::string_view what) {
  if (!is_spd(m)) {
    throw Error(ErrorKind::NotPositiveDefinite,
                std::string(what) + " is not symmetric positive definite");
  }
}

bool try_inverse_symmetric(const Matrix& m, Matrix& inverse,
                           const NumericOptions& opts) {
  if (m.size() == 0) {
    inverse = Matrix(0, 0);
    return true;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  const Vector& lambda = eig.eigenvalues();
  const double sigma_max = lambda.cwiseAbs().maxCoeff();
  if (!(sigma_max > 0.0)) return false;
  const double tau = rank_threshold(sigma_max, m.rows(), opts);
  if (lambda.cwiseAbs().minCoeff() <= tau) return false;
  const Matrix& V = eig.eigenvectors();
  inverse = symmetrize(V * lambda.cwiseInverse().asDiagonal() * V.transpose());
  return true;
}

double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> eig(m, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix kron(const Matrix& a, const Matrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

}  // namespace dobs

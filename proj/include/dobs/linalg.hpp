#pragma once

#include "dobs/types.hpp"

#include <string_view>

namespace dobs {

/// Tolerances shared by every rank decision in the library.
struct NumericOptions {
  /// Singular values below max(pinv_rel_tol, dim * eps) * sigma_max are zero.
  double pinv_rel_tol = 1e-12;
  /// Add ridge * I to a singular node information matrix instead of failing.
  bool ridge = false;
  double ridge_delta = 1e-9;
};

double rank_threshold(double sigma_max, Eigen::Index dim,
                      const NumericOptions& opts = {});

Matrix symmetrize(const Matrix& m);

/// Moore-Penrose pseudo-inverse via SVD.
Matrix pinv(const Matrix& m, const NumericOptions& opts = {});

/// Pseudo-inverse of a symmetric matrix via its eigendecomposition (the SVD
/// of a symmetric matrix). Result is symmetrized.
Matrix pinv_symmetric(const Matrix& m, const NumericOptions& opts = {});

Eigen::Index numerical_rank(const Eigen::MatrixXcd& m,
                            const NumericOptions& opts = {});

bool is_symmetric(const Matrix& m, double rel_tol = 1e-10);

/// Throws NotPositiveDefinite unless `m` is square, symmetric and has a
/// strictly positive smallest eigenvalue. `what` names the matrix in the message.
void require_spd(const Matrix& m, std::string_view what);

bool is_spd(const Matrix& m);

/// Inverse of a symmetric matrix; returns false when it is numerically
/// singular (smallest |eigenvalue| below the rank threshold).
bool try_inverse_symmetric(const Matrix& m, Matrix& inverse,
                           const NumericOptions& opts = {});

double spectral_radius(const Matrix& m);

Matrix kron(const Matrix& a, const Matrix& b);

}  // namespace dobs

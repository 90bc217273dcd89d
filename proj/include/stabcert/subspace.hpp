#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace stabcert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Orthonormal basis of a linear subspace of R^ambient_dim. The trivial
/// subspace is stored as an ambient_dim x 0 matrix, never as a zero column.
struct SubspaceBasis {
  Eigen::Index ambient_dim = 0;
  Mat basis;

  Eigen::Index dim() const { return basis.cols(); }
  bool trivial() const { return basis.cols() == 0; }

  /// ||B^T B - I||_F
  double orthonormality_error() const;

  static SubspaceBasis zero(Eigen::Index ambient_dim);
  static SubspaceBasis whole(Eigen::Index ambient_dim);
};

inline constexpr double kOrthTol = 1e-10;
inline constexpr double kDefaultAngleTol = 1e-8;
inline constexpr double kNoAngle = std::numeric_limits<double>::infinity();

/// max(rows, cols) * eps, the usual numerical-rank convention (relative to
/// the largest singular value).
double default_rank_tol(Eigen::Index rows, Eigen::Index cols);

/// Numerical null space of M: right singular vectors whose singular values
/// are <= rank_tol * sigma_max (everything when sigma_max == 0).
/// A negative rank_tol selects default_rank_tol.
SubspaceBasis kernel_basis(const Mat& M, double rank_tol = -1.0);

/// Orthonormal basis for span(vectors). `ambient_dim` is required when the
/// list may be empty; pass -1 to infer it from the first vector.
SubspaceBasis span_basis(const std::vector<Vec>& vectors, Eigen::Index ambient_dim = -1,
                         double rank_tol = -1.0);

/// Same as span_basis with the generators stored as matrix columns.
SubspaceBasis column_span(const Mat& generators, double rank_tol = -1.0);

struct Intersection {
  SubspaceBasis basis;
  /// Smallest principal angle in radians; kNoAngle when either side is trivial.
  double min_angle = kNoAngle;
  /// All principal angles, ascending.
  std::vector<double> angles;
};

/// Numerical intersection of U and V: the principal directions of U whose
/// principal angle to V is <= angle_tol.
Intersection intersection(const SubspaceBasis& U, const SubspaceBasis& V,
                          double angle_tol = kDefaultAngleTol);

}  // namespace stabcert

#include "stabcert/subspace.hpp"

#include "stabcert/error.hpp"

#include <algorithm>
#include <cmath>

namespace stabcert {

namespace {

void require_finite(const Mat& M, const char* what) {
  if (!M.allFinite()) throw Error(ErrorCode::InvalidInput, std::string(what) + " has non-finite entries");
}

double resolve_tol(double rank_tol, Eigen::Index rows, Eigen::Index cols) {
  return rank_tol < 0.0 ? default_rank_tol(rows, cols) : rank_tol;
}

}  // namespace

double SubspaceBasis::orthonormality_error() const {
  if (basis.cols() == 0) return 0.0;
  return (basis.transpose() * basis - Mat::Identity(basis.cols(), basis.cols())).norm();
}

SubspaceBasis SubspaceBasis::zero(Eigen::Index ambient_dim) {
  return {ambient_dim, Mat(ambient_dim, 0)};
}

SubspaceBasis SubspaceBasis::whole(Eigen::Index ambient_dim) {
  return {ambient_dim, Mat::Identity(ambient_dim, ambient_dim)};
}

double default_rank_tol(Eigen::Index rows, Eigen::Index cols) {
  return static_cast<double>(std::max<Eigen::Index>({rows, cols, 1})) *
         std::numeric_limits<double>::epsilon();
}

SubspaceBasis kernel_basis(const Mat& M, double rank_tol) {
  require_finite(M, "matrix");
  const Eigen::Index n = M.cols();
  if (n == 0) return SubspaceBasis::zero(0);
  if (M.rows() == 0) return SubspaceBasis::whole(n);
  const double tol = resolve_tol(rank_tol, M.rows(), M.cols());

  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  Eigen::Index rank = 0;
  if (smax > 0.0) {
    while (rank < s.size() && s(rank) > tol * smax) ++rank;
  }
  return {n, svd.matrixV().rightCols(n - rank)};
}

SubspaceBasis column_span(const Mat& generators, double rank_tol) {
  require_finite(generators, "generator matrix");
  const Eigen::Index n = generators.rows();
  if (generators.cols() == 0 || n == 0) return SubspaceBasis::zero(n);
  const double tol = resolve_tol(rank_tol, generators.rows(), generators.cols());

  Eigen::JacobiSVD<Mat> svd(generators, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  const double smax = s(0);
  Eigen::Index rank = 0;
  if (smax > 0.0) {
    while (rank < s.size() && s(rank) > tol * smax) ++rank;
  }
  return {n, svd.matrixU().leftCols(rank)};
}

SubspaceBasis span_basis(const std::vector<Vec>& vectors, Eigen::Index ambient_dim,
                         double rank_tol) {
  if (vectors.empty()) {
    if (ambient_dim < 0) throw Error(ErrorCode::InvalidInput, "empty span needs an ambient dimension");
    return SubspaceBasis::zero(ambient_dim);
  }
  const Eigen::Index n = ambient_dim < 0 ? vectors.front().size() : ambient_dim;
  Mat G(n, static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    if (vectors[j].size() != n) throw Error(ErrorCode::InvalidInput, "span vectors differ in dimension");
    G.col(static_cast<Eigen::Index>(j)) = vectors[j];
  }
  return column_span(G, rank_tol);
}

Intersection intersection(const SubspaceBasis& U, const SubspaceBasis& V, double angle_tol) {
  if (U.ambient_dim != V.ambient_dim) {
    throw Error(ErrorCode::InvalidInput, "subspaces live in different ambient spaces");
  }
  Intersection out;
  out.basis = SubspaceBasis::zero(U.ambient_dim);
  if (U.trivial() || V.trivial()) return out;

  // Principal directions of U come from the SVD of U^T V. Angles are measured
  // with atan2(sin, cos) so that tiny angles keep their relative accuracy.
  const Mat cross = U.basis.transpose() * V.basis;
  Eigen::JacobiSVD<Mat> svd(cross, Eigen::ComputeFullU);
  const Mat directions = U.basis * svd.matrixU();
  const Mat residual = directions - V.basis * (V.basis.transpose() * directions);

  const Eigen::Index p = directions.cols();
  std::vector<std::pair<double, Eigen::Index>> angles;
  angles.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) {
    const double cosine = (V.basis.transpose() * directions.col(i)).norm();
    const double sine = residual.col(i).norm();
    angles.emplace_back(std::atan2(sine, cosine), i);
  }
  std::sort(angles.begin(), angles.end());

  std::vector<Eigen::Index> kept;
  for (const auto& [theta, i] : angles) {
    out.angles.push_back(theta);
    if (theta <= angle_tol) kept.push_back(i);
  }
  out.min_angle = out.angles.front();
  Mat B(U.ambient_dim, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) B.col(static_cast<Eigen::Index>(k)) = directions.col(kept[k]);
  out.basis.basis = std::move(B);
  return out;
}

}  // namespace stabcert

#pragma once

#include "stabcert/solver.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace stabcert::oracle {

inline constexpr int kMaxEnumerateDim = 12;
inline constexpr int kMaxGridDim = 4;
inline constexpr int kMaxFeasibilityDim = 30;

/// Optimal face of an L1 least-squares problem as the list of its vertices.
struct L1Face {
  std::vector<Vec> vertices;
  double optimal_value = 0.0;
  long patterns_checked = 0;
};

/// Exhaustive 3^n sign-pattern solve. Throws TooLarge for n > 12.
L1Face l1_enumerate_solutions(const Mat& A, const Vec& b, double mu, const Vec& v = Vec());

/// Euclidean distance from x to the convex hull of the face vertices.
double face_distance(const L1Face& face, const Vec& x);

struct Box {
  Vec lower;
  Vec upper;
};

struct GridResult {
  Vec x;
  double value = 0.0;
};

/// Coarse grid, zooming pattern search, then coordinate-wise golden section.
/// Intended for convex objectives in at most four variables.
GridResult grid_refine_minimize(const std::function<double(const Vec&)>& f, const Box& box,
                                double xtol = 1e-7);

/// Span of differences of sampled points of d g*(z).
SubspaceBasis sampled_par_span(const Regularizer& reg, const Vec& z, int samples,
                               std::uint64_t seed, double tol_act = kDefaultTolAct);

enum class SignConstraint { Free, NonNeg, NonPos, Zero };

/// Nonzero d in ker A with the per-coordinate sign pattern, or nullopt.
/// Throws TooLarge for n > 30.
std::optional<Vec> sign_feasibility(const Mat& A, const std::vector<SignConstraint>& cone);

/// Lawson-Hanson nonnegative least squares: argmin ||Mx - r||, x >= 0.
Vec nnls(const Mat& M, const Vec& r, int max_iter = -1);

}  // namespace stabcert::oracle

#pragma once

#include "stabcert/regularizer.hpp"

#include <optional>
#include <vector>

namespace stabcert {

/// min (1/2mu)||Ax - b||^2 + g(x) - <v, x>
struct Instance {
  Mat A;
  Vec b;
  double mu = 1.0;
  Vec v;  // tilt; empty means zero
  Regularizer reg;

  Eigen::Index m() const { return A.rows(); }
  Eigen::Index n() const { return A.cols(); }
  Vec tilt() const { return v.size() == 0 ? Vec::Zero(n()) : v; }

  /// Throws InvalidInput on shape/positivity/finiteness violations.
  void validate() const;
};

struct SolverOptions {
  double tol = 1e-10;
  long max_iters = 200000;
  std::optional<Vec> warm_start;
  bool backtracking = false;
  bool record_history = false;
};

struct SolveResult {
  Vec x;
  Vec y;  // (b - A x) / mu
  Vec z;  // A^T y + v
  double primal_value = 0.0;
  double kkt_residual = 0.0;
  long iterations = 0;
  bool converged = false;
  long restarts = 0;
  /// Objective of each accepted iterate when SolverOptions::record_history.
  std::vector<double> history;
};

double objective(const Instance& inst, const Vec& x);

struct KktReport {
  double residual = 0.0;
  bool ok = false;
};

/// ||x - prox(x + z, 1)|| / (1 + ||x||) with z = A^T (b - Ax)/mu + v.
KktReport kkt_check(const Instance& inst, const Vec& x, double tol);

/// Dual quantities and residual at a given x, without iterating. `converged`
/// is set from the residual against tol.
SolveResult evaluate_at(const Instance& inst, const Vec& x, double tol = 1e-10);

/// Accelerated proximal gradient with monotone restart.
SolveResult solve(const Instance& inst, const SolverOptions& opts = {});

}  // namespace stabcert

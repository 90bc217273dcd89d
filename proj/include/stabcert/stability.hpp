#pragma once

#include "stabcert/solver.hpp"

#include <string>

namespace stabcert {

enum class Verdict { Stable, NotStable, Inconclusive };

const char* to_string(Verdict verdict);

struct CertTolerances {
  double tol_act = kDefaultTolAct;
  /// Principal angles at or below angle_band_low count as intersection;
  /// angles inside (low, high] are Inconclusive.
  double angle_band_low = 1e-6;
  double angle_band_high = 1e-4;
  /// Relative rank tolerance for the kernel; negative selects the default.
  double rank_tol = -1.0;
  /// Threshold used by complementarity and zero tests on x.
  double comp_tol = 1e-8;
  /// Multiple of tol_act below the activity threshold that is still "near".
  double activity_band_factor = 10.0;
};

struct Margins {
  double activity_margin = kNoAngle;
  double angle_margin = kNoAngle;
};

struct StabilityCertificate {
  Verdict verdict = Verdict::Inconclusive;
  Vec z_bar;
  SubspaceBasis ker_basis;
  SubspaceBasis par_basis;
  Eigen::Index intersection_dim = 0;
  double min_principal_angle = kNoAngle;
  ActiveStructure active;
  Margins margins;
  std::string reason;
};

/// Condition ker A cap par d g*(z) = {0} for a solved least-squares instance.
StabilityCertificate certify_ls(const Instance& inst, const SolveResult& result,
                                const CertTolerances& tols = {});

/// Smooth-plus-regularizer problem at a candidate point x_bar, described by
/// the Hessian and gradient of the smooth part there.
struct CompositeProblem {
  Mat hessian;
  Vec gradient;
  Vec x_bar;
  Regularizer reg;

  void validate() const;
};

/// Tilt/full stability condition ker H cap par d g*(-grad) = {0}.
StabilityCertificate certify_composite(const CompositeProblem& prob,
                                       const CertTolerances& tols = {});

/// Least-squares instance with A = H^{1/2}, b = A x_bar, mu = 1, v = -gradient.
/// Eigenvalues of H at or below the rank threshold are set to zero.
Instance sqrt_reduction(const CompositeProblem& prob, const CertTolerances& tols = {});

/// Exact uniqueness test ker A cap cone(d g*(z) - x) = {0}.
bool uniqueness_cone_test(const Instance& inst, const SolveResult& result,
                          const CertTolerances& tols = {});

struct Complementarity {
  bool dual_strict = false;  // x in ri d g*(z)
  bool strict = false;       // z in ri d g(x)
};

Complementarity complementarity(const Instance& inst, const SolveResult& result,
                                const CertTolerances& tols = {});

}  // namespace stabcert

#pragma once

#include "stabcert/subspace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stabcert {

enum class RegKind { L1, GroupL2, Nuclear, Zero };

const char* to_string(RegKind kind);

/// Describes g. The variable is a flat vector of length n; for Nuclear it is
/// the column-major vectorization of a rows x cols matrix (rows <= cols).
struct Regularizer {
  RegKind kind = RegKind::L1;
  std::vector<std::vector<int>> groups;  // GroupL2 only
  int rows = 0;                          // Nuclear only
  int cols = 0;                          // Nuclear only

  static Regularizer l1() { return {}; }
  static Regularizer zero() { return {RegKind::Zero, {}, 0, 0}; }
  static Regularizer group_l2(std::vector<std::vector<int>> groups);
  static Regularizer nuclear(int rows, int cols);

  /// Variable length implied by the descriptor, or nullopt for L1/Zero
  /// (which accept any n).
  std::optional<Eigen::Index> implied_dim() const;

  /// Throws InvalidInput if the descriptor is malformed or incompatible with n.
  void validate(Eigen::Index n) const;

  bool operator==(const Regularizer&) const = default;
};

inline constexpr double kDefaultTolAct = 1e-6;

/// Face data of the dual unit ball at z.
struct ActiveStructure {
  RegKind kind = RegKind::L1;
  Eigen::Index n = 0;
  double tol_act = kDefaultTolAct;
  Vec z;  // the dual point this structure was read from

  // L1: active coordinates and sign(z_i).
  std::vector<int> indices;
  std::vector<int> signs;

  // GroupL2: active group ids and unit directions z_J / ||z_J||.
  std::vector<int> active_groups;
  std::vector<Vec> directions;

  // Nuclear: multiplicity p of unit singular values and their vector blocks.
  int multiplicity = 0;
  Mat U1;  // rows x p
  Mat V1;  // cols x p

  /// Every activity level (|z_i|, ||z_J|| or sigma_i) that was NOT counted as
  /// active, kept so callers can see how close the face is to changing.
  std::vector<double> inactive_levels;
  /// Every activity level that was counted as active.
  std::vector<double> active_levels;

  /// Smallest 1 - level over the inactive levels (+inf if none).
  double activity_margin() const;
};

double value(const Regularizer& reg, const Vec& x);

/// argmin_w 0.5||w - u||^2 + tau g(w)
Vec prox(const Regularizer& reg, const Vec& u, double tau);

/// Dual norm; g* is the indicator of {dual_norm <= 1}. For Zero the dual ball
/// is {0}, reported as 0 at z == 0 and +inf elsewhere.
double dual_norm(const Regularizer& reg, const Vec& z);

/// prox of tau g* via the Moreau identity: u - tau prox(u / tau, 1 / tau).
Vec prox_conjugate(const Regularizer& reg, const Vec& u, double tau);

/// Throws InfeasibleDualPoint when dual_norm(z) > 1 + tol_act.
ActiveStructure active_structure(const Regularizer& reg, const Vec& z,
                                 double tol_act = kDefaultTolAct);

/// Orthonormal basis of par d g*(z), the span of the normal cone to the dual
/// ball at z.
SubspaceBasis par_subdiff_conjugate(const Regularizer& reg, const ActiveStructure& act);

/// x in d g*(z) (equivalently z in d g(x)), tested by Fenchel-Young.
bool subgradient_check(const Regularizer& reg, const Vec& x, const Vec& z, double tol);

/// (1 - t) anchor + t r with r a canonical point of ri d g*(z).
/// Throws NotASubgradientPoint if anchor is not in d g*(act.z).
Vec ri_point(const Regularizer& reg, const ActiveStructure& act, const Vec& anchor, double t,
             double tol = 1e-8);

/// Column-major reshape helpers for Nuclear.
Mat as_matrix(const Regularizer& reg, const Vec& x);
Vec as_vector(const Mat& X);

}  // namespace stabcert

#pragma once

#include "stabcert/solver.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace stabcert {

/// Which data blocks a Lipschitz probe perturbs.
struct ProbeTargets {
  bool A = true;
  bool b = true;
  bool mu = true;
};

struct MultiplicityWitness {
  Vec x1;
  Vec x2;
  double objective1 = 0.0;
  double objective2 = 0.0;
  double kkt1 = 0.0;
  double kkt2 = 0.0;
};

struct MultiplicityResult {
  bool found = false;
  std::optional<MultiplicityWitness> witness;
};

struct NecessityStep {
  double t = 0.0;
  Vec b_t;
  Vec x_t;
  double z_invariance_error = 0.0;  // ||(1/mu) A^T (b_t - A x_t) + v - z||
  bool x_t_is_solution = false;
  bool second_solution_found = false;
  std::optional<MultiplicityWitness> witness;
};

struct PerturbReport {
  std::uint64_t seed = 0;
  std::vector<double> radius_schedule;
  /// One entry per radius > 0; NaN when every trial at that radius was skipped.
  std::vector<double> max_quotient_per_radius;
  long trials = 0;
  long skipped_trials = 0;
  bool degraded = false;  // more than 20% of trials skipped
  MultiplicityResult multiplicity;
  std::vector<NecessityStep> necessity;

  /// max over radii of the radius-wise max quotient divided by the min; 1 when
  /// all are zero, +inf when only the minimum is zero, NaN when empty.
  double quotient_ratio() const;
};

inline constexpr double kTiltEps = 1e-6;
inline constexpr double kWitnessSeparation = 1e-4;
inline constexpr double kWitnessKkt = 1e-8;

/// Independent random stream for trial `index` of stream `stream` under `seed`.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

struct ProbeOptions {
  SolverOptions solver;
  /// 0 = hardware concurrency.
  unsigned threads = 1;
};

PerturbReport lipschitz_probe(const Instance& inst, const std::vector<double>& radii,
                              int pairs_per_radius, std::uint64_t seed,
                              ProbeTargets which = {}, const ProbeOptions& opts = {});

/// Looks for a second solution by solving slightly tilted copies of inst and
/// pulling each tilted solution back onto the untilted solution set. A
/// returned witness is verified; absence of one proves nothing.
MultiplicityResult multiplicity_probe(const Instance& inst, const Vec& x_bar, int directions,
                                      std::uint64_t seed, const SolverOptions& opts = {});

/// Convenience overload that solves inst first.
MultiplicityResult multiplicity_probe(const Instance& inst, int directions, std::uint64_t seed,
                                      const SolverOptions& opts = {});

/// b_t = b + A(x_t - x) with x_t on the segment from x to an ri point of
/// d g*(z); checks x_t solves (A, b_t, mu) and probes it for multiplicity.
std::vector<NecessityStep> necessity_construction(const Instance& inst,
                                                  const SolveResult& result,
                                                  const std::vector<double>& t_schedule,
                                                  int directions, std::uint64_t seed,
                                                  const SolverOptions& opts = {},
                                                  double tol_act = kDefaultTolAct);

}  // namespace stabcert

#include "stabcert/perturb.hpp"

#include "stabcert/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace stabcert {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vec unit_gaussian(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> normal;
  Vec c(d);
  do {
    for (Eigen::Index i = 0; i < d; ++i) c(i) = normal(rng);
  } while (c.norm() == 0.0);
  return c / c.norm();
}

// Uniform sample of the radius-r Euclidean ball in R^d.
Vec ball_sample(std::mt19937_64& rng, Eigen::Index d, double r) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Vec dir = unit_gaussian(rng, d);
  return r * std::pow(unif(rng), 1.0 / static_cast<double>(d)) * dir;
}

struct Perturbed {
  Instance inst;
  bool valid = true;
};

Perturbed apply(const Instance& base, const Vec& delta, const ProbeTargets& which) {
  Perturbed out{base, true};
  Eigen::Index k = 0;
  if (which.A) {
    out.inst.A += Eigen::Map<const Mat>(delta.data() + k, base.m(), base.n());
    k += base.A.size();
  }
  if (which.b) {
    out.inst.b += delta.segment(k, base.m());
    k += base.m();
  }
  if (which.mu) {
    const double factor = 1.0 + delta(k);
    if (!(factor > 1e-3)) out.valid = false;
    out.inst.mu = base.mu * factor;
  }
  return out;
}

double parameter_distance(const Instance& p, const Instance& q) {
  return (p.A - q.A).norm() + (p.b - q.b).norm() + std::abs(p.mu - q.mu);
}

template <class Fn>
void run_parallel(long count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<long>(threads, std::max<long>(count, 1)));
  if (threads <= 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (long i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

double PerturbReport::quotient_ratio() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double q : max_quotient_per_radius) {
    if (std::isnan(q)) continue;
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  if (hi < lo) return kNaN;
  if (hi == 0.0) return 1.0;
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

PerturbReport lipschitz_probe(const Instance& inst, const std::vector<double>& radii,
                              int pairs_per_radius, std::uint64_t seed, ProbeTargets which,
                              const ProbeOptions& opts) {
  inst.validate();
  PerturbReport report;
  report.seed = seed;
  for (double r : radii) {
    if (r > 0.0) report.radius_schedule.push_back(r);
  }
  if (report.radius_schedule.empty() || pairs_per_radius <= 0) return report;

  const SolveResult nominal = solve(inst, opts.solver);
  if (!nominal.converged) throw Error(ErrorCode::RefusedUnconverged, "nominal instance did not converge");
  SolverOptions inner = opts.solver;
  inner.warm_start = nominal.x;

  const Eigen::Index dim = (which.A ? inst.A.size() : 0) + (which.b ? inst.m() : 0) + (which.mu ? 1 : 0);
  const long per_radius = pairs_per_radius;
  const long count = static_cast<long>(report.radius_schedule.size()) * per_radius;
  std::vector<double> quotients(static_cast<std::size_t>(count), kNaN);

  if (dim > 0) {
    run_parallel(count, opts.threads, [&](long trial) {
      const long ri = trial / per_radius;
      const long k = trial % per_radius;
      std::mt19937_64 rng(trial_seed(seed, static_cast<std::uint64_t>(ri), static_cast<std::uint64_t>(k)));
      const double r = report.radius_schedule[static_cast<std::size_t>(ri)];
      const Perturbed p = apply(inst, ball_sample(rng, dim, r), which);
      const Perturbed q = apply(inst, ball_sample(rng, dim, r), which);
      if (!p.valid || !q.valid) return;
      const double dist = parameter_distance(p.inst, q.inst);
      if (!(dist > 0.0)) return;
      const SolveResult sp = solve(p.inst, inner);
      const SolveResult sq = solve(q.inst, inner);
      if (!sp.converged || !sq.converged) return;
      quotients[static_cast<std::size_t>(trial)] = (sp.x - sq.x).norm() / dist;
    });
  }

  report.trials = count;
  for (std::size_t ri = 0; ri < report.radius_schedule.size(); ++ri) {
    double best = kNaN;
    for (long k = 0; k < per_radius; ++k) {
      const double q = quotients[ri * static_cast<std::size_t>(per_radius) + static_cast<std::size_t>(k)];
      if (std::isnan(q)) {
        ++report.skipped_trials;
      } else if (std::isnan(best) || q > best) {
        best = q;
      }
    }
    report.max_quotient_per_radius.push_back(best);
  }
  report.degraded = report.skipped_trials * 5 > report.trials;
  return report;
}

MultiplicityResult multiplicity_probe(const Instance& inst, const Vec& x_bar, int directions,
                                      std::uint64_t seed, const SolverOptions& opts) {
  inst.validate();
  MultiplicityResult out;
  const KktReport base_kkt = kkt_check(inst, x_bar, kWitnessKkt);
  if (!base_kkt.ok) return out;
  const double base_value = objective(inst, x_bar);
  const Vec tilt = inst.tilt();

  SolverOptions from_base = opts;
  from_base.warm_start = x_bar;
  for (int k = 0; k < directions; ++k) {
    std::mt19937_64 rng(trial_seed(seed, 0x7117ULL, static_cast<std::uint64_t>(k)));
    const Vec c = unit_gaussian(rng, inst.n());
    for (double sign : {1.0, -1.0}) {
      Instance tilted = inst;
      tilted.v = tilt + sign * kTiltEps * c;
      const SolveResult xc = solve(tilted, from_base);
      if (!xc.converged) continue;
      // Pull the tilted solution back onto the untilted solution set.
      SolverOptions back = opts;
      back.warm_start = xc.x;
      const SolveResult xb = solve(inst, back);
      if (!xb.converged) continue;
      const KktReport kkt = kkt_check(inst, xb.x, kWitnessKkt);
      const double value = objective(inst, xb.x);
      if (!kkt.ok || (xb.x - x_bar).norm() <= kWitnessSeparation) continue;
      if (std::abs(value - base_value) > 1e-8 * (1.0 + std::abs(base_value))) continue;
      out.found = true;
      out.witness = MultiplicityWitness{x_bar, xb.x, base_value, value, base_kkt.residual, kkt.residual};
      return out;
    }
  }
  return out;
}

MultiplicityResult multiplicity_probe(const Instance& inst, int directions, std::uint64_t seed,
                                      const SolverOptions& opts) {
  const SolveResult base = solve(inst, opts);
  if (!base.converged) throw Error(ErrorCode::RefusedUnconverged, "base solve did not converge");
  return multiplicity_probe(inst, base.x, directions, seed, opts);
}

std::vector<NecessityStep> necessity_construction(const Instance& inst, const SolveResult& result,
                                                  const std::vector<double>& t_schedule,
                                                  int directions, std::uint64_t seed,
                                                  const SolverOptions& opts, double tol_act) {
  inst.validate();
  if (!result.converged) throw Error(ErrorCode::RefusedUnconverged, "solve did not converge");
  const Vec z = inst.A.transpose() * ((inst.b - inst.A * result.x) / inst.mu) + inst.tilt();
  const ActiveStructure act = active_structure(inst.reg, z, tol_act);

  std::vector<NecessityStep> steps;
  for (std::size_t k = 0; k < t_schedule.size(); ++k) {
    NecessityStep step;
    step.t = t_schedule[k];
    step.x_t = ri_point(inst.reg, act, result.x, step.t, tol_act);
    step.b_t = inst.b + inst.A * (step.x_t - result.x);

    Instance perturbed = inst;
    perturbed.b = step.b_t;
    const Vec z_t = inst.A.transpose() * ((step.b_t - inst.A * step.x_t) / inst.mu) + inst.tilt();
    step.z_invariance_error = (z_t - z).norm();
    step.x_t_is_solution = kkt_check(perturbed, step.x_t, kWitnessKkt).ok;

    const MultiplicityResult mult =
        multiplicity_probe(perturbed, step.x_t, directions, trial_seed(seed, 0x4e43ULL, k), opts);
    step.second_solution_found = mult.found;
    step.witness = mult.witness;
    steps.push_back(std::move(step));
  }
  return steps;
}

}  // namespace stabcert

#include "stabcert/solver.hpp"

#include "stabcert/error.hpp"

#include <cmath>

namespace stabcert {

void Instance::validate() const {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw Error(ErrorCode::InvalidInput, "mu must be positive and finite");
  if (b.size() != A.rows()) throw Error(ErrorCode::InvalidInput, "b length does not match A rows");
  if (v.size() != 0 && v.size() != A.cols()) throw Error(ErrorCode::InvalidInput, "v length does not match A cols");
  if (!A.allFinite() || !b.allFinite() || !v.allFinite()) {
    throw Error(ErrorCode::InvalidInput, "instance has non-finite entries");
  }
  reg.validate(A.cols());
}

namespace {

struct Smooth {
  const Instance& inst;
  Vec tilt;

  double value(const Vec& x) const {
    return (inst.A * x - inst.b).squaredNorm() / (2.0 * inst.mu) - tilt.dot(x);
  }
  Vec gradient(const Vec& x) const {
    return inst.A.transpose() * (inst.A * x - inst.b) / inst.mu - tilt;
  }
};

double fixed_point_residual(const Regularizer& reg, const Vec& x, const Vec& z) {
  return (x - prox(reg, x + z, 1.0)).norm() / (1.0 + x.norm());
}

}  // namespace

double objective(const Instance& inst, const Vec& x) {
  return (inst.A * x - inst.b).squaredNorm() / (2.0 * inst.mu) + value(inst.reg, x) -
         inst.tilt().dot(x);
}

SolveResult evaluate_at(const Instance& inst, const Vec& x, double tol) {
  SolveResult r;
  r.x = x;
  r.y = (inst.b - inst.A * x) / inst.mu;
  r.z = inst.A.transpose() * r.y + inst.tilt();
  r.primal_value = objective(inst, x);
  r.kkt_residual = fixed_point_residual(inst.reg, x, r.z);
  r.converged = r.kkt_residual <= tol;
  return r;
}

KktReport kkt_check(const Instance& inst, const Vec& x, double tol) {
  if (x.size() != inst.n()) throw Error(ErrorCode::InvalidInput, "x length does not match A cols");
  const SolveResult r = evaluate_at(inst, x, tol);
  return {r.kkt_residual, r.converged};
}

SolveResult solve(const Instance& inst, const SolverOptions& opts) {
  inst.validate();
  const Eigen::Index n = inst.n();
  const Smooth smooth{inst, inst.tilt()};

  double lipschitz = 0.0;
  if (inst.m() > 0 && n > 0) {
    const double smax = Eigen::JacobiSVD<Mat>(inst.A).singularValues()(0);
    lipschitz = smax * smax / inst.mu;
  }
  if (!(lipschitz > 0.0)) lipschitz = 1.0;

  Vec x = Vec::Zero(n);
  if (opts.warm_start) {
    if (opts.warm_start->size() != n) throw Error(ErrorCode::InvalidInput, "warm start length mismatch");
    x = *opts.warm_start;
  }
  const auto F = [&](const Vec& w) { return smooth.value(w) + value(inst.reg, w); };

  // One forward-backward step from `from`; with backtracking, L grows until
  // the quadratic upper model holds at the candidate.
  const auto step = [&](const Vec& from) {
    const Vec grad = smooth.gradient(from);
    for (;;) {
      Vec cand = prox(inst.reg, from - grad / lipschitz, 1.0 / lipschitz);
      if (!opts.backtracking) return cand;
      const Vec d = cand - from;
      const double model = smooth.value(from) + grad.dot(d) + 0.5 * lipschitz * d.squaredNorm();
      if (smooth.value(cand) <= model + 1e-14 * (1.0 + std::abs(model))) return cand;
      lipschitz *= 2.0;
    }
  };

  SolveResult out;
  Vec y = x;
  double t = 1.0;
  double fx = F(x);
  if (opts.record_history) out.history.push_back(fx);

  SolveResult at = evaluate_at(inst, x, opts.tol);
  long iter = 0;
  while (!at.converged && iter < opts.max_iters) {
    ++iter;
    Vec x_new = step(y);
    double f_new = F(x_new);
    if (f_new > fx) {
      // Monotone restart: drop momentum and take a plain step from x.
      ++out.restarts;
      t = 1.0;
      x_new = step(x);
      f_new = F(x_new);
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_new + ((t - 1.0) / t_new) * (x_new - x);
    x = std::move(x_new);
    fx = f_new;
    t = t_new;
    if (opts.record_history) out.history.push_back(fx);
    at = evaluate_at(inst, x, opts.tol);
  }

  out.x = std::move(at.x);
  out.y = std::move(at.y);
  out.z = std::move(at.z);
  out.primal_value = at.primal_value;
  out.kkt_residual = at.kkt_residual;
  out.converged = at.converged;
  out.iterations = iter;
  return out;
}

}  // namespace stabcert

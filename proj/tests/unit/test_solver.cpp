#include "stabcert/error.hpp"
#include "stabcert/oracle.hpp"
#include "stabcert/solver.hpp"

#include "../support/generators.hpp"

#include <doctest.h>

using namespace stabcert;

namespace {

Instance make(const Mat& A, const Vec& b, double mu, Regularizer reg) {
  Instance inst;
  inst.A = A;
  inst.b = b;
  inst.mu = mu;
  inst.reg = std::move(reg);
  return inst;
}

Instance e1() { return make((Mat(1, 2) << 1, 1).finished(), Vec::Constant(1, 2.0), 1.0, Regularizer::l1()); }
Instance e2() { return make((Mat(1, 2) << 1, 2).finished(), Vec::Constant(1, 3.0), 1.0, Regularizer::l1()); }

}  // namespace

TEST_CASE("identity design reduces to soft thresholding") {
  const SolveResult r = solve(make(Mat::Identity(2, 2), Eigen::Vector2d(3, 0.5), 1.0, Regularizer::l1()));
  REQUIRE(r.converged);
  CHECK((r.x - Eigen::Vector2d(2, 0)).norm() < 1e-9);
}

TEST_CASE("single-row L1 instance with a unique solution") {
  const Instance inst = e2();
  const SolveResult r = solve(inst);
  REQUIRE(r.converged);
  CHECK((r.x - Eigen::Vector2d(0, 1.25)).norm() < 1e-8);
  CHECK((r.z - Eigen::Vector2d(0.5, 1)).norm() < 1e-8);
  CHECK(r.kkt_residual <= 1e-10);

  // Independent check: brute-force minimization of the 2-variable objective.
  const auto f = [&](const Vec& x) { return objective(inst, x); };
  const auto grid = oracle::grid_refine_minimize(f, {Eigen::Vector2d(-3, -3), Eigen::Vector2d(3, 3)}, 1e-9);
  CHECK((grid.x - r.x).norm() < 1e-6);
}

TEST_CASE("identity design with groups reduces to block soft thresholding") {
  const Instance inst = make(Mat::Identity(3, 3), Eigen::Vector3d(3, 4, 0.5), 1.0, Regularizer::group_l2({{0, 1}, {2}}));
  const SolveResult r = solve(inst);
  REQUIRE(r.converged);
  CHECK((r.x - Eigen::Vector3d(2.4, 3.2, 0)).norm() < 1e-9);
  CHECK((r.z - Eigen::Vector3d(0.6, 0.8, 0.5)).norm() < 1e-9);
}

TEST_CASE("kkt_check") {
  CHECK(kkt_check(e2(), Eigen::Vector2d(0, 1.25), 1e-8).ok);
  const Instance id = make(Mat::Identity(2, 2), Eigen::Vector2d(3, 0.5), 1.0, Regularizer::l1());
  CHECK_FALSE(kkt_check(id, Vec::Zero(2), 1e-8).ok);
  // A fixed point of the forward-backward map passes.
  const SolveResult r = solve(e1());
  CHECK(kkt_check(e1(), r.x, 1e-9).ok);
}

TEST_CASE("objective values") {
  const Instance inst = e2();
  CHECK(objective(inst, Vec::Zero(2)) == doctest::Approx(4.5));
  CHECK(objective(inst, Eigen::Vector2d(0, 1.25)) == doctest::Approx(1.375));
  const Instance flat = e1();
  CHECK(objective(flat, Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(objective(flat, Eigen::Vector2d(0.8, 0.2))));
  CHECK(objective(flat, Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(1.5));
}

TEST_CASE("non-convergence is reported, invalid input throws") {
  SolverOptions opts;
  opts.max_iters = 1;
  const SolveResult r = solve(e2(), opts);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 1);

  Instance bad = e2();
  bad.mu = 0.0;
  CHECK_THROWS_AS(solve(bad), Error);
  bad = e2();
  bad.b = Eigen::Vector2d(1, 2);
  CHECK_THROWS_AS(solve(bad), Error);
}

TEST_CASE("backtracking reaches the same solution") {
  SolverOptions opts;
  opts.backtracking = true;
  const SolveResult r = solve(e2(), opts);
  REQUIRE(r.converged);
  CHECK((r.x - Eigen::Vector2d(0, 1.25)).norm() < 1e-8);
}

TEST_CASE("property: dual relation, monotone objective, convergence") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Instance inst = stabcert::testing::random_instance(seed);
    SolverOptions opts;
    opts.record_history = true;
    const SolveResult r = solve(inst, opts);
    REQUIRE(r.converged);
    CHECK((-inst.mu * r.y - (inst.A * r.x - inst.b)).norm() < 1e-12 * (1.0 + inst.b.norm()));
    CHECK((r.z - inst.A.transpose() * r.y).norm() < 1e-12 * (1.0 + r.z.norm()));
    for (std::size_t k = 1; k < r.history.size(); ++k) {
      CHECK(r.history[k] <= r.history[k - 1] + 1e-12 * (1.0 + std::abs(r.history[k - 1])));
    }
  }
}

TEST_CASE("property: solution-set flatness across warm starts") {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Instance inst = stabcert::testing::random_l1_instance(seed);
    const SolveResult a = solve(inst);
    SolverOptions opts;
    opts.warm_start = stabcert::testing::gaussian_vec(rng, inst.n());
    const SolveResult b = solve(inst, opts);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK((inst.A * a.x - inst.A * b.x).norm() <= 1e-6 * (1.0 + inst.b.norm()));
    CHECK(std::abs(value(inst.reg, a.x) - value(inst.reg, b.x)) <= 1e-6 * (1.0 + value(inst.reg, a.x)));
  }
}

TEST_CASE("property: tilt equals a shifted prox on the untilted problem") {
  std::mt19937_64 rng(6);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Instance inst = stabcert::testing::random_instance(1000 + seed);
    inst.v = 0.3 * stabcert::testing::gaussian_vec(rng, inst.n());
    const SolveResult r = solve(inst);
    if (!r.converged) continue;  // tilt may leave the problem unbounded

    // Plain forward-backward on the untilted smooth part with the prox of
    // g - <v, .>, which is prox_g(u + tau v, tau).
    const double smax = Eigen::JacobiSVD<Mat>(inst.A).singularValues()(0);
    const double step = inst.mu / (smax * smax);
    Vec x = Vec::Zero(inst.n());
    for (int k = 0; k < 200000; ++k) {
      const Vec grad = inst.A.transpose() * (inst.A * x - inst.b) / inst.mu;
      const Vec next = prox(inst.reg, x - step * grad + step * inst.v, step);
      const double move = (next - x).norm();
      x = next;
      if (move < 1e-14) break;
    }
    CHECK(std::abs(objective(inst, x) - r.primal_value) < 1e-8 * (1.0 + std::abs(r.primal_value)));
    CHECK((inst.A * x - inst.A * r.x).norm() < 1e-5 * (1.0 + inst.b.norm()));

    if (inst.reg.kind == RegKind::L1) {
      const oracle::L1Face face = oracle::l1_enumerate_solutions(inst.A, inst.b, inst.mu, inst.v);
      CHECK(oracle::face_distance(face, r.x) < 1e-6);
    }
  }
}

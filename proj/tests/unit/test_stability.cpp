#include "stabcert/error.hpp"
#include "stabcert/oracle.hpp"
#include "stabcert/stability.hpp"

#include "../support/generators.hpp"

#include <doctest.h>

#include <cmath>

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
Instance e3() {
  return make(Mat::Identity(3, 3), Eigen::Vector3d(3, 4, 0.5), 1.0, Regularizer::group_l2({{0, 1}, {2}}));
}
Instance e4() { return make(Mat::Identity(4, 4), Eigen::Vector4d(3, 0, 0, 0.5), 1.0, Regularizer::nuclear(2, 2)); }

CompositeProblem quadratic_composite(const Instance& inst, const Vec& x) {
  return {inst.A.transpose() * inst.A / inst.mu, inst.A.transpose() * (inst.A * x - inst.b) / inst.mu, x, inst.reg};
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("E1: flat solution segment is not stable") {
  const Instance inst = e1();
  const SolveResult r = solve(inst);
  REQUIRE(r.converged);
  CHECK(std::abs(r.x.sum() - 1.0) < 1e-8);
  CHECK(r.x.minCoeff() >= -1e-10);
  const StabilityCertificate c = certify_ls(inst, r);
  CHECK(c.verdict == Verdict::NotStable);
  CHECK(c.intersection_dim == 1);
  CHECK(c.par_basis.dim() == 2);
  CHECK(c.ker_basis.dim() == 1);
  CHECK((c.z_bar - Eigen::Vector2d(1, 1)).norm() < 1e-8);
  CHECK_FALSE(uniqueness_cone_test(inst, r));
}

TEST_CASE("E2: unique solution with principal angle arccos(1/sqrt5)") {
  const Instance inst = e2();
  const SolveResult r = solve(inst);
  const StabilityCertificate c = certify_ls(inst, r);
  CHECK(c.verdict == Verdict::Stable);
  CHECK(c.intersection_dim == 0);
  CHECK(std::abs(c.min_principal_angle - std::acos(1.0 / std::sqrt(5.0))) < 1e-6);
  CHECK(uniqueness_cone_test(inst, r));
  const Complementarity comp = complementarity(inst, r);
  CHECK(comp.dual_strict);
  CHECK(comp.strict);
}

TEST_CASE("E3 and E4: injective designs are stable") {
  for (const Instance& inst : {e3(), e4()}) {
    const SolveResult r = solve(inst);
    const StabilityCertificate c = certify_ls(inst, r);
    CHECK(c.verdict == Verdict::Stable);
    CHECK(std::isinf(c.min_principal_angle));
    CHECK(uniqueness_cone_test(inst, r));
  }
  const StabilityCertificate c3 = certify_ls(e3(), solve(e3()));
  REQUIRE(c3.par_basis.dim() == 1);
  CHECK((c3.par_basis.basis.col(0).cwiseAbs() - Eigen::Vector3d(0.6, 0.8, 0)).norm() < 1e-8);

  const SolveResult r4 = solve(e4());
  CHECK((r4.x - Eigen::Vector4d(2, 0, 0, 0)).norm() < 1e-9);
  const StabilityCertificate c4 = certify_ls(e4(), r4);
  CHECK(c4.active.multiplicity == 1);
  CHECK(c4.par_basis.dim() == 1);
  const Complementarity comp = complementarity(e4(), r4);
  CHECK(comp.dual_strict);
  CHECK(comp.strict);
}

TEST_CASE("complementarity fails on a boundary face") {
  // x = (0, 1.25) paired with z = (1, 1): coordinate 0 is active but zero.
  Instance inst = make(Mat::Identity(2, 2), Eigen::Vector2d(1, 2.25), 1.0, Regularizer::l1());
  const SolveResult r = evaluate_at(inst, Eigen::Vector2d(0, 1.25));
  REQUIRE(r.converged);
  REQUIRE((r.z - Eigen::Vector2d(1, 1)).norm() < 1e-14);
  const Complementarity comp = complementarity(inst, r);
  CHECK_FALSE(comp.dual_strict);
  CHECK_FALSE(comp.strict);
}

TEST_CASE("certification refuses unconverged solves") {
  SolverOptions opts;
  opts.max_iters = 1;
  const SolveResult r = solve(e2(), opts);
  CHECK(code_of([&] { certify_ls(e2(), r); }) == ErrorCode::RefusedUnconverged);
  CHECK(code_of([&] { uniqueness_cone_test(e2(), r); }) == ErrorCode::RefusedUnconverged);
  CHECK(code_of([&] { complementarity(e2(), r); }) == ErrorCode::RefusedUnconverged);
}

TEST_CASE("composite certificate on the quadratic of E2 matches the least-squares one") {
  const Instance inst = e2();
  const SolveResult r = solve(inst);
  const CompositeProblem prob = quadratic_composite(inst, r.x);
  const StabilityCertificate c = certify_composite(prob);
  const StabilityCertificate ls = certify_ls(inst, r);
  CHECK(c.verdict == Verdict::Stable);
  CHECK(c.verdict == ls.verdict);
  CHECK(c.intersection_dim == ls.intersection_dim);

  const Instance reduced = sqrt_reduction(prob);
  const SolveResult at = evaluate_at(reduced, r.x, 1e-8);
  REQUIRE(at.converged);
  CHECK(certify_ls(reduced, at).verdict == Verdict::Stable);
}

TEST_CASE("quartic example: vanishing Hessian with g = 0 fails the condition") {
  const CompositeProblem prob{Mat::Zero(1, 1), Vec::Zero(1), Vec::Zero(1), Regularizer::zero()};
  const StabilityCertificate c = certify_composite(prob);
  CHECK(c.verdict == Verdict::NotStable);
  CHECK(c.intersection_dim == 1);
}

TEST_CASE("identity Hessian certifies any stationary point") {
  const Regularizer l1 = Regularizer::l1();
  const CompositeProblem prob{Mat::Identity(2, 2), Eigen::Vector2d(-1, 0.4), Eigen::Vector2d(3, 0), l1};
  CHECK(certify_composite(prob).verdict == Verdict::Stable);
}

TEST_CASE("composite input errors") {
  const Regularizer l1 = Regularizer::l1();
  const CompositeProblem not_stationary{Mat::Identity(2, 2), Eigen::Vector2d(-0.5, 0), Eigen::Vector2d(3, 0), l1};
  CHECK(code_of([&] { certify_composite(not_stationary); }) == ErrorCode::NotAStationaryPoint);
  const CompositeProblem indefinite{Eigen::Matrix2d(Eigen::Vector2d(1, -1).asDiagonal()), Vec::Zero(2), Vec::Zero(2), l1};
  CHECK(code_of([&] { certify_composite(indefinite); }) == ErrorCode::InvalidInput);
  Mat asym = Mat::Identity(2, 2);
  asym(0, 1) = 0.1;
  const CompositeProblem nonsym{asym, Vec::Zero(2), Vec::Zero(2), l1};
  CHECK(code_of([&] { certify_composite(nonsym); }) == ErrorCode::InvalidInput);
}

TEST_CASE("square-root reduction") {
  const Regularizer zero = Regularizer::zero();
  const CompositeProblem diag{Eigen::Matrix2d(Eigen::Vector2d(4, 0).asDiagonal()), Vec::Zero(2), Vec::Zero(2), zero};
  const Instance inst = sqrt_reduction(diag);
  CHECK((inst.A - Eigen::Matrix2d(Eigen::Vector2d(2, 0).asDiagonal())).norm() < 1e-14);
  CHECK(inst.mu == 1.0);

  const CompositeProblem flat{Mat::Zero(2, 2), Vec::Zero(2), Vec::Zero(2), zero};
  const Instance z = sqrt_reduction(flat);
  CHECK(z.A.norm() == 0.0);
  CHECK(kernel_basis(z.A).dim() == 2);
}

TEST_CASE("property: certificate invariants on random instances") {
  std::mt19937_64 rng(31);
  int stable = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Instance inst = stabcert::testing::random_instance(2000 + seed);
    const SolveResult r = solve(inst);
    REQUIRE(r.converged);
    const StabilityCertificate c = certify_ls(inst, r);

    // Orthogonal transformation of the data leaves everything unchanged.
    const Mat Q = stabcert::testing::random_orthogonal(rng, inst.m());
    Instance rotated = inst;
    rotated.A = Q * inst.A;
    rotated.b = Q * inst.b;
    const StabilityCertificate cq = certify_ls(rotated, solve(rotated));
    CHECK(cq.verdict == c.verdict);
    CHECK(cq.intersection_dim == c.intersection_dim);
    CHECK(cq.par_basis.dim() == c.par_basis.dim());

    // Quadratic composite gives the same answer.
    const StabilityCertificate cc = certify_composite(quadratic_composite(inst, r.x));
    CHECK(cc.verdict == c.verdict);
    CHECK(cc.intersection_dim == c.intersection_dim);

    const bool unique = uniqueness_cone_test(inst, r);
    const Complementarity comp = complementarity(inst, r);
    if (c.verdict == Verdict::Stable) {
      ++stable;
      CHECK(unique);
    }
    if (comp.dual_strict && unique) CHECK(c.verdict != Verdict::NotStable);

    if (kernel_basis(inst.A).trivial()) CHECK(c.verdict == Verdict::Stable);
  }
  CHECK(stable > 0);
}

TEST_CASE("property: L1 uniqueness test agrees with vertex enumeration") {
  for (std::uint64_t seed = 0; seed < 90; ++seed) {
    const Instance inst = stabcert::testing::random_l1_instance(seed);
    const SolveResult r = solve(inst);
    REQUIRE(r.converged);
    const oracle::L1Face face = oracle::l1_enumerate_solutions(inst.A, inst.b, inst.mu);
    CAPTURE(seed);
    CHECK(uniqueness_cone_test(inst, r) == (face.vertices.size() == 1));
  }
}

#include "stabcert/stability.hpp"

#include "stabcert/error.hpp"
#include "stabcert/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace stabcert {

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Stable: return "Stable";
    case Verdict::NotStable: return "NotStable";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "Unknown";
}

namespace {

StabilityCertificate certify_with_kernel(const Regularizer& reg, const Vec& z, SubspaceBasis ker,
                                         const CertTolerances& tols) {
  StabilityCertificate cert;
  cert.z_bar = z;
  cert.active = active_structure(reg, z, tols.tol_act);
  cert.par_basis = par_subdiff_conjugate(reg, cert.active);
  cert.ker_basis = std::move(ker);

  const Intersection inter = intersection(cert.ker_basis, cert.par_basis, tols.angle_band_low);
  cert.intersection_dim = inter.basis.dim();
  cert.min_principal_angle = inter.min_angle;
  cert.margins.angle_margin = inter.min_angle;
  cert.margins.activity_margin = cert.active.activity_margin();

  const bool near_face_change =
      cert.margins.activity_margin < tols.activity_band_factor * tols.tol_act;
  if (cert.intersection_dim > 0) {
    cert.verdict = Verdict::NotStable;
    cert.reason = "kernel meets the parallel subspace";
  } else if (inter.min_angle <= tols.angle_band_high) {
    cert.verdict = Verdict::Inconclusive;
    cert.reason = "smallest principal angle inside the tolerance band";
  } else if (near_face_change) {
    cert.verdict = Verdict::Inconclusive;
    cert.reason = "an inactive activity level is within the tolerance band of 1";
  } else {
    cert.verdict = Verdict::Stable;
    cert.reason = cert.ker_basis.trivial() ? "trivial kernel" : "trivial intersection";
  }
  return cert;
}

double rank_threshold(const CertTolerances& tols, Eigen::Index rows, Eigen::Index cols) {
  return tols.rank_tol < 0.0 ? default_rank_tol(rows, cols) : tols.rank_tol;
}

void require_converged(const Instance& inst, const SolveResult& result) {
  if (!result.converged) throw Error(ErrorCode::RefusedUnconverged, "solve did not converge");
  if (result.x.size() != inst.n()) throw Error(ErrorCode::InvalidInput, "result does not match the instance");
}

Vec dual_point(const Instance& inst, const Vec& x) {
  return inst.A.transpose() * ((inst.b - inst.A * x) / inst.mu) + inst.tilt();
}

Vec slice(const Vec& x, const std::vector<int>& idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = x(idx[k]);
  return out;
}

// Orthonormal basis of symmetric p x p matrices.
std::vector<Mat> symmetric_basis(int p) {
  std::vector<Mat> out;
  for (int k = 0; k < p; ++k) {
    for (int l = k; l < p; ++l) {
      Mat E = Mat::Zero(p, p);
      if (k == l) {
        E(k, k) = 1.0;
      } else {
        E(k, l) = E(l, k) = std::sqrt(0.5);
      }
      out.push_back(std::move(E));
    }
  }
  return out;
}

bool nuclear_unique(const Instance& inst, const SolveResult& result, const ActiveStructure& act,
                    const CertTolerances& tols) {
  const Regularizer& reg = inst.reg;
  const int p = act.multiplicity;
  if (p == 0) return true;  // d g*(z) = {0}

  const Mat X = as_matrix(reg, result.x);
  Mat S = act.U1.transpose() * X * act.V1;
  S = 0.5 * (S + S.transpose()).eval();

  const std::vector<Mat> sym = symmetric_basis(p);
  Mat G(inst.n(), static_cast<Eigen::Index>(sym.size()));
  for (std::size_t k = 0; k < sym.size(); ++k) {
    G.col(static_cast<Eigen::Index>(k)) = as_vector(act.U1 * sym[k] * act.V1.transpose());
  }
  const SubspaceBasis L = kernel_basis(inst.A * G, rank_threshold(tols, inst.m(), G.cols()));
  if (L.trivial()) return true;

  Eigen::SelfAdjointEigenSolver<Mat> eig(S);
  const double zero_tol = tols.comp_tol * (1.0 + X.norm());
  std::vector<Eigen::Index> pos, null;
  for (Eigen::Index i = 0; i < p; ++i) (eig.eigenvalues()(i) > zero_tol ? pos : null).push_back(i);
  if (null.empty()) return false;  // cone equals par, and L is nontrivial

  const auto blocks = [&](const Vec& c) {
    Mat D = Mat::Zero(p, p);
    for (std::size_t k = 0; k < sym.size(); ++k) D += c(static_cast<Eigen::Index>(k)) * sym[k];
    const Mat Dt = eig.eigenvectors().transpose() * D * eig.eigenvectors();
    Mat D22(null.size(), null.size()), D12(pos.size(), null.size());
    for (std::size_t a = 0; a < null.size(); ++a) {
      for (std::size_t b = 0; b < null.size(); ++b) D22(a, b) = Dt(null[a], null[b]);
      for (std::size_t b = 0; b < pos.size(); ++b) D12(b, a) = Dt(pos[b], null[a]);
    }
    return std::pair{D22, D12};
  };

  // Directions with D22 = 0 and D12 = 0 stay feasible for both signs.
  Mat linear(0, L.dim());
  {
    std::vector<Vec> rows;
    for (Eigen::Index k = 0; k < L.dim(); ++k) {
      auto [D22, D12] = blocks(L.basis.col(k));
      Vec flat(D22.size() + D12.size());
      flat << Eigen::Map<const Vec>(D22.data(), D22.size()), Eigen::Map<const Vec>(D12.data(), D12.size());
      rows.push_back(flat);
    }
    linear.resize(rows.front().size(), L.dim());
    for (Eigen::Index k = 0; k < L.dim(); ++k) linear.col(k) = rows[static_cast<std::size_t>(k)];
  }
  if (!kernel_basis(linear).trivial()) return false;

  // Otherwise look for c with D22(c) positive definite. With one null
  // direction this is a single linear functional, decided exactly.
  if (null.size() == 1) {
    for (Eigen::Index k = 0; k < L.dim(); ++k) {
      if (std::abs(blocks(L.basis.col(k)).first(0, 0)) > zero_tol) return false;
    }
    return true;
  }
  std::mt19937_64 rng(0x5eedULL + static_cast<std::uint64_t>(L.dim()));
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 4000; ++trial) {
    Vec c(L.dim());
    for (Eigen::Index k = 0; k < c.size(); ++k) c(k) = normal(rng);
    const Mat D22 = blocks(c).first;
    if (Eigen::SelfAdjointEigenSolver<Mat>(D22).eigenvalues()(0) > zero_tol * c.norm()) return false;
  }
  return true;
}

}  // namespace

StabilityCertificate certify_ls(const Instance& inst, const SolveResult& result,
                                const CertTolerances& tols) {
  inst.validate();
  require_converged(inst, result);
  const Vec z = dual_point(inst, result.x);
  return certify_with_kernel(inst.reg, z, kernel_basis(inst.A, rank_threshold(tols, inst.m(), inst.n())),
                             tols);
}

void CompositeProblem::validate() const {
  const Eigen::Index n = hessian.rows();
  if (hessian.cols() != n || gradient.size() != n || x_bar.size() != n) {
    throw Error(ErrorCode::InvalidInput, "composite problem shapes are inconsistent");
  }
  if (!hessian.allFinite() || !gradient.allFinite() || !x_bar.allFinite()) {
    throw Error(ErrorCode::InvalidInput, "composite problem has non-finite entries");
  }
  reg.validate(n);
  if (n == 0) return;
  const double scale = std::max(1.0, hessian.cwiseAbs().maxCoeff());
  if ((hessian - hessian.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorCode::InvalidInput, "hessian is not symmetric");
  }
  const Mat sym = 0.5 * (hessian + hessian.transpose());
  if (Eigen::SelfAdjointEigenSolver<Mat>(sym).eigenvalues()(0) < -1e-10 * scale) {
    throw Error(ErrorCode::InvalidInput, "hessian is not positive semidefinite");
  }
}

namespace {

void require_stationary(const CompositeProblem& prob, const CertTolerances& tols) {
  if (!subgradient_check(prob.reg, prob.x_bar, -prob.gradient, tols.comp_tol)) {
    throw Error(ErrorCode::NotAStationaryPoint, "-gradient is not a subgradient of g at x_bar");
  }
}

}  // namespace

StabilityCertificate certify_composite(const CompositeProblem& prob, const CertTolerances& tols) {
  prob.validate();
  require_stationary(prob, tols);
  const Eigen::Index n = prob.hessian.rows();
  return certify_with_kernel(prob.reg, -prob.gradient,
                             kernel_basis(prob.hessian, rank_threshold(tols, n, n)), tols);
}

Instance sqrt_reduction(const CompositeProblem& prob, const CertTolerances& tols) {
  prob.validate();
  require_stationary(prob, tols);
  const Eigen::Index n = prob.hessian.rows();
  Instance inst;
  inst.reg = prob.reg;
  inst.mu = 1.0;
  inst.v = -prob.gradient;
  if (n == 0) {
    inst.A = Mat(0, 0);
    inst.b = Vec(0);
    return inst;
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (prob.hessian + prob.hessian.transpose()));
  const Vec& lambda = eig.eigenvalues();
  const double cutoff = rank_threshold(tols, n, n) * lambda.cwiseAbs().maxCoeff();
  const Vec root = lambda.unaryExpr([cutoff](double l) { return l > cutoff ? std::sqrt(l) : 0.0; });
  inst.A = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  inst.b = inst.A * prob.x_bar;
  return inst;
}

bool uniqueness_cone_test(const Instance& inst, const SolveResult& result,
                          const CertTolerances& tols) {
  const StabilityCertificate cert = certify_ls(inst, result, tols);
  if (cert.verdict == Verdict::Stable) return true;

  const ActiveStructure& act = cert.active;
  const Vec& x = result.x;
  const double zero_tol = tols.comp_tol * (1.0 + x.lpNorm<Eigen::Infinity>());
  using oracle::SignConstraint;

  switch (inst.reg.kind) {
    case RegKind::L1: {
      std::vector<SignConstraint> cone(static_cast<std::size_t>(inst.n()), SignConstraint::Zero);
      for (std::size_t k = 0; k < act.indices.size(); ++k) {
        const int i = act.indices[k];
        if (std::abs(x(i)) > zero_tol) {
          cone[static_cast<std::size_t>(i)] = SignConstraint::Free;
        } else {
          cone[static_cast<std::size_t>(i)] = act.signs[k] > 0 ? SignConstraint::NonNeg : SignConstraint::NonPos;
        }
      }
      return !oracle::sign_feasibility(inst.A, cone).has_value();
    }
    case RegKind::GroupL2: {
      // d g*(z) = {sum_J s_J d_J : s_J >= 0}; work in the coefficients s.
      const Mat& B = cert.par_basis.basis;
      std::vector<SignConstraint> cone;
      for (std::size_t k = 0; k < act.active_groups.size(); ++k) {
        const auto& g = inst.reg.groups[static_cast<std::size_t>(act.active_groups[k])];
        const double s = slice(x, g).dot(act.directions[k]);
        cone.push_back(s > zero_tol ? SignConstraint::Free : SignConstraint::NonNeg);
      }
      if (cone.empty()) return true;
      return !oracle::sign_feasibility(inst.A * B, cone).has_value();
    }
    case RegKind::Nuclear: return nuclear_unique(inst, result, act, tols);
    case RegKind::Zero: return kernel_basis(inst.A, rank_threshold(tols, inst.m(), inst.n())).trivial();
  }
  return false;
}

Complementarity complementarity(const Instance& inst, const SolveResult& result,
                                const CertTolerances& tols) {
  inst.validate();
  require_converged(inst, result);
  const Vec z = dual_point(inst, result.x);
  const ActiveStructure act = active_structure(inst.reg, z, tols.tol_act);
  const Vec& x = result.x;
  const double tol = tols.comp_tol;
  Complementarity out;

  switch (inst.reg.kind) {
    case RegKind::L1: {
      out.dual_strict = true;
      std::vector<char> active(static_cast<std::size_t>(inst.n()), 0);
      for (std::size_t k = 0; k < act.indices.size(); ++k) {
        active[static_cast<std::size_t>(act.indices[k])] = 1;
        if (!(x(act.indices[k]) * act.signs[k] > tol)) out.dual_strict = false;
      }
      out.strict = true;
      for (Eigen::Index i = 0; i < inst.n(); ++i) {
        const bool zero = std::abs(x(i)) <= tol;
        if (!active[static_cast<std::size_t>(i)] && !zero) out.dual_strict = false;
        if (zero && !(std::abs(z(i)) < 1.0 - tol)) out.strict = false;
      }
      break;
    }
    case RegKind::GroupL2: {
      out.dual_strict = true;
      out.strict = true;
      const double scale = 1.0 + x.norm();
      for (std::size_t j = 0; j < inst.reg.groups.size(); ++j) {
        const auto& g = inst.reg.groups[j];
        const Vec xj = slice(x, g);
        const auto it = std::find(act.active_groups.begin(), act.active_groups.end(), static_cast<int>(j));
        const bool zero = xj.norm() <= tol;
        if (it != act.active_groups.end()) {
          const Vec& d = act.directions[static_cast<std::size_t>(it - act.active_groups.begin())];
          const double t = xj.dot(d);
          if (!(t > tol) || (xj - t * d).norm() > tol * scale) out.dual_strict = false;
        } else if (!zero) {
          out.dual_strict = false;
        }
        if (zero && !(slice(z, g).norm() < 1.0 - tol)) out.strict = false;
      }
      break;
    }
    case RegKind::Nuclear: {
      const Mat X = as_matrix(inst.reg, x);
      const double scale = 1.0 + X.norm();
      const int p = act.multiplicity;
      if (p == 0) {
        out.dual_strict = X.norm() <= tol * scale;
      } else {
        const Mat S = act.U1.transpose() * X * act.V1;
        const bool in_face = (X - act.U1 * S * act.V1.transpose()).norm() <= tol * scale &&
                             (S - S.transpose()).norm() <= tol * scale;
        const Mat Ssym = 0.5 * (S + S.transpose());
        out.dual_strict = in_face && Eigen::SelfAdjointEigenSolver<Mat>(Ssym).eigenvalues()(0) > tol;
      }
      const Vec sx = Eigen::JacobiSVD<Mat>(X).singularValues();
      const Vec sz = Eigen::JacobiSVD<Mat>(as_matrix(inst.reg, z)).singularValues();
      Eigen::Index r0 = 0;
      while (r0 < sx.size() && sx(r0) > tol) ++r0;
      out.strict = r0 >= sz.size() || sz(r0) < 1.0 - tol;
      break;
    }
    case RegKind::Zero:
      out.dual_strict = true;
      out.strict = z.size() == 0 || z.lpNorm<Eigen::Infinity>() <= tol;
      break;
  }
  return out;
}

}  // namespace stabcert

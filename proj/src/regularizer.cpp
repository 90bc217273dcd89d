#include "stabcert/regularizer.hpp"

#include "stabcert/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stabcert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_length(const Regularizer& reg, const Vec& x, const char* what) {
  if (!x.allFinite()) throw Error(ErrorCode::InvalidInput, std::string(what) + " has non-finite entries");
  reg.validate(x.size());
}

Vec group_slice(const Vec& x, const std::vector<int>& group) {
  Vec out(static_cast<Eigen::Index>(group.size()));
  for (std::size_t k = 0; k < group.size(); ++k) out(static_cast<Eigen::Index>(k)) = x(group[k]);
  return out;
}

Eigen::JacobiSVD<Mat> thin_svd(const Mat& X) {
  return Eigen::JacobiSVD<Mat>(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

}  // namespace

const char* to_string(RegKind kind) {
  switch (kind) {
    case RegKind::L1: return "l1";
    case RegKind::GroupL2: return "group_l2";
    case RegKind::Nuclear: return "nuclear";
    case RegKind::Zero: return "zero";
  }
  return "unknown";
}

Regularizer Regularizer::group_l2(std::vector<std::vector<int>> groups) {
  Regularizer reg;
  reg.kind = RegKind::GroupL2;
  reg.groups = std::move(groups);
  return reg;
}

Regularizer Regularizer::nuclear(int rows, int cols) {
  Regularizer reg;
  reg.kind = RegKind::Nuclear;
  reg.rows = rows;
  reg.cols = cols;
  return reg;
}

std::optional<Eigen::Index> Regularizer::implied_dim() const {
  switch (kind) {
    case RegKind::GroupL2: {
      Eigen::Index n = 0;
      for (const auto& g : groups) n += static_cast<Eigen::Index>(g.size());
      return n;
    }
    case RegKind::Nuclear: return static_cast<Eigen::Index>(rows) * cols;
    default: return std::nullopt;
  }
}

void Regularizer::validate(Eigen::Index n) const {
  switch (kind) {
    case RegKind::L1:
    case RegKind::Zero: return;
    case RegKind::GroupL2: {
      std::vector<int> seen(static_cast<std::size_t>(std::max<Eigen::Index>(n, 0)), 0);
      for (const auto& g : groups) {
        if (g.empty()) throw Error(ErrorCode::InvalidInput, "empty group");
        for (int i : g) {
          if (i < 0 || i >= n) throw Error(ErrorCode::InvalidInput, "group index out of range");
          if (seen[static_cast<std::size_t>(i)]++) throw Error(ErrorCode::InvalidInput, "groups overlap");
        }
      }
      if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw Error(ErrorCode::InvalidInput, "groups do not cover every coordinate");
      }
      return;
    }
    case RegKind::Nuclear:
      if (rows <= 0 || cols <= 0 || rows > cols) {
        throw Error(ErrorCode::InvalidInput, "nuclear shape must satisfy 0 < rows <= cols");
      }
      if (static_cast<Eigen::Index>(rows) * cols != n) {
        throw Error(ErrorCode::InvalidInput, "nuclear shape does not match variable length");
      }
      return;
  }
}

double ActiveStructure::activity_margin() const {
  double margin = kInf;
  for (double level : inactive_levels) margin = std::min(margin, 1.0 - level);
  return margin;
}

Mat as_matrix(const Regularizer& reg, const Vec& x) {
  return Eigen::Map<const Mat>(x.data(), reg.rows, reg.cols);
}

Vec as_vector(const Mat& X) { return Eigen::Map<const Vec>(X.data(), X.size()); }

double value(const Regularizer& reg, const Vec& x) {
  require_length(reg, x, "x");
  switch (reg.kind) {
    case RegKind::L1: return x.lpNorm<1>();
    case RegKind::GroupL2: {
      double total = 0.0;
      for (const auto& g : reg.groups) total += group_slice(x, g).norm();
      return total;
    }
    case RegKind::Nuclear: return thin_svd(as_matrix(reg, x)).singularValues().sum();
    case RegKind::Zero: return 0.0;
  }
  return 0.0;
}

Vec prox(const Regularizer& reg, const Vec& u, double tau) {
  require_length(reg, u, "u");
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidInput, "prox step must be positive");
  switch (reg.kind) {
    case RegKind::L1:
      return u.unaryExpr([tau](double ui) {
        return std::copysign(std::max(std::abs(ui) - tau, 0.0), ui);
      });
    case RegKind::GroupL2: {
      Vec w = Vec::Zero(u.size());
      for (const auto& g : reg.groups) {
        const Vec uj = group_slice(u, g);
        const double r = uj.norm();
        if (r <= tau) continue;
        const double scale = 1.0 - tau / r;
        for (std::size_t k = 0; k < g.size(); ++k) w(g[k]) = scale * uj(static_cast<Eigen::Index>(k));
      }
      return w;
    }
    case RegKind::Nuclear: {
      auto svd = thin_svd(as_matrix(reg, u));
      const Vec s = (svd.singularValues().array() - tau).max(0.0).matrix();
      return as_vector(svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose());
    }
    case RegKind::Zero: return u;
  }
  return u;
}

double dual_norm(const Regularizer& reg, const Vec& z) {
  require_length(reg, z, "z");
  switch (reg.kind) {
    case RegKind::L1: return z.size() == 0 ? 0.0 : z.lpNorm<Eigen::Infinity>();
    case RegKind::GroupL2: {
      double best = 0.0;
      for (const auto& g : reg.groups) best = std::max(best, group_slice(z, g).norm());
      return best;
    }
    case RegKind::Nuclear: return thin_svd(as_matrix(reg, z)).singularValues()(0);
    case RegKind::Zero: return z.isZero(0.0) ? 0.0 : kInf;
  }
  return kInf;
}

Vec prox_conjugate(const Regularizer& reg, const Vec& u, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidInput, "prox step must be positive");
  return u - tau * prox(reg, u / tau, 1.0 / tau);
}

namespace {

// Dual-ball membership with slack; Zero's ball is the origin.
bool dual_feasible(const Regularizer& reg, const Vec& z, double tol) {
  if (reg.kind == RegKind::Zero) return z.size() == 0 || z.lpNorm<Eigen::Infinity>() <= tol;
  return dual_norm(reg, z) <= 1.0 + tol;
}

}  // namespace

ActiveStructure active_structure(const Regularizer& reg, const Vec& z, double tol_act) {
  require_length(reg, z, "z");
  if (!dual_feasible(reg, z, tol_act)) {
    throw Error(ErrorCode::InfeasibleDualPoint, "dual point lies outside the dual unit ball");
  }
  ActiveStructure act;
  act.kind = reg.kind;
  act.n = z.size();
  act.tol_act = tol_act;
  act.z = z;
  const double threshold = 1.0 - tol_act;

  switch (reg.kind) {
    case RegKind::L1:
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double level = std::abs(z(i));
        if (level >= threshold) {
          act.indices.push_back(static_cast<int>(i));
          act.signs.push_back(z(i) > 0 ? 1 : -1);
          act.active_levels.push_back(level);
        } else {
          act.inactive_levels.push_back(level);
        }
      }
      break;
    case RegKind::GroupL2:
      for (std::size_t j = 0; j < reg.groups.size(); ++j) {
        const Vec zj = group_slice(z, reg.groups[j]);
        const double level = zj.norm();
        if (level >= threshold) {
          act.active_groups.push_back(static_cast<int>(j));
          act.directions.push_back(zj / level);
          act.active_levels.push_back(level);
        } else {
          act.inactive_levels.push_back(level);
        }
      }
      break;
    case RegKind::Nuclear: {
      auto svd = thin_svd(as_matrix(reg, z));
      const Vec& s = svd.singularValues();
      int p = 0;
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) >= threshold) {
          ++p;
          act.active_levels.push_back(s(i));
        } else {
          act.inactive_levels.push_back(s(i));
        }
      }
      act.multiplicity = p;
      act.U1 = svd.matrixU().leftCols(p);
      act.V1 = svd.matrixV().leftCols(p);
      break;
    }
    case RegKind::Zero: break;
  }
  return act;
}

SubspaceBasis par_subdiff_conjugate(const Regularizer& reg, const ActiveStructure& act) {
  const Eigen::Index n = act.n;
  switch (reg.kind) {
    case RegKind::L1: {
      Mat B = Mat::Zero(n, static_cast<Eigen::Index>(act.indices.size()));
      for (std::size_t k = 0; k < act.indices.size(); ++k) B(act.indices[k], static_cast<Eigen::Index>(k)) = 1.0;
      return {n, B};
    }
    case RegKind::GroupL2: {
      Mat B = Mat::Zero(n, static_cast<Eigen::Index>(act.active_groups.size()));
      for (std::size_t k = 0; k < act.active_groups.size(); ++k) {
        const auto& g = reg.groups[static_cast<std::size_t>(act.active_groups[k])];
        for (std::size_t i = 0; i < g.size(); ++i) {
          B(g[i], static_cast<Eigen::Index>(k)) = act.directions[k](static_cast<Eigen::Index>(i));
        }
      }
      return {n, B};
    }
    case RegKind::Nuclear: {
      // {U1 S V1^T : S symmetric}; the images of E_kl + E_lk are mutually
      // orthogonal, so normalizing them gives an orthonormal basis.
      const int p = act.multiplicity;
      Mat B(n, p * (p + 1) / 2);
      Eigen::Index col = 0;
      for (int k = 0; k < p; ++k) {
        for (int l = k; l < p; ++l) {
          const Mat block = act.U1.col(k) * act.V1.col(l).transpose() +
                            act.U1.col(l) * act.V1.col(k).transpose();
          const Vec b = as_vector(block);
          B.col(col++) = b / b.norm();
        }
      }
      return {n, B};
    }
    case RegKind::Zero: return SubspaceBasis::whole(n);
  }
  return SubspaceBasis::zero(n);
}

bool subgradient_check(const Regularizer& reg, const Vec& x, const Vec& z, double tol) {
  require_length(reg, x, "x");
  require_length(reg, z, "z");
  if (x.size() != z.size()) throw Error(ErrorCode::InvalidInput, "x and z differ in length");
  if (!dual_feasible(reg, z, tol)) return false;
  return z.dot(x) >= value(reg, x) - tol * (1.0 + x.norm());
}

Vec ri_point(const Regularizer& reg, const ActiveStructure& act, const Vec& anchor, double t,
             double tol) {
  if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidInput, "ri_point needs t in (0, 1]");
  if (anchor.size() != act.n) throw Error(ErrorCode::InvalidInput, "anchor length mismatch");
  if (!subgradient_check(reg, anchor, act.z, tol)) {
    throw Error(ErrorCode::NotASubgradientPoint, "anchor is not in the subdifferential of g* at z");
  }
  Vec r = Vec::Zero(act.n);
  switch (reg.kind) {
    case RegKind::L1:
      for (std::size_t k = 0; k < act.indices.size(); ++k) r(act.indices[k]) = act.signs[k];
      break;
    case RegKind::GroupL2:
      for (std::size_t k = 0; k < act.active_groups.size(); ++k) {
        const auto& g = reg.groups[static_cast<std::size_t>(act.active_groups[k])];
        for (std::size_t i = 0; i < g.size(); ++i) r(g[i]) = act.directions[k](static_cast<Eigen::Index>(i));
      }
      break;
    case RegKind::Nuclear: r = as_vector(act.U1 * act.V1.transpose()); break;
    case RegKind::Zero: break;
  }
  return (1.0 - t) * anchor + t * r;
}

}  // namespace stabcert

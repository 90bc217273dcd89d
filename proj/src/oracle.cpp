#include "stabcert/oracle.hpp"

#include "stabcert/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace stabcert::oracle {

L1Face l1_enumerate_solutions(const Mat& A, const Vec& b, double mu, const Vec& v) {
  const Eigen::Index n = A.cols();
  if (n > kMaxEnumerateDim) throw Error(ErrorCode::TooLarge, "sign enumeration is capped at n = 12");
  if (b.size() != A.rows() || !(mu > 0.0)) throw Error(ErrorCode::InvalidInput, "bad enumeration instance");
  const Vec tilt = v.size() == 0 ? Vec::Zero(n) : v;
  if (tilt.size() != n) throw Error(ErrorCode::InvalidInput, "tilt length mismatch");

  const auto objective = [&](const Vec& x) {
    return (A * x - b).squaredNorm() / (2.0 * mu) + x.lpNorm<1>() - tilt.dot(x);
  };

  struct Candidate {
    Vec x;
    double value;
  };
  std::vector<Candidate> kkt_points;
  L1Face face;

  long total = 1;
  for (Eigen::Index i = 0; i < n; ++i) total *= 3;
  std::vector<int> sign(static_cast<std::size_t>(n));
  for (long code = 0; code < total; ++code) {
    ++face.patterns_checked;
    long c = code;
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < n; ++i) {
      sign[static_cast<std::size_t>(i)] = static_cast<int>(c % 3) - 1;
      c /= 3;
      if (sign[static_cast<std::size_t>(i)] != 0) support.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(support.size());
    Vec x = Vec::Zero(n);
    if (k > 0) {
      // Vertices of the optimal face have linearly independent support columns.
      Mat AS(A.rows(), k);
      Vec rhs_shift(k);
      for (Eigen::Index j = 0; j < k; ++j) {
        AS.col(j) = A.col(support[static_cast<std::size_t>(j)]);
        rhs_shift(j) = tilt(support[static_cast<std::size_t>(j)]) - sign[static_cast<std::size_t>(support[static_cast<std::size_t>(j)])];
      }
      Eigen::ColPivHouseholderQR<Mat> qr(AS);
      if (qr.rank() < k) continue;
      const Mat gram = AS.transpose() * AS;
      const Vec xs = gram.ldlt().solve(AS.transpose() * b + mu * rhs_shift);
      bool consistent = true;
      for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::Index i = support[static_cast<std::size_t>(j)];
        if (xs(j) * sign[static_cast<std::size_t>(i)] < -1e-12 * (1.0 + xs.norm())) {
          consistent = false;
          break;
        }
        x(i) = xs(j);
      }
      if (!consistent) continue;
    }
    const Vec z = A.transpose() * (b - A * x) / mu + tilt;
    if (z.size() > 0 && z.lpNorm<Eigen::Infinity>() > 1.0 + 1e-9) continue;
    kkt_points.push_back({x, objective(x)});
  }

  if (kkt_points.empty()) return face;  // unbounded below (tilt outside the dual ball)
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : kkt_points) best = std::min(best, p.value);
  face.optimal_value = best;
  for (const auto& p : kkt_points) {
    if (p.value > best + 1e-9 * (1.0 + std::abs(best))) continue;
    const bool duplicate = std::any_of(face.vertices.begin(), face.vertices.end(), [&](const Vec& w) {
      return (w - p.x).norm() <= 1e-8 * (1.0 + w.norm());
    });
    if (!duplicate) face.vertices.push_back(p.x);
  }
  return face;
}

Vec nnls(const Mat& M, const Vec& r, int max_iter) {
  const Eigen::Index n = M.cols();
  if (max_iter < 0) max_iter = static_cast<int>(3 * n + 10);
  Vec x = Vec::Zero(n);
  std::vector<char> passive(static_cast<std::size_t>(n), 0);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * M.norm() * std::max<Eigen::Index>(M.rows(), n);

  const auto solve_passive = [&](Vec& out) {
    std::vector<Eigen::Index> P;
    for (Eigen::Index i = 0; i < n; ++i) if (passive[static_cast<std::size_t>(i)]) P.push_back(i);
    Mat MP(M.rows(), static_cast<Eigen::Index>(P.size()));
    for (std::size_t k = 0; k < P.size(); ++k) MP.col(static_cast<Eigen::Index>(k)) = M.col(P[k]);
    const Vec sol = MP.completeOrthogonalDecomposition().solve(r);
    out = Vec::Zero(n);
    for (std::size_t k = 0; k < P.size(); ++k) out(P[k]) = sol(static_cast<Eigen::Index>(k));
  };

  for (int outer = 0; outer < max_iter; ++outer) {
    const Vec w = M.transpose() * (r - M * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && w(i) > best_w) {
        best_w = w(i);
        best = i;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = 1;

    for (int inner = 0; inner <= n; ++inner) {
      Vec s;
      solve_passive(s);
      bool all_positive = true;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && s(i) <= 0.0) all_positive = false;
      }
      if (all_positive) {
        x = s;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && s(i) <= 0.0) {
          alpha = std::min(alpha, x(i) / (x(i) - s(i)));
        }
      }
      x += alpha * (s - x);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && x(i) <= tol) {
          passive[static_cast<std::size_t>(i)] = 0;
          x(i) = 0.0;
        }
      }
    }
  }
  return x;
}

double face_distance(const L1Face& face, const Vec& x) {
  if (face.vertices.empty()) return std::numeric_limits<double>::infinity();
  const auto k = static_cast<Eigen::Index>(face.vertices.size());
  if (k == 1) return (face.vertices.front() - x).norm();
  // Convex-hull projection as NNLS with a heavily weighted sum-to-one row.
  const double rho = 1e4 * (1.0 + x.norm());
  Mat M(x.size() + 1, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    M.col(j).head(x.size()) = face.vertices[static_cast<std::size_t>(j)];
    M(x.size(), j) = rho;
  }
  Vec r(x.size() + 1);
  r << x, rho;
  Vec lambda = nnls(M, r);
  const double total = lambda.sum();
  if (total > 0.0) lambda /= total;
  Vec hull = Vec::Zero(x.size());
  for (Eigen::Index j = 0; j < k; ++j) hull += lambda(j) * face.vertices[static_cast<std::size_t>(j)];
  return (hull - x).norm();
}

namespace {

double golden_section(const std::function<double(double)>& f, double lo, double hi, double xtol) {
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > xtol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

GridResult grid_refine_minimize(const std::function<double(const Vec&)>& f, const Box& box,
                                double xtol) {
  const Eigen::Index d = box.lower.size();
  if (d == 0 || d > kMaxGridDim || box.upper.size() != d) {
    throw Error(ErrorCode::InvalidInput, "grid minimization supports 1 to 4 dimensions");
  }
  const Vec width = box.upper - box.lower;
  const auto clamp = [&](Vec x) { return x.cwiseMax(box.lower).cwiseMin(box.upper).eval(); };

  constexpr int kCoarse = 21;
  long cells = 1;
  for (Eigen::Index i = 0; i < d; ++i) cells *= kCoarse;
  Vec best = box.lower;
  double best_value = std::numeric_limits<double>::infinity();
  for (long code = 0; code < cells; ++code) {
    long c = code;
    Vec x(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      x(i) = box.lower(i) + width(i) * static_cast<double>(c % kCoarse) / (kCoarse - 1);
      c /= kCoarse;
    }
    const double fx = f(x);
    if (fx < best_value) {
      best_value = fx;
      best = x;
    }
  }

  long neighbours = 1;
  for (Eigen::Index i = 0; i < d; ++i) neighbours *= 3;
  // Extra random directions keep the search from stalling at kinks whose
  // descent cone misses every compass direction.
  constexpr int kRandomDirs = 32;
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  const auto consider = [&](const Vec& x) {
    const double fx = f(x);
    if (fx < best_value) {
      best_value = fx;
      best = x;
      return true;
    }
    return false;
  };
  for (int round = 0; round < 3; ++round) {
    // Pattern search over all 3^d neighbours with a halving step.
    Vec h = width / (kCoarse - 1);
    if (round > 0) h = Vec::Constant(d, 64.0 * xtol);
    while (h.maxCoeff() > xtol) {
      bool moved = false;
      for (long code = 0; code < neighbours; ++code) {
        long c = code;
        Vec x = best;
        for (Eigen::Index i = 0; i < d; ++i) {
          x(i) += h(i) * static_cast<double>(c % 3 - 1);
          c /= 3;
        }
        moved = consider(clamp(x)) || moved;
      }
      for (int k = 0; k < kRandomDirs; ++k) {
        Vec dir(d);
        for (Eigen::Index i = 0; i < d; ++i) dir(i) = normal(rng);
        dir.normalize();
        moved = consider(clamp(best + h.cwiseProduct(dir))) || moved;
      }
      if (!moved) h /= 2.0;
    }
    // Coordinate-wise golden section polish.
    for (Eigen::Index i = 0; i < d; ++i) {
      const double span = std::max(1e3 * xtol, 1e-3 * width(i));
      const double lo = std::max(box.lower(i), best(i) - span);
      const double hi = std::min(box.upper(i), best(i) + span);
      Vec trial = best;
      const double xi = golden_section(
          [&](double s) {
            trial(i) = s;
            return f(trial);
          },
          lo, hi, xtol);
      trial(i) = xi;
      const double fx = f(trial);
      if (fx < best_value) {
        best_value = fx;
        best = trial;
      }
    }
  }
  return {best, best_value};
}

SubspaceBasis sampled_par_span(const Regularizer& reg, const Vec& z, int samples,
                               std::uint64_t seed, double tol_act) {
  const ActiveStructure act = active_structure(reg, z, tol_act);
  const Eigen::Index n = z.size();
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> normal;

  const auto draw = [&]() -> Vec {
    Vec x = Vec::Zero(n);
    switch (reg.kind) {
      case RegKind::L1:
        for (std::size_t k = 0; k < act.indices.size(); ++k) x(act.indices[k]) = expo(rng) * act.signs[k];
        break;
      case RegKind::GroupL2:
        for (std::size_t k = 0; k < act.active_groups.size(); ++k) {
          const double a = expo(rng);
          const auto& g = reg.groups[static_cast<std::size_t>(act.active_groups[k])];
          for (std::size_t i = 0; i < g.size(); ++i) x(g[i]) = a * act.directions[k](static_cast<Eigen::Index>(i));
        }
        break;
      case RegKind::Nuclear: {
        const int p = act.multiplicity;
        Mat G(p, p);
        for (Eigen::Index i = 0; i < G.size(); ++i) G(i) = normal(rng);
        x = as_vector(act.U1 * (G * G.transpose()) * act.V1.transpose());
        break;
      }
      case RegKind::Zero:
        for (Eigen::Index i = 0; i < n; ++i) x(i) = normal(rng);
        break;
    }
    return x;
  };

  if (samples < 1) return SubspaceBasis::zero(n);
  const Vec first = draw();
  std::vector<Vec> diffs;
  for (int k = 1; k < samples; ++k) diffs.push_back(draw() - first);
  return span_basis(diffs, n, 1e-10);
}

std::optional<Vec> sign_feasibility(const Mat& A, const std::vector<SignConstraint>& cone) {
  const Eigen::Index n = A.cols();
  if (n > kMaxFeasibilityDim) throw Error(ErrorCode::TooLarge, "sign feasibility is capped at n = 30");
  if (static_cast<Eigen::Index>(cone.size()) != n) throw Error(ErrorCode::InvalidInput, "cone spec length mismatch");

  // Zero constraints become extra rows of the kernel system.
  std::vector<Eigen::Index> zeros, signed_idx;
  std::vector<double> flips;
  for (Eigen::Index i = 0; i < n; ++i) {
    switch (cone[static_cast<std::size_t>(i)]) {
      case SignConstraint::Zero: zeros.push_back(i); break;
      case SignConstraint::NonNeg: signed_idx.push_back(i); flips.push_back(1.0); break;
      case SignConstraint::NonPos: signed_idx.push_back(i); flips.push_back(-1.0); break;
      case SignConstraint::Free: break;
    }
  }
  Mat system(A.rows() + static_cast<Eigen::Index>(zeros.size()), n);
  system.topRows(A.rows()) = A;
  system.bottomRows(static_cast<Eigen::Index>(zeros.size())).setZero();
  for (std::size_t k = 0; k < zeros.size(); ++k) system(A.rows() + static_cast<Eigen::Index>(k), zeros[k]) = 1.0;
  const SubspaceBasis L = kernel_basis(system);
  if (L.trivial()) return std::nullopt;

  const auto s = static_cast<Eigen::Index>(signed_idx.size());
  Mat KS(s, L.dim());
  for (Eigen::Index k = 0; k < s; ++k) KS.row(k) = flips[static_cast<std::size_t>(k)] * L.basis.row(signed_idx[static_cast<std::size_t>(k)]);

  // A kernel direction untouched by the sign constraints is a witness.
  const SubspaceBasis untouched = kernel_basis(KS);
  if (!untouched.trivial()) {
    Vec d = L.basis * untouched.basis.col(0);
    return Vec(d / d.norm());
  }

  // Otherwise KS is injective: look for w >= 0, sum w = 1, w in range(KS).
  const SubspaceBasis range = column_span(KS);
  Mat M(s + 1, s);
  M.topRows(s) = Mat::Identity(s, s) - range.basis * range.basis.transpose();
  M.row(s).setOnes();
  Vec r = Vec::Zero(s + 1);
  r(s) = 1.0;
  const Vec w = nnls(M, r);
  if ((M * w - r).norm() > 1e-10) return std::nullopt;

  const Vec c = KS.completeOrthogonalDecomposition().solve(w);
  Vec d = L.basis * c;
  if (d.norm() == 0.0) return std::nullopt;
  d /= d.norm();
  for (Eigen::Index k = 0; k < s; ++k) {
    if (flips[static_cast<std::size_t>(k)] * d(signed_idx[static_cast<std::size_t>(k)]) < -1e-8) return std::nullopt;
  }
  return d;
}

}  // namespace stabcert::oracle

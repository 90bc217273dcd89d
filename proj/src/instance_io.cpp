#include "stabcert/io.hpp"

#include "stabcert/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace stabcert::io {

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::InvalidInput, what); }

const json& field(const json& doc, const char* key) {
  if (!doc.contains(key)) fail(std::string("missing field '") + key + "'");
  return doc.at(key);
}

Eigen::Index read_count(const json& doc, const char* key) {
  const json& value = field(doc, key);
  if (!value.is_number_integer() || value.get<long long>() < 0) {
    fail(std::string("field '") + key + "' must be a non-negative integer");
  }
  return static_cast<Eigen::Index>(value.get<long long>());
}

Vec read_reals(const json& value, Eigen::Index expected, const std::string& name) {
  if (!value.is_array()) fail("field '" + name + "' must be an array of numbers");
  if (static_cast<Eigen::Index>(value.size()) != expected) {
    fail("field '" + name + "' has " + std::to_string(value.size()) + " entries, expected " +
         std::to_string(expected));
  }
  Vec out(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    const json& e = value[static_cast<std::size_t>(i)];
    if (!e.is_number()) fail("field '" + name + "' contains a non-number");
    out(i) = e.get<double>();
    if (!std::isfinite(out(i))) fail("field '" + name + "' contains a non-finite number");
  }
  return out;
}

Mat read_row_major(const json& value, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  const Vec flat = read_reals(value, rows * cols, name);
  Mat M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = flat(i * cols + j);
  }
  return M;
}

json row_major_json(const Mat& M) {
  json out = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) out.push_back(M(i, j));
  }
  return out;
}

// perm[file_index] = internal_index; identity unless Nuclear.
std::vector<Eigen::Index> file_to_internal(const Regularizer& reg, Eigen::Index n) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) perm[static_cast<std::size_t>(k)] = k;
  if (reg.kind == RegKind::Nuclear && static_cast<Eigen::Index>(reg.rows) * reg.cols == n) {
    for (int i = 0; i < reg.rows; ++i) {
      for (int j = 0; j < reg.cols; ++j) {
        perm[static_cast<std::size_t>(i * reg.cols + j)] = static_cast<Eigen::Index>(j) * reg.rows + i;
      }
    }
  }
  return perm;
}

Mat columns_from_file(const Regularizer& reg, const Mat& M) {
  const auto perm = file_to_internal(reg, M.cols());
  Mat out(M.rows(), M.cols());
  for (Eigen::Index f = 0; f < M.cols(); ++f) out.col(perm[static_cast<std::size_t>(f)]) = M.col(f);
  return out;
}

Mat columns_to_file(const Regularizer& reg, const Mat& M) {
  const auto perm = file_to_internal(reg, M.cols());
  Mat out(M.rows(), M.cols());
  for (Eigen::Index f = 0; f < M.cols(); ++f) out.col(f) = M.col(perm[static_cast<std::size_t>(f)]);
  return out;
}

Regularizer parse_regularizer(const json& doc) {
  if (!doc.is_object()) fail("field 'regularizer' must be an object");
  const json& kind = field(doc, "kind");
  if (!kind.is_string()) fail("regularizer kind must be a string");
  const std::string k = kind.get<std::string>();
  if (k == "l1") return Regularizer::l1();
  if (k == "zero") return Regularizer::zero();
  if (k == "group_l2") {
    const json& groups = field(doc, "groups");
    if (!groups.is_array()) fail("groups must be a list of index lists");
    std::vector<std::vector<int>> out;
    for (const json& g : groups) {
      if (!g.is_array()) fail("each group must be a list of indices");
      std::vector<int> idx;
      for (const json& i : g) {
        if (!i.is_number_integer()) fail("group indices must be integers");
        idx.push_back(i.get<int>());
      }
      out.push_back(std::move(idx));
    }
    return Regularizer::group_l2(std::move(out));
  }
  if (k == "nuclear") {
    const json& rows = field(doc, "rows");
    const json& cols = field(doc, "cols");
    if (!rows.is_number_integer() || !cols.is_number_integer()) fail("nuclear rows/cols must be integers");
    return Regularizer::nuclear(rows.get<int>(), cols.get<int>());
  }
  fail("unknown regularizer kind '" + k + "'");
}

json regularizer_json(const Regularizer& reg) {
  json out = {{"kind", to_string(reg.kind)}};
  if (reg.kind == RegKind::GroupL2) out["groups"] = reg.groups;
  if (reg.kind == RegKind::Nuclear) {
    out["rows"] = reg.rows;
    out["cols"] = reg.cols;
  }
  return out;
}

json basis_json(const Regularizer& reg, const SubspaceBasis& basis) {
  json vectors = json::array();
  for (Eigen::Index k = 0; k < basis.dim(); ++k) vectors.push_back(vector_json(to_file_order(reg, basis.basis.col(k))));
  return {{"dim", basis.dim()}, {"vectors", vectors}};
}

json active_json(const Regularizer& reg, const ActiveStructure& act) {
  json out = {{"kind", to_string(act.kind)}, {"tol_act", act.tol_act}};
  switch (act.kind) {
    case RegKind::L1: {
      // Report indices in file order (identity for L1).
      out["indices"] = act.indices;
      out["signs"] = act.signs;
      break;
    }
    case RegKind::GroupL2: {
      out["groups"] = act.active_groups;
      json dirs = json::array();
      for (const Vec& d : act.directions) dirs.push_back(vector_json(d));
      out["directions"] = dirs;
      break;
    }
    case RegKind::Nuclear: {
      out["multiplicity"] = act.multiplicity;
      json u = json::array(), v = json::array();
      for (Eigen::Index k = 0; k < act.U1.cols(); ++k) u.push_back(vector_json(act.U1.col(k)));
      for (Eigen::Index k = 0; k < act.V1.cols(); ++k) v.push_back(vector_json(act.V1.col(k)));
      out["left_vectors"] = u;
      out["right_vectors"] = v;
      break;
    }
    case RegKind::Zero: break;
  }
  json levels = json::array();
  for (double l : act.active_levels) levels.push_back(l);
  out["active_levels"] = levels;
  (void)reg;
  return out;
}

}  // namespace

bool InstanceFile::operator==(const InstanceFile& other) const {
  const Instance& a = instance;
  const Instance& b = other.instance;
  const bool same_inst = a.A.rows() == b.A.rows() && a.A.cols() == b.A.cols() && a.A == b.A &&
                         a.b == b.b && a.mu == b.mu && a.v.size() == b.v.size() && a.v == b.v &&
                         a.reg == b.reg;
  if (!same_inst || note != other.note || composite.has_value() != other.composite.has_value()) return false;
  if (!composite) return true;
  return composite->hessian == other.composite->hessian && composite->gradient == other.composite->gradient &&
         composite->x_bar == other.composite->x_bar && composite->reg == other.composite->reg;
}

Vec to_file_order(const Regularizer& reg, const Vec& internal) {
  const auto perm = file_to_internal(reg, internal.size());
  Vec out(internal.size());
  for (Eigen::Index f = 0; f < internal.size(); ++f) out(f) = internal(perm[static_cast<std::size_t>(f)]);
  return out;
}

Vec from_file_order(const Regularizer& reg, const Vec& file) {
  const auto perm = file_to_internal(reg, file.size());
  Vec out(file.size());
  for (Eigen::Index f = 0; f < file.size(); ++f) out(perm[static_cast<std::size_t>(f)]) = file(f);
  return out;
}

InstanceFile parse_instance(const json& doc) {
  if (!doc.is_object()) fail("instance document must be an object");
  if (doc.contains("format") && doc.at("format") != kFormat) fail("unsupported format tag");
  if (doc.contains("layout") && doc.at("layout") != "row-major") fail("only row-major layout is supported");

  InstanceFile out;
  const Eigen::Index m = read_count(doc, "m");
  const Eigen::Index n = read_count(doc, "n");
  Instance& inst = out.instance;
  inst.reg = parse_regularizer(field(doc, "regularizer"));
  inst.reg.validate(n);
  inst.A = columns_from_file(inst.reg, read_row_major(field(doc, "A"), m, n, "A"));
  inst.b = read_reals(field(doc, "b"), m, "b");
  const json& mu = field(doc, "mu");
  if (!mu.is_number()) fail("mu must be a number");
  inst.mu = mu.get<double>();
  if (doc.contains("v") && !doc.at("v").is_null()) {
    inst.v = from_file_order(inst.reg, read_reals(doc.at("v"), n, "v"));
  }
  inst.validate();

  if (doc.contains("note")) {
    if (!doc.at("note").is_string()) fail("note must be a string");
    out.note = doc.at("note").get<std::string>();
  }
  if (doc.contains("composite") && !doc.at("composite").is_null()) {
    const json& c = doc.at("composite");
    if (!c.is_object()) fail("composite must be an object");
    CompositeProblem prob;
    prob.reg = inst.reg;
    const Mat H = read_row_major(field(c, "hessian"), n, n, "composite.hessian");
    prob.hessian = columns_from_file(inst.reg, columns_from_file(inst.reg, H).transpose()).transpose();
    prob.gradient = from_file_order(inst.reg, read_reals(field(c, "gradient"), n, "composite.gradient"));
    prob.x_bar = from_file_order(inst.reg, read_reals(field(c, "x_bar"), n, "composite.x_bar"));
    prob.validate();
    out.composite = std::move(prob);
  }
  return out;
}

InstanceFile parse_instance_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed instance file: ") + e.what());
  }
  return parse_instance(doc);
}

InstanceFile load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_instance_text(buf.str());
}

json to_json(const InstanceFile& file) {
  const Instance& inst = file.instance;
  json out = {
      {"format", kFormat},
      {"layout", "row-major"},
      {"m", inst.m()},
      {"n", inst.n()},
      {"A", row_major_json(columns_to_file(inst.reg, inst.A))},
      {"b", vector_json(inst.b)},
      {"mu", inst.mu},
      {"regularizer", regularizer_json(inst.reg)},
  };
  if (inst.v.size() != 0) out["v"] = vector_json(to_file_order(inst.reg, inst.v));
  if (!file.note.empty()) out["note"] = file.note;
  if (file.composite) {
    const CompositeProblem& c = *file.composite;
    const Mat H = columns_to_file(c.reg, columns_to_file(c.reg, c.hessian).transpose()).transpose();
    out["composite"] = {
        {"hessian", row_major_json(H)},
        {"gradient", vector_json(to_file_order(c.reg, c.gradient))},
        {"x_bar", vector_json(to_file_order(c.reg, c.x_bar))},
    };
  }
  return out;
}

json vector_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_or_null(v(i)));
  return out;
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json solve_report(const Instance& inst, const SolverOptions& opts, const SolveResult& r) {
  return {
      {"version", kVersion},
      {"command", "solve"},
      {"tolerances", {{"tol", opts.tol}, {"max_iters", opts.max_iters}}},
      {"converged", r.converged},
      {"iterations", r.iterations},
      {"restarts", r.restarts},
      {"objective", r.primal_value},
      {"kkt_residual", r.kkt_residual},
      {"x", vector_json(to_file_order(inst.reg, r.x))},
      {"y", vector_json(r.y)},
      {"z", vector_json(to_file_order(inst.reg, r.z))},
  };
}

json certificate_report(const Regularizer& reg, const StabilityCertificate& cert,
                        const CertTolerances& tols, const CertifyExtras& extras) {
  json out = {
      {"version", kVersion},
      {"command", "certify"},
      {"route", extras.route},
      {"verdict", to_string(cert.verdict)},
      {"reason", cert.reason},
      {"tolerances",
       {{"tol_act", tols.tol_act},
        {"angle_band", {tols.angle_band_low, tols.angle_band_high}},
        {"rank_tol", number_or_null(tols.rank_tol < 0 ? std::nan("") : tols.rank_tol)},
        {"comp_tol", tols.comp_tol},
        {"activity_band_factor", tols.activity_band_factor}}},
      {"z_bar", vector_json(to_file_order(reg, cert.z_bar))},
      {"ker_basis", basis_json(reg, cert.ker_basis)},
      {"par_basis", basis_json(reg, cert.par_basis)},
      {"intersection_dim", cert.intersection_dim},
      {"min_principal_angle", number_or_null(cert.min_principal_angle)},
      {"margins",
       {{"activity_margin", number_or_null(cert.margins.activity_margin)},
        {"angle_margin", number_or_null(cert.margins.angle_margin)}}},
      {"active", active_json(reg, cert.active)},
  };
  if (extras.complementarity) {
    out["complementarity"] = {{"dual_strict", extras.complementarity->dual_strict},
                              {"strict", extras.complementarity->strict}};
  }
  if (extras.unique) out["unique"] = *extras.unique;
  if (extras.route == "composite") {
    out["note"] =
        "composite certificates are sufficient conditions only: NotStable means the kernel condition "
        "fails, not that the solution map fails to be Lipschitz";
  }
  return out;
}

json probe_report(const Regularizer& reg, const PerturbReport& report, const ProbeTargets& which,
                  int pairs_per_radius) {
  json targets = json::array();
  if (which.A) targets.push_back("A");
  if (which.b) targets.push_back("b");
  if (which.mu) targets.push_back("mu");

  json quotients = json::array();
  for (double q : report.max_quotient_per_radius) quotients.push_back(number_or_null(q));

  const auto witness_json = [&](const std::optional<MultiplicityWitness>& w) -> json {
    if (!w) return nullptr;
    return {{"x1", vector_json(to_file_order(reg, w->x1))},
            {"x2", vector_json(to_file_order(reg, w->x2))},
            {"objective1", w->objective1},
            {"objective2", w->objective2},
            {"kkt1", w->kkt1},
            {"kkt2", w->kkt2}};
  };

  json necessity = json::array();
  for (const NecessityStep& s : report.necessity) {
    necessity.push_back({{"t", s.t},
                         {"b_t", vector_json(s.b_t)},
                         {"x_t", vector_json(to_file_order(reg, s.x_t))},
                         {"z_invariance_error", s.z_invariance_error},
                         {"x_t_is_solution", s.x_t_is_solution},
                         {"second_solution_found", s.second_solution_found},
                         {"witness", witness_json(s.witness)}});
  }

  const double ratio = report.quotient_ratio();
  return {
      {"version", kVersion},
      {"command", "probe"},
      {"metric", "||dA||_F + ||db||_2 + |dmu|"},
      {"seed", report.seed},
      {"which", targets},
      {"pairs_per_radius", pairs_per_radius},
      {"radius_schedule", report.radius_schedule},
      {"max_quotient_per_radius", quotients},
      {"quotient_ratio", std::isinf(ratio) ? json("inf") : number_or_null(ratio)},
      {"trials", report.trials},
      {"skipped_trials", report.skipped_trials},
      {"degraded", report.degraded},
      {"multiplicity", {{"found", report.multiplicity.found}, {"witness", witness_json(report.multiplicity.witness)}}},
      {"necessity", necessity},
  };
}

}  // namespace stabcert::io

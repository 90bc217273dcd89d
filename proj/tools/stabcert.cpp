// stabcert: solve, certify, probe and cross-check regularized least-squares
// instances. Structured reports go to stdout, diagnostics to stderr.

#include "stabcert/error.hpp"
#include "stabcert/io.hpp"
#include "stabcert/oracle.hpp"
#include "stabcert/perturb.hpp"
#include "stabcert/stability.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

using namespace stabcert;
using io::json;

namespace {

enum Exit : int {
  kOk = 0,
  kInputError = 2,
  kNotConverged = 3,
  kNotStable = 4,
  kInconclusive = 5,
  kProbeDegraded = 6,
  kTooLarge = 7,
};

int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::RefusedUnconverged: return kNotConverged;
    case ErrorCode::TooLarge: return kTooLarge;
    default: return kInputError;
  }
}

void emit(const json& report) { std::cout << report.dump(2) << '\n'; }

unsigned thread_cap() {
  const char* env = std::getenv("STABCERT_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  const long n = std::strtol(env, nullptr, 10);
  return n > 0 ? static_cast<unsigned>(n) : 0u;
}

Vec read_warm_start(const std::string& path, const Regularizer& reg, Eigen::Index n) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open warm start '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidInput, std::string("malformed warm start: ") + e.what());
  }
  if (doc.is_object() && doc.contains("x")) doc = doc.at("x");
  if (!doc.is_array() || static_cast<Eigen::Index>(doc.size()) != n) {
    throw Error(ErrorCode::InvalidInput, "warm start must be an array of n numbers");
  }
  Vec x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = doc[static_cast<std::size_t>(i)].get<double>();
  return io::from_file_order(reg, x);
}

struct SolveFlags {
  double tol = 1e-10;
  long max_iters = 200000;
  std::string warm_start;
};

void add_solver_flags(CLI::App* cmd, SolveFlags& flags) {
  cmd->add_option("--tol", flags.tol, "fixed-point residual tolerance")->capture_default_str();
  cmd->add_option("--max-iters", flags.max_iters, "iteration cap")->capture_default_str();
  cmd->add_option("--warm-start", flags.warm_start, "JSON array (or solve report) with a starting point");
}

SolverOptions solver_options(const SolveFlags& flags, const Instance& inst) {
  SolverOptions opts;
  opts.tol = flags.tol;
  opts.max_iters = flags.max_iters;
  if (!flags.warm_start.empty()) opts.warm_start = read_warm_start(flags.warm_start, inst.reg, inst.n());
  return opts;
}

int cmd_solve(const std::string& path, const SolveFlags& flags) {
  const io::InstanceFile file = io::load_instance(path);
  const SolverOptions opts = solver_options(flags, file.instance);
  const SolveResult r = solve(file.instance, opts);
  emit(io::solve_report(file.instance, opts, r));
  if (!r.converged) {
    std::cerr << "solver stopped after " << r.iterations << " iterations (residual " << r.kkt_residual << ")\n";
    return kNotConverged;
  }
  return kOk;
}

int verdict_exit(Verdict v) {
  switch (v) {
    case Verdict::Stable: return kOk;
    case Verdict::NotStable: return kNotStable;
    case Verdict::Inconclusive: return kInconclusive;
  }
  return kInconclusive;
}

int cmd_certify(const std::string& path, const SolveFlags& flags, const CertTolerances& tols) {
  const io::InstanceFile file = io::load_instance(path);
  io::CertifyExtras extras;
  StabilityCertificate cert;
  if (file.composite) {
    extras.route = "composite";
    cert = certify_composite(*file.composite, tols);
    // Complementarity and uniqueness are read off the square-root reduction.
    const Instance reduced = sqrt_reduction(*file.composite, tols);
    const SolveResult at = evaluate_at(reduced, file.composite->x_bar, 1e-8);
    if (at.converged) {
      extras.complementarity = complementarity(reduced, at, tols);
      extras.unique = uniqueness_cone_test(reduced, at, tols);
    }
  } else {
    extras.route = "least_squares";
    const SolverOptions opts = solver_options(flags, file.instance);
    const SolveResult r = solve(file.instance, opts);
    if (!r.converged) throw Error(ErrorCode::RefusedUnconverged, "solver did not converge; refusing to certify");
    cert = certify_ls(file.instance, r, tols);
    extras.complementarity = complementarity(file.instance, r, tols);
    extras.unique = uniqueness_cone_test(file.instance, r, tols);
  }
  emit(io::certificate_report(file.instance.reg, cert, tols, extras));
  std::cerr << "verdict: " << to_string(cert.verdict) << " (" << cert.reason << ")\n";
  return verdict_exit(cert.verdict);
}

struct ProbeFlags {
  std::vector<double> radii{1e-2, 1e-3, 1e-4};
  int pairs = 50;
  std::uint64_t seed = 0;
  std::vector<std::string> which{"A", "b", "mu"};
  int directions = 8;
  std::vector<double> t_schedule{0.1, 0.5, 1.0};
};

int cmd_probe(const std::string& path, const SolveFlags& sflags, const ProbeFlags& flags) {
  const io::InstanceFile file = io::load_instance(path);
  const Instance& inst = file.instance;
  ProbeTargets targets{false, false, false};
  for (const auto& w : flags.which) {
    if (w == "A") targets.A = true;
    else if (w == "b") targets.b = true;
    else if (w == "mu") targets.mu = true;
    else throw Error(ErrorCode::InvalidInput, "unknown probe target '" + w + "'");
  }
  ProbeOptions popts;
  popts.solver = solver_options(sflags, inst);
  popts.threads = thread_cap();

  const SolveResult base = solve(inst, popts.solver);
  if (!base.converged) throw Error(ErrorCode::RefusedUnconverged, "nominal solve did not converge");
  PerturbReport report = lipschitz_probe(inst, flags.radii, flags.pairs, flags.seed, targets, popts);
  report.multiplicity = multiplicity_probe(inst, base.x, flags.directions, flags.seed, popts.solver);
  report.necessity = necessity_construction(inst, base, flags.t_schedule, flags.directions, flags.seed, popts.solver);
  emit(io::probe_report(inst.reg, report, targets, flags.pairs));
  if (report.degraded) {
    std::cerr << "probe degraded: " << report.skipped_trials << " of " << report.trials << " trials skipped\n";
    return kProbeDegraded;
  }
  return kOk;
}

int cmd_oracle(const std::string& sub, const std::string& path, int samples, std::uint64_t seed) {
  const io::InstanceFile file = io::load_instance(path);
  const Instance& inst = file.instance;
  json out = {{"version", io::kVersion}, {"command", "oracle"}, {"subcommand", sub}};

  if (sub == "enumerate") {
    if (inst.reg.kind != RegKind::L1) throw Error(ErrorCode::InvalidInput, "enumerate needs an l1 instance");
    const oracle::L1Face face = oracle::l1_enumerate_solutions(inst.A, inst.b, inst.mu, inst.v);
    json vertices = json::array();
    for (const Vec& v : face.vertices) vertices.push_back(io::vector_json(v));
    out["vertices"] = vertices;
    out["optimal_value"] = face.optimal_value;
    out["patterns_checked"] = face.patterns_checked;
    out["unique"] = face.vertices.size() == 1;
    emit(out);
    return kOk;
  }

  if (inst.n() > oracle::kMaxFeasibilityDim) throw Error(ErrorCode::TooLarge, "oracle commands are capped at n = 30");
  const SolveResult r = solve(inst);
  if (!r.converged) throw Error(ErrorCode::RefusedUnconverged, "solver did not converge");

  if (sub == "cone") {
    if (inst.reg.kind != RegKind::L1) throw Error(ErrorCode::InvalidInput, "cone needs an l1 instance");
    const ActiveStructure act = active_structure(inst.reg, r.z);
    std::vector<oracle::SignConstraint> cone(static_cast<std::size_t>(inst.n()), oracle::SignConstraint::Zero);
    for (std::size_t k = 0; k < act.indices.size(); ++k) {
      const int i = act.indices[k];
      cone[static_cast<std::size_t>(i)] = std::abs(r.x(i)) > 1e-8
                                               ? oracle::SignConstraint::Free
                                               : (act.signs[k] > 0 ? oracle::SignConstraint::NonNeg
                                                                   : oracle::SignConstraint::NonPos);
    }
    const auto witness = oracle::sign_feasibility(inst.A, cone);
    out["x"] = io::vector_json(r.x);
    out["witness"] = witness ? io::vector_json(*witness) : json(nullptr);
    out["unique"] = !witness.has_value();
    emit(out);
    return kOk;
  }

  if (sub == "par-span") {
    const ActiveStructure act = active_structure(inst.reg, r.z);
    const SubspaceBasis analytic = par_subdiff_conjugate(inst.reg, act);
    const SubspaceBasis sampled = oracle::sampled_par_span(inst.reg, r.z, samples, seed);
    const Intersection both = intersection(analytic, sampled, 1e-6);
    out["analytic_dim"] = analytic.dim();
    out["sampled_dim"] = sampled.dim();
    out["common_dim"] = both.basis.dim();
    out["agree"] = analytic.dim() == sampled.dim() && both.basis.dim() == analytic.dim();
    emit(out);
    return kOk;
  }
  throw Error(ErrorCode::InvalidInput, "unknown oracle subcommand '" + sub + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability certificates for regularized least squares"};
  app.set_version_flag("--version", std::string(io::kVersion));
  app.require_subcommand(1);

  std::string path;
  SolveFlags sflags;

  auto* solve_cmd = app.add_subcommand("solve", "solve an instance");
  solve_cmd->add_option("file", path, "instance file")->required();
  add_solver_flags(solve_cmd, sflags);

  CertTolerances tols;
  std::vector<double> band{tols.angle_band_low, tols.angle_band_high};
  auto* cert_cmd = app.add_subcommand("certify", "certify Lipschitz stability of the solution map");
  cert_cmd->add_option("file", path, "instance file")->required();
  cert_cmd->add_option("--tol-act", tols.tol_act, "activity tolerance")->capture_default_str();
  cert_cmd->add_option("--angle-band", band, "LOW,HIGH principal-angle band in radians")
      ->delimiter(',')
      ->expected(2);
  add_solver_flags(cert_cmd, sflags);

  ProbeFlags pflags;
  auto* probe_cmd = app.add_subcommand("probe", "empirical Lipschitz and multiplicity probes");
  probe_cmd->add_option("file", path, "instance file")->required();
  probe_cmd->add_option("--radii", pflags.radii, "comma-separated radius schedule")->delimiter(',');
  probe_cmd->add_option("--pairs", pflags.pairs, "pairs per radius")->capture_default_str();
  probe_cmd->add_option("--seed", pflags.seed, "random seed")->capture_default_str();
  probe_cmd->add_option("--which", pflags.which, "perturbed blocks: A,b,mu")->delimiter(',');
  probe_cmd->add_option("--directions", pflags.directions, "tilt directions for multiplicity search")
      ->capture_default_str();
  probe_cmd->add_option("--t", pflags.t_schedule, "necessity construction schedule in (0,1]")->delimiter(',');
  add_solver_flags(probe_cmd, sflags);

  std::string oracle_sub;
  int samples = 200;
  std::uint64_t oracle_seed = 0;
  auto* oracle_cmd = app.add_subcommand("oracle", "brute-force cross-checks (enumerate | cone | par-span)");
  oracle_cmd->add_option("subcommand", oracle_sub, "enumerate | cone | par-span")->required();
  oracle_cmd->add_option("file", path, "instance file")->required();
  oracle_cmd->add_option("--samples", samples, "samples for par-span")->capture_default_str();
  oracle_cmd->add_option("--seed", oracle_seed, "seed for par-span")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (*solve_cmd) return cmd_solve(path, sflags);
    if (*cert_cmd) {
      tols.angle_band_low = band.at(0);
      tols.angle_band_high = band.at(1);
      return cmd_certify(path, sflags, tols);
    }
    if (*probe_cmd) return cmd_probe(path, sflags, pflags);
    if (*oracle_cmd) return cmd_oracle(oracle_sub, path, samples, oracle_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

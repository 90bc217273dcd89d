#pragma once

#include "stabcert/perturb.hpp"
#include "stabcert/stability.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace stabcert::io {

using json = nlohmann::json;

inline constexpr const char* kFormat = "stabcert-instance/1";
inline constexpr const char* kVersion = STABCERT_VERSION;

/// Parsed instance document. Matrices in the file are row-major; a Nuclear
/// variable is additionally written as the row-major flattening of its
/// rows x cols matrix and converted to the internal column-major layout here.
struct InstanceFile {
  Instance instance;
  std::optional<CompositeProblem> composite;
  std::string note;

  bool operator==(const InstanceFile& other) const;
};

/// Throws Error(InvalidInput) with a readable message on any schema problem.
InstanceFile parse_instance(const json& doc);
InstanceFile parse_instance_text(const std::string& text);
InstanceFile load_instance(const std::string& path);

json to_json(const InstanceFile& file);

/// Variable-space conversions between file order and internal order.
Vec to_file_order(const Regularizer& reg, const Vec& internal);
Vec from_file_order(const Regularizer& reg, const Vec& file);

json vector_json(const Vec& v);
/// Finite values as numbers, non-finite as null.
json number_or_null(double x);

json solve_report(const Instance& inst, const SolverOptions& opts, const SolveResult& r);

struct CertifyExtras {
  std::string route;  // "least_squares" or "composite"
  std::optional<Complementarity> complementarity;
  std::optional<bool> unique;
};

json certificate_report(const Regularizer& reg, const StabilityCertificate& cert,
                        const CertTolerances& tols, const CertifyExtras& extras);

json probe_report(const Regularizer& reg, const PerturbReport& report, const ProbeTargets& which,
                  int pairs_per_radius);

}  // namespace stabcert::io

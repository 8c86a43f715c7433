#pragma once

#include "hrg/bl_certificate.hpp"
#include "hrg/dynamics.hpp"
#include "hrg/rg_engine.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace hrg {

using Json = nlohmann::json;

/// Non-finite doubles become null.
Json number_or_null(double v);

Json to_json(const FourierPotential& pot);
Json to_json(const RadialPotential& pot);
Json to_json(const PotentialRep& pot);
/// Inverse of to_json(PotentialRep); dispatches on the "kind" field.
PotentialRep potential_from_json(const Json& j);

Json to_json(const FlowDiagnostics& d);
/// One flow.jsonl record (diagnostics only; potentials are omitted).
Json to_json(const RGFlowState& st);
Json to_json(const BLCertificate& c);
Json to_json(const GapBounds& b);
Json to_json(const GapEstimate& g);
Json to_json(const VarianceEstimate& v);

/// Columns (j, norm, g, nu, epsilon, delta) of a flow, one row per reblocking scale.
void write_flow_csv(std::ostream& os, const std::vector<RGFlowState>& flow, const BLCertificate* cert = nullptr);
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// RFC-4180 field: quoted when it contains a comma, quote, CR or LF; quotes doubled.
std::string csv_field(const std::string& s);
std::string csv_line(const std::vector<std::string>& fields);
/// Shortest round-trip decimal form; empty for non-finite values.
std::string format_number(double v);

} // namespace hrg

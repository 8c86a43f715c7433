#include "hrg/serialize.hpp"

#include "hrg/errors.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace hrg {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

namespace {

Json numbers(const std::vector<double>& v)
{
    Json a = Json::array();
    for (double x : v) a.push_back(number_or_null(x));
    return a;
}

double num(const Json& j, const char* key)
{
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) throw ConfigError(std::string("potential: missing number '") + key + "'");
    return it->get<double>();
}

std::vector<double> num_array(const Json& j, const char* key)
{
    const auto it = j.find(key);
    if (it == j.end() || !it->is_array()) throw ConfigError(std::string("potential: missing array '") + key + "'");
    std::vector<double> v;
    for (const auto& x : *it) {
        if (!x.is_number()) throw ConfigError(std::string("potential: non-numeric entry in '") + key + "'");
        v.push_back(x.get<double>());
    }
    return v;
}

} // namespace

Json to_json(const FourierPotential& pot)
{
    return {{"kind", "fourier"}, {"coeffs", numbers(pot.coeffs())}};
}

Json to_json(const RadialPotential& pot)
{
    return {{"kind", "radial"},
            {"n", pot.n()},
            {"block_volume", pot.block_volume()},
            {"r_max", pot.r_max()},
            {"values", numbers(pot.values())}};
}

Json to_json(const PotentialRep& pot)
{
    return std::visit([](const auto& p) { return to_json(p); }, pot);
}

PotentialRep potential_from_json(const Json& j)
{
    if (!j.is_object() || !j.contains("kind")) throw ConfigError("potential: expected an object with a 'kind'");
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "fourier") return FourierPotential(num_array(j, "coeffs"));
    if (kind == "radial")
        return RadialPotential(int(num(j, "n")), num(j, "block_volume"), num(j, "r_max"), num_array(j, "values"));
    throw ConfigError("potential: unknown kind '" + kind + "'");
}

Json to_json(const FlowDiagnostics& d)
{
    return {{"lambda", number_or_null(d.lambda)},
            {"variance", number_or_null(d.variance)},
            {"block_volume", number_or_null(d.block_volume)},
            {"norm", number_or_null(d.norm)},
            {"g", number_or_null(d.g)},
            {"nu", number_or_null(d.nu)},
            {"fit_residual", number_or_null(d.fit_residual)},
            {"window", number_or_null(d.window)},
            {"s_neg", number_or_null(d.s_neg)},
            {"s_neg_radius", number_or_null(d.s_neg_radius)},
            {"epsilon", number_or_null(d.epsilon)},
            {"valid", d.valid},
            {"guard_violated", d.guard_violated},
            {"large_field_radius", number_or_null(d.large_field_radius)},
            {"large_field_hessian", number_or_null(d.large_field_hessian)},
            {"quadrature_order", d.quadrature_order}};
}

Json to_json(const RGFlowState& st)
{
    Json j = to_json(st.diag);
    j["scale"] = st.scale;
    j["final"] = st.final_step;
    j["backend"] = std::holds_alternative<FourierPotential>(st.potential) ? "fourier" : "radial";
    return j;
}

Json to_json(const BLCertificate& c)
{
    return {{"first_scale", c.first_scale},
            {"lambdas", numbers(c.lambdas)},
            {"epsilons", numbers(c.epsilons)},
            {"deltas", numbers(c.deltas)},
            {"band_eigenvalues", numbers(c.band_eigenvalues)},
            {"gap_lower_bound", number_or_null(c.gap_lower_bound)},
            {"valid", c.valid}};
}

Json to_json(const GapBounds& b)
{
    return {{"lower", number_or_null(b.lower)},
            {"upper", number_or_null(b.upper)},
            {"valid", b.valid},
            {"variance_per_site", number_or_null(b.variance_per_site)},
            {"final_curvature", number_or_null(b.final_curvature)},
            {"certificate", to_json(b.certificate)}};
}

Json to_json(const GapEstimate& g)
{
    return {{"gamma", number_or_null(g.gamma)},
            {"se", number_or_null(g.se)},
            {"method", g.method},
            {"observable", g.observable},
            {"inconclusive", g.inconclusive},
            {"variance_ratio", number_or_null(g.variance_ratio)},
            {"fit_points", g.fit_points}};
}

Json to_json(const VarianceEstimate& v)
{
    return {{"variance", number_or_null(v.variance)}, {"se", number_or_null(v.se)}, {"mean", number_or_null(v.mean)}};
}

std::string format_number(double v)
{
    if (!std::isfinite(v)) return {};
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string csv_line(const std::vector<std::string>& fields)
{
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += csv_field(fields[i]);
    }
    return line + "\r\n";
}

void write_flow_csv(std::ostream& os, const std::vector<RGFlowState>& flow, const BLCertificate* cert)
{
    os << csv_line({"j", "norm", "g", "nu", "epsilon", "delta"});
    for (const auto& st : flow) {
        if (st.final_step) continue;
        double delta = kNaN;
        if (cert) {
            const int k = st.scale - cert->first_scale;
            if (k >= 0 && k < int(cert->deltas.size())) delta = cert->deltas[k];
        }
        os << csv_line({std::to_string(st.scale), format_number(st.diag.norm), format_number(st.diag.g),
                        format_number(st.diag.nu), format_number(st.diag.epsilon), format_number(delta)});
    }
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj)
{
    std::vector<std::string> head{"t"};
    head.insert(head.end(), traj.names.begin(), traj.names.end());
    os << csv_line(head);
    for (std::size_t i = 0; i < traj.length(); ++i) {
        std::vector<std::string> row{format_number(traj.dt * double(i))};
        for (const auto& s : traj.series) row.push_back(format_number(s[i]));
        os << csv_line(row);
    }
}

} // namespace hrg

#include "hrg/bl_certificate.hpp"

#include "hrg/errors.hpp"

#include <cmath>
#include <numbers>

namespace hrg {

std::vector<double> recurrence_step(const std::vector<double>& d_plus, double lambda, double eps, int scale)
{
    if (!(eps >= 0.0 && eps < 1.0)) throw InvalidCertificateError("recurrence_step: epsilon outside [0, 1)");
    std::vector<double> d(d_plus.size());
    const double a = 1.0 / (1.0 - eps);
    for (std::size_t i = 0; i < d.size(); ++i) {
        // index i is band b = i + 1; Q_scale is the identity there iff b > scale
        const bool identity = int(i) + 1 > scale || i + 1 == d.size();
        d[i] = (identity ? lambda * a : 0.0) + d_plus[i] * a * a;
    }
    return d;
}

BLCertificate build_certificate(const CovarianceDecomposition& decomp, const std::vector<double>& epsilons,
                                int first_scale)
{
    const int N = decomp.lattice.N();
    if (first_scale < 0 || first_scale > N) throw RangeError("build_certificate: first scale out of range");
    if (int(epsilons.size()) != N + 1 - first_scale)
        throw ParameterError("build_certificate: need one epsilon per scale");
    BLCertificate c;
    c.first_scale = first_scale;
    c.epsilons = epsilons;
    c.lambdas.assign(decomp.lambdas.begin() + first_scale, decomp.lambdas.end());
    c.valid = true;
    for (double e : epsilons)
        if (!(e >= 0.0 && e < 1.0)) c.valid = false;
    c.band_eigenvalues.assign(N + 1, 0.0);
    if (!c.valid) {
        c.deltas.assign(epsilons.size(), INFINITY);
        c.gap_lower_bound = 0.0;
        return c;
    }
    double prod = 1.0;
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        c.deltas.push_back(prod / (1.0 - epsilons[k]));
        prod /= (1.0 - epsilons[k]) * (1.0 - epsilons[k]);
    }
    // D_N first, then down to the first scale
    std::vector<double> d(N + 1, 0.0);
    for (int j = N; j >= first_scale; --j) d = recurrence_step(d, decomp.lambdas[j], epsilons[j - first_scale], j);
    c.band_eigenvalues = d;
    double top = 0.0;
    for (double v : d) top = std::max(top, v);
    c.gap_lower_bound = top > 0.0 ? 1.0 / top : INFINITY;
    return c;
}

BLCertificate certificate_from_flow(const std::vector<RGFlowState>& flow, const CovarianceDecomposition& decomp)
{
    std::vector<double> eps;
    int first = -1;
    for (const auto& st : flow) {
        if (st.final_step) continue;
        if (first < 0) first = st.scale;
        eps.push_back(st.diag.epsilon);
    }
    if (first < 0) throw ParameterError("certificate_from_flow: empty flow");
    return build_certificate(decomp, eps, first);
}

double exact_variance_per_site(const std::vector<RGFlowState>& flow, const CovarianceDecomposition& decomp)
{
    if (flow.empty() || !flow.back().final_step)
        throw ParameterError("exact_variance_per_site: flow lacks the final step");
    const double kappa = decomp.zero_mode_coupling();
    const double V = double(decomp.lattice.num_sites());
    return 1.0 / kappa - final_curvature(flow.back()) / (V * kappa * kappa);
}

GapBounds sg_gap_bounds(const std::vector<RGFlowState>& flow, const CovarianceDecomposition& decomp)
{
    GapBounds b;
    b.certificate = certificate_from_flow(flow, decomp);
    b.valid = b.certificate.valid;
    b.lower = b.certificate.gap_lower_bound;
    b.final_curvature = final_curvature(flow.back());
    b.variance_per_site = exact_variance_per_site(flow, decomp);
    b.upper = 1.0 / b.variance_per_site;
    return b;
}

GapBounds dg_gap_bounds(const std::vector<RGFlowState>& reduced_flow, const CovarianceDecomposition& decomp,
                        const DGSiteConstants& site)
{
    const double beta = std::get<SineGordonMode>(decomp.mode).beta;
    const double two_pi_sq = 4.0 * std::numbers::pi * std::numbers::pi;
    GapBounds b;
    b.certificate = certificate_from_flow(reduced_flow, decomp);
    b.valid = b.certificate.valid;
    b.final_curvature = final_curvature(reduced_flow.back());
    b.variance_per_site = exact_variance_per_site(reduced_flow, decomp);
    // D(sum sigma) = |Lambda| in this normalization
    b.upper = 1.0 / b.variance_per_site;
    if (b.valid) {
        const double gamma_r = b.certificate.gap_lower_bound;
        b.lower = 1.0 / (2.0 * two_pi_sq * site.inverse_gap_sup *
                         (1.0 + beta * beta * site.spin_variance_sup / gamma_r));
    }
    return b;
}

} // namespace hrg

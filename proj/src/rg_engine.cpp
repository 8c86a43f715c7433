#include "hrg/rg_engine.hpp"

#include "hrg/errors.hpp"
#include "hrg/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hrg {

namespace {

// Integration frame for zeta: nodes zeta = centre + tau * u.
struct Frame {
    double centre = 0.0;
    double tau = 1.0;
};

double log_sum_exp(const std::vector<double>& a)
{
    const double m = *std::max_element(a.begin(), a.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : a) s += std::exp(x - m);
    return m + std::log(s);
}

// Locate the dominant region of zeta -> zeta^2/(2 s2) + W(x + zeta) and choose a Gauss-Hermite frame
// covering it: centred at the global minimum, wide enough to reach every point within 40 of it.
Frame adapt_frame(const std::function<double(double)>& W, double x, double s2)
{
    const double s = std::sqrt(s2);
    const double Z = 12.0 * s + 1.2 * std::abs(x);
    const int P = 801;
    const double dz = 2.0 * Z / (P - 1);
    auto f = [&](double z) { return 0.5 * z * z / s2 + W(x + z); };
    std::vector<double> fv(P);
    int imin = 0;
    for (int i = 0; i < P; ++i) {
        fv[i] = f(-Z + dz * i);
        if (fv[i] < fv[imin]) imin = i;
    }
    int lo = imin, hi = imin;
    for (int i = 0; i < P; ++i)
        if (fv[i] - fv[imin] < 40.0) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
        }
    // golden-section refinement of the minimum inside the bracketing cells
    double a = -Z + dz * std::max(imin - 1, 0), b = -Z + dz * std::min(imin + 1, P - 1);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    double f1 = f(c1), f2 = f(c2);
    for (int it = 0; it < 80 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
        if (f1 < f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - gr * (b - a);
            f1 = f(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + gr * (b - a);
            f2 = f(c2);
        }
    }
    const double zs = 0.5 * (a + b);
    const double d = 1e-3 * s;
    const double kappa = (f(zs + d) - 2.0 * f(zs) + f(zs - d)) / (d * d);
    const double tau_c = kappa > 0.0 ? 1.0 / std::sqrt(kappa) : s;
    const double half = std::max(zs - (-Z + dz * (lo - 1)), (-Z + dz * (hi + 1)) - zs);
    Frame fr;
    fr.centre = zs;
    fr.tau = (hi - lo <= 2) ? std::min(tau_c, half / 6.0) : std::max(tau_c, half / 6.0);
    return fr;
}

double log_expectation_1d(const std::function<double(double)>& W, double x, double s2, const Frame& fr,
                          const QuadratureRule& rule)
{
    // normalized by the same rule applied to W = 0, so constants pass through exactly
    const std::size_t n = rule.nodes.size();
    std::vector<double> terms(n), gauss(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rule.nodes[i];
        const double z = fr.centre + fr.tau * u;
        gauss[i] = rule.log_weights[i] + 0.5 * u * u - 0.5 * z * z / s2;
        terms[i] = gauss[i] - W(x + z);
    }
    return log_sum_exp(terms) - log_sum_exp(gauss);
}

// Compared on log E = -W_+ / reblock, the per-block integral.
bool agree(const std::vector<double>& a, const std::vector<double>& b, double tol, double reblock)
{
    const double r = reblock > 0.0 ? reblock : 1.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (!(std::abs(a[k] - b[k]) / r <= tol * std::max(1.0, std::abs(b[k]) / r))) return false;
    return true;
}

} // namespace

ScalarStep rg_step_scalar(const std::function<double(double)>& W, const std::vector<double>& points, double s2,
                          double reblock, const QuadratureOptions& opts)
{
    if (!(s2 >= 0.0)) throw ParameterError("rg_step_scalar: variance must be nonnegative");
    ScalarStep out;
    out.values.resize(points.size());
    if (s2 == 0.0) {
        for (std::size_t k = 0; k < points.size(); ++k) out.values[k] = reblock * W(points[k]);
        return out;
    }
    std::vector<Frame> frames(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) frames[k] = adapt_frame(W, points[k], s2);

    auto evaluate = [&](int order) {
        const auto& rule = gauss_hermite_normal(order);
        std::vector<double> v(points.size());
        for (std::size_t k = 0; k < points.size(); ++k)
            v[k] = -reblock * log_expectation_1d(W, points[k], s2, frames[k], rule);
        return v;
    };
    std::vector<double> prev = evaluate(opts.start_order);
    for (int order = 2 * opts.start_order; order <= opts.max_order; order *= 2) {
        std::vector<double> cur = evaluate(order);
        for (double v : cur)
            if (!std::isfinite(v)) throw QuadratureError("rg_step_scalar: non-finite result");
        if (agree(prev, cur, opts.tol, reblock)) {
            out.values = std::move(cur);
            out.order = order;
            return out;
        }
        prev = std::move(cur);
    }
    throw QuadratureError("rg_step_scalar: Gauss-Hermite orders did not converge");
}

RadialStep rg_step_radial(const RadialPotential& pot, double s2, double reblock, double r_max_out,
                          const QuadratureOptions& opts)
{
    if (!(s2 >= 0.0)) throw ParameterError("rg_step_radial: variance must be nonnegative");
    const int n = pot.n();
    const std::size_t M = pot.size() - 1;
    std::vector<double> pts(M + 1);
    for (std::size_t k = 0; k <= M; ++k) pts[k] = r_max_out * double(k) / double(M);
    auto W1 = [&pot](double y) { return pot.value(y); };

    if (n == 1 || s2 == 0.0) {
        auto st = rg_step_scalar(W1, pts, s2, reblock, opts);
        return {RadialPotential(n, pot.block_volume() * reblock, r_max_out, std::move(st.values)), st.order};
    }

    const double alpha = 0.5 * (n - 3);
    struct Frame2 {
        Frame par;
        double tau_perp;
    };
    std::vector<Frame2> frames(M + 1);
    for (std::size_t k = 0; k <= M; ++k) {
        frames[k].par = adapt_frame(W1, pts[k], s2);
        const double R = std::abs(pts[k] + frames[k].par.centre);
        const double t = R > 1e-12 ? pot.derivative(R) / R : pot.second_derivative(0.0);
        frames[k].tau_perp = 1.0 / std::sqrt(std::max(1.0 / s2 + t, 0.25 / s2));
    }

    // floor(s) <= W(r) for all r >= s, for skipping nodes whose weight is negligible against a term
    // already seen; -inf (no skipping) unless the quartic tail increases beyond r_max.
    const auto& tl = pot.tail();
    const double rm = pot.r_max();
    const bool tail_up = tl.c >= 0.0 && 2.0 * tl.b * rm + 4.0 * tl.c * rm * rm * rm >= 0.0;
    std::vector<double> suffix_min(M + 1);
    suffix_min[M] = std::min(pot.values()[M], tl.a + tl.b * rm * rm + tl.c * rm * rm * rm * rm) - 1.0;
    for (std::size_t k = M; k-- > 0;) suffix_min[k] = std::min(suffix_min[k + 1], pot.values()[k] - 1.0);
    auto floor_at = [&](double r) -> double {
        if (!tail_up) return -INFINITY;
        if (r >= rm) return tl.a + tl.b * r * r + tl.c * r * r * r * r - 1.0;
        return suffix_min[std::size_t(r / pot.spacing())];
    };
    constexpr double kNegligible = 60.0;

    auto evaluate = [&](int order) {
        const auto& gh = gauss_hermite_normal(order);
        const auto& gl = gauss_laguerre(order, alpha);
        std::vector<double> v(M + 1), base(order), lag(order), terms;
        terms.reserve(std::size_t(order) * order);
        for (std::size_t k = 0; k <= M; ++k) {
            const auto& fr = frames[k];
            const double tp = fr.tau_perp;
            const double stretch = tp * tp / s2 - 1.0;
            for (int i = 0; i < order; ++i) {
                const double u = gh.nodes[i];
                const double z = fr.par.centre + fr.par.tau * u;
                base[i] = gh.log_weights[i] + 0.5 * u * u - 0.5 * z * z / s2;
            }
            for (int j = 0; j < order; ++j) lag[j] = gl.log_weights[j] - gl.nodes[j] * stretch;
            // the product weights factorize, and so does their normalization
            const double log_gauss = log_sum_exp(base) + log_sum_exp(lag);
            const double z0 = fr.par.centre, y0 = pts[k] + z0;
            double best = base[order / 2] + lag[0] - pot.value(std::sqrt(y0 * y0 + 2.0 * tp * tp * gl.nodes[0]));
            terms.clear();
            for (int i = 0; i < order; ++i) {
                const double y = pts[k] + fr.par.centre + fr.par.tau * gh.nodes[i];
                const double w_floor = floor_at(std::abs(y));
                for (int j = 0; j < order; ++j) {
                    const double g = base[i] + lag[j];
                    if (g - w_floor < best - kNegligible) continue;
                    terms.push_back(g - pot.value(std::sqrt(y * y + 2.0 * tp * tp * gl.nodes[j])));
                    best = std::max(best, terms.back());
                }
            }
            v[k] = -reblock * (log_sum_exp(terms) - log_gauss);
        }
        return v;
    };
    std::vector<double> prev = evaluate(opts.start_order);
    for (int order = 2 * opts.start_order; order <= std::min(opts.max_order, 512); order *= 2) {
        std::vector<double> cur = evaluate(order);
        for (double v : cur)
            if (!std::isfinite(v)) throw QuadratureError("rg_step_radial: non-finite result");
        if (agree(prev, cur, opts.tol, reblock))
            return {RadialPotential(n, pot.block_volume() * reblock, r_max_out, std::move(cur)), order};
        prev = std::move(cur);
    }
    throw QuadratureError("rg_step_radial: product quadrature did not converge");
}

namespace {

std::vector<double> cosine_coefficients(const std::vector<double>& v)
{
    const int M = int(v.size());
    std::vector<double> ct(M);
    for (int k = 0; k < M; ++k) ct[k] = std::cos(2.0 * std::numbers::pi * k / M);
    std::vector<double> c(M / 2 + 1, 0.0);
    for (int q = 0; q <= M / 2; ++q) {
        double s = 0.0;
        for (int k = 0; k < M; ++k) s += v[k] * ct[(std::size_t(q) * k) % M];
        c[q] = s / M;
    }
    return c;
}

double top_quartile(const std::vector<double>& c)
{
    const int Q = int(c.size()) - 1;
    double s = 0.0;
    for (int q = Q - Q / 4; q <= Q; ++q) s += std::abs(c[q]);
    return s;
}

} // namespace

SmoothedDensity fourier_smooth_density(const FourierPotential& pot, double variance)
{
    const auto work = pot.truncated(std::max(pot.q_max(), 64));
    const int M = 4 * work.q_max();
    auto v = work.sample(M);
    SmoothedDensity out;
    out.shift = *std::min_element(v.begin(), v.end());
    for (double& x : v) x = std::exp(-(x - out.shift));
    out.before = cosine_coefficients(v);
    out.after = out.before;
    for (std::size_t q = 0; q < out.after.size(); ++q) out.after[q] *= std::exp(-0.5 * variance * double(q) * q);
    return out;
}

FourierStep rg_step_fourier(const FourierPotential& pot, double variance, double reblock)
{
    if (!(variance >= 0.0)) throw ParameterError("rg_step_fourier: variance must be nonnegative");
    FourierStep out;
    out.norm_in = fourier_norm(pot, true);
    out.guard_violated = out.norm_in > 0.2;

    const auto dens = fourier_smooth_density(pot, variance);
    if (top_quartile(dens.before) > 1e-10 * std::abs(dens.before[0]))
        throw ResolutionError("rg_step_fourier: e^{-V} not resolved on the circle grid (aliasing)");
    const int Qh = int(dens.after.size()) - 1; // M / 2
    const int M = 2 * Qh;
    std::vector<double> ct(M);
    for (int k = 0; k < M; ++k) ct[k] = std::cos(2.0 * std::numbers::pi * k / M);
    std::vector<double> vplus(M);
    for (int k = 0; k < M; ++k) {
        double f = dens.after[0] + dens.after[Qh] * ct[(std::size_t(Qh) * k) % M];
        for (int q = 1; q < Qh; ++q) f += 2.0 * dens.after[q] * ct[(std::size_t(q) * k) % M];
        if (!(f > 0.0)) throw NumericalError("rg_step_fourier: smoothed density not positive");
        vplus[k] = -reblock * (std::log(f) - dens.shift);
    }
    const auto full = cosine_coefficients(vplus);
    double scale = 0.0;
    for (int q = 1; q <= Qh; ++q) scale += std::abs(full[q]);
    if (top_quartile(full) > 1e-10 * std::max(1.0, scale))
        throw ResolutionError("rg_step_fourier: V_+ not resolved on the circle grid (aliasing)");
    const int qm = std::max(pot.q_max(), 64);
    out.potential = FourierPotential(std::vector<double>(full.begin(), full.begin() + qm + 1));
    out.norm_out = fourier_norm(out.potential, true);
    return out;
}

CouplingFit fit_couplings(const RadialPotential& pot, double window)
{
    if (!(window <= pot.r_max() * (1.0 + 1e-12))) throw ParameterError("fit_couplings: window exceeds r_max");
    std::vector<std::size_t> ks;
    for (std::size_t k = 0; k < pot.size(); ++k)
        if (pot.radius(k) <= window * (1.0 + 1e-12)) ks.push_back(k);
    if (ks.size() < 4) throw ResolutionError("fit_couplings: fewer than 4 knots inside the window");
    const double inv = 1.0 / pot.block_volume();
    Eigen::MatrixXd A(ks.size(), 3);
    Eigen::VectorXd y(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double t = pot.radius(ks[i]) / window;
        A(i, 0) = 1.0;
        A(i, 1) = 0.5 * t * t;
        A(i, 2) = 0.25 * t * t * t * t;
        y(i) = pot.values()[ks[i]] * inv;
    }
    Eigen::Vector3d c = A.colPivHouseholderQr().solve(y);
    CouplingFit fit;
    fit.u = c(0);
    fit.nu = c(1) / (window * window);
    fit.g = c(2) / (window * window * window * window);
    const Eigen::VectorXd res = y - A * c;
    const double ybar = y.mean();
    const double spread = (y.array() - ybar).matrix().norm();
    fit.residual = spread > 0.0 ? res.norm() / spread : res.norm();
    return fit;
}

EpsilonResult compute_epsilon(const RGFlowState& state)
{
    double s_neg = 0.0;
    if (const auto* r = std::get_if<RadialPotential>(&state.potential)) {
        s_neg = radial_hessian_bounds(*r, r->n()).s_neg;
    } else {
        const auto& f = std::get<FourierPotential>(state.potential);
        s_neg = fourier_second_derivative_sup(f).coefficient_bound / state.diag.block_volume;
    }
    EpsilonResult e;
    e.epsilon = std::max(0.0, state.diag.lambda * s_neg);
    e.valid = e.epsilon < 1.0;
    return e;
}

namespace {

void fill_diagnostics(RGFlowState& st, const CovarianceDecomposition& decomp, const FlowOptions& opts)
{
    const auto& lat = decomp.lattice;
    const int j = st.scale;
    auto& dg = st.diag;
    dg.lambda = decomp.lambdas[j];
    dg.variance = decomp.site_variance(j);
    dg.block_volume = lat.block_volume_real(j);
    const double field_scale = std::pow(double(lat.L()), -0.5 * (lat.d() - 2) * j);
    if (const auto* r = std::get_if<RadialPotential>(&st.potential)) {
        const auto hb = radial_hessian_bounds(*r, r->n());
        dg.s_neg = hb.s_neg;
        dg.s_neg_radius = hb.argmin_r;
        dg.window = std::min(field_scale, r->r_max());
        try {
            const auto fit = fit_couplings(*r, dg.window);
            dg.g = fit.g;
            dg.nu = fit.nu;
            dg.fit_residual = fit.residual;
        } catch (const ResolutionError&) {
        }
        const double gj = (dg.g > 0.0) ? dg.g : opts.g_reference;
        if (gj > 0.0) {
            dg.large_field_radius = field_scale * std::pow(gj, -0.25);
            if (dg.large_field_radius < r->r_max())
                dg.large_field_hessian =
                    std::pow(double(lat.L()), 2.0 * j) * radial_min_hessian(*r, dg.large_field_radius);
        }
    } else {
        const auto& f = std::get<FourierPotential>(st.potential);
        dg.norm = fourier_norm(f, true);
        dg.s_neg = fourier_second_derivative_sup(f).coefficient_bound / dg.block_volume;
    }
    const auto e = compute_epsilon(st);
    dg.epsilon = e.epsilon;
    dg.valid = e.valid;
}

PotentialRep step(const PotentialRep& W, double s2, double reblock, double rescale, const FlowOptions& opts,
                  FlowDiagnostics& dg)
{
    if (const auto* r = std::get_if<RadialPotential>(&W)) {
        auto st = rg_step_radial(*r, s2, reblock, r->r_max() * rescale, opts.quadrature);
        dg.quadrature_order = st.order;
        return std::move(st.potential);
    }
    auto st = rg_step_fourier(std::get<FourierPotential>(W), s2, reblock);
    dg.guard_violated = st.guard_violated;
    return std::move(st.potential);
}

} // namespace

std::vector<RGFlowState> run_flow(const PotentialRep& initial, const CovarianceDecomposition& decomp,
                                  const FlowOptions& opts)
{
    const auto& lat = decomp.lattice;
    const int N = lat.N();
    const int stop = opts.last_scale < 0 ? N : std::min(opts.last_scale, N);
    if (opts.first_scale < 0 || opts.first_scale > stop) throw RangeError("run_flow: first scale out of range");
    const double Ld = double(lat.reblock_factor());
    const double rescale = opts.rescale_grid ? std::pow(double(lat.L()), -0.5 * (lat.d() - 2)) : 1.0;

    std::vector<RGFlowState> flow;
    PotentialRep W = initial;
    for (int j = opts.first_scale; j <= stop; ++j) {
        RGFlowState st;
        st.scale = j;
        st.potential = W;
        fill_diagnostics(st, decomp, opts);
        if (j < stop) {
            try {
                W = step(W, st.diag.variance, Ld, rescale, opts, st.diag);
            } catch (const NumericalError& e) {
                if (!opts.stop_on_failure) throw;
                st.error = e.what();
                flow.push_back(std::move(st));
                return flow;
            }
        } else if (j == N && opts.final_step) {
            RGFlowState fin;
            fin.scale = N;
            fin.final_step = true;
            fin.diag.block_volume = double(lat.num_sites());
            fin.potential = step(W, st.diag.variance, 1.0, 1.0, opts, fin.diag);
            if (const auto* f = std::get_if<FourierPotential>(&fin.potential)) fin.diag.norm = fourier_norm(*f, true);
            flow.push_back(std::move(st));
            flow.push_back(std::move(fin));
            break;
        }
        flow.push_back(std::move(st));
    }
    return flow;
}

double final_curvature(const RGFlowState& final_state)
{
    if (const auto* r = std::get_if<RadialPotential>(&final_state.potential)) {
        // even function: D(h) = 2 (W(h) - W(0)) / h^2 = W''(0) + O(h^2), Richardson on h and 2h
        const auto& v = r->values();
        const double h = r->spacing();
        const double d1 = 2.0 * (v[1] - v[0]) / (h * h);
        const double d2 = 2.0 * (v[2] - v[0]) / (4.0 * h * h);
        return (4.0 * d1 - d2) / 3.0;
    }
    return std::get<FourierPotential>(final_state.potential).second_derivative(0.0);
}

ContractionSummary contraction_summary(const std::vector<RGFlowState>& flow)
{
    ContractionSummary cs;
    std::vector<double> js, logs;
    for (std::size_t i = 0; i < flow.size(); ++i) {
        if (flow[i].final_step) continue;
        const double nv = flow[i].diag.norm;
        if (!(nv > 0.0)) continue;
        js.push_back(flow[i].scale);
        logs.push_back(std::log(nv));
        if (i + 1 < flow.size() && !flow[i + 1].final_step) cs.ratios.push_back(flow[i + 1].diag.norm / nv);
    }
    if (js.size() >= 2) {
        const double k = double(js.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < js.size(); ++i) {
            sx += js[i];
            sy += logs[i];
            sxx += js[i] * js[i];
            sxy += js[i] * logs[i];
        }
        cs.fitted_kappa = std::exp((k * sxy - sx * sy) / (k * sxx - sx * sx));
    }
    return cs;
}

} // namespace hrg

#include "hrg/validation.hpp"

#include "hrg/bl_certificate.hpp"
#include "hrg/dynamics.hpp"
#include "hrg/errors.hpp"
#include "hrg/experiment.hpp"
#include "hrg/oracle.hpp"
#include "hrg/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

namespace hrg {

namespace {

constexpr double kPi = std::numbers::pi;

template <class... A>
std::string fmt(const char* f, A... a)
{
    char buf[1024];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

class Timer {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

CheckResult check(int id, std::string name)
{
    CheckResult r;
    r.id = id;
    r.name = std::move(name);
    return r;
}

double uniform(CounterRng& rng, double a, double b) { return a + (b - a) * rng.uniform(); }

// ------------------------------------------------------------------------------------------
// Monte Carlo helpers

struct McRun {
    GapEstimate gap;
    VarianceEstimate var; ///< var(F) / |Lambda|
    double h = 0.0;
    double taus = 0.0;
};

/// Langevin run sized in units of the expected relaxation time 1/slow; F sampled 20 times per 1/slow.
McRun langevin_mc(const LangevinModel& m, double slow, double taus, double h_scale, std::uint64_t seed)
{
    LangevinParams p;
    p.h = h_scale / curvature_estimate(m);
    const double tau = 1.0 / slow;
    p.thin = std::max(1, int(tau / (20.0 * p.h)));
    p.steps = std::max<long>(long(taus * tau / p.h) / p.thin * p.thin, 64L * p.thin);
    p.burn_in = long(20.0 * tau / p.h);
    p.record_modes = false;
    const auto tr = langevin_run(m, p, seed);
    const double vol = double(m.lattice.num_sites());
    McRun r;
    r.h = p.h;
    r.taus = taus;
    r.gap = estimate_gap(tr, "F", vol);
    r.var = estimate_variance(tr, "F");
    r.var.variance /= vol;
    r.var.se /= vol;
    return r;
}

McRun dg_mc(const DGModel& m, double slow, double taus, std::uint64_t seed)
{
    DGParams p;
    const double tau = 1.0 / slow;
    p.record_dt = tau / 20.0;
    p.t_max = taus * tau;
    p.burn_in = 20.0 * tau;
    const auto tr = dg_glauber_run(m, p, seed);
    const double vol = double(m.lattice.num_sites());
    McRun r;
    r.taus = taus;
    r.gap = estimate_gap(tr, "F", vol);
    r.var = estimate_variance(tr, "F");
    r.var.variance /= vol;
    r.var.se /= vol;
    return r;
}

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

// ------------------------------------------------------------------------------------------
// 1. operator identities

CheckResult operator_identities(bool full)
{
    Timer t;
    CheckResult r = check(1, "operator identities: sum lambda_j Q_j = (-Delta_H + m2)^{-1}");
    double worst = 0.0, worst_lib = 0.0;
    int cases = 0;
    for (int d : {1, 2, 4})
        for (int N = 1; N <= 3; ++N) {
            if (!full && d == 4 && N == 3) continue;
            for (double m2 : {1e-2, 1.0}) {
                HierLattice lat(2, N, d, 1);
                const auto dec = build_covariance_decomposition(lat, MassiveMode{m2});
                const auto S = dense_block_sum(lat, dec.lambdas).matrix;
                if (lat.num_sites() <= 1024) {
                    worst = std::max(worst, (S - dense_hier_operators(dec).covariance.matrix).cwiseAbs().maxCoeff());
                    worst_lib = std::max(worst_lib, verify_decomposition(dec));
                } else {
                    // S - A^{-1} = A^{-1} (A S - I) and A^{-1} has row sums 1/m2, so
                    // max|S - A^{-1}| <= max|A S - I| / m2
                    double res = 0.0;
                    for (Eigen::Index c = 0; c < S.cols(); ++c) {
                        FieldVector col(lat, std::vector<double>(S.col(c).data(), S.col(c).data() + S.rows()));
                        const auto lap = apply_hier_laplacian(col);
                        for (Eigen::Index x = 0; x < S.rows(); ++x)
                            res = std::max(res, std::abs(lap.values[x] + m2 * S(x, c) - (x == c ? 1.0 : 0.0)));
                    }
                    worst = std::max(worst, res / m2);
                }
                ++cases;
            }
        }
    r.passed = worst <= 1e-9 && worst_lib <= 1e-9;
    r.detail = fmt("%d cases, max entry error %.2e (dense oracle; residual bound at |Lambda| = 4096), %.2e (library "
                   "check, |Lambda| <= 1024)",
                   cases, worst, worst_lib);
    r.seconds = t.seconds();
    r.budget = 10.0;
    return r;
}

// ------------------------------------------------------------------------------------------
// 2. gaussian tightness

CheckResult gaussian_tightness(bool full)
{
    Timer t;
    CheckResult r = check(2, "gaussian tightness of the certificate");
    double worst = 0.0;
    int cases = 0;
    for (auto [d, N] : {std::pair{1, 8}, std::pair{2, 4}, std::pair{4, 2}})
        for (const CovarianceMode mode :
             {CovarianceMode{MassiveMode{1e-2}}, CovarianceMode{MassiveMode{1.0}}, CovarianceMode{SineGordonMode{0.2}}}) {
            HierLattice lat(2, N, d, 1);
            const auto dec = build_covariance_decomposition(lat, mode);
            const double lower = sg_gap_bounds(run_flow(FourierPotential(), dec), dec).lower;
            const double lmin = dense_hier_operators(dec).coupling.spectrum().front();
            worst = std::max(worst, std::abs(lower - lmin) / lmin);
            ++cases;
        }
    r.passed = worst <= 1e-10;
    r.detail = fmt("%d cases |Lambda| = 256, max rel |bound - lambda_min| %.2e", cases, worst);
    if (!full) {
        r.detail += "; dynamics skipped (quick)";
    } else {
        struct Case {
            const char* name;
            HierLattice lat;
            CovarianceMode mode;
        };
        for (const Case& c : {Case{"SG beta=0.5 d=2 N=2", HierLattice(2, 2, 2, 1), SineGordonMode{0.5}},
                              Case{"massive m2=0.05 d=1 N=4", HierLattice(2, 4, 1, 1), MassiveMode{0.05}}}) {
            const auto dec = build_covariance_decomposition(c.lat, c.mode);
            const LangevinModel m{c.lat, dec.precision(), NoSitePotential{}};
            const double lmin = dec.precision().min_eigenvalue(c.lat);
            const auto mc = langevin_mc(m, lmin, 2e5, 0.1, stream_key(2, std::uint64_t(c.lat.d())));
            const double err = std::abs(mc.gap.gamma - lmin);
            const bool ok = !mc.gap.inconclusive && err <= 0.05 * lmin + mc.h * lmin * lmin;
            r.passed = r.passed && ok;
            r.detail += fmt("; %s: gamma_hat %.5g +- %.2g vs %.5g (%+.2f%%)", c.name, mc.gap.gamma, mc.gap.se, lmin,
                            100.0 * (mc.gap.gamma / lmin - 1.0));
        }
    }
    r.seconds = t.seconds();
    r.budget = 300.0;
    return r;
}

// ------------------------------------------------------------------------------------------
// 3. one-step RG against the quadrature oracle

double oracle_log_e_1d(const std::function<double(double)>& W, double x, double s2)
{
    GibbsModel m;
    m.dim = 1;
    m.energy = [&](const Eigen::VectorXd& z) { return 0.5 * z(0) * z(0) / s2 + W(x + z(0)); };
    m.scale = std::sqrt(s2);
    return gibbs_exact_moments(m).log_normalizer - 0.5 * std::log(2 * kPi * s2);
}

double oracle_log_e_radial2(const RadialPotential& W, double x, double s2)
{
    GibbsModel m;
    m.dim = 2;
    m.energy = [&](const Eigen::VectorXd& z) {
        return 0.5 * z.squaredNorm() / s2 + W.value(std::hypot(x + z(0), z(1)));
    };
    m.scale = std::sqrt(s2);
    return gibbs_exact_moments(m).log_normalizer - std::log(2 * kPi * s2);
}

CheckResult one_step_rg(bool full)
{
    Timer t;
    CheckResult r = check(3, "one-step RG against the quadrature oracle");
    const int count = full ? 20 : 4;
    double worst[3] = {0.0, 0.0, 0.0};
    for (int k = 0; k < count; ++k) {
        CounterRng rng(stream_key(3, std::uint64_t(k)));
        const double g = uniform(rng, 0.02, 0.2), nu = uniform(rng, -0.3, 0.3);
        const double c = uniform(rng, -0.2, 0.2), w = uniform(rng, 0.5, 2.0);
        const double s2 = uniform(rng, 0.2, 1.2);
        const double rmax = 8.0 * std::pow(g, -0.25);
        for (int n : {1, 2}) {
            std::vector<double> v(257);
            for (int i = 0; i <= 256; ++i) {
                const double x = rmax * i / 256.0;
                v[i] = 0.25 * g * x * x * x * x + 0.5 * nu * x * x + c * std::cos(w * x);
            }
            const RadialPotential W(n, 1.0, rmax, v);
            const auto out = rg_step_radial(W, s2, 1.0, rmax);
            for (int i = 0; i <= 128; i += 16) {
                const double x = out.potential.radius(i);
                const double ref = n == 1 ? -oracle_log_e_1d([&](double y) { return W.value(std::abs(y)); }, x, s2)
                                          : -oracle_log_e_radial2(W, x, s2);
                const double e = std::abs(out.potential.values()[i] - ref) / std::max(1.0, std::abs(ref));
                worst[n - 1] = std::max(worst[n - 1], e);
            }
        }
        std::vector<double> coeffs(5, 0.0);
        double norm = 0.0;
        for (int q = 1; q <= 4; ++q) {
            coeffs[q] = uniform(rng, -1.0, 1.0) * std::exp(-0.5 * q);
            norm += 2.0 * (1 + q) * (1 + q) * std::abs(coeffs[q]);
        }
        const double target = uniform(rng, 0.02, 0.15);
        for (int q = 1; q <= 4; ++q) coeffs[q] *= target / norm;
        coeffs[0] = uniform(rng, -0.1, 0.1);
        const FourierPotential V(coeffs);
        const double var = uniform(rng, 0.2, 3.0);
        const auto st = rg_step_fourier(V, var, 1.0);
        for (int i = 0; i < 9; ++i) {
            const double x = -kPi + 2 * kPi * i / 8.0;
            const double ref = -oracle_log_e_1d([&](double y) { return V.value(y); }, x, var);
            worst[2] = std::max(worst[2], std::abs(st.potential.value(x) - ref) / std::max(1.0, std::abs(ref)));
        }
    }
    r.passed = std::max({worst[0], worst[1], worst[2]}) <= 1e-8;
    r.detail = fmt("%d random potentials per backend; max error radial n=1 %.2e, radial n=2 %.2e, fourier %.2e", count,
                   worst[0], worst[1], worst[2]);
    r.seconds = t.seconds();
    r.budget = 60.0;
    return r;
}

// ------------------------------------------------------------------------------------------
// 4. fourier smoothing identity

FourierPotential random_periodic(std::uint64_t seed, int q_max, double norm)
{
    CounterRng rng(stream_key(seed, 41));
    std::vector<double> c(q_max + 1, 0.0);
    for (int q = 1; q <= q_max; ++q) c[q] = uniform(rng, -1.0, 1.0) * std::exp(-0.6 * q);
    const double s = fourier_norm(FourierPotential(c), true);
    for (int q = 1; q <= q_max; ++q) c[q] *= norm / s;
    return FourierPotential(c);
}

CheckResult smoothing_identity()
{
    Timer t;
    CheckResult r = check(4, "fourier smoothing identity e^{-sigma q^2 / (2 beta)}");
    const double sigma = 0.75;
    double worst = 0.0;
    for (double beta : {0.15, 0.2, 0.25})
        for (std::uint64_t k = 0; k < 20; ++k) {
            const auto V = random_periodic(100 + k, 6, 0.1);
            const double var = sigma / beta;
            const auto d = fourier_smooth_density(V, var);
            for (std::size_t q = 0; q < d.after.size(); ++q) {
                const double expect = std::exp(-0.5 * var * double(q * q)) * d.before[q];
                worst = std::max(worst, std::abs(d.after[q] - expect) / std::max(std::abs(expect), 1e-300));
            }
        }
    r.passed = worst <= 1e-12;
    r.detail = fmt("60 potentials, max relative coefficient error %.2e", worst);
    r.seconds = t.seconds();
    r.budget = 1.0;
    return r;
}

// ------------------------------------------------------------------------------------------
// 5. sine-gordon contraction

CheckResult sg_contraction(bool full)
{
    Timer t;
    CheckResult r = check(5, "sine-gordon contraction");
    const double sigma = 0.75;
    const int count = full ? 20 : 5;
    double worst_ratio = 0.0, worst_kappa = 0.0;
    int over_local = 0, steps = 0;
    bool ok = true;
    for (double beta : {0.15, 0.2, 0.25}) {
        HierLattice lat(2, 6, 2, 1);
        const auto dec = build_covariance_decomposition(lat, SineGordonMode{beta});
        const double rate = 4.0 * std::exp(-sigma / (2 * beta));
        for (int k = 0; k < count; ++k) {
            CounterRng rng(stream_key(5, std::uint64_t(k), std::uint64_t(beta * 100)));
            const auto V = random_periodic(stream_key(51, std::uint64_t(k), std::uint64_t(beta * 100)), 4,
                                           uniform(rng, 0.005, 0.05));
            const auto flow = run_flow(V, dec);
            const auto cs = contraction_summary(flow);
            // ||V|| of the sampled input; the per-step ||V_j|| variant is reported alongside
            const double bound = rate * (1 + 10 * fourier_norm(V, true));
            for (std::size_t j = 0; j < cs.ratios.size(); ++j) {
                worst_ratio = std::max(worst_ratio, cs.ratios[j] / bound);
                ok = ok && cs.ratios[j] <= bound;
                over_local += cs.ratios[j] > rate * (1 + 10 * flow[j].diag.norm);
                ++steps;
            }
            ok = ok && cs.fitted_kappa < 1.0;
            worst_kappa = std::max(worst_kappa, cs.fitted_kappa);
        }
    }
    r.passed = ok;
    r.detail = fmt("%d potentials per beta, N = 6; max ratio / (L^2 e^{-sigma/(2 beta)} (1 + 10 ||V||)) %.4f, "
                   "max fitted kappa %.3f; per-step ||V_j|| form exceeded in %d / %d steps",
                   count, worst_ratio, worst_kappa, over_local, steps);
    r.seconds = t.seconds();
    r.budget = 60.0;
    return r;
}

// ------------------------------------------------------------------------------------------
// 6, 7, 9: shared sine-gordon and discrete gaussian data

const FourierPotential& sg_potential()
{
    static const FourierPotential V({0.0, 0.005, 0.001});
    return V;
}
constexpr double kSgBeta = 0.2;
constexpr double kDgBeta = 0.1;

struct Sandwich {
    std::vector<double> c_scaled; ///< lower L^{2N} for N = 2..5
    std::vector<double> upper_scaled;
    bool valid = true;
    std::vector<GapBounds> bounds;
};

Sandwich sg_sandwich(int n_max)
{
    Sandwich s;
    for (int N = 2; N <= n_max; ++N) {
        HierLattice lat(2, N, 2, 1);
        const auto dec = build_covariance_decomposition(lat, SineGordonMode{kSgBeta});
        const auto b = sg_gap_bounds(run_flow(sg_potential(), dec), dec);
        const double sc = std::pow(2.0, 2 * N);
        s.c_scaled.push_back(b.lower * sc);
        s.upper_scaled.push_back(b.upper * sc);
        s.valid = s.valid && b.valid;
        s.bounds.push_back(b);
    }
    return s;
}

Sandwich dg_sandwich(int n_max)
{
    Sandwich s;
    const auto site = dg_site_constants(kDgBeta);
    for (int N = 2; N <= n_max; ++N) {
        HierLattice lat(2, N, 2, 1);
        const auto dec = build_covariance_decomposition(lat, SineGordonMode{kDgBeta});
        auto c = dg_fourier(kDgBeta).coeffs();
        for (double& x : c) x *= double(lat.reblock_factor());
        FlowOptions o;
        o.first_scale = 1;
        const auto b = dg_gap_bounds(run_flow(FourierPotential(c), dec, o), dec, site);
        const double sc = std::pow(2.0, 2 * N);
        s.c_scaled.push_back(b.lower * sc);
        s.upper_scaled.push_back(b.upper * sc);
        s.valid = s.valid && b.valid;
        s.bounds.push_back(b);
    }
    return s;
}

std::string list(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt("%.4g", v[i]);
    return s;
}

struct SgDynamics {
    int N;
    McRun mc;
    double eps;
};

std::vector<SgDynamics> sg_dynamics()
{
    std::vector<SgDynamics> out;
    for (int N : {2, 3}) {
        HierLattice lat(2, N, 2, 1);
        const auto dec = build_covariance_decomposition(lat, SineGordonMode{kSgBeta});
        const LangevinModel m{lat, dec.precision(), PeriodicSitePotential{sg_potential()}};
        const double eps = dec.zero_mode_coupling();
        out.push_back({N, langevin_mc(m, eps, 2e4, 0.1, stream_key(6, std::uint64_t(N))), eps});
    }
    return out;
}

CheckResult sg_gap_sandwich(bool full, const std::vector<SgDynamics>& dyn)
{
    Timer t;
    CheckResult r = check(6, "sine-gordon gap sandwich c L^{-2N} <= gap <= L^{-2N}");
    const auto s = sg_sandwich(5);
    const double c = *std::min_element(s.c_scaled.begin(), s.c_scaled.end());
    const double top = *std::max_element(s.upper_scaled.begin(), s.upper_scaled.end());
    r.passed = s.valid && c > 0.0 && top <= 1.0;
    r.detail = fmt("beta %.2g, N = 2..5: lower L^{2N} = [%s] so c = %.4g; upper L^{2N} = [%s]", kSgBeta,
                   list(s.c_scaled).c_str(), c, list(s.upper_scaled).c_str());
    if (!full) {
        r.detail += "; dynamics skipped (quick)";
    } else {
        for (const auto& d : dyn) {
            const auto& b = s.bounds[std::size_t(d.N - 2)];
            const auto& g = d.mc.gap;
            const bool ok = !g.inconclusive && within(g.gamma, b.lower - 3 * g.se, b.upper + 3 * g.se);
            r.passed = r.passed && ok;
            r.detail += fmt("; N=%d gamma_hat %.4g +- %.2g in [%.4g, %.4g]%s", d.N, g.gamma, g.se, b.lower, b.upper,
                            ok ? "" : " (outside)");
        }
    }
    r.seconds = t.seconds();
    r.budget = 1800.0;
    return r;
}

// ------------------------------------------------------------------------------------------
// 7. variance formulas

struct Phi4Point {
    double g, t;
    int N;
    TuneResult tune;
    GapBounds bounds;
    McRun mc;
};

Phi4Point phi4_point(double g, double t, int N, double taus, std::uint64_t seed)
{
    Phi4Point p{g, t, N, {}, {}, {}};
    HierLattice lat(2, N, 4, 1);
    p.tune = tune_critical_nu(g, lat, t);
    const double m2 = p.tune.m2, bare = p.tune.nu_c + t - m2;
    const auto dec = build_covariance_decomposition(lat, MassiveMode{m2});
    FlowOptions o;
    o.g_reference = g;
    p.bounds = sg_gap_bounds(run_flow(phi4_initial(g, bare, 1, 1.0, phi4_default_rmax(g)), dec, o), dec);
    if (taus > 0.0)
        p.mc = langevin_mc(LangevinModel{lat, dec.precision(), Phi4SitePotential{g, bare}}, p.bounds.lower, taus, 0.1,
                           seed);
    return p;
}

CheckResult variance_formulas(bool full, const std::vector<SgDynamics>& sg, const std::vector<Phi4Point>& phi4)
{
    Timer t;
    CheckResult r = check(7, "variance formulas var(F)/|Lambda| = 1/eps (SG), 1/m2 (phi4)");
    if (!full) {
        r.passed = true;
        r.detail = "Monte Carlo skipped (quick)";
        r.budget = 1800.0;
        return r;
    }
    r.passed = true;
    for (const auto& d : sg) {
        const double target = 1.0 / d.eps;
        const bool ok = std::abs(d.mc.var.variance - target) <= 3 * d.mc.var.se;
        r.passed = r.passed && ok;
        r.detail += fmt("%sSG N=%d: %.5g +- %.2g vs 1/eps %.5g%s", r.detail.empty() ? "" : "; ", d.N,
                        d.mc.var.variance, d.mc.var.se, target, ok ? "" : " (off)");
    }
    for (const auto& p : phi4) {
        const double target = 1.0 / p.tune.m2;
        const bool ok = std::abs(p.mc.var.variance - target) <= 3 * p.mc.var.se;
        r.passed = r.passed && ok;
        r.detail += fmt("; phi4 g=%.2g t=%.2g N=%d: %.5g +- %.2g vs 1/m2 %.5g (flow-exact %.5g)%s", p.g, p.t, p.N,
                        p.mc.var.variance, p.mc.var.se, target, p.bounds.variance_per_site, ok ? "" : " (off)");
    }
    r.seconds = t.seconds();
    r.budget = 1800.0;
    return r;
}

// ------------------------------------------------------------------------------------------
// 8. phi4 convexity along tuned flows

CheckResult phi4_convexity(bool full, const std::vector<Phi4Point>& dyn)
{
    Timer t;
    CheckResult r = check(8, "phi4 tuned flows: large-field convexity, valid certificate");
    const int N = full ? 6 : 4;
    r.passed = true;
    for (double g : {0.02, 0.05}) {
        HierLattice lat(2, N, 4, 1);
        const double tt = 0.01;
        const auto tr = tune_critical_nu(g, lat, tt);
        const auto dec = build_covariance_decomposition(lat, MassiveMode{tr.m2});
        FlowOptions o;
        o.g_reference = g;
        const auto flow = run_flow(phi4_initial(g, tr.nu_c + tt - tr.m2, 1, 1.0, phi4_default_rmax(g)), dec, o);
        const auto b = sg_gap_bounds(flow, dec);
        double min_hess = INFINITY, min_ratio = INFINITY, max_eps = 0.0;
        bool measured = true;
        for (const auto& st : flow) {
            if (st.final_step) continue;
            const double lf = st.diag.large_field_hessian;
            if (!std::isfinite(lf)) {
                measured = false;
                continue;
            }
            min_hess = std::min(min_hess, lf);
            const double gj = st.diag.g > 0.0 ? st.diag.g : g;
            min_ratio = std::min(min_ratio, lf / gj);
            max_eps = std::max(max_eps, st.diag.epsilon);
        }
        const bool ok = measured && min_hess >= 0.0 && min_ratio >= 0.1 && max_eps < 1.0 && b.valid;
        r.passed = r.passed && ok;
        r.detail += fmt("%sg=%.2g N=%d nu_c=%.8g m2=%.4g: min large-field Hess %.3g, min Hess/g_j %.3g, max eps %.3g, "
                        "bound %.4g%s",
                        r.detail.empty() ? "" : "; ", g, N, tr.nu_c, tr.m2, min_hess, min_ratio, max_eps, b.lower,
                        measured ? "" : " (unmeasured scale)");
    }
    if (!full) {
        r.detail += "; dynamics skipped (quick)";
    } else {
        for (const auto& p : dyn) {
            const bool ok = !p.mc.gap.inconclusive && p.bounds.lower <= p.mc.gap.gamma + 3 * p.mc.gap.se;
            r.passed = r.passed && ok;
            r.detail += fmt("; g=%.2g N=%d t=%.2g: bound %.4g <= gamma_hat %.4g +- %.2g%s", p.g, p.N, p.t,
                            p.bounds.lower, p.mc.gap.gamma, p.mc.gap.se, ok ? "" : " (violated)");
        }
    }
    r.seconds = t.seconds();
    r.budget = 3600.0;
    return r;
}

// ------------------------------------------------------------------------------------------
// 9. discrete gaussian

CheckResult discrete_gaussian(bool full)
{
    Timer t;
    CheckResult r = check(9, "discrete gaussian: path method, sandwich, norm, variance");
    // (a)
    bool a_ok = true;
    double worst = INFINITY;
    for (double beta : {0.1, 0.3, 1.0})
        for (int k = 0; k < 16; ++k) {
            const auto e = dg_exact_gap(beta, 2 * kPi * k / 16.0, dg_default_truncation(beta));
            a_ok = a_ok && e.path_constant * e.gap >= 1.0 - 1e-9; // equality for two-state measures
            worst = std::min(worst, e.path_constant * e.gap);
        }
    // (b)
    const auto s = dg_sandwich(5);
    const double c = *std::min_element(s.c_scaled.begin(), s.c_scaled.end());
    const double top = *std::max_element(s.upper_scaled.begin(), s.upper_scaled.end());
    bool b_ok = s.valid && c > 0.0 && top <= 1.0;
    const double norm = fourier_norm(dg_fourier(kDgBeta), true), claim = 2.0 * std::exp(-1.0 / (2 * kDgBeta));
    const bool norm_ok = norm <= claim;
    std::string dyn;
    bool c_ok = true;
    if (full) {
        for (int N : {2, 3}) {
            HierLattice lat(2, N, 2, 1);
            const double eps = kDgBeta * std::pow(2.0, -2 * N);
            const auto mc = dg_mc(DGModel{lat, kDgBeta, eps, DGRates::matched}, eps, N == 2 ? 2e4 : 5e3,
                                  stream_key(9, std::uint64_t(N)));
            const auto& b = s.bounds[std::size_t(N - 2)];
            const auto& g = mc.gap;
            const bool ok = !g.inconclusive && within(g.gamma, b.lower - 3 * g.se, b.upper + 3 * g.se);
            b_ok = b_ok && ok;
            dyn += fmt("; N=%d matched-rate gamma_hat %.4g +- %.2g in [%.4g, %.4g]%s", N, g.gamma, g.se, b.lower, b.upper,
                       ok ? "" : " (outside)");
            if (N == 2) {
                c_ok = std::abs(mc.var.variance - 1.0 / eps) <= 3 * mc.var.se;
                dyn += fmt("; (c) N=2 var(sum sigma)/|Lambda| %.5g +- %.2g vs 1/eps %.5g (flow-exact %.5g)",
                           mc.var.variance, mc.var.se, 1.0 / eps, b.variance_per_site);
                const auto met = dg_mc(DGModel{lat, kDgBeta, eps, DGRates::metropolis}, eps, 5e3, stream_key(91, 2));
                dyn += fmt("; Metropolis gamma_hat / matched %.3g", met.gap.gamma / g.gamma);
            }
        }
    } else {
        dyn = "; dynamics and (c) skipped (quick)";
    }
    r.passed = a_ok && b_ok && norm_ok && c_ok;
    r.detail = fmt("(a) %s, min C_beta * gap %.3f; (b) beta %.2g lower L^{2N} = [%s], upper L^{2N} = [%s], "
                   "norm ||V - V(0)|| %.4g vs 2e^{-1/(2 beta)} %.4g %s",
                   a_ok ? "ok" : "FAIL", worst, kDgBeta, list(s.c_scaled).c_str(), list(s.upper_scaled).c_str(), norm,
                   claim, norm_ok ? "ok" : "EXCEEDED") +
               dyn;
    r.seconds = t.seconds();
    r.budget = 1800.0;
    return r;
}

// ------------------------------------------------------------------------------------------
// 10. Brascamp-Lieb and Helffer-Sjostrand

CheckResult appendix_numerics(bool full)
{
    Timer t;
    CheckResult r = check(10, "Brascamp-Lieb and Helffer-Sjostrand");
    int holds = 0;
    double worst = INFINITY;
    for (int k = 0; k < 50; ++k) {
        CounterRng rng(stream_key(10, std::uint64_t(k)));
        const int dim = 1 + k % 2;
        Eigen::MatrixXd A(dim, dim);
        if (dim == 1) {
            A(0, 0) = uniform(rng, 0.2, 2.0);
        } else {
            const double th = uniform(rng, 0.0, kPi), l1 = uniform(rng, 0.2, 2.0), l2 = uniform(rng, 0.2, 2.0);
            Eigen::Matrix2d R;
            R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
            A = R * Eigen::Vector2d(l1, l2).asDiagonal() * R.transpose();
        }
        Eigen::VectorXd a(dim), b(dim), s(dim);
        for (int i = 0; i < dim; ++i) {
            a(i) = uniform(rng, 0.0, 0.5);
            b(i) = uniform(rng, 0.0, 1.0);
            s(i) = uniform(rng, -1.0, 1.0);
        }
        GibbsModel m;
        m.dim = dim;
        m.energy = [=](const Eigen::VectorXd& x) {
            double e = 0.5 * x.dot(A * x);
            for (int i = 0; i < dim; ++i) {
                const double y = x(i) - s(i);
                e += 0.25 * a(i) * y * y * y * y + b(i) * std::log(std::cosh(y));
            }
            return e;
        };
        m.hessian = [=](const Eigen::VectorXd& x) {
            Eigen::MatrixXd H = A;
            for (int i = 0; i < dim; ++i) {
                const double y = x(i) - s(i), th = std::tanh(y);
                H(i, i) += 3 * a(i) * y * y + b(i) * (1 - th * th);
            }
            return H;
        };
        m.center = s;
        const auto mom = gibbs_exact_moments(m);
        const Eigen::MatrixXd gap = mom.bl_form - mom.covariance;
        const double ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gap).eigenvalues().minCoeff();
        worst = std::min(worst, ev);
        holds += ev >= -1e-10;
    }
    const double frac = holds / 50.0;
    r.passed = frac >= 0.99;
    r.detail = fmt("BL holds in %d / 50 random convex models (min eigenvalue of E[Hess^{-1}] - cov %.3g)", holds, worst);

    struct Model {
        double g, nu;
    };
    for (const Model md : {Model{1.0, 2.0}, Model{0.5, 0.5}, Model{0.2, 1.0}}) {
        auto H = [=](double x) { return 0.25 * md.g * x * x * x * x + 0.5 * md.nu * x * x; };
        auto H2 = [=](double x) { return 3 * md.g * x * x + md.nu; };
        const double hs = hs_covariance_1d(H, H2, [](double) { return 1.0; }, [](double x) { return 3 * x * x; });
        if (!full) {
            r.detail += fmt("; HS (g=%.2g, nu=%.2g) cov(phi, phi^3) = %.6g, Monte Carlo skipped (quick)", md.g, md.nu, hs);
            continue;
        }
        LangevinModel lm{HierLattice(2, 1, 1, 1), GaussianCoupling{0.0, 0.0, 0.0}, Phi4SitePotential{md.g, md.nu}};
        LangevinParams p;
        p.h = 0.01 / curvature_estimate(lm);
        p.thin = 20;
        p.steps = 16000000;
        p.burn_in = 40000;
        p.record_modes = false;
        p.site_sums = {{"G", [](double x) { return x * x * x; }}};
        const auto tr = langevin_run(lm, p, stream_key(10, 99, std::uint64_t(md.g * 100)));
        // two independent sites: cov(F, G) = 2 cov(phi, phi^3)
        const auto cv = estimate_covariance(tr, "F", "G");
        const bool ok = std::abs(0.5 * cv.variance - hs) <= 3 * 0.5 * cv.se;
        r.passed = r.passed && ok;
        r.detail += fmt("; HS (g=%.2g, nu=%.2g) cov(phi, phi^3) %.5g vs MC %.5g +- %.2g%s", md.g, md.nu, hs,
                        0.5 * cv.variance, 0.5 * cv.se, ok ? "" : " (off)");
    }
    r.seconds = t.seconds();
    r.budget = 600.0;
    return r;
}

// ------------------------------------------------------------------------------------------
// 11. property suites

CheckResult property_suites()
{
    Timer t;
    CheckResult r = check(11, "property suites: projectors, finite differences, determinism, norm algebra");
    std::vector<std::string> failed;

    // projector algebra
    {
        HierLattice lat(2, 3, 2, 2);
        FieldVector f(lat);
        CounterRng rng(stream_key(11, 1));
        for (auto& v : f.values) v = uniform(rng, -1.0, 1.0);
        double err = 0.0;
        FieldVector sum = block_average(f, lat.N());
        for (int j = 1; j <= lat.N(); ++j) {
            const auto Pf = fluctuation_projection(f, j);
            err = std::max(err, max_abs_diff(fluctuation_projection(Pf, j), Pf));
            for (int k = 1; k <= lat.N(); ++k)
                if (k != j) err = std::max(err, max_abs_diff(fluctuation_projection(Pf, k), FieldVector(lat)));
            for (int k = 0; k <= lat.N(); ++k)
                err = std::max(err, max_abs_diff(block_average(block_average(f, j), k), block_average(f, std::max(j, k))));
            sum = sum + Pf;
        }
        err = std::max(err, max_abs_diff(sum, f));
        FieldVector lap(lat);
        for (int j = 1; j <= lat.N(); ++j) lap = lap + std::pow(2.0, -2.0 * (j - 1)) * fluctuation_projection(f, j);
        err = std::max(err, max_abs_diff(lap, apply_hier_laplacian(f)));
        if (err > 1e-12) failed.push_back(fmt("projectors %.2e", err));
    }
    // finite differences, relative 1e-6
    {
        double err = 0.0;
        std::vector<double> v(257);
        const double rmax = 6.0;
        for (int k = 0; k <= 256; ++k) {
            const double x = rmax * k / 256.0;
            v[k] = std::cosh(0.5 * x) + 0.1 * x * x * x * x;
        }
        const RadialPotential W(1, 1.0, rmax, v);
        const auto V = random_periodic(7, 8, 0.3);
        for (double x : {0.4, 1.1, 2.5, 4.9}) {
            const double h1 = 1e-5, h2 = 1e-4;
            const double d1 = (W.value(x + h1) - W.value(x - h1)) / (2 * h1);
            const double d2 = (W.derivative(x + h2) - W.derivative(x - h2)) / (2 * h2);
            err = std::max({err, std::abs(W.derivative(x) - d1) / std::abs(d1), std::abs(W.second_derivative(x) - d2) / std::abs(d2)});
            const double f1 = (V.value(x + h1) - V.value(x - h1)) / (2 * h1);
            const double f2 = (V.derivative(x + h2) - V.derivative(x - h2)) / (2 * h2);
            err = std::max({err, std::abs(V.derivative(x) - f1) / std::max(std::abs(f1), 1e-3),
                            std::abs(V.second_derivative(x) - f2) / std::max(std::abs(f2), 1e-3)});
        }
        // gradient of (phi, M phi)/2 is M phi
        HierLattice lat(2, 2, 2, 1);
        const GaussianCoupling M{0.7, 0.1, 0.05};
        FieldVector phi(lat);
        CounterRng rng(stream_key(11, 2));
        for (auto& x : phi.values) x = uniform(rng, -1.0, 1.0);
        const auto grad = apply_coupling(M, phi);
        auto energy = [&](const FieldVector& f) { return 0.5 * dot(f, apply_coupling(M, f)); };
        for (std::size_t i = 0; i < phi.size(); i += 3) {
            auto up = phi, dn = phi;
            up.values[i] += 1e-5;
            dn.values[i] -= 1e-5;
            const double fd = (energy(up) - energy(dn)) / 2e-5;
            err = std::max(err, std::abs(fd - grad.values[i]) / std::max(std::abs(grad.values[i]), 1e-3));
        }
        if (err > 1e-6) failed.push_back(fmt("finite differences %.2e", err));
    }
    // seeded determinism
    {
        HierLattice lat(2, 2, 2, 1);
        const auto dec = build_covariance_decomposition(lat, MassiveMode{0.3});
        const LangevinModel m{lat, dec.precision(), Phi4SitePotential{0.1, -0.1}};
        LangevinParams p;
        p.steps = 2000;
        p.burn_in = 100;
        bool ok = langevin_run(m, p, 42).series == langevin_run(m, p, 42).series &&
                  langevin_run(m, p, 42).series != langevin_run(m, p, 43).series;
        ok = ok && sample_fluctuation(dec, 1, 5).values == sample_fluctuation(dec, 1, 5).values;
        DGParams dp;
        dp.t_max = 200;
        const DGModel dg{lat, 0.3, 0.3 / 16};
        ok = ok && dg_glauber_run(dg, dp, 9).series == dg_glauber_run(dg, dp, 9).series;
        ExperimentConfig cfg;
        cfg.model = "free";
        cfg.N = 2;
        cfg.d = 1;
        cfg.params.m2 = 0.5;
        cfg.dynamics.steps = 4000;
        cfg.sweep = {{"params.m2", {Json(0.5), Json(1.0), Json(2.0)}}};
        auto rows = [&](int workers) {
            cfg.workers = workers;
            std::vector<std::vector<std::string>> out;
            for (const auto& pr : run_experiment(cfg, Stage::simulate)) {
                auto row = results_row(pr);
                row.pop_back(); // seconds
                out.push_back(row);
            }
            return out;
        };
        ok = ok && rows(1) == rows(3);
        if (!ok) failed.push_back("determinism");
    }
    // norm algebra
    {
        bool ok = true;
        for (std::uint64_t k = 0; k < 20; ++k) {
            const auto a = random_periodic(200 + k, 8, 0.4), b = random_periodic(300 + k, 6, 0.3);
            const auto F = random_periodic(400 + k, 8, 0.3);
            ok = ok && fourier_norm(multiply(a, b), false) <= fourier_norm(a, false) * fourier_norm(b, false) * (1 + 1e-12);
            const double nf = fourier_norm(F, false);
            ok = ok && fourier_norm(exp_minus_one(F, 64), false) <= std::expm1(nf) * (1 + 1e-9);
            ok = ok && fourier_norm(log_one_plus(F, 64), false) <= -std::log1p(-nf) * (1 + 1e-9);
        }
        if (!ok) failed.push_back("norm inequalities");
    }
    r.passed = failed.empty();
    if (failed.empty()) {
        r.detail = "projector algebra, finite-difference checks, seeded determinism (incl. 1 vs 3 workers), norm "
                   "product/exp/log inequalities";
    } else {
        for (const auto& f : failed) r.detail += (r.detail.empty() ? "failed: " : ", ") + f;
    }
    r.seconds = t.seconds();
    r.budget = 600.0;
    return r;
}

void note(std::ostream* log, const CheckResult& r)
{
    if (log) *log << format_check(r) << std::endl;
}

} // namespace

std::string format_check(const CheckResult& r)
{
    const bool in_time = r.budget <= 0.0 || r.seconds <= r.budget;
    std::string s = fmt("[%s] %2d %s (%.1f s", r.passed && in_time ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds);
    if (r.budget > 0.0) s += fmt(" / budget %.0f s", r.budget);
    s += "): " + r.detail;
    if (!in_time) s += " [over time budget]";
    return s;
}

std::vector<CheckResult> run_validation(bool full, std::ostream* log, const std::vector<int>& only)
{
    std::vector<CheckResult> out;
    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
    auto run = [&](int id, auto&& f) {
        if (!wanted(id)) return;
        CheckResult r;
        try {
            r = f();
        } catch (const std::exception& e) {
            r.id = id;
            r.passed = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.passed = r.passed && (r.budget <= 0.0 || r.seconds <= r.budget);
        note(log, r);
        out.push_back(r);
    };
    run(1, [&] { return operator_identities(full); });
    run(2, [&] { return gaussian_tightness(full); });
    run(3, [&] { return one_step_rg(full); });
    run(4, [] { return smoothing_identity(); });
    run(5, [&] { return sg_contraction(full); });

    // Monte Carlo runs shared by 6, 7 and 8; each check's time includes the runs it uses
    std::vector<SgDynamics> sg;
    std::vector<Phi4Point> phi4_dyn, phi4_var;
    std::string shared_error;
    double sg_seconds = 0.0, phi4_seconds = 0.0;
    if (full) {
        try {
            if (wanted(6) || wanted(7)) {
                Timer ts;
                sg = sg_dynamics();
                sg_seconds = ts.seconds();
            }
            Timer tp;
            if (wanted(8))
                for (double g : {0.02, 0.05})
                    for (int N : {2, 3})
                        phi4_dyn.push_back(phi4_point(g, 0.1, N, N == 2 ? 2000.0 : 500.0, stream_key(8, N)));
            if (wanted(7)) {
                phi4_var.push_back(phi4_point(0.05, 0.5, 2, 4000.0, stream_key(7, 2)));
                phi4_var.push_back(wanted(8) ? phi4_dyn.back() : phi4_point(0.05, 0.1, 3, 500.0, stream_key(8, 3)));
            }
            phi4_seconds = tp.seconds();
        } catch (const std::exception& e) {
            shared_error = e.what();
        }
    }
    auto with_shared = [&](int id, double extra, auto&& f) {
        run(id, [&] {
            if (!shared_error.empty()) {
                CheckResult r = check(id, "shared dynamics runs");
                r.detail = "exception: " + shared_error;
                return r;
            }
            auto r = f();
            r.seconds += extra;
            return r;
        });
    };
    with_shared(6, sg_seconds, [&] { return sg_gap_sandwich(full, sg); });
    with_shared(7, sg_seconds + phi4_seconds, [&] { return variance_formulas(full, sg, phi4_var); });
    with_shared(8, phi4_seconds, [&] { return phi4_convexity(full, phi4_dyn); });
    run(9, [&] { return discrete_gaussian(full); });
    run(10, [&] { return appendix_numerics(full); });
    run(11, [] { return property_suites(); });
    return out;
}

} // namespace hrg

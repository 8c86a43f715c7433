#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hrg/errors.hpp"
#include "hrg/oracle.hpp"
#include "hrg/rg_engine.hpp"
#include "test_util.hpp"

#include <cmath>
#include <numbers>

using namespace hrg;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    return v;
}

RadialPotential radial_from(int n, double B, double rmax, int M, const std::function<double(double)>& f)
{
    std::vector<double> v(M + 1);
    for (int k = 0; k <= M; ++k) v[k] = f(rmax * k / M);
    return RadialPotential(n, B, rmax, v);
}

// log E[e^{-W(x + zeta)}], zeta ~ N(0, s2), by the dense oracle quadrature
double oracle_log_expectation(const std::function<double(double)>& W, double x, double s2)
{
    GibbsModel m;
    m.dim = 1;
    m.energy = [&](const Eigen::VectorXd& z) { return 0.5 * z(0) * z(0) / s2 + W(x + z(0)); };
    m.scale = std::sqrt(s2);
    return gibbs_exact_moments(m).log_normalizer - 0.5 * std::log(2 * kPi * s2);
}

} // namespace

TEST_CASE("zero potential maps to zero")
{
    const auto pts = linspace(0.0, 3.0, 7);
    const auto s = rg_step_scalar([](double) { return 0.0; }, pts, 0.7, 16.0);
    for (double v : s.values) CHECK(std::abs(v) < 1e-13);
    for (int n : {1, 2, 3}) {
        const auto r = rg_step_radial(RadialPotential(n, 1.0, 5.0, std::vector<double>(65, 0.0)), 0.5, 4.0, 5.0);
        for (double v : r.potential.values()) CHECK(std::abs(v) < 1e-12);
    }
    const auto f = rg_step_fourier(FourierPotential(), 5.0, 4.0);
    CHECK(fourier_norm(f.potential, false) < 1e-14);
}

TEST_CASE("quadratic potentials follow the closed-form Gaussian map")
{
    const double c = 1.7, s2 = 0.45;
    auto W = [&](double x) { return 0.5 * c * x * x; };
    const auto pts = linspace(-4.0, 4.0, 17);
    const auto out = rg_step_scalar(W, pts, s2, 1.0);
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const double exact = 0.5 * c / (1 + c * s2) * pts[k] * pts[k] + 0.5 * std::log(1 + c * s2);
        CHECK(close(out.values[k], exact, 1e-8, 1e-12));
    }
    for (int n : {1, 2, 4}) {
        const auto R = radial_from(n, 1.0, 6.0, 128, W);
        const auto st = rg_step_radial(R, s2, 1.0, 6.0);
        for (std::size_t k = 0; k < R.size(); ++k) {
            const double r = R.radius(k);
            const double exact = 0.5 * c / (1 + c * s2) * r * r + 0.5 * n * std::log(1 + c * s2);
            CHECK(close(st.potential.values()[k], exact, 1e-8, 1e-12));
        }
    }
}

TEST_CASE("zero-variance limit multiplies by the reblocking factor")
{
    const auto R = radial_from(2, 1.0, 5.0, 64, [](double r) { return 0.1 * r * r * r * r - 0.3 * r * r; });
    const auto st = rg_step_radial(R, 0.0, 16.0, 5.0);
    for (std::size_t k = 0; k < R.size(); ++k) CHECK(st.potential.values()[k] == doctest::Approx(16.0 * R.values()[k]));
    CHECK(st.potential.block_volume() == 16.0);
}

TEST_CASE("one step agrees with the dense quadrature oracle")
{
    auto W = [](double x) { return 0.05 / 4 * std::pow(x, 4) - 0.2 * x * x + 0.3 * std::cos(x); };
    const auto pts = linspace(-5.0, 5.0, 11);
    const auto out = rg_step_scalar(W, pts, 0.8, 1.0);
    for (std::size_t k = 0; k < pts.size(); ++k)
        CHECK(close(out.values[k], -oracle_log_expectation(W, pts[k], 0.8), 1e-9, 1e-9));
}

TEST_CASE("fourier smoothing identity")
{
    const FourierPotential V({0.0, 0.03, -0.01, 0.004});
    for (double var : {0.2, 1.0, 3.75}) {
        const auto d = fourier_smooth_density(V, var);
        for (std::size_t q = 0; q < d.after.size(); ++q)
            CHECK(close(d.after[q], std::exp(-0.5 * var * double(q * q)) * d.before[q], 1e-12, 1e-300));
        CHECK(d.after[0] == d.before[0]);
    }
}

TEST_CASE("single fourier mode: linearized smoothing")
{
    const double v = 1e-6, var = 0.9;
    const auto st = rg_step_fourier(FourierPotential({0.0, v}), var, 4.0);
    CHECK(close(st.potential.coeff(1), 4.0 * v * std::exp(-0.5 * var), 1e-5));
    CHECK(std::abs(st.potential.coeff(2)) < 1e-10);
    CHECK_FALSE(st.guard_violated);
    CHECK(rg_step_fourier(FourierPotential({0.0, 0.05}), var, 4.0).guard_violated);
}

TEST_CASE("fourier backend matches the scalar backend on a periodic potential")
{
    const FourierPotential V({0.1, 0.02, -0.007, 0.001});
    const double var = 0.6, reblock = 4.0;
    const auto fs = rg_step_fourier(V, var, reblock);
    const auto pts = linspace(-kPi, kPi, 25);
    const auto ss = rg_step_scalar([&](double x) { return V.value(x); }, pts, var, reblock);
    double err = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) err = std::max(err, std::abs(fs.potential.value(pts[k]) - ss.values[k]));
    CHECK(err < 1e-8);
}

TEST_CASE("semigroup: two half-variance smoothings equal one full smoothing")
{
    const FourierPotential V({0.0, 0.04, 0.01, -0.003});
    const auto one = rg_step_fourier(V, 1.2, 1.0).potential;
    const auto two = rg_step_fourier(rg_step_fourier(V, 0.6, 1.0).potential, 0.6, 1.0).potential;
    for (int q = 0; q <= 64; ++q) CHECK(std::abs(one.coeff(q) - two.coeff(q)) < 1e-10);

    // scalar backend on top of an exactly evaluable intermediate
    const auto mid = rg_step_fourier(V, 0.6, 1.0).potential;
    const auto pts = linspace(-3.0, 3.0, 13);
    const auto comp = rg_step_scalar([&](double x) { return mid.value(x); }, pts, 0.6, 1.0);
    for (std::size_t k = 0; k < pts.size(); ++k) CHECK(close(comp.values[k], one.value(pts[k]), 0.0, 1e-10));
}

TEST_CASE("aliasing and quadrature failures are reported")
{
    std::vector<double> c(9, 0.0);
    c[8] = 3.0;
    CHECK_THROWS_AS(rg_step_fourier(FourierPotential(c), 0.01, 1.0), ResolutionError);
    CHECK_THROWS_AS(rg_step_scalar([](double x) { return 40.0 * std::cos(25.0 * x); }, {0.0, 0.5}, 1.0, 1.0,
                                   {8, 16, 1e-12}),
                    QuadratureError);
}

TEST_CASE("coupling fit")
{
    const auto R = radial_from(1, 16.0, 4.0, 256, [](double r) { return 16.0 * (0.05 / 4 * std::pow(r, 4) - 0.05 * r * r + 0.3); });
    const auto fit = fit_couplings(R, 1.5);
    CHECK(fit.residual <= 1e-10);
    CHECK(fit.g == doctest::Approx(0.05).epsilon(1e-8));
    CHECK(fit.nu == doctest::Approx(-0.1).epsilon(1e-8));
    CHECK(fit.u == doctest::Approx(0.3).epsilon(1e-8));
    const auto z = fit_couplings(RadialPotential(1, 1.0, 4.0, std::vector<double>(257, 0.0)), 1.0);
    CHECK(z.g == 0.0);
    CHECK(z.nu == 0.0);
    CHECK_THROWS_AS(fit_couplings(R, 0.03), ResolutionError);
    CHECK_THROWS_AS(fit_couplings(R, 5.0), ParameterError);
}

TEST_CASE("epsilon from the curvature of the block potential")
{
    HierLattice lat(2, 3, 4, 1);
    const auto dec = build_covariance_decomposition(lat, MassiveMode{0.01});
    RGFlowState st;
    st.scale = 0;
    st.potential = phi4_initial(0.05, -0.1, 1, 1.0, phi4_default_rmax(0.05));
    st.diag.lambda = dec.lambdas[0];
    st.diag.block_volume = 1.0;
    CHECK(compute_epsilon(st).epsilon == doctest::Approx(0.1 / 1.01).epsilon(1e-9));
    st.potential = phi4_initial(0.05, 0.3, 1, 1.0, phi4_default_rmax(0.05));
    CHECK(compute_epsilon(st).epsilon == 0.0);

    // periodic: eps <= (sigma / beta) v through the q^2 coefficient bound
    const double beta = 0.2, sigma = 0.75;
    HierLattice sg(2, 4, 2, 1);
    const auto sd = build_covariance_decomposition(sg, SineGordonMode{beta});
    RGFlowState f;
    f.scale = 2;
    f.potential = FourierPotential({0.0, 0.004, 0.001});
    f.diag.lambda = sd.lambdas[2];
    f.diag.block_volume = sg.block_volume_real(2);
    const double v = fourier_norm(std::get<FourierPotential>(f.potential), true);
    const auto e = compute_epsilon(f);
    CHECK(e.epsilon <= sigma / beta * v);
    CHECK(e.epsilon == doctest::Approx(sigma / beta * 2 * (0.004 + 4 * 0.001)).epsilon(1e-12));
    CHECK(e.valid);
}

TEST_CASE("flow of the zero potential")
{
    HierLattice lat(2, 4, 2, 1);
    const auto dec = build_covariance_decomposition(lat, SineGordonMode{0.2});
    const auto flow = run_flow(FourierPotential(), dec);
    CHECK(flow.size() == 6);
    CHECK(flow.back().final_step);
    for (const auto& st : flow) {
        CHECK(st.diag.epsilon == 0.0);
        CHECK(fourier_norm(std::get<FourierPotential>(st.potential), false) < 1e-14);
    }
    const auto dm = build_covariance_decomposition(HierLattice(2, 3, 4, 1), MassiveMode{0.01});
    const auto rf = run_flow(RadialPotential(1, 1.0, 6.0, std::vector<double>(129, 0.0)), dm);
    for (const auto& st : rf) {
        CHECK(st.diag.epsilon == 0.0);
        for (double x : std::get<RadialPotential>(st.potential).values()) CHECK(std::abs(x) < 1e-12);
    }
}

TEST_CASE("sine-gordon flow contracts geometrically")
{
    const double beta = 0.2;
    HierLattice lat(2, 6, 2, 1);
    const auto dec = build_covariance_decomposition(lat, SineGordonMode{beta});
    const FourierPotential V0({0.0, 0.05 / 8.0});
    const auto flow = run_flow(V0, dec);
    const auto cs = contraction_summary(flow);
    const double kappa = 4.0 * std::exp(-0.75 / (2 * beta));
    CHECK(cs.ratios.size() == 6);
    for (double r : cs.ratios) CHECK(r <= kappa * 1.1);
    CHECK(cs.fitted_kappa < 1.0);
}

TEST_CASE("one phi4 step lowers the quartic coupling")
{
    HierLattice lat(2, 2, 4, 1);
    const auto dec = build_covariance_decomposition(lat, MassiveMode{1e-4});
    FlowOptions o;
    o.last_scale = 1;
    o.final_step = false;
    const auto flow = run_flow(phi4_initial(0.05, 0.0, 1, 1.0, phi4_default_rmax(0.05)), dec, o);
    REQUIRE(flow.size() == 2);
    CHECK(flow[0].diag.g == doctest::Approx(0.05).epsilon(1e-8));
    CHECK(flow[1].diag.g < 0.05);
    CHECK(flow[1].diag.g > 0.0);
    CHECK(flow[1].diag.fit_residual < 1e-3);
}

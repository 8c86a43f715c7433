#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hrg/dynamics.hpp"
#include "hrg/errors.hpp"
#include "hrg/oracle.hpp"
#include "hrg/random.hpp"
#include "test_util.hpp"

#include <cmath>
#include <numbers>

using namespace hrg;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRate = 1.0 / (2.0 * 4.0 * kPi * kPi);

GaussianCoupling diagonal(double c) { return GaussianCoupling{0.0, c, 0.0}; }

Trajectory ar1(double rate, double dt, std::size_t n, std::uint64_t seed)
{
    NormalSampler z(CounterRng(stream_key(seed, 3)));
    const double a = std::exp(-rate * dt), s = std::sqrt(1 - a * a);
    Trajectory t;
    t.dt = dt;
    t.names = {"x"};
    t.series.assign(1, std::vector<double>(n));
    double x = z();
    for (auto& v : t.series[0]) {
        x = a * x + s * z();
        v = x;
    }
    return t;
}

} // namespace

TEST_CASE("gap estimator on an exact exponential autocorrelation")
{
    const auto t = ar1(0.5, 0.1, 4000000, 1);
    const auto g = estimate_gap(t, "x");
    CHECK_FALSE(g.inconclusive);
    CHECK(g.fit_points >= 3);
    CHECK(std::abs(g.gamma - 0.5) <= 0.05 * 0.5);
    CHECK(std::abs(g.gamma - 0.5) <= 3 * g.se + 0.01);
    const auto v = estimate_variance(t, "x");
    CHECK(std::abs(v.variance - 1.0) <= 3 * v.se);
    const auto acf = autocorrelation(t.series[0], 10);
    CHECK(acf[0] == doctest::Approx(1.0));
    CHECK(acf[5] == doctest::Approx(std::exp(-0.25)).epsilon(0.03));

    // white noise never enters the [0.05, 0.5] window
    const auto w = ar1(1e3, 1.0, 5000, 2);
    CHECK(estimate_gap(w, "x").inconclusive);
    CHECK_THROWS_AS(estimate_gap(w, "y"), ParameterError);
}

TEST_CASE("ornstein-uhlenbeck sites: variance and rate")
{
    const double c = 2.0;
    LangevinModel m{HierLattice(2, 1, 1, 1), diagonal(c), NoSitePotential{}};
    LangevinParams p;
    p.steps = 6000000;
    p.thin = 10;
    const auto tr = langevin_run(m, p, 7);
    CHECK(tr.length() == std::size_t(p.steps / p.thin));
    const auto v = estimate_variance(tr, "F");
    CHECK(std::abs(v.variance - 2.0 / c) <= 3 * v.se + 0.01 * 2.0 / c); // Euler bias O(h)
    const auto g = estimate_gap(tr, "F", 2.0);
    CHECK(std::abs(g.gamma - c) <= 0.05 * c);
    CHECK(g.variance_ratio == doctest::Approx(1.0).epsilon(0.08));
}

TEST_CASE("free hierarchical field: the sum is the slowest mode")
{
    const double beta = 0.5;
    HierLattice lat(2, 2, 1, 1);
    const auto dec = build_covariance_decomposition(lat, SineGordonMode{beta});
    LangevinModel m{lat, dec.precision(), NoSitePotential{}};
    LangevinParams p;
    // the slow mode's Euler bias is h eps / 2, negligible at this step
    p.h = 0.1 / curvature_estimate(m);
    p.steps = 10000000;
    p.thin = 20;
    const auto tr = langevin_run(m, p, 11);
    const double eps = dec.zero_mode_coupling();
    const double lmin = dense_hier_operators(dec).coupling.spectrum().front();
    CHECK(eps == doctest::Approx(lmin).epsilon(1e-12));
    const auto g = estimate_gap(tr, "F");
    CHECK(std::abs(g.gamma - eps) <= 0.05 * eps + 3 * g.se);
    const auto v = estimate_variance(tr, "F");
    CHECK(std::abs(v.variance / 4.0 - 1.0 / eps) <= 3 * v.se / 4.0 + 0.01 / eps);
}

TEST_CASE("convex site potential speeds up relaxation")
{
    // V'' >= nu > 0: gap >= lambda_min(M) + nu
    const double nu = 0.5;
    HierLattice lat(2, 1, 1, 1);
    const auto dec = build_covariance_decomposition(lat, MassiveMode{0.25});
    LangevinModel m{lat, dec.precision(), Phi4SitePotential{0.2, nu}};
    LangevinParams p;
    p.steps = 800000;
    p.thin = 5;
    const auto tr = langevin_run(m, p, 5);
    const auto g = estimate_gap(tr, "F");
    CHECK(g.gamma >= 0.25 + nu - 3 * g.se - 0.02);
}

TEST_CASE("seeded determinism and validation")
{
    HierLattice lat(2, 2, 1, 1);
    const auto dec = build_covariance_decomposition(lat, MassiveMode{0.3});
    LangevinModel m{lat, dec.precision(), Phi4SitePotential{0.1, -0.1}};
    LangevinParams p;
    p.steps = 2000;
    p.burn_in = 100;
    const auto a = langevin_run(m, p, 42), b = langevin_run(m, p, 42), c = langevin_run(m, p, 43);
    CHECK(a.series == b.series);
    CHECK(a.series != c.series);
    CHECK(a.names.size() == 3);

    p.h = 1.0;
    CHECK_THROWS_AS(langevin_run(m, p, 1), InstabilityError);
    p.h = 0.0;
    LangevinModel two{HierLattice(2, 1, 1, 2), diagonal(1.0), PeriodicSitePotential{FourierPotential({0.0, 0.1})}};
    CHECK_THROWS_AS(langevin_run(two, p, 1), ParameterError);

    DGModel dg{lat, 0.3, 0.3 / 16};
    DGParams dp;
    dp.t_max = 500;
    CHECK(dg_glauber_run(dg, dp, 9).series == dg_glauber_run(dg, dp, 9).series);
    dg.rates = DGRates::matched;
    CHECK(dg_glauber_run(dg, dp, 9).series == dg_glauber_run(dg, dp, 9).series);
}

TEST_CASE("discrete gaussian single site: acceptance and detailed balance")
{
    SUBCASE("acceptance from the origin is e^{-2 pi^2 beta}")
    {
        const double beta = 0.1;
        DGParams p;
        p.t_max = 4e5;
        const auto tr = dg_single_site_run(beta, 0.0, DGRates::metropolis, p, 3);
        const double n = tr.info.at("proposals_0"), a = tr.info.at("accepted_0");
        const double rate = std::exp(-2 * kPi * kPi * beta);
        CHECK(std::abs(a / n - rate) <= 3 * std::sqrt(rate * (1 - rate) / n));
        const auto cold = dg_single_site_run(10.0, 0.0, DGRates::metropolis, p, 3);
        CHECK(cold.info.at("accepted_0") == 0.0);
        for (double s : cold.series[0]) CHECK(s == 0.0);
    }
    SUBCASE("flows 0 -> 2 pi and 2 pi -> 0 balance")
    {
        for (auto rule : {DGRates::metropolis, DGRates::matched}) {
            DGParams p;
            p.t_max = 2e5;
            const auto tr = dg_single_site_run(0.3, 2.0, rule, p, 4);
            const double up = tr.info.at("up_0"), down = tr.info.at("down_1");
            CHECK(up > 100);
            CHECK(std::abs(up - down) <= 3 * std::sqrt(up + down) + 1);
        }
    }
}

TEST_CASE("matched rates realize the variational single-site gap")
{
    const double beta = 0.3, psi = 0.6 * kPi;
    const auto ex = dg_exact_gap(beta, psi, dg_default_truncation(beta));
    DGParams p;
    p.t_max = 3e6;
    p.record_dt = 2.0;
    const auto tr = dg_single_site_run(beta, psi, DGRates::matched, p, 8);
    const auto g = estimate_gap(tr, "sigma");
    CHECK(std::abs(g.gamma - kRate * ex.gap) <= 0.05 * kRate * ex.gap + 3 * g.se);
    const auto v = estimate_variance(tr, "sigma");
    CHECK(std::abs(v.variance - 4 * kPi * kPi * ex.variance) <= 3 * v.se);
}

TEST_CASE("brascamp-lieb and helffer-sjostrand on one site")
{
    // H = phi^4/4 + phi^2: convex; var(phi) <= E[1 / H''] and cov(F, G) via the Witten Laplacian
    const double g = 1.0, nu = 2.0;
    auto H = [&](double x) { return 0.25 * g * x * x * x * x + 0.5 * nu * x * x; };
    auto H2 = [&](double x) { return 3 * g * x * x + nu; };
    GibbsModel m;
    m.dim = 1;
    m.energy = [&](const Eigen::VectorXd& x) { return H(x(0)); };
    m.hessian = [&](const Eigen::VectorXd& x) { return Eigen::MatrixXd::Constant(1, 1, H2(x(0))); };
    const auto mom = gibbs_exact_moments(m);
    CHECK(mom.covariance(0, 0) <= mom.bl_form(0, 0));

    LangevinModel lm{HierLattice(2, 1, 1, 1), diagonal(0.0), Phi4SitePotential{g, nu}};
    LangevinParams p;
    p.steps = 1000000;
    p.thin = 5;
    p.burn_in = 2000;
    const auto tr = langevin_run(lm, p, 17);
    // two independent sites: var(F) = 2 var(phi)
    const auto v = estimate_variance(tr, "F");
    CHECK(std::abs(v.variance - 2 * mom.covariance(0, 0)) <= 3 * v.se + 0.02 * v.variance);

    const double hs = hs_covariance_1d(H, H2, [](double) { return 1.0; }, [](double) { return 1.0; });
    CHECK(hs == doctest::Approx(mom.covariance(0, 0)).epsilon(1e-4));
}

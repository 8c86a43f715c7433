#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hrg/bl_certificate.hpp"
#include "hrg/errors.hpp"
#include "hrg/oracle.hpp"
#include "hrg/random.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace hrg;

namespace {

std::vector<double> random_eps(std::uint64_t seed, std::size_t n, double top)
{
    CounterRng rng(stream_key(seed, 11));
    std::vector<double> e(n);
    for (auto& v : e) v = top * rng.uniform();
    return e;
}

// H = (phi, M phi)/2 + sum_x V(phi_x) on the two-site lattice L = 2, d = 1, N = 1
std::function<double(const Eigen::VectorXd&)> two_site_energy(const Eigen::MatrixXd& M,
                                                               std::function<double(double)> V)
{
    return [M, V](const Eigen::VectorXd& x) { return 0.5 * x.dot(M * x) + V(x(0)) + V(x(1)); };
}

double gibbs_var_sum_per_site(const std::function<double(const Eigen::VectorXd&)>& H)
{
    GibbsModel m;
    m.dim = 2;
    m.energy = H;
    m.scale = 2.0;
    const auto mom = gibbs_exact_moments(m);
    return mom.covariance.sum() / 2.0;
}

} // namespace

TEST_CASE("recurrence step arithmetic")
{
    CHECK(recurrence_step({0.0, 0.0}, 1.0, 0.0, 1)[1] == 1.0);
    const auto d = recurrence_step({2.0, 2.0, 2.0}, 1.0, 0.5, 1);
    CHECK(d[2] == doctest::Approx(10.0)); // constants: Q_1 is the identity there
    CHECK(d[1] == doctest::Approx(10.0)); // band 2 > 1
    CHECK(d[0] == doctest::Approx(8.0));  // band 1: Q_1 vanishes on range(P_1)
    CHECK_THROWS_AS(recurrence_step({0.0}, 1.0, 1.0, 0), InvalidCertificateError);
    CHECK_THROWS_AS(recurrence_step({0.0}, 1.0, -0.1, 0), InvalidCertificateError);
}

TEST_CASE("zero epsilons reproduce the covariance")
{
    HierLattice lat(2, 4, 2, 1);
    const auto dec = build_covariance_decomposition(lat, MassiveMode{0.05});
    const auto c = build_certificate(dec, std::vector<double>(5, 0.0));
    double total = 0.0;
    for (double l : dec.lambdas) total += l;
    CHECK(c.band_eigenvalues[4] == doctest::Approx(total).epsilon(1e-14));
    CHECK(c.band_eigenvalues[4] == doctest::Approx(1.0 / 0.05).epsilon(1e-12));
    for (double d : c.deltas) CHECK(d == 1.0);
    CHECK(c.valid);
}

TEST_CASE("delta product formula")
{
    HierLattice lat(2, 3, 1, 1);
    const auto dec = build_covariance_decomposition(lat, MassiveMode{0.1});
    const auto c = build_certificate(dec, {0.5, 0.0, 0.0, 0.0});
    CHECK(c.deltas[0] == doctest::Approx(2.0));
    for (int k = 1; k <= 3; ++k) CHECK(c.deltas[k] == doctest::Approx(4.0));

    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        const auto e = random_eps(seed, 4, 0.25);
        const auto cr = build_certificate(dec, e);
        double s1 = 0.0, s2 = 0.0;
        for (int k = 0; k <= 3; ++k) {
            s1 += e[k];
            s2 += e[k] * e[k];
            CHECK(cr.deltas[k] <= std::exp(2.0 * s1 + 4.0 * s2));
        }
    }
}

TEST_CASE("band eigenvalues match the dense assembly of sum delta_k lambda_k Q_k")
{
    for (int d : {1, 2}) {
        HierLattice lat(2, d == 1 ? 5 : 3, d, 1);
        const auto dec = build_covariance_decomposition(lat, SineGordonMode{0.3});
        const auto e = random_eps(d, lat.N() + 1, 0.4);
        const auto c = build_certificate(dec, e);
        std::vector<double> w(lat.N() + 1);
        for (int k = 0; k <= lat.N(); ++k) w[k] = c.deltas[k] * dec.lambdas[k];
        const auto spec = dense_block_sum(lat, w).spectrum();
        // every dense eigenvalue is one of the band values, and the top one is the constants band
        for (double ev : spec) {
            double best = INFINITY;
            for (double b : c.band_eigenvalues) best = std::min(best, std::abs(ev - b));
            CHECK(best <= 1e-10 * std::max(1.0, std::abs(ev)));
        }
        CHECK(close(spec.back(), c.band_eigenvalues.back(), 1e-10));
        for (int j = 1; j <= lat.N(); ++j) {
            double partial = 0.0;
            for (int k = 0; k < j; ++k) partial += w[k];
            CHECK(close(c.band_eigenvalues[j - 1], partial, 1e-12));
        }
    }
}

TEST_CASE("gaussian tightness against the dense spectrum of M")
{
    for (int d : {1, 2}) {
        HierLattice lat(2, d == 1 ? 6 : 3, d, 1);
        for (const CovarianceMode mode : {CovarianceMode{MassiveMode{1e-2}}, CovarianceMode{MassiveMode{1.0}},
                                          CovarianceMode{SineGordonMode{0.2}}}) {
            const auto dec = build_covariance_decomposition(lat, mode);
            const auto c = build_certificate(dec, std::vector<double>(lat.N() + 1, 0.0));
            const auto spec = dense_hier_operators(dec).coupling.spectrum();
            CHECK(close(c.gap_lower_bound, spec.front(), 1e-10));
        }
    }
}

TEST_CASE("monotonicity and invalid certificates")
{
    HierLattice lat(2, 4, 2, 1);
    const auto dec = build_covariance_decomposition(lat, SineGordonMode{0.2});
    const auto e = random_eps(5, 5, 0.3);
    const double base = build_certificate(dec, e).gap_lower_bound;
    for (int k = 0; k <= 4; ++k) {
        auto up = e;
        up[k] += 0.05;
        CHECK(build_certificate(dec, up).gap_lower_bound <= base);
    }
    auto bad = e;
    bad[2] = 1.0;
    const auto c = build_certificate(dec, bad);
    CHECK_FALSE(c.valid);
    CHECK(c.gap_lower_bound == 0.0);
    CHECK_THROWS_AS(build_certificate(dec, {0.1, 0.1}), ParameterError);
}

TEST_CASE("sine-gordon bounds: free field and small potential")
{
    const double beta = 0.2;
    HierLattice lat(2, 4, 2, 1);
    const auto dec = build_covariance_decomposition(lat, SineGordonMode{beta});
    const double eps = beta * std::pow(2.0, -8);
    const auto free = sg_gap_bounds(run_flow(FourierPotential(), dec), dec);
    CHECK(close(free.lower, eps, 1e-12));
    CHECK(close(free.upper, eps, 1e-12));

    const auto b = sg_gap_bounds(run_flow(FourierPotential({0.0, 0.05 / 8.0}), dec), dec);
    CHECK(b.valid);
    const double c = b.lower * std::pow(2.0, 8);
    CHECK(c > 0.0);
    CHECK(c <= 1.0);
    CHECK(b.upper <= std::pow(2.0, -8));
    CHECK(b.lower <= b.upper);
}

TEST_CASE("exact variance formula against two-site quadrature")
{
    HierLattice lat(2, 1, 1, 1);
    SUBCASE("sine-gordon")
    {
        const double beta = 0.5;
        const auto dec = build_covariance_decomposition(lat, SineGordonMode{beta});
        const FourierPotential V({0.0, 0.08, -0.02});
        const auto flow = run_flow(V, dec);
        const auto M = dense_hier_operators(dec).coupling.matrix;
        const double exact = gibbs_var_sum_per_site(two_site_energy(M, [&](double x) { return V.value(x); }));
        CHECK(close(exact_variance_per_site(flow, dec), exact, 1e-8));
    }
    SUBCASE("phi4")
    {
        const double g = 0.3, nu = -0.2, m2 = 0.5;
        const auto dec = build_covariance_decomposition(lat, MassiveMode{m2});
        const auto flow = run_flow(phi4_initial(g, nu, 1, 1.0, phi4_default_rmax(g)), dec);
        const auto M = dense_hier_operators(dec).coupling.matrix;
        const double exact =
            gibbs_var_sum_per_site(two_site_energy(M, [&](double x) { return 0.25 * g * x * x * x * x + 0.5 * nu * x * x; }));
        CHECK(close(exact_variance_per_site(flow, dec), exact, 1e-8));
    }
}

TEST_CASE("soundness: certificate below the exact two-site gap")
{
    HierLattice lat(2, 1, 1, 1);
    struct Case {
        double g, nu, m2;
    };
    for (const Case cs : {Case{0.3, -0.2, 0.5}, Case{0.1, 0.0, 0.2}, Case{1.0, -0.5, 1.0}}) {
        const auto dec = build_covariance_decomposition(lat, MassiveMode{cs.m2});
        const auto flow = run_flow(phi4_initial(cs.g, cs.nu, 1, 1.0, phi4_default_rmax(cs.g)), dec);
        const auto b = sg_gap_bounds(flow, dec);
        const auto M = dense_hier_operators(dec).coupling.matrix;
        const auto gap = generator_gap_2d(two_site_energy(M, [&](double x) {
            return 0.25 * cs.g * x * x * x * x + 0.5 * cs.nu * x * x;
        }));
        CHECK(b.valid);
        CHECK(b.lower <= gap.gap);
        CHECK(gap.gap <= b.upper * (1 + 1e-6));
    }
    const double beta = 0.5;
    const auto dec = build_covariance_decomposition(lat, SineGordonMode{beta});
    const FourierPotential V({0.0, 0.08, -0.02});
    const auto b = sg_gap_bounds(run_flow(V, dec), dec);
    const auto M = dense_hier_operators(dec).coupling.matrix;
    const auto gap = generator_gap_2d(two_site_energy(M, [&](double x) { return V.value(x); }));
    CHECK(b.lower <= gap.gap);
    CHECK(gap.gap <= b.upper * (1 + 1e-6));
}

TEST_CASE("discrete gaussian bounds are ordered")
{
    const double beta = 0.3;
    HierLattice lat(2, 3, 2, 1);
    const auto dec = build_covariance_decomposition(lat, SineGordonMode{beta});
    FourierPotential V = dg_fourier(beta);
    std::vector<double> c = V.coeffs();
    for (double& x : c) x *= 4.0;
    FlowOptions o;
    o.first_scale = 1;
    const auto flow = run_flow(FourierPotential(c), dec, o);
    const auto site = dg_site_constants(beta);
    const auto b = dg_gap_bounds(flow, dec, site);
    CHECK(b.certificate.first_scale == 1);
    if (b.valid) {
        CHECK(b.lower > 0.0);
        CHECK(b.lower <= b.upper);
    }
    CHECK(b.upper > 0.0);
}

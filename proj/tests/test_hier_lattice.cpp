#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hrg/errors.hpp"
#include "hrg/hier_lattice.hpp"
#include "hrg/oracle.hpp"
#include "hrg/random.hpp"

#include <cmath>

using namespace hrg;

namespace {

FieldVector random_field(const HierLattice& lat, std::uint64_t seed)
{
    NormalSampler z(CounterRng(stream_key(seed, 99)));
    FieldVector f(lat);
    for (auto& v : f.values) v = z();
    return f;
}

} // namespace

TEST_CASE("lattice geometry")
{
    HierLattice lat(2, 3, 2, 1);
    CHECK(lat.num_sites() == 64);
    CHECK(lat.num_blocks(0) == 64);
    CHECK(lat.num_blocks(2) == 4);
    CHECK(lat.num_blocks(3) == 1);
    CHECK(lat.block_volume(2) == 16);
    for (std::size_t x = 0; x < lat.num_sites(); ++x)
        for (int j = 0; j < 3; ++j) CHECK(lat.block_of(x, j + 1) == lat.block_of(x, j) / lat.reblock_factor());
    CHECK_THROWS_AS(lat.block_volume(4), RangeError);
    CHECK_THROWS_AS(HierLattice(1, 2, 1), ParameterError);
    CHECK_THROWS_AS(FieldVector(lat, std::vector<double>(3)), ParameterError);
}

TEST_CASE("block averaging")
{
    HierLattice lat(2, 1, 2, 1);
    FieldVector f(lat, {1, 2, 3, 4});
    auto q = block_average(f, 1);
    for (double v : q.values) CHECK(v == doctest::Approx(2.5));
    CHECK(max_abs_diff(block_average(f, 0), f) == 0.0);

    HierLattice big(3, 2, 2, 2);
    auto c = FieldVector::constant(big, 1.7);
    for (int j = 0; j <= 2; ++j) CHECK(max_abs_diff(block_average(c, j), c) < 1e-14);
    CHECK_THROWS_AS(block_average(c, 3), RangeError);
    CHECK_THROWS_AS(block_average(c, -1), RangeError);
}

TEST_CASE("fluctuation projection examples")
{
    HierLattice lat(2, 1, 1, 1);
    FieldVector f(lat, {1, -1});
    auto p = fluctuation_projection(f, 1);
    CHECK(p.values[0] == doctest::Approx(1.0));
    CHECK(p.values[1] == doctest::Approx(-1.0));

    HierLattice big(2, 3, 2, 1);
    auto c = FieldVector::constant(big, 3.0);
    for (int j = 1; j <= 3; ++j)
        for (double v : fluctuation_projection(c, j).values) CHECK(std::abs(v) < 1e-14);
    CHECK_THROWS_AS(fluctuation_projection(c, 0), RangeError);
    CHECK_THROWS_AS(fluctuation_projection(c, 4), RangeError);
}

TEST_CASE("projector algebra on random fields")
{
    for (int n : {1, 2}) {
        HierLattice lat(2, 3, 2, n);
        const int N = lat.N();
        auto f = random_field(lat, 7 + n);
        for (int j = 0; j <= N; ++j)
            for (int k = 0; k <= N; ++k)
                CHECK(max_abs_diff(block_average(block_average(f, k), j), block_average(f, std::max(j, k))) <
                      1e-12);
        for (int j = 1; j <= N; ++j)
            for (int k = 1; k <= N; ++k) {
                auto pp = fluctuation_projection(fluctuation_projection(f, k), j);
                auto expect = j == k ? fluctuation_projection(f, j) : FieldVector(lat);
                CHECK(max_abs_diff(pp, expect) < 1e-12);
            }
        auto sum = block_average(f, N);
        for (int j = 1; j <= N; ++j) sum = sum + fluctuation_projection(f, j);
        CHECK(max_abs_diff(sum, f) < 1e-12);
    }
}

TEST_CASE("hierarchical laplacian")
{
    HierLattice tiny(2, 1, 1, 1);
    auto r = apply_hier_laplacian(FieldVector(tiny, {1, -1}));
    CHECK(r.values[0] == doctest::Approx(1.0));
    CHECK(r.values[1] == doctest::Approx(-1.0));

    HierLattice lat(2, 2, 2, 1);
    auto c = apply_hier_laplacian(FieldVector::constant(lat, 2.0));
    for (double v : c.values) CHECK(std::abs(v) < 1e-14);

    auto f = random_field(lat, 3);
    auto ops = dense_hier_operators(build_covariance_decomposition(lat, MassiveMode{1.0}));
    Eigen::Map<const Eigen::VectorXd> fv(f.values.data(), Eigen::Index(f.size()));
    const double dense = fv.dot(ops.neg_laplacian.matrix * fv);
    CHECK(std::abs(dot(f, apply_hier_laplacian(f)) - dense) < 1e-10);
    CHECK(dot(f, apply_hier_laplacian(f)) >= 0.0);
}

TEST_CASE("laplacian spectrum and multiplicities")
{
    for (int d : {1, 2}) {
        HierLattice lat(2, d == 1 ? 4 : 3, d, 1);
        auto ops = dense_hier_operators(build_covariance_decomposition(lat, MassiveMode{1.0}));
        auto spec = ops.neg_laplacian.spectrum();
        const int N = lat.N();
        const double Ld = std::pow(2.0, d);
        for (int j = 1; j <= N; ++j) {
            const double ev = std::pow(2.0, -2.0 * (j - 1));
            int count = 0;
            for (double s : spec) count += std::abs(s - ev) < 1e-10;
            CHECK(count == int(std::pow(Ld, N - j + 1) - std::pow(Ld, N - j)));
        }
        int zeros = 0;
        for (double s : spec) zeros += std::abs(s) < 1e-10;
        CHECK(zeros == 1);
    }
}

TEST_CASE("covariance decomposition values")
{
    HierLattice lat(2, 3, 2, 1);
    auto dm = build_covariance_decomposition(lat, MassiveMode{1.0});
    CHECK(dm.lambdas[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(dm.theta.size() == 4);
    CHECK(dm.mass_scale == 0);

    auto sg = build_covariance_decomposition(HierLattice(2, 2, 2, 1), SineGordonMode{0.2});
    CHECK(sg.lambdas[1] == doctest::Approx(15.0).epsilon(1e-14));
    CHECK(sg.theta.empty());

    auto heavy = build_covariance_decomposition(lat, MassiveMode{1e12});
    for (double l : heavy.lambdas) CHECK(l < 1e-11);

    CHECK_THROWS_AS(build_covariance_decomposition(lat, MassiveMode{0.0}), ParameterError);
    CHECK_THROWS_AS(build_covariance_decomposition(lat, SineGordonMode{-1.0}), ParameterError);

    auto small = build_covariance_decomposition(HierLattice(2, 6, 2, 1), MassiveMode{std::pow(2.0, -8)});
    CHECK(small.mass_scale == 4);
    CHECK(small.theta[6] == doctest::Approx(0.25));
}

TEST_CASE("decomposition reproduces the inverse")
{
    CHECK(verify_decomposition(build_covariance_decomposition(HierLattice(2, 2, 2), MassiveMode{0.1})) <= 1e-9);
    CHECK(verify_decomposition(build_covariance_decomposition(HierLattice(2, 1, 1), MassiveMode{1.0})) <= 1e-12);
    CHECK(verify_decomposition(build_covariance_decomposition(HierLattice(2, 2, 2), SineGordonMode{0.3})) <=
          1e-9);
    CHECK_THROWS_AS(verify_decomposition(build_covariance_decomposition(HierLattice(2, 7, 2), MassiveMode{1.0})),
                    CapacityError);

    // independent check against the Euclidean dense construction
    for (auto mode : {CovarianceMode{MassiveMode{0.01}}, CovarianceMode{SineGordonMode{0.25}}}) {
        auto dec = build_covariance_decomposition(HierLattice(3, 2, 2), mode);
        auto ops = dense_hier_operators(dec);
        auto S = dense_block_sum(dec.lattice, dec.lambdas);
        CHECK((S.matrix - ops.covariance.matrix).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("fluctuation sampling")
{
    HierLattice lat(2, 2, 2, 2);
    auto dec = build_covariance_decomposition(lat, MassiveMode{0.5});
    auto z = sample_fluctuation(dec, 1, 11);
    for (std::size_t x = 0; x < lat.num_sites(); ++x)
        for (std::size_t y = 0; y < lat.num_sites(); ++y)
            if (lat.block_of(x, 1) == lat.block_of(y, 1))
                for (int i = 0; i < 2; ++i) CHECK(z.at(x, i) == z.at(y, i));
    CHECK(max_abs_diff(z, sample_fluctuation(dec, 1, 11)) == 0.0);

    auto zero = dec;
    zero.lambdas[2] = 0.0;
    for (double v : sample_fluctuation(zero, 2, 5).values) CHECK(v == 0.0);

    // empirical variance of one site over independent draws
    HierLattice one(2, 1, 1, 1);
    auto d1 = build_covariance_decomposition(one, MassiveMode{0.3});
    const int S = 100000;
    const double target = d1.site_variance(1);
    double s2 = 0.0, s4 = 0.0;
    for (int s = 0; s < S; ++s) {
        const double v = sample_fluctuation(d1, 1, 1000 + s).values[0];
        s2 += v * v;
        s4 += v * v * v * v;
    }
    const double var = s2 / S;
    const double se = std::sqrt((s4 / S - var * var) / S);
    CHECK(std::abs(var - target) < 3.0 * se);
}

TEST_CASE("green function growth at d = 2")
{
    // slope in N of the diagonal entry at m2 = L^{-2N}; reported as a diagnostic
    const double slope = green_diagonal_slope(2, 4, 8);
    CHECK(slope > 0.0);
    CHECK(slope == doctest::Approx(0.75).epsilon(0.1));
}

#include "hrg/hier_lattice.hpp"

#include "hrg/errors.hpp"
#include "hrg/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace hrg {

namespace {

std::size_t ipow(std::size_t base, int e)
{
    std::size_t r = 1;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

void check_same_lattice(const FieldVector& a, const FieldVector& b)
{
    if (!(a.lattice == b.lattice)) throw ParameterError("field vectors live on different lattices");
}

} // namespace

HierLattice::HierLattice(int L, int N, int d, int n) : L_(L), N_(N), d_(d), n_(n)
{
    if (L < 2) throw ParameterError("block side L must be >= 2");
    if (N < 1) throw ParameterError("depth N must be >= 1");
    if (d < 1) throw ParameterError("dimension d must be >= 1");
    if (n < 1) throw ParameterError("spin components n must be >= 1");
    if (std::log2(double(L)) * d * N > 62) throw CapacityError("lattice too large to index");
    sites_ = ipow(std::size_t(L), d * N);
}

std::size_t HierLattice::block_volume(int j) const
{
    if (j < 0 || j > N_) throw RangeError("scale " + std::to_string(j) + " out of range");
    return ipow(std::size_t(L_), d_ * j);
}

double HierLattice::block_volume_real(int j) const { return std::pow(double(L_), double(d_ * j)); }

std::size_t HierLattice::num_blocks(int j) const { return sites_ / block_volume(j); }

std::size_t HierLattice::block_of(std::size_t site, int j) const { return site / block_volume(j); }

FieldVector::FieldVector(const HierLattice& lat) : lattice(lat), values(lat.num_sites() * lat.n(), 0.0) {}

FieldVector::FieldVector(const HierLattice& lat, std::vector<double> vals) : lattice(lat), values(std::move(vals))
{
    if (values.size() != lat.num_sites() * std::size_t(lat.n()))
        throw ParameterError("field length must equal n * |Lambda|");
}

FieldVector FieldVector::constant(const HierLattice& lat, double c)
{
    FieldVector f(lat);
    std::fill(f.values.begin(), f.values.end(), c);
    return f;
}

double dot(const FieldVector& a, const FieldVector& b)
{
    check_same_lattice(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

FieldVector operator-(const FieldVector& a, const FieldVector& b)
{
    check_same_lattice(a, b);
    FieldVector r(a);
    for (std::size_t i = 0; i < r.size(); ++i) r.values[i] -= b.values[i];
    return r;
}

FieldVector operator+(const FieldVector& a, const FieldVector& b)
{
    check_same_lattice(a, b);
    FieldVector r(a);
    for (std::size_t i = 0; i < r.size(); ++i) r.values[i] += b.values[i];
    return r;
}

FieldVector operator*(double s, const FieldVector& a)
{
    FieldVector r(a);
    for (auto& v : r.values) v *= s;
    return r;
}

double max_abs_diff(const FieldVector& a, const FieldVector& b)
{
    check_same_lattice(a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

void all_block_means(const HierLattice& lat, std::span<const double> f, std::vector<std::vector<double>>& out)
{
    const int n = lat.n();
    const std::size_t K = lat.reblock_factor();
    out.resize(lat.N() + 1);
    out[0].assign(f.begin(), f.end());
    for (int j = 1; j <= lat.N(); ++j) {
        const std::size_t nb = lat.num_blocks(j);
        auto& cur = out[j];
        const auto& prev = out[j - 1];
        cur.assign(nb * n, 0.0);
        for (std::size_t b = 0; b < nb; ++b) {
            for (std::size_t c = 0; c < K; ++c) {
                const std::size_t child = b * K + c;
                for (int i = 0; i < n; ++i) cur[b * n + i] += prev[child * n + i];
            }
            for (int i = 0; i < n; ++i) cur[b * n + i] /= double(K);
        }
    }
}

FieldVector block_average(const FieldVector& f, int j)
{
    const auto& lat = f.lattice;
    if (j < 0 || j > lat.N()) throw RangeError("block_average: scale " + std::to_string(j) + " out of range");
    if (j == 0) return f;
    std::vector<std::vector<double>> means;
    all_block_means(lat, f.values, means);
    FieldVector r(lat);
    const std::size_t bv = lat.block_volume(j);
    const int n = lat.n();
    for (std::size_t x = 0; x < lat.num_sites(); ++x)
        for (int i = 0; i < n; ++i) r.values[x * n + i] = means[j][(x / bv) * n + i];
    return r;
}

FieldVector fluctuation_projection(const FieldVector& f, int j)
{
    if (j < 1 || j > f.lattice.N())
        throw RangeError("fluctuation_projection: scale " + std::to_string(j) + " out of range");
    return block_average(f, j - 1) - block_average(f, j);
}

FieldVector apply_coupling(const GaussianCoupling& M, const FieldVector& f)
{
    const auto& lat = f.lattice;
    const int n = lat.n();
    const int N = lat.N();
    std::vector<std::vector<double>> means;
    all_block_means(lat, f.values, means);
    std::vector<std::size_t> bv(N + 1);
    std::vector<double> coeff(N + 1, 0.0);
    for (int j = 0; j <= N; ++j) bv[j] = lat.block_volume(j);
    for (int j = 1; j <= N; ++j) coeff[j] = M.laplacian_coeff * std::pow(double(lat.L()), -2.0 * (j - 1));

    FieldVector r(lat);
    for (std::size_t x = 0; x < lat.num_sites(); ++x) {
        for (int i = 0; i < n; ++i) {
            double acc = M.mass2 * f.values[x * n + i] + M.external * means[N][i];
            double prev = f.values[x * n + i];
            for (int j = 1; j <= N; ++j) {
                const double cur = means[j][(x / bv[j]) * n + i];
                acc += coeff[j] * (prev - cur);
                prev = cur;
            }
            r.values[x * n + i] = acc;
        }
    }
    return r;
}

FieldVector apply_hier_laplacian(const FieldVector& f) { return apply_coupling(GaussianCoupling{}, f); }

double GaussianCoupling::band_eigenvalue(const HierLattice& lat, int band) const
{
    if (band < 1 || band > lat.N() + 1) throw RangeError("band out of range");
    if (band == lat.N() + 1) return mass2 + external;
    return laplacian_coeff * std::pow(double(lat.L()), -2.0 * (band - 1)) + mass2;
}

double GaussianCoupling::min_eigenvalue(const HierLattice& lat) const
{
    double m = band_eigenvalue(lat, lat.N() + 1);
    for (int b = 1; b <= lat.N(); ++b) m = std::min(m, band_eigenvalue(lat, b));
    return m;
}

double GaussianCoupling::max_eigenvalue(const HierLattice& lat) const
{
    double m = band_eigenvalue(lat, lat.N() + 1);
    for (int b = 1; b <= lat.N(); ++b) m = std::max(m, band_eigenvalue(lat, b));
    return m;
}

double CovarianceDecomposition::zero_mode_coupling() const
{
    if (const auto* m = std::get_if<MassiveMode>(&mode)) return m->m2;
    const double beta = std::get<SineGordonMode>(mode).beta;
    return beta * std::pow(double(lattice.L()), -2.0 * lattice.N());
}

double CovarianceDecomposition::site_variance(int j) const
{
    if (j < 0 || j > lattice.N()) throw RangeError("site_variance: scale out of range");
    return lambdas[j] / lattice.block_volume_real(j);
}

GaussianCoupling CovarianceDecomposition::precision() const
{
    if (const auto* m = std::get_if<MassiveMode>(&mode)) return {1.0, m->m2, 0.0};
    const double beta = std::get<SineGordonMode>(mode).beta;
    return {beta, 0.0, zero_mode_coupling()};
}

double CovarianceDecomposition::green_diagonal() const
{
    double g = 0.0;
    for (int j = 0; j <= lattice.N(); ++j) g += site_variance(j);
    return g;
}

CovarianceDecomposition build_covariance_decomposition(const HierLattice& lat, CovarianceMode mode)
{
    CovarianceDecomposition dec{lat, mode, {}, {}, 0};
    const int N = lat.N();
    const double L = lat.L();
    dec.lambdas.assign(N + 1, 0.0);
    if (const auto* mm = std::get_if<MassiveMode>(&mode)) {
        const double m2 = mm->m2;
        if (!(m2 > 0.0) || !std::isfinite(m2)) throw ParameterError("massive decomposition requires m2 > 0");
        dec.lambdas[0] = 1.0 / (1.0 + m2);
        for (int j = 1; j < N; ++j) {
            const double L2j = std::pow(L, 2.0 * j);
            dec.lambdas[j] = L2j * (1.0 - 1.0 / (L * L)) / ((1.0 + m2 * L2j) * (1.0 + m2 * L2j / (L * L)));
        }
        dec.lambdas[N] = 1.0 / (m2 * (1.0 + m2 * std::pow(L, 2.0 * (N - 1))));
        dec.mass_scale = int(std::floor(-0.5 * std::log(m2) / std::log(L)));
        dec.theta.resize(N + 1);
        for (int j = 0; j <= N; ++j) dec.theta[j] = std::pow(2.0, -double(std::max(0, j - dec.mass_scale)));
    } else {
        const double beta = std::get<SineGordonMode>(mode).beta;
        if (!(beta > 0.0) || !std::isfinite(beta)) throw ParameterError("sine-gordon decomposition requires beta > 0");
        const double sigma = 1.0 - 1.0 / (L * L);
        dec.lambdas[0] = 1.0 / beta;
        for (int j = 1; j <= N; ++j) dec.lambdas[j] = sigma / beta * std::pow(L, 2.0 * j);
    }
    return dec;
}

double verify_decomposition(const CovarianceDecomposition& decomp)
{
    const auto& lat = decomp.lattice;
    const std::size_t V = lat.num_sites();
    if (V > kDenseCapacity) throw CapacityError("verify_decomposition: |Lambda| exceeds dense capacity 4096");
    const int N = lat.N();
    const auto M = decomp.precision();

    // Entries depend only on the first scale at which x and y share a block.
    std::vector<double> s_by_scale(N + 1, 0.0), m_by_scale(N + 1, 0.0);
    for (int js = 0; js <= N; ++js) {
        double s = 0.0;
        for (int j = js; j <= N; ++j) s += decomp.lambdas[j] / lat.block_volume_real(j);
        s_by_scale[js] = s;
        double m = M.external / double(V);
        for (int j = std::max(js, 1); j <= N; ++j) {
            const double c = M.laplacian_coeff * std::pow(double(lat.L()), -2.0 * (j - 1));
            if (j - 1 >= js) m += c / lat.block_volume_real(j - 1);
            m -= c / lat.block_volume_real(j);
        }
        if (js == 0) m += M.mass2;
        m_by_scale[js] = m;
    }

    Eigen::MatrixXd S(V, V), A(V, V);
    for (std::size_t x = 0; x < V; ++x) {
        for (std::size_t y = 0; y < V; ++y) {
            int js = 0;
            while (lat.block_of(x, js) != lat.block_of(y, js)) ++js;
            S(x, y) = s_by_scale[js];
            A(x, y) = m_by_scale[js];
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw NumericalError("verify_decomposition: coupling not positive definite");
    A.setIdentity();
    llt.solveInPlace(A);
    return (S - A).cwiseAbs().maxCoeff();
}

FieldVector sample_fluctuation(const CovarianceDecomposition& decomp, int j, std::uint64_t seed)
{
    const auto& lat = decomp.lattice;
    if (j < 0 || j > lat.N()) throw RangeError("sample_fluctuation: scale out of range");
    const double sd = std::sqrt(decomp.site_variance(j));
    FieldVector z(lat);
    const int n = lat.n();
    const std::size_t bv = lat.block_volume(j);
    for (std::size_t b = 0; b < lat.num_blocks(j); ++b) {
        NormalSampler normal(CounterRng(stream_key(seed, std::uint64_t(j), b)));
        std::vector<double> comp(n);
        for (int i = 0; i < n; ++i) comp[i] = sd * normal();
        for (std::size_t x = b * bv; x < (b + 1) * bv; ++x)
            for (int i = 0; i < n; ++i) z.values[x * n + i] = comp[i];
    }
    return z;
}

double green_diagonal_slope(int L, int n_lo, int n_hi)
{
    std::vector<double> xs, ys;
    for (int N = n_lo; N <= n_hi; ++N) {
        HierLattice lat(L, N, 2, 1);
        auto dec = build_covariance_decomposition(lat, MassiveMode{std::pow(double(L), -2.0 * N)});
        xs.push_back(N);
        ys.push_back(dec.green_diagonal());
    }
    const double k = double(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

} // namespace hrg

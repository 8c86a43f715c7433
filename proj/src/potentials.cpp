#include "hrg/potentials.hpp"

#include "hrg/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hrg {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

RadialPotential::Tail fit_tail(const std::vector<double>& v, double h)
{
    const std::size_t M = v.size() - 1;
    const std::size_t k0 = 3 * M / 4;
    const std::size_t rows = M - k0 + 1;
    const double rm = h * double(M);
    // columns scaled by powers of r_max for conditioning
    Eigen::MatrixXd A(rows, 3);
    Eigen::VectorXd y(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double t = h * double(k0 + i) / rm;
        A(i, 0) = 1.0;
        A(i, 1) = t * t;
        A(i, 2) = t * t * t * t;
        y(i) = v[k0 + i];
    }
    Eigen::Vector3d c = A.colPivHouseholderQr().solve(y);
    return {c(0), c(1) / (rm * rm), c(2) / (rm * rm * rm * rm)};
}

std::vector<double> cos_table(int M)
{
    std::vector<double> t(M);
    for (int k = 0; k < M; ++k) t[k] = std::cos(kTwoPi * k / M);
    return t;
}

} // namespace

namespace {

std::vector<double> checked_knots(int n, double block_volume, double r_max, std::vector<double> values)
{
    if (n < 1) throw ParameterError("radial potential: n must be >= 1");
    if (!(block_volume > 0.0)) throw ParameterError("radial potential: block volume must be positive");
    if (!(r_max > 0.0)) throw ParameterError("radial potential: r_max must be positive");
    if (values.size() < 9) throw ResolutionError("radial potential: at least 9 knots required");
    for (double v : values)
        if (!std::isfinite(v)) throw NumericalError("radial potential: non-finite value");
    return values;
}

// Mirrored knots make the interpolant even and smooth through the origin.
boost::math::interpolators::cardinal_quintic_b_spline<double> even_spline(const std::vector<double>& v, double r_max,
                                                                         const RadialPotential::Tail& t)
{
    const double slope = 2.0 * t.b * r_max + 4.0 * t.c * r_max * r_max * r_max;
    const double curv = 2.0 * t.b + 12.0 * t.c * r_max * r_max;
    const std::size_t M = v.size() - 1;
    std::vector<double> mirrored(2 * M + 1);
    for (std::size_t k = 0; k <= M; ++k) mirrored[M + k] = mirrored[M - k] = v[k];
    return {mirrored, -r_max, r_max / double(M), {-slope, curv}, {slope, curv}};
}

} // namespace

RadialPotential::RadialPotential(int n, double block_volume, double r_max, std::vector<double> values)
    : n_(n), block_volume_(block_volume), r_max_(r_max),
      values_(checked_knots(n, block_volume, r_max, std::move(values))),
      tail_(fit_tail(values_, r_max / double(values_.size() - 1))), spline_(even_spline(values_, r_max, tail_))
{
}

double RadialPotential::value(double r) const
{
    if (std::abs(r) <= r_max_) return spline_(std::min(std::abs(r), spline_.t_max()));
    r = std::abs(r);
    const double r2 = r * r;
    return tail_.a + tail_.b * r2 + tail_.c * r2 * r2;
}

double RadialPotential::derivative(double r) const
{
    const double s = r < 0 ? -1.0 : 1.0;
    if (std::abs(r) <= r_max_) return s * spline_.prime(std::min(std::abs(r), spline_.t_max()));
    r = std::abs(r);
    return s * (2.0 * tail_.b * r + 4.0 * tail_.c * r * r * r);
}

double RadialPotential::second_derivative(double r) const
{
    if (std::abs(r) <= r_max_) return spline_.double_prime(std::min(std::abs(r), spline_.t_max()));
    r = std::abs(r);
    return 2.0 * tail_.b + 12.0 * tail_.c * r * r;
}

double phi4_default_rmax(double g)
{
    if (!(g > 0.0)) throw ParameterError("phi4: g must be positive");
    return 8.0 * std::pow(g, -0.25);
}

RadialPotential phi4_initial(double g, double nu, int n, double block_volume, double r_max, int M)
{
    if (!(g > 0.0)) throw ParameterError("phi4_initial: g must be positive");
    if (M < 8) throw ResolutionError("phi4_initial: M must be >= 8");
    std::vector<double> v(M + 1);
    for (int k = 0; k <= M; ++k) {
        const double r = r_max * k / M;
        v[k] = block_volume * (0.25 * g * r * r * r * r + 0.5 * nu * r * r);
    }
    return RadialPotential(n, block_volume, r_max, std::move(v));
}

namespace {

// Knot value with the even extension on the left and the tail on the right.
double knot_value(const RadialPotential& pot, long k)
{
    const long M = long(pot.size()) - 1;
    k = std::abs(k);
    return k <= M ? pot.values()[std::size_t(k)] : pot.value(pot.spacing() * double(k));
}

// Smallest Hessian eigenvalue of W at knot k from Richardson-extrapolated central differences (O(h^4)).
// Stencils never reach past r_max: the tail fit is an extrapolation, not data.
double knot_min_eigen(const RadialPotential& pot, long k, int n)
{
    const long M = long(pot.size()) - 1;
    const double h = pot.spacing();
    auto f = [&](long i) { return knot_value(pot, i); };
    double radial, slope;
    if (k + 2 <= M) {
        const double d2a = (f(k + 1) - 2.0 * f(k) + f(k - 1)) / (h * h);
        const double d2b = (f(k + 2) - 2.0 * f(k) + f(k - 2)) / (4.0 * h * h);
        radial = (4.0 * d2a - d2b) / 3.0;
        const double d1a = (f(k + 1) - f(k - 1)) / (2.0 * h);
        const double d1b = (f(k + 2) - f(k - 2)) / (4.0 * h);
        slope = (4.0 * d1a - d1b) / 3.0;
    } else {
        // one-sided, third order in the second derivative
        const long b = k - 4;
        radial = (35.0 * f(b + 4) - 104.0 * f(b + 3) + 114.0 * f(b + 2) - 56.0 * f(b + 1) + 11.0 * f(b)) / (12.0 * h * h);
        if (k == M - 1) radial = (11.0 * f(k + 1) - 20.0 * f(k) + 6.0 * f(k - 1) + 4.0 * f(k - 2) - f(k - 3)) / (12.0 * h * h);
        slope = (25.0 * f(k) - 48.0 * f(k - 1) + 36.0 * f(k - 2) - 16.0 * f(k - 3) + 3.0 * f(k - 4)) / (12.0 * h);
    }
    if (n < 2 || k == 0) return radial;
    return std::min(radial, slope / (h * double(k)));
}

} // namespace

RadialHessianBound radial_hessian_bounds(const RadialPotential& pot, int n)
{
    if (pot.size() < 33) throw ResolutionError("radial_hessian_bounds: grid too coarse (fewer than 32 intervals)");
    const double inv = 1.0 / pot.block_volume();
    RadialHessianBound b;
    b.min_eigen = INFINITY;
    for (long k = 0; k < long(pot.size()); ++k) {
        const double e = knot_min_eigen(pot, k, n) * inv;
        if (e < b.min_eigen) {
            b.min_eigen = e;
            b.argmin_r = pot.radius(std::size_t(k));
        }
    }
    b.s_neg = std::max(0.0, -b.min_eigen);
    return b;
}

double radial_min_hessian(const RadialPotential& pot, double r_lo)
{
    double m = INFINITY;
    for (long k = 0; k < long(pot.size()); ++k)
        if (pot.radius(std::size_t(k)) >= r_lo * (1.0 - 1e-12)) m = std::min(m, knot_min_eigen(pot, k, pot.n()));
    return m / pot.block_volume();
}

FourierPotential::FourierPotential(std::vector<double> coeffs) : coeffs_(std::move(coeffs))
{
    if (coeffs_.empty()) coeffs_.assign(1, 0.0);
}

double FourierPotential::coeff(int q) const noexcept
{
    q = std::abs(q);
    return q < int(coeffs_.size()) ? coeffs_[q] : 0.0;
}

double FourierPotential::value(double phi) const
{
    double v = coeffs_[0];
    for (int q = 1; q <= q_max(); ++q) v += 2.0 * coeffs_[q] * std::cos(q * phi);
    return v;
}

double FourierPotential::derivative(double phi) const
{
    double v = 0.0;
    for (int q = 1; q <= q_max(); ++q) v -= 2.0 * q * coeffs_[q] * std::sin(q * phi);
    return v;
}

double FourierPotential::second_derivative(double phi) const
{
    double v = 0.0;
    for (int q = 1; q <= q_max(); ++q) v -= 2.0 * double(q) * q * coeffs_[q] * std::cos(q * phi);
    return v;
}

std::vector<double> FourierPotential::sample(int M) const
{
    const auto ct = cos_table(M);
    std::vector<double> out(M, coeffs_[0]);
    for (int k = 0; k < M; ++k) {
        double v = coeffs_[0];
        for (int q = 1; q <= q_max(); ++q) v += 2.0 * coeffs_[q] * ct[(std::size_t(q) * k) % M];
        out[k] = v;
    }
    return out;
}

FourierPotential FourierPotential::from_samples(const std::vector<double>& values, int q_max)
{
    const int M = int(values.size());
    if (M <= 2 * q_max) throw ResolutionError("from_samples: need more than 2 q_max samples");
    const auto ct = cos_table(M);
    std::vector<double> c(q_max + 1, 0.0);
    for (int q = 0; q <= q_max; ++q) {
        double s = 0.0;
        for (int k = 0; k < M; ++k) s += values[k] * ct[(std::size_t(q) * k) % M];
        c[q] = s / M;
    }
    return FourierPotential(std::move(c));
}

FourierPotential FourierPotential::truncated(int q) const
{
    std::vector<double> c(q + 1, 0.0);
    for (int i = 0; i <= std::min(q, q_max()); ++i) c[i] = coeffs_[i];
    return FourierPotential(std::move(c));
}

double fourier_norm(const FourierPotential& pot, bool subtract_constant)
{
    double s = subtract_constant ? 0.0 : std::abs(pot.coeff(0));
    for (int q = 1; q <= pot.q_max(); ++q) s += 2.0 * (1.0 + q) * (1.0 + q) * std::abs(pot.coeff(q));
    return s;
}

SecondDerivativeSup fourier_second_derivative_sup(const FourierPotential& pot)
{
    SecondDerivativeSup s;
    for (int q = 1; q <= pot.q_max(); ++q) s.coefficient_bound += 2.0 * double(q) * q * std::abs(pot.coeff(q));
    const int M = std::max(4096, 64 * pot.q_max());
    const auto ct = cos_table(M);
    double sup = -INFINITY;
    for (int k = 0; k < M; ++k) {
        double v = 0.0;
        for (int q = 1; q <= pot.q_max(); ++q) v += 2.0 * double(q) * q * pot.coeff(q) * ct[(std::size_t(q) * k) % M];
        sup = std::max(sup, v);
    }
    s.grid_sup = sup;
    return s;
}

FourierPotential multiply(const FourierPotential& a, const FourierPotential& b)
{
    const int qa = a.q_max(), qb = b.q_max();
    std::vector<double> c(qa + qb + 1, 0.0);
    for (int p = -qa; p <= qa; ++p)
        for (int q = -qb; q <= qb; ++q) {
            const int s = p + q;
            if (s >= 0) c[s] += a.coeff(p) * b.coeff(q);
        }
    return FourierPotential(std::move(c));
}

FourierPotential add(const FourierPotential& a, const FourierPotential& b, double scale_b)
{
    std::vector<double> c(std::max(a.q_max(), b.q_max()) + 1, 0.0);
    for (int q = 0; q < int(c.size()); ++q) c[q] = a.coeff(q) + scale_b * b.coeff(q);
    return FourierPotential(std::move(c));
}

namespace {

template <class Fn>
FourierPotential pointwise(const FourierPotential& f, int q_out, Fn fn)
{
    int M = 8 * (f.q_max() + q_out) + 64;
    auto v = f.sample(M);
    for (double& x : v) x = fn(x);
    return FourierPotential::from_samples(v, q_out);
}

} // namespace

FourierPotential exp_minus_one(const FourierPotential& f, int q_out)
{
    return pointwise(f, q_out, [](double x) { return std::expm1(-x); });
}

FourierPotential log_one_plus(const FourierPotential& f, int q_out)
{
    return pointwise(f, q_out, [](double x) {
        if (!(x > -1.0)) throw NumericalError("log_one_plus: 1 + F not positive");
        return std::log1p(x);
    });
}

FourierPotential log_one_plus_series(const FourierPotential& f, int q_out, double tol)
{
    const double nf = fourier_norm(f, false);
    if (!(nf < 1.0)) throw NumericalError("log_one_plus_series: requires ||F|| < 1");
    const int q_work = 2 * q_out + f.q_max();
    FourierPotential power = f.truncated(q_work);
    FourierPotential sum = power;
    double bound = nf;
    for (int k = 2; k < 2000 && bound > tol; ++k) {
        power = multiply(power, f).truncated(q_work);
        sum = add(sum, power, (k % 2 == 0 ? -1.0 : 1.0) / k);
        bound *= nf;
    }
    return sum.truncated(q_out);
}

DGEffectivePotential::DGEffectivePotential(double beta, int K) : beta_(beta), K_(K)
{
    if (!(beta > 0.0)) throw ParameterError("discrete gaussian: beta must be positive");
    if (K < 1) throw ParameterError("discrete gaussian: truncation K must be >= 1");
}

DGEffectivePotential::Moments DGEffectivePotential::moments(double psi) const
{
    // reduce to [-pi, pi); the untruncated sum is exactly 2 pi periodic
    psi -= kTwoPi * std::floor((psi + std::numbers::pi) / kTwoPi);
    double emax = -INFINITY;
    for (int k = -K_; k <= K_; ++k) {
        const double t = kTwoPi * k - psi;
        emax = std::max(emax, -0.5 * beta_ * t * t);
    }
    double s = 0.0, m = 0.0, m2 = 0.0;
    for (int k = -K_; k <= K_; ++k) {
        const double t = kTwoPi * k - psi;
        const double w = std::exp(-0.5 * beta_ * t * t - emax);
        s += w;
        m += w * t;
        m2 += w * t * t;
    }
    m /= s;
    return {std::log(s) + emax, m, m2 / s - m * m};
}

double DGEffectivePotential::value(double psi) const { return -moments(psi).logsum; }

double DGEffectivePotential::derivative(double psi) const
{
    // d/dpsi of -log sum e^{-beta t^2 / 2} with t = n - psi
    return -beta_ * moments(psi).mean;
}

double DGEffectivePotential::second_derivative(double psi) const
{
    return beta_ - beta_ * beta_ * moments(psi).var;
}

double DGEffectivePotential::truncation_error() const
{
    const double pi = std::numbers::pi;
    const double a = 2.0 * K_ + 1.0;
    return std::exp(-0.5 * beta_ * pi * pi * (a * a - 1.0));
}

int dg_default_truncation(double beta)
{
    if (!(beta > 0.0)) throw ParameterError("discrete gaussian: beta must be positive");
    return int(std::ceil(6.0 / std::sqrt(beta))) + 2;
}

DGEffectivePotential dg_effective_potential(double beta, int K)
{
    DGEffectivePotential p(beta, K);
    if (p.truncation_error() > 1e-14) throw TruncationError("dg_effective_potential: K too small for 1e-14");
    return p;
}

FourierPotential dg_fourier(double beta, int q_max)
{
    if (!(beta > 0.0)) throw ParameterError("dg_fourier: beta must be positive");
    std::vector<double> h(q_max + 1, 0.0);
    for (int q = 1; q <= q_max; ++q) h[q] = std::exp(-double(q) * q / (2.0 * beta));
    FourierPotential H(h);
    if (fourier_norm(H, false) < 0.5) {
        auto lg = log_one_plus_series(H, q_max);
        return add(FourierPotential(), lg, -1.0);
    }
    const int M = 32 * q_max;
    auto v = H.sample(M);
    for (double& x : v) x = -std::log1p(x);
    const auto wide = FourierPotential::from_samples(v, 2 * q_max);
    double head = 0.0, tail = 0.0;
    for (int q = 1; q <= 2 * q_max; ++q) (q <= q_max ? head : tail) += std::abs(wide.coeff(q));
    if (tail > 1e-12 * std::max(1.0, head))
        throw ResolutionError("dg_fourier: q_max too small to resolve the effective potential");
    return wide.truncated(q_max);
}

SiteMeasure dg_site_measure(const DGEffectivePotential& pot, double psi)
{
    const double beta = pot.beta();
    const int K = pot.truncation();
    const double a = psi / kTwoPi;
    const auto k0 = std::int64_t(std::floor(a)) - K, k1 = std::int64_t(std::ceil(a)) + K;
    SiteMeasure m;
    double lmax = -INFINITY;
    std::vector<double> logw;
    for (auto k = k0; k <= k1; ++k) {
        const double t = kTwoPi * double(k) - psi;
        logw.push_back(-0.5 * beta * t * t);
        lmax = std::max(lmax, logw.back());
        m.k.push_back(k);
    }
    double s = 0.0;
    for (double l : logw) {
        m.weights.push_back(std::exp(l - lmax));
        s += m.weights.back();
    }
    for (double& w : m.weights) w /= s;
    if (m.weights.front() + m.weights.back() > 1e-13)
        throw TruncationError("dg_site_measure: truncation leaves more than 1e-12 of the mass");
    return m;
}

} // namespace hrg

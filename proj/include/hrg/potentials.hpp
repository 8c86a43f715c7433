#pragma once

#include <boost/math/interpolators/cardinal_quintic_b_spline.hpp>

#include <cstdint>
#include <variant>
#include <vector>

namespace hrg {

/// O(n)-invariant per-block potential phi -> W(|phi|), sampled on the uniform grid r_k = k * r_max / M.
///
/// Between knots W is a quintic B-spline through the evenly mirrored knots, clamped at +-r_max to the
/// tail a + b r^2 + c r^4 fitted on the last quarter of the grid, which continues W beyond r_max.
class RadialPotential {
public:
    RadialPotential(int n, double block_volume, double r_max, std::vector<double> values);

    int n() const noexcept { return n_; }
    double block_volume() const noexcept { return block_volume_; }
    double r_max() const noexcept { return r_max_; }
    double spacing() const noexcept { return r_max_ / double(values_.size() - 1); }
    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<double>& values() const noexcept { return values_; }
    double radius(std::size_t k) const noexcept { return spacing() * double(k); }

    double value(double r) const;
    double derivative(double r) const;
    double second_derivative(double r) const;

    struct Tail {
        double a, b, c;
    };
    const Tail& tail() const noexcept { return tail_; }

private:
    int n_;
    double block_volume_;
    double r_max_;
    std::vector<double> values_;
    Tail tail_;
    boost::math::interpolators::cardinal_quintic_b_spline<double> spline_;
};

/// W(r) = |B| (g r^4 / 4 + nu r^2 / 2) on M + 1 knots.
RadialPotential phi4_initial(double g, double nu, int n, double block_volume, double r_max, int M = 512);

/// Default outer radius 8 g^{-1/4}.
double phi4_default_rmax(double g);

struct RadialHessianBound {
    double s_neg = 0.0;       ///< max(0, -min eigenvalue of Hess(W)/|B|)
    double argmin_r = 0.0;    ///< radius of the minimal eigenvalue
    double min_eigen = 0.0;   ///< min eigenvalue of Hess(W)/|B| (may be positive)
};

/// Radial eigenvalue W''(r) and tangential W'(r)/r (n >= 2) at every knot, from extrapolated central differences.
RadialHessianBound radial_hessian_bounds(const RadialPotential& pot, int n);

/// min over |phi| in [r_lo, r_max] of the Hessian eigenvalues of W/|B|.
double radial_min_hessian(const RadialPotential& pot, double r_lo);

/// Even 2 pi-periodic V(phi) = c_0 + 2 sum_{q >= 1} c_q cos(q phi).
class FourierPotential {
public:
    FourierPotential() : coeffs_(1, 0.0) {}
    explicit FourierPotential(std::vector<double> coeffs);

    int q_max() const noexcept { return int(coeffs_.size()) - 1; }
    const std::vector<double>& coeffs() const noexcept { return coeffs_; }
    double coeff(int q) const noexcept;

    double value(double phi) const;
    double derivative(double phi) const;
    double second_derivative(double phi) const;

    /// Values at phi_k = 2 pi k / M, k = 0..M-1.
    std::vector<double> sample(int M) const;
    /// Inverse of sample: coefficients q = 0..q_max from M equispaced values (M > 2 q_max).
    static FourierPotential from_samples(const std::vector<double>& values, int q_max);

    FourierPotential truncated(int q_max) const;

private:
    std::vector<double> coeffs_;
};

/// sum_{q in Z} (1 + |q|)^2 |V(q)|, optionally without q = 0.
double fourier_norm(const FourierPotential& pot, bool subtract_constant);

struct SecondDerivativeSup {
    double coefficient_bound = 0.0; ///< sum_{q != 0} q^2 |V(q)|
    double grid_sup = 0.0;          ///< max over a dense grid of -V''
};

SecondDerivativeSup fourier_second_derivative_sup(const FourierPotential& pot);

/// Exact product (q_max adds).
FourierPotential multiply(const FourierPotential& a, const FourierPotential& b);
FourierPotential add(const FourierPotential& a, const FourierPotential& b, double scale_b = 1.0);

/// e^{-F} - 1 and log(1 + F), evaluated pointwise on a fine grid and transformed back; coefficients
/// beyond q_out are dropped.
FourierPotential exp_minus_one(const FourierPotential& f, int q_out);
FourierPotential log_one_plus(const FourierPotential& f, int q_out);

/// log(1 + F) by its power series in the convolution algebra; requires ||F|| < 1.
FourierPotential log_one_plus_series(const FourierPotential& f, int q_out, double tol = 1e-16);

/// Single-site potential of the Discrete Gaussian after the scale-0 Gaussian integration:
/// e^{-V(psi)} = sum_{|k| <= K} e^{-beta (2 pi k - psi)^2 / 2}.
class DGEffectivePotential {
public:
    DGEffectivePotential(double beta, int K);

    double beta() const noexcept { return beta_; }
    int truncation() const noexcept { return K_; }

    double value(double psi) const;
    double derivative(double psi) const;
    double second_derivative(double psi) const;
    /// Ratio of the largest neglected theta-sum term to the retained sum.
    double truncation_error() const;

private:
    struct Moments {
        double logsum, mean, var;
    };
    Moments moments(double psi) const;
    double beta_;
    int K_;
};

/// ceil(6 / sqrt(beta)) + 2.
int dg_default_truncation(double beta);

DGEffectivePotential dg_effective_potential(double beta, int K);

/// V with e^{-V} proportional to 1 + 2 sum_q e^{-q^2/(2 beta)} cos(q psi), normalized so that the
/// smoothed density has unit mean; log-series when the density's fluctuation norm is below 1/2,
/// dense grid otherwise.
FourierPotential dg_fourier(double beta, int q_max = 64);

struct SiteMeasure {
    std::vector<std::int64_t> k; ///< states 2 pi k
    std::vector<double> weights;
};

/// mu_psi(2 pi k) proportional to e^{-beta (2 pi k - psi)^2 / 2}, normalized.
SiteMeasure dg_site_measure(const DGEffectivePotential& pot, double psi);

using PotentialRep = std::variant<FourierPotential, RadialPotential>;

} // namespace hrg

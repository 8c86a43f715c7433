#pragma once

#include "hrg/bl_certificate.hpp"
#include "hrg/hier_lattice.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace hrg {

/// Dense symmetric matrix used only on validation paths.
struct DenseOperator {
    Eigen::MatrixXd matrix;

    std::size_t size() const noexcept { return std::size_t(matrix.rows()); }
    double asymmetry() const { return (matrix - matrix.transpose()).cwiseAbs().maxCoeff(); }
    /// Ascending eigenvalues.
    std::vector<double> spectrum() const;
};

/// Scalar (one component) operators assembled entry by entry from Euclidean block membership.
struct DenseHierOperators {
    DenseOperator neg_laplacian;
    std::vector<DenseOperator> block_averages; ///< Q_0..Q_N
    DenseOperator coupling;                    ///< -Delta_H + m2, or -beta Delta_H + eps Q_N
    DenseOperator covariance;                  ///< inverse of coupling
};

/// Euclidean coordinates of a hierarchical site index, each in [0, L^N).
std::vector<int> site_coordinates(const HierLattice& lat, std::size_t site);

DenseHierOperators dense_hier_operators(const CovarianceDecomposition& decomp);

/// Dense Sum_k w_k Q_k built from the Euclidean construction.
DenseOperator dense_block_sum(const HierLattice& lat, const std::vector<double>& weights);

struct GeneratorGap {
    double gap = 0.0;    ///< Richardson-extrapolated smallest nonzero eigenvalue
    double coarse = 0.0; ///< value at spacing h
    double fine = 0.0;   ///< value at spacing h/2
    double spacing = 0.0;
    double lo = 0.0, hi = 0.0;
};

/// Spectral gap of L F = -a F'' + a H' F' for the density e^{-H} on R (a = diffusion).
/// Finite-difference Dirichlet form in symmetrized form, two resolutions, Richardson extrapolation.
GeneratorGap generator_gap_1d(const std::function<double(double)>& energy, double diffusion = 1.0,
                              int points = 1500);

/// Same for two degrees of freedom, L F = -a Laplacian F + a grad H . grad F, on a box found as for
/// gibbs_exact_moments; points cells per axis at the coarse resolution.
GeneratorGap generator_gap_2d(const std::function<double(const Eigen::VectorXd&)>& energy, double diffusion = 1.0,
                              int points = 80);

struct DGSingleSiteGap {
    double gap = 0.0;           ///< largest gamma with var <= (1/gamma) E[(F(n+1)-F(n))^2 + (F(n-1)-F(n))^2]
    double path_constant = 0.0; ///< path-method upper bound on 1/gap
    double variance = 0.0;      ///< var(n) in units of 2 pi
    int states = 0;
};

/// Exact single-site gap of mu_psi on 2 pi Z (integer units), truncated at |n - psi/2pi| <= K.
DGSingleSiteGap dg_exact_gap(double beta, double psi, int K);

/// sup over psi of the exact single-site inverse gap and of var(sigma) (sigma in 2 pi Z), on a grid of
/// psi in [0, pi].
DGSiteConstants dg_site_constants(double beta, int psi_points = 65);

/// Model on R^k, k <= 2, with density proportional to exp(-energy).
struct GibbsModel {
    int dim = 1;
    std::function<double(const Eigen::VectorXd&)> energy;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian; ///< optional; enables bl_form
    Eigen::VectorXd center;                                          ///< hint; defaults to 0
    double scale = 1.0;                                              ///< hint for the initial box
};

struct GibbsMoments {
    double log_normalizer = 0.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    Eigen::MatrixXd bl_form; ///< E[(Hess H)^{-1}]; empty without a hessian
    int points_per_axis = 0;
};

/// Tensor-product trapezoid quadrature on an automatically sized box, refined until converged.
GibbsMoments gibbs_exact_moments(const GibbsModel& model, double tol = 1e-11);

/// Helffer-Sjostrand covariance cov(F, G) = E[F' u], (L + H'') u = G', on one site, by finite differences.
double hs_covariance_1d(const std::function<double(double)>& energy,
                        const std::function<double(double)>& energy_second,
                        const std::function<double(double)>& dF, const std::function<double(double)>& dG,
                        int points = 4000);

} // namespace hrg

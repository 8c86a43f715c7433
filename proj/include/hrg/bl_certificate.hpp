#pragma once

#include "hrg/hier_lattice.hpp"
#include "hrg/rg_engine.hpp"

#include <vector>

namespace hrg {

/// Band values are indexed 0..N: index b-1 for the fluctuation band range(P_b), index N for constants.
struct BLCertificate {
    int first_scale = 0;                 ///< scales first_scale..N enter the bound
    std::vector<double> lambdas;         ///< lambda_k for k = first_scale..N
    std::vector<double> epsilons;        ///< epsilon_k for k = first_scale..N
    std::vector<double> deltas;          ///< delta_k for k = first_scale..N
    std::vector<double> band_eigenvalues; ///< eigenvalues of sum_k delta_k lambda_k Q_k per band
    double gap_lower_bound = 0.0;
    bool valid = false;
};

/// D = lambda_j/(1-eps_j) on bands where Q_j is the identity, plus D_+/(1-eps_j)^2 on every band.
/// Q_j is the identity on range(P_b) iff b > j, and always on constants.
std::vector<double> recurrence_step(const std::vector<double>& d_plus, double lambda, double eps, int scale);

/// delta_k = 1/(1-eps_k) prod_{l<k} (1-eps_l)^{-2}, with l running from first_scale.
BLCertificate build_certificate(const CovarianceDecomposition& decomp, const std::vector<double>& epsilons,
                                int first_scale = 0);

/// Certificate from the per-scale epsilons recorded along a flow.
BLCertificate certificate_from_flow(const std::vector<RGFlowState>& flow, const CovarianceDecomposition& decomp);

struct GapBounds {
    double lower = 0.0;
    double upper = 0.0;
    bool valid = false;
    double variance_per_site = 0.0; ///< var(sum phi) / |Lambda| from the final potential
    double final_curvature = 0.0;
    BLCertificate certificate;
};

/// var(sum phi) / |Lambda| = 1/kappa - W''(0) / (|Lambda| kappa^2), with kappa the zero-mode coupling
/// and W the final whole-lattice potential.
double exact_variance_per_site(const std::vector<RGFlowState>& flow, const CovarianceDecomposition& decomp);

/// lower: certificate bound; upper: |Lambda| / var(sum phi), the Rayleigh quotient of the linear test function.
GapBounds sg_gap_bounds(const std::vector<RGFlowState>& flow, const CovarianceDecomposition& decomp);

struct DGSiteConstants {
    double inverse_gap_sup = 0.0; ///< sup over psi of 1/gamma for mu_psi (integer-unit Dirichlet form)
    double spin_variance_sup = 0.0; ///< sup over psi of var(sigma), sigma in 2 pi Z
};

/// Discrete Gaussian bounds in the normalization of the discrete Dirichlet form with rate 1/(2 (2 pi)^2).
/// flow: the reduced (continuous) model flow starting at scale 1 with the effective potential.
/// lower = 1 / (2 (2 pi)^2 C (1 + beta^2 V / gamma_r)); upper = |Lambda| / var(sum sigma).
GapBounds dg_gap_bounds(const std::vector<RGFlowState>& reduced_flow, const CovarianceDecomposition& decomp,
                        const DGSiteConstants& site);

} // namespace hrg

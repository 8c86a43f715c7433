#pragma once

#include "hrg/hier_lattice.hpp"
#include "hrg/potentials.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace hrg {

struct QuadratureOptions {
    int start_order = 64;
    int max_order = 1024;
    double tol = 1e-10; ///< successive orders must agree to tol * max(1, |W|) at every output point
};

struct ScalarStep {
    std::vector<double> values;
    int order = 0; ///< converged Gauss-Hermite order
};

/// W_+(x) = -reblock * log E[exp(-W(x + zeta))], zeta ~ N(0, s2), at every point x.
/// Mode-centred adaptive Gauss-Hermite with order doubling; reblock = 1 for the final step.
ScalarStep rg_step_scalar(const std::function<double(double)>& W, const std::vector<double>& points, double s2,
                          double reblock, const QuadratureOptions& opts = {});

struct RadialStep {
    RadialPotential potential;
    int order = 0;
};

/// One step for an O(n)-invariant block potential. n = 1 reduces to rg_step_scalar on W(|.|); n >= 2
/// integrates the longitudinal Gaussian and the chi_{n-1} transverse radius (Gauss-Hermite x
/// generalized Gauss-Laguerre). The output lives on a grid of the same size with outer radius r_max_out.
RadialStep rg_step_radial(const RadialPotential& pot, double s2, double reblock, double r_max_out,
                          const QuadratureOptions& opts = {});

struct FourierStep {
    FourierPotential potential;
    bool guard_violated = false; ///< input ||V - V(0)|| > 0.2
    double norm_in = 0.0;
    double norm_out = 0.0;
};

/// One step for an even periodic potential: heat kernel e^{-variance q^2 / 2} applied to the
/// coefficients of e^{-V} on a 4 q_max point circle grid, then V_+ = -reblock log(smoothed).
FourierStep rg_step_fourier(const FourierPotential& pot, double variance, double reblock);

/// Coefficients of the smoothed density E[e^{-V(. + zeta)}] (all q up to 2 q_max) and of e^{-V}.
struct SmoothedDensity {
    std::vector<double> before;
    std::vector<double> after;
    double shift = 0.0; ///< e^{-V} was computed as e^{-(V - shift)}
};
SmoothedDensity fourier_smooth_density(const FourierPotential& pot, double variance);

struct CouplingFit {
    double g = 0.0;
    double nu = 0.0;
    double u = 0.0;
    double residual = 0.0; ///< rms residual / rms of the centred data
};

/// Least squares W(r)/|B| ~ g r^4 / 4 + nu r^2 / 2 + u on the knots with r <= window.
CouplingFit fit_couplings(const RadialPotential& pot, double window);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct FlowDiagnostics {
    double lambda = 0.0;       ///< covariance coefficient integrated at this scale
    double variance = 0.0;     ///< per-site fluctuation variance lambda_j L^{-dj}
    double block_volume = 1.0; ///< |B_j|
    double norm = kNaN;        ///< ||V_j - V_j(0)|| (periodic backend)
    double g = kNaN, nu = kNaN, fit_residual = kNaN, window = kNaN;
    double s_neg = 0.0;        ///< max(0, -min Hess(W_j)/|B_j|)
    double s_neg_radius = 0.0;
    double epsilon = 0.0;
    bool valid = true;
    bool guard_violated = false;
    double large_field_radius = kNaN;  ///< h_j
    double large_field_hessian = kNaN; ///< L^{2j} min Hess(W_j)/|B_j| over |phi| >= h_j
    int quadrature_order = 0;
};

struct RGFlowState {
    int scale = 0;
    bool final_step = false; ///< the whole-lattice potential after the last integration
    PotentialRep potential;
    FlowDiagnostics diag;
    std::string error; ///< set on the last state when a step failed under stop_on_failure
};

struct EpsilonResult {
    double epsilon = 0.0;
    bool valid = true;
};

/// epsilon_j = lambda_j s_neg,j with s_neg from the curvature of W_j / |B_j|; valid iff epsilon_j < 1.
EpsilonResult compute_epsilon(const RGFlowState& state);

struct FlowOptions {
    int first_scale = 0;          ///< 1 for the Discrete Gaussian reduction
    bool final_step = true;       ///< append the no-reblocking integration of lambda_N
    int last_scale = -1;          ///< stop before integrating this scale (default: none)
    bool rescale_grid = true;     ///< radial outer radius times L^{-(d-2)/2} per step
    QuadratureOptions quadrature{};
    double g_reference = kNaN;    ///< coupling used for h_j when the fitted g_j is not positive
    bool stop_on_failure = false; ///< end the flow at a failing step instead of throwing
};

/// Iterates W_{j+1} = step(W_j) for j = first_scale..N-1 recording diagnostics, then the final step.
std::vector<RGFlowState> run_flow(const PotentialRep& initial, const CovarianceDecomposition& decomp,
                                  const FlowOptions& opts = {});

/// Second derivative at 0 of the final whole-lattice potential.
double final_curvature(const RGFlowState& final_state);

/// Per-step norm ratios ||V_{j+1} - V_{j+1}(0)|| / ||V_j - V_j(0)|| over the reblocking steps, and the
/// geometric rate fitted to log norms.
struct ContractionSummary {
    std::vector<double> ratios;
    double fitted_kappa = kNaN;
};
ContractionSummary contraction_summary(const std::vector<RGFlowState>& flow);

} // namespace hrg

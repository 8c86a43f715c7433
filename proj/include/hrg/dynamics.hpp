#pragma once

#include "hrg/hier_lattice.hpp"
#include "hrg/potentials.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace hrg {

struct NoSitePotential {};
/// g |phi|^4 / 4 + nu |phi|^2 / 2 per site.
struct Phi4SitePotential {
    double g = 0.0;
    double nu = 0.0;
};
/// Even periodic potential acting on the first component (n = 1 models).
struct PeriodicSitePotential {
    FourierPotential V;
};
using SitePotential = std::variant<NoSitePotential, Phi4SitePotential, PeriodicSitePotential>;

/// H(phi) = (phi, M phi)/2 + sum_x V(phi_x).
struct LangevinModel {
    HierLattice lattice;
    GaussianCoupling coupling;
    SitePotential site;
};

struct LangevinParams {
    double h = 0.0;          ///< step size; 0 selects 0.01 / (curvature estimate)
    long steps = 100000;     ///< recorded steps after burn-in
    long burn_in = -1;       ///< -1 selects 10 relaxation times of the slowest Gaussian mode
    int thin = 1;
    bool record_modes = true; ///< record P_j phi at site 0 for j = 1..N
    struct SiteSum {
        std::string name;
        std::function<double(double)> f;
    };
    std::vector<SiteSum> site_sums; ///< recorded as sum_x f(phi_x^1)
};

/// Observables sampled every dt time units.
struct Trajectory {
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> names;
    std::vector<std::vector<double>> series;
    std::map<std::string, double> info;

    std::size_t length() const { return series.empty() ? 0 : series.front().size(); }
    const std::vector<double>& observable(const std::string& name) const;
};

double curvature_estimate(const LangevinModel& model);
double default_step(const LangevinModel& model);

/// Euler-Maruyama for d phi = -grad H dt + sqrt(2) dB. Records "F" = sum_x phi_x^1 and "P<j>".
Trajectory langevin_run(const LangevinModel& model, const LangevinParams& params, std::uint64_t seed);

enum class DGRates {
    metropolis, ///< rate r min(1, mu'/mu)
    matched     ///< rate r (1 + mu'/mu): reversible, Dirichlet form equal to the +-2pi form
};

/// Discrete Gaussian: sigma in (2 pi Z)^Lambda, H = (sigma, M sigma)/2 with M = -beta Delta_H + eps Q_N.
struct DGModel {
    HierLattice lattice;
    double beta = 1.0;
    double eps = 0.0;
    DGRates rates = DGRates::metropolis;
};

struct DGParams {
    double t_max = 1e4;   ///< recorded time after burn-in
    double burn_in = 0.0;
    double record_dt = 1.0;
};

/// Continuous-time single-site +-2pi dynamics with clocks of rate 1/(2 (2 pi)^2). Records "F" = sum sigma.
Trajectory dg_glauber_run(const DGModel& model, const DGParams& params, std::uint64_t seed);

/// Same dynamics for the single-site measure mu_psi. Records "sigma"; info holds, for the state 0,
/// proposals_0 / accepted_0 and the transition counts up_0 (0 -> 2pi) and down_1 (2pi -> 0).
Trajectory dg_single_site_run(double beta, double psi, DGRates rates, const DGParams& params, std::uint64_t seed);

struct GapEstimate {
    double gamma = 0.0;
    double se = 0.0;
    std::string method = "exp-autocorrelation";
    std::string observable;
    bool inconclusive = false;
    double variance_ratio = 0.0; ///< var(F) gamma / E|grad F|^2 when supplied
    int fit_points = 0;
};

/// Fit of log ACF against lag over the first contiguous range with ACF in [0.05, 0.5]; batch means
/// over 16 batches for the standard error.
GapEstimate estimate_gap(const Trajectory& traj, const std::string& observable, double dirichlet = 0.0);

struct VarianceEstimate {
    double variance = 0.0;
    double se = 0.0;
    double mean = 0.0;
};

VarianceEstimate estimate_variance(const Trajectory& traj, const std::string& observable);
/// Covariance of two observables; se from 16 batch means, mean is that of the first.
VarianceEstimate estimate_covariance(const Trajectory& traj, const std::string& a, const std::string& b);

/// Normalized autocorrelation at lags 0..max_lag.
std::vector<double> autocorrelation(const std::vector<double>& x, std::size_t max_lag);

} // namespace hrg

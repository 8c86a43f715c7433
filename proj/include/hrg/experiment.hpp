#pragma once

#include "hrg/bl_certificate.hpp"
#include "hrg/dynamics.hpp"
#include "hrg/serialize.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hrg {

/// Model parameters. For phi4, H = (phi, -Delta_H phi)/2 + sum_x (g|phi_x|^4/4 + nu|phi_x|^2/2); the flow
/// runs with covariance (-Delta_H + m2)^{-1} and bare quadratic coefficient nu - m2. Either nu or t
/// (nu = nu_c + t, nu_c tuned) is given; m2 defaults to the matched mass.
struct ModelParams {
    double g = 0.05;
    double nu = kNaN;
    double t = kNaN;
    double m2 = kNaN;
    double beta = 0.2;
    std::vector<double> coeffs{0.0, 0.005}; ///< sine-gordon V, Fourier coefficients q = 0..q_max
    std::string covariance = "massive";     ///< free field: "massive" (m2) or "sine-gordon" (beta)
};

struct FlowConfig {
    int grid = 512;
    double quad_tol = 1e-10;
    int max_order = 1024;
};

struct DynamicsConfig {
    bool enabled = false;
    double h = 0.0;        ///< Langevin step; 0 selects h_scale / curvature
    double h_scale = 0.01;
    long steps = 200000;
    long burn_in = -1;
    int thin = 10;
    double t_max = 1e5;    ///< discrete Gaussian recorded time
    double dg_burn_in = 0.0;
    double record_dt = 1.0;
    std::string rates = "metropolis";
};

struct TuneConfig {
    double tol = 1e-8;      ///< relative tolerance on nu_c
    double mass_tol = 1e-6; ///< relative tolerance on the matched m2
};

struct ExperimentConfig {
    std::string model = "phi4"; ///< phi4 | sine-gordon | discrete-gaussian | free
    int L = 2, N = 4, d = 4, n = 1;
    ModelParams params;
    FlowConfig flow;
    DynamicsConfig dynamics;
    TuneConfig tune;
    std::vector<std::pair<std::string, std::vector<Json>>> sweep; ///< dotted key -> grid, cartesian product
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out = "out";

    HierLattice lattice() const { return HierLattice(L, N, d, n); }
};

Json default_config_json();
/// Reads a JSON document; syntax errors become ConfigError.
Json load_config_file(const std::string& path);
/// "a.b.c=value"; value parsed as JSON when possible, else taken as a string.
void apply_override(Json& doc, const std::string& assignment);
/// Merges doc over the defaults and validates; unknown keys and out-of-range values raise ConfigError.
ExperimentConfig parse_config(const Json& doc);
Json config_to_json(const ExperimentConfig& cfg);
/// FNV-1a 64 of the canonical JSON of everything that determines results (seed, sweep, out and
/// workers excluded), as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);
std::uint64_t fnv1a64(const std::string& s);
/// One config per sweep point (the config itself when there are no axes), sweep cleared.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg);

struct TuneResult {
    double g = 0.0;
    double nu_c = kNaN;
    double nu_lo = kNaN, nu_hi = kNaN; ///< final bracket: low- and high-temperature sides
    double t = kNaN;
    double m2 = kNaN;                  ///< matched mass at nu_c + t
    double nu_residual = kNaN;         ///< fitted nu_N of the matched massive flow
    bool mass_bracketed = false;
    int iterations = 0;
    int flows = 0;
};

/// Phase of a massless phi4 flow: +1 when the fitted nu at the last completed scale is positive
/// (high temperature), -1 otherwise. Flows failing numerically are classified by the last completed scale.
int phi4_phase(double g, double nu, double m2, const HierLattice& lat, const FlowConfig& fc = {});

/// Bisection on the phase in nu; m2 = 0 is realized as 1e-4 L^{-2N}. With t > 0, also the matched
/// m2 for nu = nu_c + t: the mass whose massive flow (bare coefficient nu - m2) has fitted nu_N = 0.
TuneResult tune_critical_nu(double g, const HierLattice& lat, double t = kNaN, const TuneConfig& tc = {},
                            const FlowConfig& fc = {});
/// Matched m2 for a given nu, by bisection in log m2 on the sign of the fitted nu_N.
TuneResult matched_mass(double g, double nu, const HierLattice& lat, const TuneConfig& tc = {},
                        const FlowConfig& fc = {});

enum class Stage { flow, certify, simulate };

struct PointResult {
    std::size_t index = 0;
    ExperimentConfig config;
    std::string hash;
    std::uint64_t seed = 0;
    std::string status = "ok"; ///< ok, or the error category
    std::string error;
    int exit_code = 0;
    double nu = kNaN, nu_c = kNaN, t = kNaN, m2 = kNaN, eps = kNaN;
    std::vector<RGFlowState> flow;
    std::optional<GapBounds> bounds;
    double lambda_min = kNaN; ///< free field: smallest eigenvalue of the coupling
    std::optional<GapEstimate> gap;
    std::optional<VarianceEstimate> variance; ///< var(F)/|Lambda|
    double max_epsilon = kNaN;
    double seconds = 0.0;
};

/// Seed of a sweep point: a counter-stream key of the base seed and the point's config hash.
std::uint64_t point_seed(std::uint64_t base, const std::string& hash);

/// Runs one configuration; errors are caught and recorded in the result.
PointResult run_point(const ExperimentConfig& cfg, Stage stage, std::size_t index = 0);
/// All sweep points, concurrently on cfg.workers threads; results in point order.
std::vector<PointResult> run_experiment(const ExperimentConfig& cfg, Stage stage);

/// results.csv, flow.jsonl, certificate.json, config.json and plotdata/*.tsv under dir.
void write_outputs(const std::string& dir, const ExperimentConfig& cfg, const std::vector<PointResult>& points);

std::vector<std::string> results_header();
std::vector<std::string> results_row(const PointResult& p);

/// 0 success, 2 config error, 3 numerical failure, 4 capacity error.
int exit_code_of(const std::exception& e);

} // namespace hrg

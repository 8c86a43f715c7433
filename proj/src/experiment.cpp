#include "hrg/experiment.hpp"

#include "hrg/errors.hpp"
#include "hrg/oracle.hpp"
#include "hrg/random.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace hrg {

namespace fs = std::filesystem;

Json default_config_json() { return config_to_json(ExperimentConfig{}); }

Json load_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
}

namespace {

std::vector<std::string> split_path(const std::string& key)
{
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string p; std::getline(ss, p, '.');) {
        if (p.empty()) throw ConfigError("malformed key '" + key + "'");
        parts.push_back(p);
    }
    if (parts.empty()) throw ConfigError("empty key");
    return parts;
}

void set_path(Json& doc, const std::string& key, const Json& value)
{
    Json* node = &doc;
    for (const auto& p : split_path(key)) {
        if (!node->is_object()) *node = Json::object();
        node = &(*node)[p];
    }
    *node = value;
}

void overlay(Json& base, const Json& patch, const std::string& where)
{
    if (!patch.is_object()) throw ConfigError("expected an object at '" + (where.empty() ? "<root>" : where) + "'");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string key = where.empty() ? it.key() : where + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        Json& slot = base[it.key()];
        if (slot.is_object() && it.key() != "sweep" && where != "sweep")
            overlay(slot, it.value(), key);
        else
            slot = it.value();
    }
}

template <class T>
T field(const Json& j, const char* key, const std::string& where)
{
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError("bad value for '" + where + "." + key + "'");
    }
}

double number_or_nan(const Json& j, const char* key, const std::string& where)
{
    const auto& v = j.at(key);
    if (v.is_null()) return kNaN;
    if (!v.is_number()) throw ConfigError("bad value for '" + where + "." + key + "'");
    return v.get<double>();
}

void require(bool ok, const std::string& msg)
{
    if (!ok) throw ConfigError(msg);
}

} // namespace

void apply_override(Json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::exception&) {
        value = text;
    }
    set_path(doc, key, value);
}

ExperimentConfig parse_config(const Json& doc)
{
    Json m = default_config_json();
    overlay(m, doc, "");
    ExperimentConfig c;
    c.model = field<std::string>(m, "model", "");
    const auto& lat = m.at("lattice");
    c.L = field<int>(lat, "L", "lattice");
    c.N = field<int>(lat, "N", "lattice");
    c.d = field<int>(lat, "d", "lattice");
    c.n = field<int>(lat, "n", "lattice");
    const auto& p = m.at("params");
    c.params.g = field<double>(p, "g", "params");
    c.params.nu = number_or_nan(p, "nu", "params");
    c.params.t = number_or_nan(p, "t", "params");
    c.params.m2 = number_or_nan(p, "m2", "params");
    c.params.beta = field<double>(p, "beta", "params");
    c.params.coeffs = field<std::vector<double>>(p, "coeffs", "params");
    c.params.covariance = field<std::string>(p, "covariance", "params");
    const auto& f = m.at("flow");
    c.flow.grid = field<int>(f, "grid", "flow");
    c.flow.quad_tol = field<double>(f, "quad_tol", "flow");
    c.flow.max_order = field<int>(f, "max_order", "flow");
    const auto& dy = m.at("dynamics");
    c.dynamics.enabled = field<bool>(dy, "enabled", "dynamics");
    c.dynamics.h = field<double>(dy, "h", "dynamics");
    c.dynamics.h_scale = field<double>(dy, "h_scale", "dynamics");
    c.dynamics.steps = field<long>(dy, "steps", "dynamics");
    c.dynamics.burn_in = field<long>(dy, "burn_in", "dynamics");
    c.dynamics.thin = field<int>(dy, "thin", "dynamics");
    c.dynamics.t_max = field<double>(dy, "t_max", "dynamics");
    c.dynamics.dg_burn_in = field<double>(dy, "dg_burn_in", "dynamics");
    c.dynamics.record_dt = field<double>(dy, "record_dt", "dynamics");
    c.dynamics.rates = field<std::string>(dy, "rates", "dynamics");
    const auto& tu = m.at("tune");
    c.tune.tol = field<double>(tu, "tol", "tune");
    c.tune.mass_tol = field<double>(tu, "mass_tol", "tune");
    const auto& sw = m.at("sweep");
    require(sw.is_object(), "'sweep' must be an object of key -> array");
    for (auto it = sw.begin(); it != sw.end(); ++it) {
        require(it.value().is_array() && !it.value().empty(), "sweep axis '" + it.key() + "' must be a nonempty array");
        c.sweep.emplace_back(it.key(), std::vector<Json>(it.value().begin(), it.value().end()));
    }
    c.seed = field<std::uint64_t>(m, "seed", "");
    c.workers = field<int>(m, "workers", "");
    c.out = field<std::string>(m, "out", "");

    static const std::set<std::string> models{"phi4", "sine-gordon", "discrete-gaussian", "free"};
    require(models.count(c.model), "unknown model '" + c.model + "'");
    require(c.L >= 2 && c.N >= 1 && c.d >= 1 && c.n >= 1, "lattice needs L >= 2, N >= 1, d >= 1, n >= 1");
    require(c.N * c.d * std::log2(double(c.L)) <= 62, "lattice too large to index");
    require(c.workers >= 1, "workers must be >= 1");
    require(c.flow.grid >= 16 && c.flow.quad_tol > 0 && c.flow.max_order >= 128, "flow settings out of range");
    require(c.tune.tol > 0 && c.tune.mass_tol > 0, "tune tolerances must be positive");
    require(c.dynamics.steps > 0 && c.dynamics.thin >= 1 && c.dynamics.h >= 0 && c.dynamics.h_scale > 0 &&
                c.dynamics.t_max > 0 && c.dynamics.record_dt > 0 && c.dynamics.dg_burn_in >= 0,
            "dynamics settings out of range");
    require(c.dynamics.rates == "metropolis" || c.dynamics.rates == "matched",
            "dynamics.rates must be 'metropolis' or 'matched'");
    if (c.model == "phi4") {
        require(c.params.g > 0, "phi4 needs g > 0");
        require(!std::isnan(c.params.nu) || !std::isnan(c.params.t), "phi4 needs params.nu or params.t");
        require(std::isnan(c.params.t) || c.params.t > 0, "params.t must be positive");
        require(std::isnan(c.params.m2) || c.params.m2 > 0, "params.m2 must be positive");
    } else if (c.model == "free") {
        require(c.params.covariance == "massive" || c.params.covariance == "sine-gordon",
                "params.covariance must be 'massive' or 'sine-gordon'");
        if (c.params.covariance == "massive")
            require(c.params.m2 > 0, "free massive field needs params.m2 > 0");
        else
            require(c.params.beta > 0, "params.beta must be positive");
    } else {
        require(c.params.beta > 0, "params.beta must be positive");
        require(c.n == 1, c.model + " is a scalar model (n = 1)");
        require(!c.params.coeffs.empty(), "params.coeffs must be nonempty");
    }
    return c;
}

Json config_to_json(const ExperimentConfig& c)
{
    Json sweep = Json::object();
    for (const auto& [k, v] : c.sweep) sweep[k] = v;
    return {{"model", c.model},
            {"lattice", {{"L", c.L}, {"N", c.N}, {"d", c.d}, {"n", c.n}}},
            {"params",
             {{"g", c.params.g},
              {"nu", number_or_null(c.params.nu)},
              {"t", number_or_null(c.params.t)},
              {"m2", number_or_null(c.params.m2)},
              {"beta", c.params.beta},
              {"coeffs", c.params.coeffs},
              {"covariance", c.params.covariance}}},
            {"flow", {{"grid", c.flow.grid}, {"quad_tol", c.flow.quad_tol}, {"max_order", c.flow.max_order}}},
            {"dynamics",
             {{"enabled", c.dynamics.enabled},
              {"h", c.dynamics.h},
              {"h_scale", c.dynamics.h_scale},
              {"steps", c.dynamics.steps},
              {"burn_in", c.dynamics.burn_in},
              {"thin", c.dynamics.thin},
              {"t_max", c.dynamics.t_max},
              {"dg_burn_in", c.dynamics.dg_burn_in},
              {"record_dt", c.dynamics.record_dt},
              {"rates", c.dynamics.rates}}},
            {"tune", {{"tol", c.tune.tol}, {"mass_tol", c.tune.mass_tol}}},
            {"sweep", sweep},
            {"seed", c.seed},
            {"workers", c.workers},
            {"out", c.out}};
}

std::uint64_t fnv1a64(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const ExperimentConfig& cfg)
{
    Json j = config_to_json(cfg);
    for (const char* k : {"seed", "sweep", "out", "workers"}) j.erase(k);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg)
{
    Json base = config_to_json(cfg);
    base["sweep"] = Json::object();
    std::vector<ExperimentConfig> out;
    std::vector<std::size_t> idx(cfg.sweep.size(), 0);
    while (true) {
        Json doc = base;
        for (std::size_t a = 0; a < idx.size(); ++a) {
            Json patch = Json::object();
            set_path(patch, cfg.sweep[a].first, cfg.sweep[a].second[idx[a]]);
            overlay(doc, patch, "");
        }
        out.push_back(parse_config(doc));
        std::size_t a = idx.size();
        while (a > 0) {
            --a;
            if (++idx[a] < cfg.sweep[a].second.size()) break;
            idx[a] = 0;
            if (a == 0) return out;
        }
        if (idx.empty()) return out;
    }
}

// ---------------------------------------------------------------------------------------------
// critical point tuning

namespace {

FlowOptions phi4_flow_options(double g, const FlowConfig& fc, bool final_step)
{
    FlowOptions o;
    o.final_step = final_step;
    o.g_reference = g;
    o.quadrature.tol = fc.quad_tol;
    o.quadrature.max_order = fc.max_order;
    return o;
}

double massless_m2(const HierLattice& lat) { return 1e-4 * std::pow(double(lat.L()), -2.0 * lat.N()); }

std::vector<RGFlowState> phi4_probe_flow(double g, double nu, double m2, const HierLattice& lat, const FlowConfig& fc)
{
    const auto dec = build_covariance_decomposition(lat, MassiveMode{m2});
    auto o = phi4_flow_options(g, fc, false);
    o.stop_on_failure = true;
    return run_flow(phi4_initial(g, nu - m2, lat.n(), 1.0, phi4_default_rmax(g), fc.grid), dec, o);
}

double last_fitted_nu(const std::vector<RGFlowState>& flow)
{
    for (auto it = flow.rbegin(); it != flow.rend(); ++it)
        if (std::isfinite(it->diag.nu)) return it->diag.nu;
    return kNaN;
}

} // namespace

int phi4_phase(double g, double nu, double m2, const HierLattice& lat, const FlowConfig& fc)
{
    const double nu_N = last_fitted_nu(phi4_probe_flow(g, nu, m2, lat, fc));
    return nu_N > 0.0 ? 1 : -1;
}

TuneResult tune_critical_nu(double g, const HierLattice& lat, double t, const TuneConfig& tc, const FlowConfig& fc)
{
    if (!(g > 0.0)) throw ParameterError("tune_critical_nu: g must be positive");
    TuneResult r;
    r.g = g;
    const double m0 = massless_m2(lat);
    auto phase = [&](double nu) {
        ++r.flows;
        return phi4_phase(g, nu, m0, lat, fc);
    };
    double hi = 0.0;
    for (int k = 0; phase(hi) < 0; ++k) {
        if (k == 20) throw NumericalError("tune_critical_nu: no high-temperature bracket found");
        hi = hi == 0.0 ? g : 2.0 * hi;
    }
    // leading order -(n+2) g G with G the diagonal Green function
    const auto dec = build_covariance_decomposition(lat, MassiveMode{m0});
    double lo = std::min(hi, 0.0) - (lat.n() + 2) * g * dec.green_diagonal();
    for (int k = 0; phase(lo) > 0; ++k) {
        if (k == 40) throw NumericalError("tune_critical_nu: no low-temperature bracket found");
        lo = hi - 2.0 * (hi - lo);
    }
    const double floor = 1e-3 * g * tc.tol;
    while (hi - lo > std::max(tc.tol * std::abs(0.5 * (lo + hi)), floor)) {
        if (++r.iterations > 200) throw NumericalError("tune_critical_nu: bisection did not terminate");
        const double mid = 0.5 * (lo + hi);
        (phase(mid) > 0 ? hi : lo) = mid;
    }
    r.nu_lo = lo;
    r.nu_hi = hi;
    r.nu_c = 0.5 * (lo + hi);
    if (t > 0.0) {
        const auto mm = matched_mass(g, r.nu_c + t, lat, tc, fc);
        r.t = t;
        r.m2 = mm.m2;
        r.nu_residual = mm.nu_residual;
        r.mass_bracketed = mm.mass_bracketed;
        r.flows += mm.flows;
    }
    return r;
}

TuneResult matched_mass(double g, double nu, const HierLattice& lat, const TuneConfig& tc, const FlowConfig& fc)
{
    TuneResult r;
    r.g = g;
    auto phase = [&](double m2) {
        ++r.flows;
        return phi4_phase(g, nu, m2, lat, fc);
    };
    double lo = massless_m2(lat), hi = std::pow(double(lat.L()), -2.0 * lat.N());
    if (phase(lo) < 0) {
        r.m2 = lo;
    } else {
        while (phase(hi) > 0) {
            lo = hi;
            hi *= 4.0;
            if (hi > 1e6) throw NumericalError("matched_mass: no mass makes the flow critical");
        }
        while (hi / lo - 1.0 > tc.mass_tol) {
            if (++r.iterations > 200) throw NumericalError("matched_mass: bisection did not terminate");
            const double mid = std::sqrt(lo * hi);
            (phase(mid) > 0 ? lo : hi) = mid;
        }
        r.m2 = std::sqrt(lo * hi);
        r.mass_bracketed = true;
    }
    r.nu_residual = last_fitted_nu(phi4_probe_flow(g, nu, r.m2, lat, fc));
    ++r.flows;
    return r;
}

// ---------------------------------------------------------------------------------------------
// experiment points

std::uint64_t point_seed(std::uint64_t base, const std::string& hash) { return stream_key(base, fnv1a64(hash)); }

int exit_code_of(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
        dynamic_cast<const RangeError*>(&e) || dynamic_cast<const Json::exception*>(&e))
        return 2;
    if (dynamic_cast<const CapacityError*>(&e)) return 4;
    return 3;
}

namespace {

const char* status_of(int code)
{
    switch (code) {
    case 2: return "config-error";
    case 4: return "capacity-error";
    default: return "numerical-error";
    }
}

constexpr std::size_t kDynamicsCapacity = std::size_t(1) << 16;

double step_size(const DynamicsConfig& dc, const LangevinModel& m)
{
    return dc.h > 0.0 ? dc.h : dc.h_scale / curvature_estimate(m);
}

void simulate_langevin(PointResult& r, const LangevinModel& m)
{
    const auto& dc = r.config.dynamics;
    LangevinParams p;
    p.h = step_size(dc, m);
    p.steps = dc.steps;
    p.burn_in = dc.burn_in;
    p.thin = dc.thin;
    p.record_modes = false;
    const auto tr = langevin_run(m, p, r.seed);
    const double vol = double(m.lattice.num_sites());
    r.gap = estimate_gap(tr, "F", vol);
    auto v = estimate_variance(tr, "F");
    v.variance /= vol;
    v.se /= vol;
    v.mean /= vol;
    r.variance = v;
}

void run_phi4(PointResult& r, Stage stage)
{
    const auto& c = r.config;
    const auto lat = c.lattice();
    double nu = c.params.nu, m2 = c.params.m2;
    if (std::isnan(nu)) {
        const auto tr = tune_critical_nu(c.params.g, lat, std::isnan(m2) ? c.params.t : kNaN, c.tune, c.flow);
        r.nu_c = tr.nu_c;
        r.t = c.params.t;
        nu = tr.nu_c + c.params.t;
        if (std::isnan(m2)) {
            m2 = tr.m2;
            if (!tr.mass_bracketed) throw NumericalError("phi4: no matched mass above the finite-volume critical point");
        }
    } else if (std::isnan(m2)) {
        const auto mm = matched_mass(c.params.g, nu, lat, c.tune, c.flow);
        if (!mm.mass_bracketed) throw NumericalError("phi4: nu lies below the finite-volume critical point");
        m2 = mm.m2;
    }
    r.nu = nu;
    r.m2 = m2;
    r.eps = m2;
    const auto dec = build_covariance_decomposition(lat, MassiveMode{m2});
    const double bare = nu - m2;
    r.flow = run_flow(phi4_initial(c.params.g, bare, c.n, 1.0, phi4_default_rmax(c.params.g), c.flow.grid), dec,
                      phi4_flow_options(c.params.g, c.flow, true));
    if (stage == Stage::flow) return;
    r.bounds = sg_gap_bounds(r.flow, dec);
    if (stage == Stage::simulate)
        simulate_langevin(r, LangevinModel{lat, dec.precision(), Phi4SitePotential{c.params.g, bare}});
}

void run_sine_gordon(PointResult& r, Stage stage)
{
    const auto& c = r.config;
    const auto lat = c.lattice();
    const auto dec = build_covariance_decomposition(lat, SineGordonMode{c.params.beta});
    r.eps = dec.zero_mode_coupling();
    const FourierPotential V(c.params.coeffs);
    r.flow = run_flow(V, dec);
    if (stage == Stage::flow) return;
    r.bounds = sg_gap_bounds(r.flow, dec);
    if (stage == Stage::simulate) simulate_langevin(r, LangevinModel{lat, dec.precision(), PeriodicSitePotential{V}});
}

void run_discrete_gaussian(PointResult& r, Stage stage)
{
    const auto& c = r.config;
    const auto lat = c.lattice();
    const double beta = c.params.beta;
    const auto dec = build_covariance_decomposition(lat, SineGordonMode{beta});
    r.eps = dec.zero_mode_coupling();
    std::vector<double> coeffs = dg_fourier(beta).coeffs();
    for (double& x : coeffs) x *= double(lat.reblock_factor());
    FlowOptions o;
    o.first_scale = 1;
    r.flow = run_flow(FourierPotential(coeffs), dec, o);
    if (stage == Stage::flow) return;
    r.bounds = dg_gap_bounds(r.flow, dec, dg_site_constants(beta));
    if (stage != Stage::simulate) return;
    DGModel m{lat, beta, r.eps, c.dynamics.rates == "matched" ? DGRates::matched : DGRates::metropolis};
    DGParams p;
    p.t_max = c.dynamics.t_max;
    p.burn_in = c.dynamics.dg_burn_in;
    p.record_dt = c.dynamics.record_dt;
    const auto tr = dg_glauber_run(m, p, r.seed);
    const double vol = double(lat.num_sites());
    r.gap = estimate_gap(tr, "F", vol);
    auto v = estimate_variance(tr, "F");
    v.variance /= vol;
    v.se /= vol;
    v.mean /= vol;
    r.variance = v;
}

void run_free(PointResult& r, Stage stage)
{
    const auto& c = r.config;
    const auto lat = c.lattice();
    const auto dec = c.params.covariance == "massive"
                         ? build_covariance_decomposition(lat, MassiveMode{c.params.m2})
                         : build_covariance_decomposition(lat, SineGordonMode{c.params.beta});
    r.eps = dec.zero_mode_coupling();
    if (dec.is_massive()) r.m2 = c.params.m2;
    r.lambda_min = dec.precision().min_eigenvalue(lat);
    r.flow = run_flow(FourierPotential(), dec);
    if (stage == Stage::flow) return;
    r.bounds = sg_gap_bounds(r.flow, dec);
    if (stage == Stage::simulate) simulate_langevin(r, LangevinModel{lat, dec.precision(), NoSitePotential{}});
}

} // namespace

PointResult run_point(const ExperimentConfig& cfg, Stage stage, std::size_t index)
{
    PointResult r;
    r.index = index;
    r.config = cfg;
    r.hash = config_hash(cfg);
    r.seed = point_seed(cfg.seed, r.hash);
    r.t = cfg.params.t;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (stage == Stage::simulate && cfg.lattice().num_sites() * std::size_t(cfg.n) > kDynamicsCapacity)
            throw CapacityError("dynamics limited to 65536 degrees of freedom");
        if (cfg.model == "phi4")
            run_phi4(r, stage);
        else if (cfg.model == "sine-gordon")
            run_sine_gordon(r, stage);
        else if (cfg.model == "discrete-gaussian")
            run_discrete_gaussian(r, stage);
        else
            run_free(r, stage);
        double emax = 0.0;
        for (const auto& st : r.flow)
            if (!st.final_step) emax = std::max(emax, st.diag.epsilon);
        r.max_epsilon = emax;
    } catch (const std::exception& e) {
        r.exit_code = exit_code_of(e);
        r.status = status_of(r.exit_code);
        r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<PointResult> run_experiment(const ExperimentConfig& cfg, Stage stage)
{
    const auto points = expand_sweep(cfg);
    std::vector<PointResult> out(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < points.size();) out[i] = run_point(points[i], stage, i);
    };
    const int k = std::max(1, std::min<int>(cfg.workers, int(points.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < k; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

// ---------------------------------------------------------------------------------------------
// outputs

std::vector<std::string> results_header()
{
    return {"point",      "config_hash",    "seed",           "model",          "L",
            "N",          "d",              "n",              "g",              "nu",
            "nu_c",       "t",              "m2",             "beta",           "eps",
            "status",     "error",          "max_epsilon",    "certificate_valid", "gap_lower",
            "gap_upper",  "gap_lower_scaled", "gap_upper_scaled", "variance_per_site", "lambda_min",
            "gamma_hat",  "gamma_se",       "gamma_inconclusive", "mc_variance_per_site", "mc_variance_se",
            "seconds"};
}

std::vector<std::string> results_row(const PointResult& p)
{
    const auto& c = p.config;
    const bool phi4 = c.model == "phi4";
    const bool uses_beta = !phi4 && !(c.model == "free" && c.params.covariance == "massive");
    const double scale = std::pow(double(c.L), 2.0 * c.N);
    const auto f = [](double v) { return format_number(v); };
    const GapBounds* b = p.bounds ? &*p.bounds : nullptr;
    return {std::to_string(p.index),
            p.hash,
            std::to_string(p.seed),
            c.model,
            std::to_string(c.L),
            std::to_string(c.N),
            std::to_string(c.d),
            std::to_string(c.n),
            phi4 ? f(c.params.g) : "",
            f(p.nu),
            f(p.nu_c),
            f(p.t),
            f(p.m2),
            uses_beta ? f(c.params.beta) : "",
            f(p.eps),
            p.status,
            p.error,
            f(p.max_epsilon),
            b ? (b->valid ? "true" : "false") : "",
            b ? f(b->lower) : "",
            b ? f(b->upper) : "",
            b ? f(b->lower * scale) : "",
            b ? f(b->upper * scale) : "",
            b ? f(b->variance_per_site) : "",
            f(p.lambda_min),
            p.gap ? f(p.gap->gamma) : "",
            p.gap ? f(p.gap->se) : "",
            p.gap ? (p.gap->inconclusive ? "true" : "false") : "",
            p.variance ? f(p.variance->variance) : "",
            p.variance ? f(p.variance->se) : "",
            f(p.seconds)};
}

namespace {

std::ofstream open_out(const fs::path& p)
{
    std::ofstream os(p, std::ios::binary);
    if (!os) throw CapacityError("cannot write '" + p.string() + "'");
    return os;
}

void write_tsv(const fs::path& p, const std::vector<std::string>& head, const std::vector<std::vector<double>>& rows)
{
    auto os = open_out(p);
    for (std::size_t i = 0; i < head.size(); ++i) os << (i ? "\t" : "") << head[i];
    os << '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "\t" : "") << (std::isfinite(r[i]) ? format_number(r[i]) : "nan");
        os << '\n';
    }
}

double opt(const std::optional<GapEstimate>& g, bool se)
{
    return g ? (se ? g->se : g->gamma) : kNaN;
}

} // namespace

void write_outputs(const std::string& dir, const ExperimentConfig& cfg, const std::vector<PointResult>& points)
{
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root / "plotdata", ec);
    if (ec) throw CapacityError("cannot create output directory '" + dir + "': " + ec.message());

    {
        Json j = config_to_json(cfg);
        j["config_hash"] = config_hash(cfg);
        open_out(root / "config.json") << j.dump(2) << '\n';
    }
    {
        auto os = open_out(root / "results.csv");
        os << csv_line(results_header());
        for (const auto& p : points) os << csv_line(results_row(p));
    }
    {
        auto os = open_out(root / "flow.jsonl");
        for (const auto& p : points)
            for (const auto& st : p.flow) {
                Json j = to_json(st);
                j["point"] = p.index;
                j["config_hash"] = p.hash;
                if (!st.error.empty()) j["error"] = st.error;
                os << j.dump() << '\n';
            }
    }
    {
        Json arr = Json::array();
        for (const auto& p : points) {
            Json j = {{"point", p.index}, {"config_hash", p.hash}, {"seed", p.seed}, {"status", p.status}};
            if (p.bounds) {
                j["bounds"] = to_json(*p.bounds);
                j["certificate"] = to_json(p.bounds->certificate);
            }
            if (p.gap) j["gap_estimate"] = to_json(*p.gap);
            arr.push_back(j);
        }
        Json doc = {{"config_hash", config_hash(cfg)}, {"points", arr}};
        open_out(root / "certificate.json") << doc.dump(2) << '\n';
    }

    std::vector<std::vector<double>> eps_rows;
    for (const auto& p : points)
        for (const auto& st : p.flow)
            if (!st.final_step)
                eps_rows.push_back({double(p.index), double(st.scale), st.diag.epsilon, st.diag.norm, st.diag.g, st.diag.nu});
    write_tsv(root / "plotdata" / "epsilon_flow.tsv", {"point", "j", "epsilon", "norm", "g", "nu"}, eps_rows);

    std::vector<std::vector<double>> rows;
    for (const auto& p : points) {
        const double lo = p.bounds ? p.bounds->lower : kNaN, up = p.bounds ? p.bounds->upper : kNaN;
        const double scale = std::pow(double(p.config.L), 2.0 * p.config.N);
        if (cfg.model == "phi4")
            rows.push_back({double(p.index), p.t, p.m2, p.nu_c, lo, up, opt(p.gap, false), opt(p.gap, true)});
        else if (cfg.model == "free")
            rows.push_back({double(p.index), p.lambda_min, lo, up, opt(p.gap, false), opt(p.gap, true)});
        else
            rows.push_back({double(p.index), double(p.config.N), p.config.params.beta, lo * scale, up * scale,
                            opt(p.gap, false) * scale, opt(p.gap, true) * scale});
    }
    if (cfg.model == "phi4")
        write_tsv(root / "plotdata" / "gap_vs_t.tsv",
                  {"point", "t", "m2", "nu_c", "gap_lower", "gap_upper", "gamma_hat", "gamma_se"}, rows);
    else if (cfg.model == "free")
        write_tsv(root / "plotdata" / "gap_free.tsv", {"point", "lambda_min", "gap_lower", "gap_upper", "gamma_hat", "gamma_se"},
                  rows);
    else
        write_tsv(root / "plotdata" / "gap_scaled_vs_N.tsv",
                  {"point", "N", "beta", "gap_lower_scaled", "gap_upper_scaled", "gamma_hat_scaled", "gamma_se_scaled"},
                  rows);
}

} // namespace hrg

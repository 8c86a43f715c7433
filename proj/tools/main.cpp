#include "hrg/errors.hpp"
#include "hrg/experiment.hpp"
#include "hrg/validation.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace hrg;

namespace {

struct Common {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
    std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--config", c.config, "JSON experiment configuration");
    app->add_option("--out", c.out, "output directory");
    app->add_option("--seed", c.seed, "base seed")->each([&c](const std::string&) { c.seed_set = true; });
    app->add_option("--workers", c.workers, "concurrent sweep points")->check(CLI::PositiveNumber);
    app->add_option("--set", c.sets, "override a config field, key=value (dotted keys)");
}

ExperimentConfig resolve(const Common& c)
{
    Json doc = c.config.empty() ? Json::object() : load_config_file(c.config);
    for (const auto& s : c.sets) apply_override(doc, s);
    if (!c.out.empty()) doc["out"] = c.out;
    if (c.seed_set) doc["seed"] = c.seed;
    if (c.workers > 0) doc["workers"] = c.workers;
    return parse_config(doc);
}

void summarize(const std::vector<PointResult>& pts)
{
    for (const auto& p : pts) {
        std::cout << "point " << p.index << " [" << p.hash << "] " << p.status;
        if (p.bounds)
            std::cout << "  gap in [" << format_number(p.bounds->lower) << ", " << format_number(p.bounds->upper)
                      << "]" << (p.bounds->valid ? "" : " (certificate invalid)");
        if (p.gap) std::cout << "  gamma_hat " << format_number(p.gap->gamma) << " +- " << format_number(p.gap->se);
        if (!p.error.empty()) std::cout << "  " << p.error;
        std::cout << '\n';
    }
}

int run_points(const Common& c, Stage stage, bool sweep)
{
    auto cfg = resolve(c);
    if (!sweep && !cfg.sweep.empty()) {
        std::cerr << "note: sweep axes ignored; use the sweep subcommand\n";
        cfg.sweep.clear();
    }
    if (sweep && cfg.dynamics.enabled) stage = Stage::simulate;
    const auto pts = run_experiment(cfg, stage);
    write_outputs(cfg.out, cfg, pts);
    summarize(pts);
    int code = 0;
    for (const auto& p : pts) code = std::max(code, p.exit_code);
    return code;
}

int run_tune(const Common& c)
{
    const auto cfg = resolve(c);
    if (cfg.model != "phi4") throw ConfigError("tune applies to the phi4 model");
    const auto r = tune_critical_nu(cfg.params.g, cfg.lattice(), cfg.params.t, cfg.tune, cfg.flow);
    const Json j = {{"config_hash", config_hash(cfg)},
                    {"g", r.g},
                    {"nu_c", r.nu_c},
                    {"bracket", {r.nu_lo, r.nu_hi}},
                    {"t", number_or_null(r.t)},
                    {"m2", number_or_null(r.m2)},
                    {"nu_residual", number_or_null(r.nu_residual)},
                    {"mass_bracketed", r.mass_bracketed},
                    {"iterations", r.iterations},
                    {"flows", r.flows}};
    std::filesystem::create_directories(cfg.out);
    std::ofstream(std::filesystem::path(cfg.out) / "tune.json") << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run_validate(bool full, const std::vector<int>& only)
{
    const auto results = run_validation(full, &std::cerr, only);
    bool ok = true;
    for (const auto& r : results) {
        std::cout << format_check(r) << '\n';
        ok = ok && r.passed;
    }
    return ok ? 0 : 3;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hierarchical renormalisation-group laboratory: flows, gap certificates, dynamics"};
    app.require_subcommand(1);
    Common flow_c, cert_c, sim_c, tune_c, sweep_c;
    auto* flow = app.add_subcommand("flow", "run the renormalised-potential flow");
    auto* cert = app.add_subcommand("certify", "flow plus the gap certificate and variance bound");
    auto* sim = app.add_subcommand("simulate", "certificate plus a dynamics run and gap estimate");
    auto* tune = app.add_subcommand("tune", "bisect the critical nu (phi4) and match the mass");
    auto* sweep = app.add_subcommand("sweep", "every point of the configured sweep");
    auto* validate = app.add_subcommand("validate", "oracle suite");
    add_common(flow, flow_c);
    add_common(cert, cert_c);
    add_common(sim, sim_c);
    add_common(tune, tune_c);
    add_common(sweep, sweep_c);
    bool full = false;
    validate->add_flag("--full", full, "acceptance-size checks (slow)");
    std::vector<int> only;
    validate->add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 11));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*flow) return run_points(flow_c, Stage::flow, false);
        if (*cert) return run_points(cert_c, Stage::certify, false);
        if (*sim) return run_points(sim_c, Stage::simulate, false);
        if (*tune) return run_tune(tune_c);
        if (*sweep) return run_points(sweep_c, Stage::certify, true);
        if (*validate) return run_validate(full, only);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_of(e);
    }
    return 0;
}

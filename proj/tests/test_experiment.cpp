#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hrg/errors.hpp"
#include "hrg/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hrg;

namespace {

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig free_field_sweep()
{
    Json doc = {{"model", "free"},
                {"lattice", {{"N", 2}, {"d", 1}}},
                {"params", {{"m2", 0.5}}},
                {"dynamics", {{"steps", 4000}, {"thin", 5}}},
                {"sweep", {{"params.m2", {0.5, 1.0, 2.0}}}}};
    return parse_config(doc);
}

} // namespace

TEST_CASE("config: defaults, overrides, validation")
{
    CHECK_THROWS_AS(parse_config(Json::object()), ConfigError); // phi4 needs nu or t
    const auto c = parse_config(Json{{"params", {{"t", 0.1}}}});
    CHECK(c.model == "phi4");
    CHECK(c.L == 2);

    Json doc = Json::object();
    apply_override(doc, "lattice.N=3");
    apply_override(doc, "params.t=0.25");
    apply_override(doc, "model=sine-gordon");
    CHECK(doc["lattice"]["N"] == 3);
    CHECK(doc["params"]["t"] == 0.25);
    CHECK(doc["model"] == "sine-gordon"); // not JSON, kept as a string
    const auto d = parse_config(doc);
    CHECK(d.N == 3);
    CHECK(d.model == "sine-gordon");

    CHECK_THROWS_AS(parse_config(Json{{"lattice", {{"M", 3}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(Json{{"lattice", {{"N", 0}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(Json{{"model", "ising"}}), ConfigError);
    CHECK_THROWS_AS(parse_config(Json{{"lattice", {{"N", "four"}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(Json{{"model", "free"}, {"params", {{"m2", -1.0}}}}), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "no-equals-sign"), ConfigError);
    CHECK_THROWS_AS(load_config_file("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("config: JSON round trip and hash")
{
    auto c = parse_config(Json{{"model", "free"}, {"params", {{"m2", 0.3}}}});
    const auto again = parse_config(config_to_json(c));
    CHECK(config_hash(again) == config_hash(c));

    const auto h = config_hash(c);
    CHECK(h.size() == 16);
    CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
    auto other = c;
    other.seed = 99;
    other.out = "elsewhere";
    other.workers = 4;
    CHECK(config_hash(other) == h);
    other.params.m2 = 0.31;
    CHECK(config_hash(other) != h);

    // published FNV-1a 64 test vectors
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("sweep expansion is a cartesian product, first axis slowest")
{
    auto c = parse_config(Json{{"model", "free"},
                               {"params", {{"m2", 1.0}}},
                               {"sweep", {{"lattice.N", {1, 2}}, {"params.m2", {0.5, 1.0, 2.0}}}}});
    const auto pts = expand_sweep(c);
    REQUIRE(pts.size() == 6);
    CHECK(pts[0].N == 1);
    CHECK(pts[2].N == 1);
    CHECK(pts[3].N == 2);
    CHECK(pts[1].params.m2 == 1.0);
    CHECK(pts[5].params.m2 == 2.0);
    for (const auto& p : pts) CHECK(p.sweep.empty());
    c.sweep.clear();
    CHECK(expand_sweep(c).size() == 1);
}

TEST_CASE("csv quoting")
{
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_field("two\nlines") == "\"two\nlines\"");
    CHECK(csv_line({"a", "b,c", ""}) == "a,\"b,c\",\r\n");
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(std::nan("")).empty());
    CHECK(results_header().size() == 31);
}

TEST_CASE("potential JSON round trip")
{
    const FourierPotential f({0.1, -0.02, 0.003});
    const auto back = potential_from_json(to_json(PotentialRep(f)));
    REQUIRE(std::holds_alternative<FourierPotential>(back));
    CHECK(std::get<FourierPotential>(back).coeffs() == f.coeffs());

    const auto r = phi4_initial(0.05, -0.1, 2, 4.0, phi4_default_rmax(0.05), 64);
    const auto rb = potential_from_json(to_json(PotentialRep(r)));
    REQUIRE(std::holds_alternative<RadialPotential>(rb));
    const auto& rr = std::get<RadialPotential>(rb);
    CHECK(rr.n() == 2);
    CHECK(rr.block_volume() == 4.0);
    CHECK(rr.values() == r.values());
}

TEST_CASE("exit codes by error category")
{
    CHECK(exit_code_of(ConfigError("x")) == 2);
    CHECK(exit_code_of(ParameterError("x")) == 2);
    CHECK(exit_code_of(CapacityError("x")) == 4);
    CHECK(exit_code_of(QuadratureError("x")) == 3);
    CHECK(exit_code_of(NumericalError("x")) == 3);
}

TEST_CASE("phi4 critical point: negative, shrinking with g, matched mass")
{
    const HierLattice lat(2, 3, 4, 1);
    TuneConfig tc;
    tc.tol = 1e-6;
    const auto small = tune_critical_nu(0.01, lat, kNaN, tc);
    const auto mid = tune_critical_nu(0.05, lat, 0.1, tc);
    CHECK(mid.nu_c < 0.0);
    CHECK(small.nu_c < 0.0);
    CHECK(mid.nu_c < small.nu_c);
    CHECK(mid.nu_lo <= mid.nu_c);
    CHECK(mid.nu_c <= mid.nu_hi);
    // nu_c -> 0 as g -> 0, roughly linearly at weak coupling
    CHECK(small.nu_c / mid.nu_c == doctest::Approx(0.2).epsilon(0.25));
    CHECK(phi4_phase(0.05, mid.nu_hi + 0.01, 1e-4 * std::pow(2.0, -6), lat) == 1);
    CHECK(phi4_phase(0.05, mid.nu_lo - 0.01, 1e-4 * std::pow(2.0, -6), lat) == -1);
    CHECK(mid.mass_bracketed);
    CHECK(mid.m2 > 0.0);
    CHECK(std::abs(mid.nu_residual) < 1e-3);
}

TEST_CASE("sweep results are independent of the worker count")
{
    auto c = free_field_sweep();
    auto rows = [&](int workers) {
        c.workers = workers;
        std::vector<std::vector<std::string>> out;
        for (const auto& p : run_experiment(c, Stage::simulate)) {
            CHECK(p.status == "ok");
            auto row = results_row(p);
            REQUIRE(row.size() == results_header().size());
            row.pop_back(); // wall-clock seconds
            out.push_back(row);
        }
        return out;
    };
    const auto one = rows(1);
    CHECK(one.size() == 3);
    CHECK(one == rows(3));
    // distinct points draw distinct streams
    CHECK(run_experiment(c, Stage::flow)[0].seed != run_experiment(c, Stage::flow)[1].seed);
}

TEST_CASE("output files")
{
    auto c = free_field_sweep();
    const auto dir = std::filesystem::temp_directory_path() / "hrg_test_outputs";
    std::filesystem::remove_all(dir);
    const auto pts = run_experiment(c, Stage::certify);
    write_outputs(dir.string(), c, pts);
    for (const char* f : {"config.json", "results.csv", "flow.jsonl", "certificate.json"})
        CHECK(std::filesystem::exists(dir / f));
    CHECK(std::filesystem::exists(dir / "plotdata" / "epsilon_flow.tsv"));

    const auto csv = slurp(dir / "results.csv");
    std::size_t lines = 0;
    for (std::size_t p = csv.find("\r\n"); p != std::string::npos; p = csv.find("\r\n", p + 2)) ++lines;
    CHECK(lines == 1 + pts.size());
    CHECK(csv.rfind("point,config_hash,seed,model", 0) == 0);

    const auto cert = Json::parse(slurp(dir / "certificate.json"));
    REQUIRE(cert["points"].size() == 3);
    CHECK(cert["points"][0]["bounds"]["valid"] == true);

    std::ifstream jl(dir / "flow.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(jl, line)) {
        const auto j = Json::parse(line);
        CHECK(j.contains("point"));
        CHECK(j.contains("config_hash"));
        ++n;
    }
    CHECK(n > 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("capacity and numerical failures are recorded per point")
{
    auto c = parse_config(Json{{"model", "free"}, {"lattice", {{"N", 9}, {"d", 2}}}, {"params", {{"m2", 1.0}}}});
    const auto p = run_point(c, Stage::simulate);
    CHECK(p.status == "capacity-error");
    CHECK(p.exit_code == 4);
}

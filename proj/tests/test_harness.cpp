/// @file test_harness.cpp
/// @brief Config round trip, summary rows, delta(eps), bundles, determinism and sweep error paths.

#include <doctest.h>

#include "thinlim/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace thinlim;

namespace {

Config small(const std::string& extra = "")
{
    return parse_config("[surface]\nlevel = 1\n[domain]\neps = [0.125, 0.0625, 0.03125]\n" + extra);
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("config: defaults, round trip, rejection")
{
    const Config d = parse_config("");
    CHECK(dump_config(d) == dump_config(Config{}));
    CHECK(parse_config(dump_config(d)).eps == d.eps);

    const Config c = parse_config(R"(
[surface]
kind = "spheroid"
axes = [1.0, 1.25]
[domain]
g0 = { kind = "affine", c = 0.0, b = [0.1, 0.0, 0.0] }
g1 = { kind = "exponential", k = [0.0, 0.0, 0.2] }
eps = [0.1, 0.05, 0.025]
[problem]
nu = 0.7
alpha = 0.5
forcing_k = [0.1, 0.2, 0.3]
[harness]
seed = 99
lemmas = ["average_bound", "inner_product"]
)");
    CHECK(c.surface == "spheroid");
    CHECK(c.axis_c == 1.25);
    CHECK(c.g0.kind == "affine");
    CHECK(c.g0.b[0] == 0.1);
    CHECK(c.g1.k[2] == 0.2);
    CHECK(c.nu == 0.7);
    CHECK(c.seed == 99);
    CHECK(c.lemmas.size() == 2);
    const std::string text = dump_config(c);
    CHECK(dump_config(parse_config(text)) == text);

    CHECK_THROWS_AS(parse_config("[surface]\nlevels = 2\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[extra]\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[problem]\nnu = \"one\"\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[problem]\nalpha = 1.5\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[problem]\nassumption = \"A4\"\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[domain]\neps = [0.1, -0.1]\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[domain]\ng1 = { kind = \"affine\", slope = 1 }\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[harness]\nlemmas = [\"nope\"]\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[surface\n"), std::invalid_argument);
}

TEST_CASE("fingerprint ignores the thread count only")
{
    Config a;
    Config b = a;
    b.workers = 4;
    CHECK(fingerprint(a) == fingerprint(b));
    b.seed = 2;
    CHECK(fingerprint(a) != fingerprint(b));
    CHECK(fingerprint(a).size() == 16);
}

TEST_CASE("delta(eps)")
{
    CHECK(delta_eps(0.0625, 1.0, 0, 0, 0, 0) == doctest::Approx(0.5));
    CHECK(delta_eps(0.0625, 0.5, 0, 0, 0, 0) == doctest::Approx(std::pow(0.0625, 0.125)));
    // friction mismatch enters additively
    CHECK(delta_eps(0.0625, 1.0, 0.0625 * 0.3, 0.0, 0.2, 0.0) == doctest::Approx(0.6));
    double prev = INFINITY;
    for (double e = 0.5; e > 1e-4; e /= 2) {
        const double d = delta_eps(e, 1.0, 0.1 * e, 0.2 * e, 0.1, 0.2);
        CHECK(d < prev);
        prev = d;
    }
}

TEST_CASE("summary rows parse back exactly")
{
    std::vector<Record> rows(3);
    rows[0] = {"theorem:mtau_h1", 0.125, 0.1 / 3.0, 0.59460355750136051, 0.1, 1.0000000000000002, true};
    rows[1].id = "constant:rho_u";
    rows[1].constant = 21.5;
    rows[2] = {"bulk:h1", 1e-300, -0.0, INFINITY, 5e-324, -INFINITY, false};
    const std::string text = summary_csv(rows);
    const std::vector<Record> back = parse_summary_csv(text);
    REQUIRE(back.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].id == rows[i].id);
        CHECK(back[i].pass == rows[i].pass);
        for (auto m : {&Record::eps, &Record::lhs, &Record::bound, &Record::constant, &Record::rate}) {
            const double x = rows[i].*m, y = back[i].*m;
            CHECK(((std::isnan(x) && std::isnan(y)) || x == y));
        }
    }
    CHECK(summary_csv(back) == text);
    CHECK_THROWS_AS(parse_summary_csv("id,eps\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_summary_csv("id,eps,lhs,bound,constant,rate,pass\na,1,2\n"), std::invalid_argument);
}

TEST_CASE("geometry check and bundle files")
{
    const Config c = small();
    const GeometryReport g = run_geometry_check(c);
    CHECK(g.pass);
    CHECK(g.admissible_eps > 0.125);
    const Bundle b = bundle_of(c, g);
    CHECK(b.pass);
    const auto dir = std::filesystem::temp_directory_path() / "thinlim_test_bundle";
    std::filesystem::remove_all(dir);
    write_bundle(b, c, dir.string());
    CHECK(slurp(dir / "report.json") == b.report_json);
    CHECK(dump_config(parse_config(slurp(dir / "config.toml"))) == dump_config(c));
    CHECK(parse_summary_csv(slurp(dir / "summary.csv")).size() == b.records.size());

    Config wide = c;
    wide.eps = {1.5, 0.1, 0.05};
    CHECK_FALSE(run_geometry_check(wide).pass);

    const LimitRunReport l = run_limit(c);
    const Bundle lb = bundle_of(c, l);
    write_bundle(lb, c, dir.string());
    CHECK(std::filesystem::exists(dir / "limit_residuals.dat"));
    const std::string gp = slurp(dir / "limit_residuals.gp");
    CHECK(gp.find("limit_residuals.dat") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("limit run on the defaults of a coarse sphere")
{
    const LimitRunReport r = run_limit(small());
    CHECK(r.pass);
    CHECK(r.killing_dim == 3);
    CHECK(r.energy_defect < 1e-8);
    CHECK(r.solution.inside_ball);
}

TEST_CASE("sweep: zero forcing, thread independence, error paths")
{
    SUBCASE("zero forcing is identically zero")
    {
        const SweepReport r = run_theorem_sweep(small("[problem]\nforcing = \"zero\"\n"));
        CHECK(r.pass);
        for (const SweepSeries& s : r.series) {
            CHECK(s.exact_zero);
            CHECK_FALSE(s.fitted);
        }
    }
    SUBCASE("results do not depend on the worker count")
    {
        Config one = small();
        Config two = one;
        two.workers = 2;
        const SweepReport a = run_theorem_sweep(one), b = run_theorem_sweep(two);
        CHECK(bundle_of(one, a).report_json == bundle_of(two, b).report_json);
        CHECK(a.pass);
        CHECK(a.series.size() == 6);
    }
    SUBCASE("a failing eps is named")
    {
        Config c = small();
        c.eps = {0.125, 0.0625, 1.5};
        try {
            run_theorem_sweep(c);
            FAIL("expected a throw");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("eps = 1.5") != std::string::npos);
        }
    }
    SUBCASE("smallness is checked before the bulk runs")
    {
        Config c = small();
        c.nu = 0.05;
        c.forcing_scale = 5.0;
        CHECK_THROWS_AS(run_theorem_sweep(c), std::domain_error);
        c.eps = {0.1, 0.05};
        CHECK_THROWS_AS(run_bulk(c), std::invalid_argument);
    }
}

#pragma once

#include "thinlim/averaging.hpp"
#include "thinlim/bulk_solver.hpp"
#include "thinlim/limit_solver.hpp"
#include "thinlim/rates.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace thinlim {

/// Named analytic scalar: constant c, affine c + b . x, or exponential exp(k . x).
struct ScalarSpec {
    std::string kind = "constant";
    double c = 0.0;
    Vec3 b = Vec3::Zero();
    Vec3 k = Vec3::Zero();
    AmbientScalar make() const;
};

struct Config {
    // surface
    std::string surface = "sphere"; // sphere | spheroid | torus
    int level = 2;                  // sphere refinement level
    int degree = -1;                // scalar basis degree, -1 for the default
    int n_t = 24, n_phi = 48;       // spheroid and torus grids
    int orientation = 1;
    double axis_a = 1.0, axis_c = 1.5;      // spheroid semi-axes
    double torus_R = 2.0, torus_a = 0.5;    // torus radii
    // thin domain
    ScalarSpec g0{"constant", 0.0}, g1{"constant", 1.0};
    std::vector<double> eps{0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
    double gamma0 = 0.0, gamma1 = 0.0; // limit friction; gamma_eps^i = gamma^i eps
    // problem
    double nu = 1.0;
    double alpha = 1.0;
    std::string assumption = "A3";
    std::string forcing = "stream"; // stream | zero
    double forcing_scale = 2.0;
    Vec3 forcing_k{0.3, -0.2, 0.5};
    // numerics
    int normal_points = tol::normal_points;
    int modes = 3;
    int mode_degree = -1;
    double picard_tol = tol::picard_rel;
    // harness
    double slack = tol::slack;
    int workers = 1;
    std::uint64_t seed = 1;
    int probe_starts = 4;
    int corpus_fields = 20;
    std::vector<std::string> lemmas; // empty: every averaging estimate
};

/// Parses TOML text; unknown keys and invalid values throw std::invalid_argument.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);
/// Complete TOML rendering with every default filled in; parse_config(dump_config(c)) == c.
std::string dump_config(const Config& c);
/// FNV-1a of dump_config, hex.
std::string fingerprint(const Config& c);

Surface make_surface(const Config& c);
SurfaceField make_weight(const Surface& S, const ScalarSpec& g);
/// Tangential limit datum: a Killing-corrected weighted stream field, scaled (or zero).
SurfaceField limit_forcing(const Surface& S, const Config& c);
/// Constant extension of f with its L2(Omega_eps) component along R_g removed (A3 only).
BulkField bulk_forcing(const BulkSystem& sys, const SurfaceField& f);
/// delta(eps) = eps^{alpha/4} + sum_i |gamma_eps^i / eps - gamma^i|.
double delta_eps(double eps, double alpha, double gamma_eps0, double gamma_eps1, double gamma0, double gamma1);

/// One row of summary.csv.
struct Record {
    std::string id;
    double eps = NAN;
    double lhs = NAN;
    double bound = NAN;
    double constant = NAN;
    double rate = NAN;
    bool pass = false;
};
std::string summary_csv(const std::vector<Record>& rows);
std::vector<Record> parse_summary_csv(const std::string& text);

/// Columns for a .dat file plus the gnuplot script drawing them.
struct Plot {
    std::string name;
    std::string xlabel, ylabel;
    std::vector<std::string> columns; // first column is the abscissa
    std::vector<std::vector<double>> rows;
    bool logscale = true;
};

/// Everything a subcommand writes: report.json, summary.csv, config.toml, <plot>.dat and <plot>.gp.
struct Bundle {
    std::string command;
    std::string report_json;
    std::vector<Record> records;
    std::vector<Plot> plots;
    bool pass = false;
};
void write_bundle(const Bundle& b, const Config& c, const std::string& dir);

// ---------------------------------------------------------------------------------------------

struct GeometryReport {
    std::vector<Record> checks;
    double admissible_eps = 0.0;
    bool pass = false;
};
GeometryReport run_geometry_check(const Config& c);

struct LemmaSuiteReport {
    std::vector<AverageReport> estimates;
    std::vector<std::string> skipped;
    bool pass = false;
};
LemmaSuiteReport run_lemma_suite(const Config& c);

struct ConstantsReport {
    double korn_plain = 0.0, korn_weighted = 0.0;
    int killing_dim = 0;
    double c_a = 0.0, c_b = 0.0, rho_u = 0.0;
    std::vector<double> eps, coercivity_min, coercivity_max;
    double coercivity_variation = 0.0; // max / min - 1 of the lower constant
    bool pass = false;
};
ConstantsReport estimate_constants(const Config& c);

struct LimitRunReport {
    LimitSolution solution;
    double energy_defect = 0.0;
    double compatibility = 0.0;
    int killing_dim = 0;
    bool pass = false;
};
LimitRunReport run_limit(const Config& c);

struct BulkPoint {
    double eps = 0.0;
    int iterations = 0;
    bool converged = false;
    double residual = 0.0, energy_defect = 0.0, tangency = 0.0, divergence = 0.0, rigid_defect = 0.0;
    double coercivity_min = 0.0, coercivity_max = 0.0;
    AprioriSample sample;
};
struct BulkRunReport {
    std::vector<BulkPoint> points;
    FormIdentityReport forms; // on the first eps
    AprioriReport apriori;
    double coercivity_variation = 0.0;
    bool pass = false;
};
/// When dump_dir is non-empty, each solution is written as bulk_u_<i>.csv there.
BulkRunReport run_bulk(const Config& c, const std::string& dump_dir = "");

struct SweepSeries {
    std::string id;
    std::vector<double> values;
    RateFit fit_delta, fit_eps;
    bool fitted = false;
    bool exact_zero = false;
    bool monotone = false;
    bool gated = true; // counts towards pass
    bool pass = false;
};
struct SweepReport {
    std::vector<double> eps, delta;
    std::vector<SweepSeries> series; // mtau_h1, bulk_l2, tangential_gradient, normal_derivative, full_average_h1, forcing_hm1
    std::vector<double> energy_defect;
    double v_h1 = 0.0, rho_u = 0.0;
    bool inside_ball = false;
    std::string fingerprint;
    bool pass = false;
};
/// Limit problem once, bulk problem per eps, difference norms fitted against delta(eps).
/// Pass when every gated series has exponent-in-delta >= 1 - slack (or is identically zero).
SweepReport run_theorem_sweep(const Config& c);

Bundle bundle_of(const Config& c, const GeometryReport& r);
Bundle bundle_of(const Config& c, const LemmaSuiteReport& r);
Bundle bundle_of(const Config& c, const ConstantsReport& r);
Bundle bundle_of(const Config& c, const LimitRunReport& r);
Bundle bundle_of(const Config& c, const BulkRunReport& r);
Bundle bundle_of(const Config& c, const SweepReport& r);

} // namespace thinlim

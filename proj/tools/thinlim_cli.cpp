#include "thinlim/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>

using namespace thinlim;

namespace {

struct Overrides {
    std::string out = "out";
    std::optional<int> workers;
    std::optional<double> slack;
    std::optional<std::uint64_t> seed;
};

Config configure(const std::string& path, const Overrides& o)
{
    Config c = load_config(path);
    if (o.workers)
        c.workers = *o.workers;
    if (o.slack)
        c.slack = *o.slack;
    if (o.seed)
        c.seed = *o.seed;
    // re-validate overridden values
    return parse_config(dump_config(c));
}

void print_records(const Bundle& b)
{
    for (const Record& r : b.records)
        if (!r.pass)
            std::printf("  FAIL %s eps=%g lhs=%g bound=%g rate=%g\n", r.id.c_str(), r.eps, r.lhs, r.bound, r.rate);
    std::printf("%s: %s (%zu rows)\n", b.command.c_str(), b.pass ? "pass" : "FAIL", b.records.size());
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"thin-domain limit harness"};
    app.require_subcommand(0, 1);
    app.fallthrough();
    Overrides o;
    std::string config;
    bool defaults = false;
    app.add_flag("--print-defaults", defaults, "print the default configuration and exit");
    app.add_option("--out", o.out, "output directory")->capture_default_str();
    app.add_option("--workers", o.workers, "threads over the eps sweep")->check(CLI::PositiveNumber);
    app.add_option("--slack", o.slack, "allowed shortfall of fitted exponents")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", o.seed, "seed for random corpora and probe starts");

    using Runner = std::function<Bundle(const Config&)>;
    const std::vector<std::pair<std::string, Runner>> commands = {
        {"geometry-check", [](const Config& c) { return bundle_of(c, run_geometry_check(c)); }},
        {"lemmas", [](const Config& c) { return bundle_of(c, run_lemma_suite(c)); }},
        {"constants", [](const Config& c) { return bundle_of(c, estimate_constants(c)); }},
        {"limit-solve", [](const Config& c) { return bundle_of(c, run_limit(c)); }},
        {"bulk-solve",
         [&o](const Config& c) { return bundle_of(c, run_bulk(c, (std::filesystem::path(o.out) / "fields").string())); }},
        {"sweep", [](const Config& c) { return bundle_of(c, run_theorem_sweep(c)); }},
    };
    const char* help[] = {"surface geometry and Jacobian checks",       "averaging estimates over the eps sweep",
                          "Korn, form and coercivity constants",       "solve the limit surface problem",
                          "solve the bulk problem for each eps",       "limit-vs-bulk convergence in delta(eps)"};
    std::vector<CLI::App*> subs;
    for (size_t i = 0; i < commands.size(); ++i) {
        CLI::App* s = app.add_subcommand(commands[i].first, help[i]);
        s->add_option("config", config, "TOML configuration")->required()->check(CLI::ExistingFile);
        subs.push_back(s);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    if (defaults) {
        std::cout << dump_config(Config{});
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 2;
    }

    try {
        const Config c = configure(config, o);
        for (size_t i = 0; i < subs.size(); ++i)
            if (subs[i]->parsed()) {
                const Bundle b = commands[i].second(c);
                write_bundle(b, c, o.out);
                print_records(b);
                return b.pass ? 0 : 1;
            }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}

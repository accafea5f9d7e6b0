// pdcsim: deterministic experiment driver for the three-mode down-conversion
// library. Subcommands: tmscs | perturb | evolve | steady | validate.
// Exit codes: 0 ok, 2 config error, 3 numerical abort, 4 validation failure.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <pdc/cli.hpp>

namespace {

struct RawFlags {
    std::string config, phi, cutoffs, method, out;
    double alpha2 = 0.0, gamma2 = 0.0, r = 0.0, dt = 0.0, t_end = 0.0;
    int workers = 0;
    bool snapshots_json = false;
    bool mutate = false;
};

void add_common_options(CLI::App* sub, RawFlags& f) {
    sub->add_option("--config", f.config, "JSON config file (flags override it)");
    sub->add_option("--phi", f.phi,
                    "comma list of cumulative phases; accepts pi tokens, e.g. 0,pi/2,pi");
    sub->add_option("--alpha2", f.alpha2, "seed strength |alpha|^2 for signal and idler");
    sub->add_option("--gamma2", f.gamma2, "pump strength |gamma|^2");
    sub->add_option("--r", f.r, "squeeze parameter (tmscs)");
    sub->add_option("--cutoffs", f.cutoffs, "Fock cutoffs P,S,I");
    sub->add_option("--dt", f.dt, "integrator step in scaled time");
    sub->add_option("--t-end", f.t_end, "end of the scaled-time interval");
    sub->add_option("--method", f.method, "dense|block");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--workers", f.workers, "worker pool size for phi sweeps");
}

pdc::cli::FlagOverrides collect(const CLI::App* sub, const RawFlags& f) {
    pdc::cli::FlagOverrides ov;
    if (sub->count("--config")) ov.config_path = f.config;
    if (sub->count("--phi")) ov.phi = f.phi;
    if (sub->count("--alpha2")) ov.alpha2 = f.alpha2;
    if (sub->count("--gamma2")) ov.gamma2 = f.gamma2;
    if (sub->count("--r")) ov.r = f.r;
    if (sub->count("--cutoffs")) ov.cutoffs = f.cutoffs;
    if (sub->count("--dt")) ov.dt = f.dt;
    if (sub->count("--t-end")) ov.t_end = f.t_end;
    if (sub->count("--method")) ov.method = f.method;
    if (sub->count("--out")) ov.out = f.out;
    if (sub->count("--workers")) ov.workers = f.workers;
    ov.snapshots_json = f.snapshots_json;
    ov.mutate = f.mutate;
    return ov;
}

}  // namespace

int main(int argc, char** argv) {
    // single-threaded BLAS keeps eigensolves bit-reproducible under the pool
    setenv("OPENBLAS_NUM_THREADS", "1", 0);

    CLI::App app{"three-mode coherently seeded down-conversion toolkit"};
    app.require_subcommand(1);
    RawFlags f;

    CLI::App* tmscs = app.add_subcommand("tmscs", "constant-pump phase sweep");
    CLI::App* perturb = app.add_subcommand("perturb", "short-time series curves");
    CLI::App* evolve = app.add_subcommand("evolve", "quantized-pump trajectory");
    CLI::App* steady = app.add_subcommand("steady", "time-averaged densities and chain fits");
    CLI::App* validate = app.add_subcommand("validate", "cross-validation battery");
    for (CLI::App* sub : {tmscs, perturb, evolve, steady, validate}) add_common_options(sub, f);
    evolve->add_flag("--snapshots-json", f.snapshots_json,
                     "also write reduced density snapshots as JSON");
    validate->add_flag("--mutate", f.mutate,
                       "inject a stencil sign fault (the battery must then fail)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        pdc::cli::RunConfig cfg = pdc::cli::build_config(name, collect(sub, f));
        if (name == "tmscs")
            pdc::cli::run_tmscs(cfg);
        else if (name == "perturb")
            pdc::cli::run_perturb(cfg);
        else if (name == "evolve")
            pdc::cli::run_evolve(cfg);
        else if (name == "steady")
            pdc::cli::run_steady(cfg);
        else if (name == "validate")
            return pdc::cli::run_validate(cfg, std::cout) == 0 ? 0 : 4;
    } catch (const pdc::LeakageExceeded& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const pdc::NormDriftExceeded& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const pdc::TruncationTooSmall& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const pdc::NotAState& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const pdc::DimensionOverflow& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const pdc::BasisMismatch& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const pdc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

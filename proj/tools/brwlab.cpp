// brwlab: batch front-end for the branching random walk laboratory.
//
// Verbs: calibrate, simulate, oracle, analyze, report, verify.
// Exit codes: 0 success, 1 verdict/criterion failures, 2 config errors,
// 3 capacity errors.

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "brw/acceptance.hpp"
#include "brw/config.hpp"
#include "brw/errors.hpp"
#include "brw/runner.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool resume = false;
};

brw::RunConfig load(const CommonFlags& flags) {
    brw::RunConfig cfg = brw::load_config(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.workers) cfg.workers = *flags.workers;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (cfg.out_dir.empty()) cfg.out_dir = "artifacts";
    return cfg;
}

std::string sig17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int do_calibrate(const CommonFlags& flags) {
    const auto cfg = load(flags);
    const auto constants = brw::calibrate(cfg.offspring(), cfg.increment_law());
    nlohmann::json j;
    j["c1"] = sig17(constants.c1);
    j["theta_bar"] = sig17(constants.theta_bar);
    j["c2"] = sig17(constants.c2);
    j["log_rho"] = sig17(constants.log_rho);
    j["config_hash"] = cfg.hash_hex;
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"branching random walk simulation laboratory"};
    app.require_subcommand(1);

    CommonFlags flags;
    brw::acceptance::Options accept_opts;
    std::string report_dir;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", flags.config_path, "TOML run configuration")
                ->required();
        sub->add_option("--out", flags.out_dir, "artifact output directory");
        sub->add_option("--seed", flags.seed, "override run.seed");
        sub->add_option("--workers", flags.workers, "override run.workers");
        return sub;
    };

    auto* cal = add_common(app.add_subcommand("calibrate",
                                              "calibrate model constants"),
                           true);
    auto* sim = add_common(
        app.add_subcommand("simulate", "run the simulate/analyze pipeline"), true);
    sim->add_flag("--resume", flags.resume, "resume from the checkpoint");
    auto* orc = add_common(app.add_subcommand("oracle", "exact max-law artifact"),
                           true);
    auto* ana = add_common(
        app.add_subcommand("analyze", "re-run diagnostics over records.csv"), true);
    auto* rep = app.add_subcommand("report", "render an artifact's verdict table");
    rep->add_option("--dir", report_dir, "artifact directory")->required();
    auto* ver = app.add_subcommand("verify", "run the full acceptance suite");
    ver->add_option("--workers", accept_opts.workers, "worker threads");
    ver->add_option("--seed", accept_opts.seed, "suite seed");
    ver->add_option("--scratch", accept_opts.scratch_dir, "scratch directory");
    ver->add_flag("--quick", accept_opts.quick,
                  "thinned replicate counts (development smoke run)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cal->parsed()) return do_calibrate(flags);
        if (sim->parsed()) {
            const auto cfg = load(flags);
            return brw::run_pipeline(cfg, cfg.out_dir, flags.resume, std::cout);
        }
        if (orc->parsed()) {
            const auto cfg = load(flags);
            return brw::run_oracle(cfg, cfg.out_dir, std::cout);
        }
        if (ana->parsed()) {
            const auto cfg = load(flags);
            return brw::run_analyze(cfg, cfg.out_dir, std::cout);
        }
        if (rep->parsed()) return brw::report(report_dir, std::cout);
        if (ver->parsed()) {
            const auto results = brw::acceptance::run_all(accept_opts);
            brw::acceptance::print_results(results, std::cout);
            return brw::acceptance::all_pass(results) ? 0 : 1;
        }
    } catch (const brw::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const brw::CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return 3;
    } catch (const brw::IntegrityError& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
        return 1;
    } catch (const brw::MissingArtifact& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

// tamex command line: batch runner for the cubic-benchmark experiments.
//   tamex converge --config exp.cfg [--seed N] [--out DIR] [--threads N]
//   tamex compare  --config exp.cfg [--repeats N] ...
//   tamex moments  --config exp.cfg ...
//   tamex selftest [--inject-fault pade]
// Exit codes: 0 success, 1 usage/config error, 2 completed with unreliable
// estimates.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "cli/config.hpp"
#include "cli/runners.hpp"
#include "tamex/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"tamed exponential SDE integrators + MLMC weak-error estimation"};
    app.require_subcommand(1);

    std::string config_path;
    tamex::cli::RunOptions opt;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    bool out_set = false;

    const auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--seed", seed, "override master seed")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--out", out_dir, "override output directory")
            ->each([&](const std::string&) { out_set = true; });
        sub->add_option("--threads", opt.threads, "worker threads (0 = auto)");
        sub->add_option("--kernels", opt.kernels, "kernel ISA: auto|scalar|avx2|neon");
    };

    auto* converge = app.add_subcommand("converge", "weak-error convergence curves");
    add_common(converge, true);
    auto* compare = app.add_subcommand("compare", "estimator cost/error comparison");
    add_common(compare, true);
    compare->add_option("--repeats", opt.repeats, "timing repetitions");
    auto* moments = app.add_subcommand("moments", "moment/divergence diagnostics");
    add_common(moments, true);
    auto* selftest = app.add_subcommand("selftest", "fast invariant suite");
    add_common(selftest, false);
    selftest->add_option("--inject-fault", opt.inject_fault,
                         "fault-injection hook (testing): pade");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (seed_set) opt.seed_override = seed;
    if (out_set) opt.out_override = out_dir;

    try {
        if (selftest->parsed()) return tamex::cli::run_selftest(opt);
        const tamex::cli::ExperimentConfig cfg = tamex::cli::parse_config_file(config_path);
        if (converge->parsed()) return tamex::cli::run_converge(cfg, opt);
        if (compare->parsed()) return tamex::cli::run_compare(cfg, opt);
        if (moments->parsed()) return tamex::cli::run_moments(cfg, opt);
    } catch (const tamex::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const tamex::invalid_input_error& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}

// arqsim: experiment harness CLI.
//
//   arqsim run <spec>              grid sweep -> CSV
//   arqsim beta-region <spec>      outage-inflation boundary over p_b
//   arqsim rel-throughput <spec>   optimized-vs-uniform relative throughput
//   arqsim useful-region <spec>    ARQ-vs-open-loop boundary over p_b
//   arqsim verify                  Monte-Carlo vs analytic cross-check grid
//
// Exit codes: 0 success, 1 usage/IO error, 2 invariant violation.

#include <CLI11.hpp>

#include <iostream>

#include "arq/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Noisy-feedback ARQ analysis and simulation harness"};
    app.require_subcommand(1);

    std::string spec_path, out_override;
    uint64_t seed = 0;
    bool seed_set = false;
    uint64_t packets = 0;
    bool packets_set = false;
    int threads = 0;
    bool resume = false;
    double beta = 5.0;

    auto add_common = [&](CLI::App* cmd, bool with_spec) {
        if (with_spec) cmd->add_option("spec", spec_path, "experiment spec file")->required();
        cmd->add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--packets", packets, "Monte Carlo packets per cell")
            ->each([&](const std::string&) { packets_set = true; });
        cmd->add_option("--threads", threads, "worker threads (0 = all)");
        cmd->add_option("--out", out_override, "output file override");
        return cmd;
    };

    auto* cmd_run = add_common(app.add_subcommand("run", "run a grid sweep"), true);
    cmd_run->add_flag("--resume", resume, "continue an interrupted output file");
    auto* cmd_beta =
        add_common(app.add_subcommand("beta-region", "outage-inflation boundary"), true);
    cmd_beta->add_option("--beta", beta, "allowed relative outage inflation, percent");
    add_common(app.add_subcommand("rel-throughput", "relative throughput gain"), true);
    add_common(app.add_subcommand("useful-region", "ARQ-vs-open-loop boundary"), true);
    add_common(app.add_subcommand("verify", "MC vs analytic cross-check"), false);

    CLI11_PARSE(app, argc, argv);

    try {
        arq::RunOptions options;
        if (seed_set) options.seed = seed;
        if (packets_set) options.packets = packets;
        options.threads = threads;
        options.resume = resume;
        options.out_override = out_override;

        if (app.got_subcommand("verify")) {
            const uint64_t n = packets_set ? packets : 100000;
            const bool ok = arq::verify_grid(n, seed_set ? seed : 1, threads, std::cout);
            return ok ? 0 : 2;
        }

        const arq::ExperimentSpec spec = arq::parse_spec_file(spec_path);
        size_t rows = 0;
        if (app.got_subcommand("run")) {
            rows = arq::run_experiment(spec, options);
        } else if (app.got_subcommand("beta-region")) {
            rows = arq::beta_region(spec, beta, options);
        } else if (app.got_subcommand("rel-throughput")) {
            rows = arq::relative_throughput(spec, options);
        } else if (app.got_subcommand("useful-region")) {
            rows = arq::usefulness_region(spec, options);
        }
        std::cout << rows << " rows -> "
                  << (out_override.empty() ? spec.out_path : out_override) << "\n";
        return 0;
    } catch (const arq::InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sdsim/cli_commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Quantization mathematics and accelerator decode simulator"};
    app.require_subcommand(1);

    sdsim::CliOptions opts;
    uint64_t seed_value = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", opts.config_path, "scenario config (JSON)");
        if (needs_config) c->required();
        sub->add_option("--out", opts.out_dir, "output directory override");
        sub->add_option("--seed", seed_value, "seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--format", opts.format, "report format: csv or json (default both)");
    };

    CLI::App* rotate = app.add_subcommand("rotate-eval",
                                          "plan search, invariance and W4A8 error checks");
    add_common(rotate, true);
    CLI::App* bvq = app.add_subcommand("bvq-train",
                                       "train a blockwise codebook model and serialize it");
    add_common(bvq, true);
    CLI::App* simulate = app.add_subcommand("simulate",
                                            "run the policy ladder and emit speedup reports");
    add_common(simulate, true);
    CLI::App* sweep = app.add_subcommand("sweep", "run the scenario overlays in 'sweep'");
    add_common(sweep, true);
    CLI::App* verify = app.add_subcommand("verify", "run the property suites");
    add_common(verify, false);
    verify->add_option("--inject-fault", opts.inject_fault,
                       "test hook; 'hadamard-sign' flips one matrix entry");

    CLI11_PARSE(app, argc, argv);
    if (seed_set) opts.seed = seed_value;

    using sdsim::run_command_guarded;
    if (rotate->parsed()) return run_command_guarded(sdsim::cmd_rotate_eval, opts, std::cout);
    if (bvq->parsed()) return run_command_guarded(sdsim::cmd_bvq_train, opts, std::cout);
    if (simulate->parsed()) return run_command_guarded(sdsim::cmd_simulate, opts, std::cout);
    if (sweep->parsed()) return run_command_guarded(sdsim::cmd_sweep, opts, std::cout);
    if (verify->parsed()) return run_command_guarded(sdsim::cmd_verify, opts, std::cout);
    return sdsim::kExitConfig;
}

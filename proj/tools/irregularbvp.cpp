// Command-line front end: run / gen / verify a configuration file.
// Exit codes: 0 success, 1 check failure, 2 parse/validation error,
// 3 numeric failure.

#include <CLI11.hpp>
#include <iostream>

#include "ibvp/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"variational solver and verification laboratory for irregular-domain BVPs"};
    app.require_subcommand(1);

    std::string config_path;
    ibvp::RunOptions opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "configuration file")->required();
        sub->add_option("--seed", opt.seed, "random seed recorded in the report");
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--max-dofs", opt.max_dofs, "refuse meshes above this node count");
    };
    auto* run = app.add_subcommand("run", "generate, assemble, solve, verify, and report");
    auto* gen = app.add_subcommand("gen", "generate geometry and measure only");
    auto* verify = app.add_subcommand("verify", "assemble, solve, and evaluate checks");
    add_common(run);
    add_common(gen);
    add_common(verify);

    CLI11_PARSE(app, argc, argv);

    ibvp::RunMode mode = ibvp::RunMode::run;
    if (gen->parsed()) mode = ibvp::RunMode::gen;
    if (verify->parsed()) mode = ibvp::RunMode::verify;

    try {
        auto cfg = ibvp::RunConfig::parse_file(config_path);
        auto art = ibvp::execute(cfg, mode, opt);
        std::cout << art.report;
        return 0;
    } catch (const ibvp::check_failure& e) {
        std::cerr << "check failure: " << e.what() << "\n";
        return 1;
    } catch (const ibvp::validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const ibvp::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

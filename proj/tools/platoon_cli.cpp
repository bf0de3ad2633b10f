// platoon_cli: run scenarios, emit bias matrices, replay detection on a trace.
//
// Exit codes: 0 ok, 1 configuration / input error, 2 numerical failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "platoon/errors.hpp"
#include "platoon/runner.hpp"
#include "platoon/scenario.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"Platoon MPC simulator with V2V bias injection and anomaly detection"};
    app.require_subcommand(1);

    std::string scenario_file;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> steps;
    auto* run = app.add_subcommand("run", "Simulate a scenario and write trace, anomalies and impact report");
    run->add_option("--scenario", scenario_file, "Scenario JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--steps", steps, "Override total_control_steps")->check(CLI::NonNegativeNumber);

    std::string case_file;
    int k = 0;
    int n = 6;
    int max_iterations = 300;
    auto* gen = app.add_subcommand("generate-bias", "Write the four bias matrices of one control step as CSV");
    gen->add_option("--case", case_file, "Attack case JSON (seven lists, optionally under \"attack\")")
        ->required()
        ->check(CLI::ExistingFile);
    gen->add_option("--k", k, "Control step")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();
    gen->add_option("--n", n, "Follower count")->capture_default_str();
    gen->add_option("--max-iterations", max_iterations, "Rows per matrix")->capture_default_str();

    std::string trace_file;
    std::string config_file;
    auto* replay = app.add_subcommand("replay-detect", "Re-run detection over a recorded trace");
    replay->add_option("--trace", trace_file, "trace.csv from a run")->required()->check(CLI::ExistingFile);
    replay->add_option("--config", config_file, "JSON with \"seed\" and \"detection\" (a run's scenario.json works)")
        ->required()
        ->check(CLI::ExistingFile);
    replay->add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run) {
            platoon::Scenario sc = platoon::load_scenario(scenario_file);
            if (seed) sc.seed = *seed;
            if (steps) sc.sim.total_control_steps = *steps;
            const platoon::RunResult result = platoon::simulate(sc);
            platoon::write_artifacts(sc, result, out_dir);
            std::printf("%d control steps, %zu anomalies, output in %s\n", sc.sim.total_control_steps,
                        result.anomalies.size(), out_dir.c_str());
        } else if (*gen) {
            platoon::generate_bias_cmd(case_file, k, n, max_iterations, out_dir);
        } else if (*replay) {
            platoon::replay_detect_cmd(trace_file, config_file, out_dir);
        }
    } catch (const platoon::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const platoon::ContractError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const platoon::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

// Command-line front end: evolve, replay, dump-module.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tensoft/experiment.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Co-evolution of morphology and control for modular tensegrity robots"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<int> workers;
    auto* evolve = app.add_subcommand("evolve", "Run every configured evolution and write results");
    evolve->add_option("--config", config_path, "Experiment config (JSON)")->required();
    evolve->add_option("--workers", workers, "Parallel workers (overrides the config)");

    std::string genome_path, replay_config, replay_out;
    auto* replay = app.add_subcommand("replay", "Re-simulate a saved champion and write its trajectory");
    replay->add_option("--genome", genome_path, "best_genome.json artifact")->required();
    replay->add_option("--config", replay_config, "Experiment config (JSON)")->required();
    replay->add_option("--out", replay_out, "Trajectory CSV to write")->required();

    std::string dump_out;
    auto* dump = app.add_subcommand("dump-module", "Write the canonical module template as JSON");
    dump->add_option("--out", dump_out, "Output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? tensoft::kExitOk : tensoft::kExitUsage;
    }

    if (*evolve)
        return tensoft::cmd_evolve(config_path, workers, std::cout, std::cerr);
    if (*replay)
        return tensoft::cmd_replay(genome_path, replay_config, replay_out, std::cout, std::cerr);
    return tensoft::cmd_dump_module(dump_out, std::cerr);
}

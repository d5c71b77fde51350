#ifndef TENSOFT_EXPERIMENT_HPP
#define TENSOFT_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tensoft/evolution.hpp"

namespace tensoft {

inline constexpr int kConfigSchemaVersion = 1;

/// One JSON document describing a batch of evolution runs: every regime in
/// `regimes` is evolved once per seed.
struct ExperimentConfig {
    EvolutionConfig evolution;  // stiffness_regime and master_seed are set per run
    std::vector<StiffnessRegime> regimes{StiffnessRegime::High, StiffnessRegime::Low};
    int run_count = 5;
    std::vector<std::uint64_t> seed_list;  // empty: seeds 1..run_count
    std::filesystem::path output_directory = "results";

    std::vector<std::uint64_t> seeds() const;
    EvolutionConfig run_config(StiffnessRegime regime, std::uint64_t seed) const;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parses and validates a config document. Missing keys take their
/// defaults; unknown keys are rejected. Messages name the offending line.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

struct RunSummary {
    StiffnessRegime regime = StiffnessRegime::Low;
    std::uint64_t seed = 0;
    double best_fitness = 0.0;
    int best_module_count = 0;
    std::string gait;
};

/// Best-genome artifact.
struct Champion {
    Genome genome;
    StiffnessRegime regime = StiffnessRegime::Low;
    std::uint64_t seed = 0;
    double fitness = 0.0;
    std::string gait;
};

std::string champion_to_json(const Champion& champion);
Champion champion_from_json(std::string_view text);

std::string module_template_json(const ModuleTemplate& module);

/// Gait label of a simulated genome, or "Unavailable" when the run is too
/// short to classify or diverged.
std::string gait_label(const Genome& genome, const EvolutionConfig& config);

std::filesystem::path run_directory(const std::filesystem::path& root, StiffnessRegime regime, std::uint64_t seed);

void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& rows);
void write_summary_table(std::ostream& out, const std::vector<RunSummary>& rows);

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

int cmd_evolve(const std::filesystem::path& config_path, std::optional<int> workers, std::ostream& log,
               std::ostream& err);
int cmd_replay(const std::filesystem::path& genome_path, const std::filesystem::path& config_path,
               const std::filesystem::path& out_path, std::ostream& log, std::ostream& err);
int cmd_dump_module(const std::filesystem::path& out_path, std::ostream& err);

}  // namespace tensoft

#endif  // TENSOFT_EXPERIMENT_HPP

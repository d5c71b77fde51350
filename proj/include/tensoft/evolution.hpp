#ifndef TENSOFT_EVOLUTION_HPP
#define TENSOFT_EVOLUTION_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "tensoft/gait.hpp"
#include "tensoft/genome.hpp"
#include "tensoft/physics.hpp"
#include "tensoft/robot.hpp"

namespace tensoft {

struct EvolutionConfig {
    int population_size = 50;
    int generations = 200;
    double replacement_fraction = 0.5;
    double crossover_rate = 0.9;
    double mutation_rate_per_bit = 0.01;
    double sim_duration = 10.0;  // s, scored window after settling
    StiffnessRegime stiffness_regime = StiffnessRegime::Low;
    std::uint64_t master_seed = 1;
    int workers = 1;

    SimParams sim;
    MaterialParams low_material;  // HIGH is derived from this
    BodyParams body;
    GaitThresholds gait;

    MaterialParams material() const { return material_for(stiffness_regime, low_material); }
    /// Throws std::invalid_argument on out-of-range settings.
    void validate() const;
};

struct Evaluation {
    double fitness = 0.0;
    int module_count = 0;
    bool diverged = false;
};

using FitnessFunction = std::function<Evaluation(const Genome&)>;

/// Physics fitness: horizontal COM distance over the scored window, 0 on
/// divergence.
Evaluation evaluate(const Genome& genome, const EvolutionConfig& config);
double evaluate_fitness(const Genome& genome, const EvolutionConfig& config);

/// Full decode/assemble/settle/run pipeline, for replay and gait labelling.
struct Simulation {
    DecodedRobot decoded;
    AssembledRobot robot;
    Trajectory trajectory;
    double fitness = 0.0;
};
Simulation simulate(const Genome& genome, const EvolutionConfig& config);

/// Horizontal distance between the first and last COM samples.
double horizontal_displacement(const Trajectory& trajectory);

struct Individual {
    Genome genome;
    double fitness = 0.0;
    int module_count = 0;
    int birth_generation = 0;
};

/// Memoises a fitness function by genome bits and spreads uncached
/// evaluations over worker threads. Results never depend on worker count.
class CachedEvaluator {
public:
    CachedEvaluator(FitnessFunction fn, int workers = 1);

    void evaluate(std::span<Individual> batch);

    std::size_t cache_size() const { return cache_.size(); }
    std::size_t cache_hits() const { return hits_; }
    std::size_t divergences() const { return divergences_; }

private:
    FitnessFunction fn_;
    int workers_;
    std::unordered_map<Genome, Evaluation> cache_;
    std::size_t hits_ = 0;
    std::size_t divergences_ = 0;
};

/// Sort key of the steady-state merge: fitter first, then older, then the
/// earlier position in parents-then-offspring order.
void rank_population(std::vector<Individual>& population);

/// Number of offspring per steady-state wave.
int offspring_count(const EvolutionConfig& config);

/// Breeds the offspring of one wave. All random draws happen here, in this
/// order per pair: roulette pick of parent 1, of parent 2, crossover coin,
/// cut point (only when crossing), per-bit mutation of child 1, then child 2.
std::vector<Individual> breed(std::span<const Individual> population, const EvolutionConfig& config, Rng& rng,
                              int generation);

/// One steady-state wave: breed, evaluate offspring, merge with the parents
/// and keep the best population_size.
std::vector<Individual> ga_generation(std::vector<Individual> population, const EvolutionConfig& config, Rng& rng,
                                      CachedEvaluator& evaluator, int generation);

struct HistoryRow {
    int generation = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    double std_fitness = 0.0;
    int best_module_count = 0;
    Genome best_genome;
};

struct EvolutionHistory {
    std::vector<HistoryRow> rows;
    std::vector<Individual> final_population;
    std::size_t evaluations = 0;
    std::size_t cache_hits = 0;
    std::size_t divergences = 0;

    const HistoryRow& best() const { return rows.back(); }
};

HistoryRow summarize(std::span<const Individual> ranked_population, int generation);

EvolutionHistory run_evolution(const EvolutionConfig& config, const FitnessFunction& fitness);
EvolutionHistory run_evolution(const EvolutionConfig& config);

void write_history_csv(std::ostream& out, const EvolutionHistory& history);

}  // namespace tensoft

#endif  // TENSOFT_EVOLUTION_HPP

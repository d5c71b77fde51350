#include "tensoft/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace tensoft {

void EvolutionConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw std::invalid_argument(what);
    };
    require(population_size >= 2, "population_size must be at least 2");
    require(generations >= 0, "generations must be non-negative");
    require(replacement_fraction > 0.0 && replacement_fraction <= 1.0, "replacement_fraction must lie in (0, 1]");
    require(crossover_rate >= 0.0 && crossover_rate <= 1.0, "crossover_rate must lie in [0, 1]");
    require(mutation_rate_per_bit >= 0.0 && mutation_rate_per_bit <= 1.0,
            "mutation_rate_per_bit must lie in [0, 1]");
    require(sim_duration > 0.0, "sim_duration must be positive");
    require(workers >= 1, "workers must be at least 1");
    require(sim.timestep > 0.0, "timestep must be positive");
    require(sim.friction_coefficient >= 0.0, "friction_coefficient must be non-negative");
    require(sim.constraint_iterations >= 1, "constraint_iterations must be at least 1");
    require(sim.settle_duration >= 0.0, "settle_duration must be non-negative");
    require(sim.sample_interval >= sim.timestep, "sample_interval must be at least one timestep");
    require(sim.ground_normal_stiffness > 0.0 && sim.ground_normal_damping >= 0.0, "invalid ground contact constants");
    const double high = low_material.youngs_modulus * kHighToLowStiffness;
    require(low_material.youngs_modulus >= 10e6 && high <= 100e6,
            "youngs_modulus of both regimes must stay within 10-100 MPa");
    require(low_material.cable_cross_section > 0.0, "cable_cross_section must be positive");
    require(low_material.cable_damping_ratio >= 0.0, "cable_damping_ratio must be non-negative");
    require(body.strut_length > 0.0 && body.node_mass > 0.0, "strut_length and node_mass must be positive");
    require(body.cable_prestrain >= 0.0 && body.cable_prestrain < 1.0, "cable_prestrain must lie in [0, 1)");
    require(body.max_contraction > 0.0 && body.max_contraction < 1.0, "max_contraction must lie in (0, 1)");
    require(body.actuation_stiffness_factor > 0.0, "actuation_stiffness_factor must be positive");
}

double horizontal_displacement(const Trajectory& trajectory)
{
    if (trajectory.size() < 2)
        return 0.0;
    const Vec3 d = trajectory.center_of_mass.back() - trajectory.center_of_mass.front();
    return std::hypot(d.x(), d.y());
}

namespace {

const ModuleTemplate& template_for(double strut_length)
{
    thread_local ModuleTemplate cached = build_canonical_module(0.2);
    if (cached.strut_length != strut_length)
        cached = build_canonical_module(strut_length);
    return cached;
}

}  // namespace

Simulation simulate(const Genome& genome, const EvolutionConfig& config)
{
    Simulation s;
    s.decoded = decode(genome);
    s.robot = assemble(s.decoded.placements, template_for(config.body.strut_length), config.material(), config.body);
    const BodyState rest = settle(s.robot, config.sim);
    s.trajectory = run(s.robot, rest, s.decoded.control, config.sim_duration, config.sim);
    const double d = horizontal_displacement(s.trajectory);
    s.fitness = std::isfinite(d) ? d : 0.0;
    return s;
}

Evaluation evaluate(const Genome& genome, const EvolutionConfig& config)
{
    Evaluation e;
    try {
        const Simulation s = simulate(genome, config);
        e.fitness = s.fitness;
        e.module_count = s.decoded.module_count();
    } catch (const SimulationDiverged&) {
        e.fitness = 0.0;
        e.module_count = decode(genome).module_count();
        e.diverged = true;
    }
    return e;
}

double evaluate_fitness(const Genome& genome, const EvolutionConfig& config)
{
    return evaluate(genome, config).fitness;
}

CachedEvaluator::CachedEvaluator(FitnessFunction fn, int workers) : fn_(std::move(fn)), workers_(std::max(1, workers))
{
}

void CachedEvaluator::evaluate(std::span<Individual> batch)
{
    std::vector<std::size_t> todo;
    std::unordered_map<Genome, std::size_t> pending;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (cache_.contains(batch[i].genome) || pending.contains(batch[i].genome))
            continue;
        pending.emplace(batch[i].genome, todo.size());
        todo.push_back(i);
    }

    std::vector<Evaluation> results(todo.size());
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(workers_), todo.size());
    if (threads <= 1) {
        for (std::size_t k = 0; k < todo.size(); ++k)
            results[k] = fn_(batch[todo[k]].genome);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < todo.size(); k = next++)
                    results[k] = fn_(batch[todo[k]].genome);
            });
        }
    }

    for (std::size_t k = 0; k < todo.size(); ++k) {
        Evaluation e = results[k];
        if (!std::isfinite(e.fitness) || e.fitness < 0.0)
            e.fitness = 0.0;
        if (e.diverged)
            ++divergences_;
        cache_.emplace(batch[todo[k]].genome, e);
    }
    hits_ += batch.size() - todo.size();

    for (auto& ind : batch) {
        const Evaluation& e = cache_.at(ind.genome);
        ind.fitness = e.fitness;
        ind.module_count = e.module_count;
    }
}

void rank_population(std::vector<Individual>& population)
{
    std::stable_sort(population.begin(), population.end(), [](const Individual& a, const Individual& b) {
        if (a.fitness != b.fitness)
            return a.fitness > b.fitness;
        return a.birth_generation < b.birth_generation;
    });
}

int offspring_count(const EvolutionConfig& config)
{
    const auto n = static_cast<int>(std::lround(config.population_size * config.replacement_fraction));
    return std::max(1, n);
}

namespace {

std::size_t roulette(std::span<const Individual> population, Rng& rng)
{
    double total = 0.0;
    for (const auto& ind : population)
        total += ind.fitness;
    if (!(total > 0.0))
        return static_cast<std::size_t>(rng.below(population.size()));
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < population.size(); ++i) {
        if (population[i].fitness <= 0.0)
            continue;
        acc += population[i].fitness;
        last_positive = i;
        if (target < acc)
            return i;
    }
    return last_positive;
}

}  // namespace

std::vector<Individual> breed(std::span<const Individual> population, const EvolutionConfig& config, Rng& rng,
                              int generation)
{
    const int wanted = offspring_count(config);
    std::vector<Individual> children;
    children.reserve(static_cast<std::size_t>(wanted) + 1);
    while (static_cast<int>(children.size()) < wanted) {
        const Genome& mom = population[roulette(population, rng)].genome;
        const Genome& dad = population[roulette(population, rng)].genome;
        std::pair<Genome, Genome> kids{mom, dad};
        if (rng.uniform() < config.crossover_rate)
            kids = crossover(mom, dad, rng);
        Individual a, b;
        a.genome = mutate(kids.first, config.mutation_rate_per_bit, rng);
        b.genome = mutate(kids.second, config.mutation_rate_per_bit, rng);
        a.birth_generation = b.birth_generation = generation;
        children.push_back(std::move(a));
        children.push_back(std::move(b));
    }
    children.resize(static_cast<std::size_t>(wanted));
    return children;
}

std::vector<Individual> ga_generation(std::vector<Individual> population, const EvolutionConfig& config, Rng& rng,
                                      CachedEvaluator& evaluator, int generation)
{
    std::vector<Individual> children = breed(population, config, rng, generation);
    evaluator.evaluate(children);

    const auto size = population.size();
    population.insert(population.end(), std::make_move_iterator(children.begin()),
                      std::make_move_iterator(children.end()));
    rank_population(population);
    population.resize(size);
    return population;
}

HistoryRow summarize(std::span<const Individual> ranked_population, int generation)
{
    HistoryRow row;
    row.generation = generation;
    const auto n = static_cast<double>(ranked_population.size());
    double sum = 0.0;
    for (const auto& ind : ranked_population)
        sum += ind.fitness;
    row.mean_fitness = sum / n;
    double sq = 0.0;
    for (const auto& ind : ranked_population)
        sq += (ind.fitness - row.mean_fitness) * (ind.fitness - row.mean_fitness);
    row.std_fitness = std::sqrt(sq / n);
    row.best_fitness = ranked_population.front().fitness;
    row.best_module_count = ranked_population.front().module_count;
    row.best_genome = ranked_population.front().genome;
    return row;
}

EvolutionHistory run_evolution(const EvolutionConfig& config, const FitnessFunction& fitness)
{
    config.validate();
    Rng rng(config.master_seed);
    CachedEvaluator evaluator(fitness, config.workers);

    std::vector<Individual> population(static_cast<std::size_t>(config.population_size));
    for (auto& ind : population)
        ind.genome = random_genome(rng.next());
    evaluator.evaluate(population);
    rank_population(population);

    EvolutionHistory history;
    history.rows.push_back(summarize(population, 0));
    for (int g = 1; g <= config.generations; ++g) {
        population = ga_generation(std::move(population), config, rng, evaluator, g);
        history.rows.push_back(summarize(population, g));
    }
    history.final_population = std::move(population);
    history.evaluations = evaluator.cache_size();
    history.cache_hits = evaluator.cache_hits();
    history.divergences = evaluator.divergences();
    return history;
}

EvolutionHistory run_evolution(const EvolutionConfig& config)
{
    return run_evolution(config, [config](const Genome& g) { return evaluate(g, config); });
}

void write_history_csv(std::ostream& out, const EvolutionHistory& history)
{
    out << "generation,best_fitness,mean_fitness,std_fitness,best_module_count\n";
    char buf[128];
    for (const auto& r : history.rows) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d\n", r.generation, r.best_fitness, r.mean_fitness,
                      r.std_fitness, r.best_module_count);
        out << buf;
    }
}

}  // namespace tensoft

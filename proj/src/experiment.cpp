#include "tensoft/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace tensoft {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::uint64_t> ExperimentConfig::seeds() const
{
    if (!seed_list.empty())
        return seed_list;
    std::vector<std::uint64_t> s;
    for (int i = 1; i <= run_count; ++i)
        s.push_back(static_cast<std::uint64_t>(i));
    return s;
}

EvolutionConfig ExperimentConfig::run_config(StiffnessRegime regime, std::uint64_t seed) const
{
    EvolutionConfig c = evolution;
    c.stiffness_regime = regime;
    c.master_seed = seed;
    return c;
}

namespace {

// 1-based line of the first `"key"` found after the previous key of `path`.
int line_of(std::string_view text, const std::vector<std::string>& path)
{
    std::size_t pos = 0;
    for (const auto& key : path) {
        const auto found = text.find("\"" + key + "\"", pos);
        if (found == std::string_view::npos)
            break;
        pos = found;
    }
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class ConfigReader {
public:
    explicit ConfigReader(std::string_view text) : text_(text) {}

    [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const
    {
        std::string dotted;
        for (const auto& p : path)
            dotted += (dotted.empty() ? "" : ".") + p;
        throw ConfigError("config line " + std::to_string(line_of(text_, path)) + ": " + dotted + ": " + msg);
    }

    void reject_unknown(const json& obj, const std::vector<std::string>& path, const std::set<std::string>& allowed)
    {
        if (!obj.is_object())
            fail(path, "expected an object");
        for (const auto& [key, value] : obj.items()) {
            if (!allowed.contains(key)) {
                auto p = path;
                p.push_back(key);
                fail(p, "unknown key");
            }
        }
    }

    void number(const json& obj, std::vector<std::string> path, const std::string& key, double& out)
    {
        if (!obj.contains(key))
            return;
        path.push_back(key);
        const json& v = obj.at(key);
        if (!v.is_number())
            fail(path, "expected a number");
        out = v.get<double>();
        if (!std::isfinite(out))
            fail(path, "must be finite");
    }

    template <typename Int>
    void integer(const json& obj, std::vector<std::string> path, const std::string& key, Int& out)
    {
        if (!obj.contains(key))
            return;
        path.push_back(key);
        const json& v = obj.at(key);
        if (!v.is_number_integer())
            fail(path, "expected an integer");
        if constexpr (std::is_unsigned_v<Int>) {
            if (v.is_number_unsigned())
                out = v.get<Int>();
            else if (v.get<std::int64_t>() < 0)
                fail(path, "must be non-negative");
            else
                out = static_cast<Int>(v.get<std::int64_t>());
        } else {
            out = v.get<Int>();
        }
    }

private:
    std::string_view text_;
};

ordered_json sim_json(const SimParams& s)
{
    ordered_json j;
    j["timestep"] = s.timestep;
    j["gravity"] = s.gravity;
    j["ground_normal_stiffness"] = s.ground_normal_stiffness;
    j["ground_normal_damping"] = s.ground_normal_damping;
    j["friction_coefficient"] = s.friction_coefficient;
    j["friction_regularization_speed"] = s.friction_regularization_speed;
    j["constraint_iterations"] = s.constraint_iterations;
    j["settle_duration"] = s.settle_duration;
    j["sample_interval"] = s.sample_interval;
    return j;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    ConfigReader r(text);
    r.reject_unknown(doc, {},
                     {"schema_version", "output_directory", "run_count", "seed_list", "regimes", "evolution",
                      "simulation", "material", "body", "gait"});

    ExperimentConfig c;
    int version = 0;
    if (!doc.contains("schema_version"))
        r.fail({}, "missing schema_version");
    r.integer(doc, {}, "schema_version", version);
    if (version != kConfigSchemaVersion)
        r.fail({"schema_version"}, "unsupported schema version " + std::to_string(version));

    if (doc.contains("output_directory")) {
        if (!doc["output_directory"].is_string())
            r.fail({"output_directory"}, "expected a string");
        c.output_directory = doc["output_directory"].get<std::string>();
    }
    r.integer(doc, {}, "run_count", c.run_count);
    if (c.run_count < 0)
        r.fail({"run_count"}, "must be non-negative");
    if (doc.contains("seed_list")) {
        const json& seeds = doc["seed_list"];
        if (!seeds.is_array())
            r.fail({"seed_list"}, "expected an array of integers");
        for (const auto& s : seeds) {
            if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<std::int64_t>() < 0))
                r.fail({"seed_list"}, "seeds must be non-negative integers");
            c.seed_list.push_back(s.get<std::uint64_t>());
        }
        if (!c.seed_list.empty() && static_cast<int>(c.seed_list.size()) != c.run_count)
            r.fail({"seed_list"}, "must list exactly run_count seeds (or be empty)");
        if (std::set<std::uint64_t>(c.seed_list.begin(), c.seed_list.end()).size() != c.seed_list.size())
            r.fail({"seed_list"}, "seeds must be distinct");
    }
    if (doc.contains("regimes")) {
        const json& regimes = doc["regimes"];
        if (!regimes.is_array() || regimes.empty())
            r.fail({"regimes"}, "expected a non-empty array of \"LOW\"/\"HIGH\"");
        c.regimes.clear();
        for (const auto& g : regimes) {
            if (!g.is_string())
                r.fail({"regimes"}, "expected \"LOW\" or \"HIGH\"");
            try {
                c.regimes.push_back(parse_regime(g.get<std::string>()));
            } catch (const std::invalid_argument& e) {
                r.fail({"regimes"}, e.what());
            }
        }
        if (std::set<StiffnessRegime>(c.regimes.begin(), c.regimes.end()).size() != c.regimes.size())
            r.fail({"regimes"}, "regimes must be distinct");
    }

    EvolutionConfig& e = c.evolution;
    if (doc.contains("evolution")) {
        const json& j = doc["evolution"];
        const std::vector<std::string> p{"evolution"};
        r.reject_unknown(j, p,
                         {"population_size", "generations", "replacement_fraction", "crossover_rate",
                          "mutation_rate_per_bit", "sim_duration", "workers"});
        r.integer(j, p, "population_size", e.population_size);
        r.integer(j, p, "generations", e.generations);
        r.number(j, p, "replacement_fraction", e.replacement_fraction);
        r.number(j, p, "crossover_rate", e.crossover_rate);
        r.number(j, p, "mutation_rate_per_bit", e.mutation_rate_per_bit);
        r.number(j, p, "sim_duration", e.sim_duration);
        r.integer(j, p, "workers", e.workers);
    }
    if (doc.contains("simulation")) {
        const json& j = doc["simulation"];
        const std::vector<std::string> p{"simulation"};
        r.reject_unknown(j, p,
                         {"timestep", "gravity", "ground_normal_stiffness", "ground_normal_damping",
                          "friction_coefficient", "friction_regularization_speed", "constraint_iterations",
                          "settle_duration", "sample_interval"});
        r.number(j, p, "timestep", e.sim.timestep);
        r.number(j, p, "gravity", e.sim.gravity);
        r.number(j, p, "ground_normal_stiffness", e.sim.ground_normal_stiffness);
        r.number(j, p, "ground_normal_damping", e.sim.ground_normal_damping);
        r.number(j, p, "friction_coefficient", e.sim.friction_coefficient);
        r.number(j, p, "friction_regularization_speed", e.sim.friction_regularization_speed);
        r.integer(j, p, "constraint_iterations", e.sim.constraint_iterations);
        r.number(j, p, "settle_duration", e.sim.settle_duration);
        r.number(j, p, "sample_interval", e.sim.sample_interval);
    }
    if (doc.contains("material")) {
        const json& j = doc["material"];
        const std::vector<std::string> p{"material"};
        r.reject_unknown(j, p, {"low_youngs_modulus", "cable_cross_section", "cable_damping_ratio"});
        r.number(j, p, "low_youngs_modulus", e.low_material.youngs_modulus);
        r.number(j, p, "cable_cross_section", e.low_material.cable_cross_section);
        r.number(j, p, "cable_damping_ratio", e.low_material.cable_damping_ratio);
    }
    if (doc.contains("body")) {
        const json& j = doc["body"];
        const std::vector<std::string> p{"body"};
        r.reject_unknown(j, p,
                         {"strut_length", "node_mass", "cable_prestrain", "max_contraction",
                          "actuation_stiffness_factor", "spawn_clearance"});
        r.number(j, p, "strut_length", e.body.strut_length);
        r.number(j, p, "node_mass", e.body.node_mass);
        r.number(j, p, "cable_prestrain", e.body.cable_prestrain);
        r.number(j, p, "max_contraction", e.body.max_contraction);
        r.number(j, p, "actuation_stiffness_factor", e.body.actuation_stiffness_factor);
        r.number(j, p, "spawn_clearance", e.body.spawn_clearance);
    }
    if (doc.contains("gait")) {
        const json& j = doc["gait"];
        const std::vector<std::string> p{"gait"};
        r.reject_unknown(j, p,
                         {"static_displacement", "hop_airborne_fraction", "caterpillar_max_airborne",
                          "phase_wave_correlation", "roll_angle", "caterpillar_min_modules", "min_duration"});
        r.number(j, p, "static_displacement", e.gait.static_displacement);
        r.number(j, p, "hop_airborne_fraction", e.gait.hop_airborne_fraction);
        r.number(j, p, "caterpillar_max_airborne", e.gait.caterpillar_max_airborne);
        r.number(j, p, "phase_wave_correlation", e.gait.phase_wave_correlation);
        r.number(j, p, "roll_angle", e.gait.roll_angle);
        r.integer(j, p, "caterpillar_min_modules", e.gait.caterpillar_min_modules);
        r.number(j, p, "min_duration", e.gait.min_duration);
    }

    try {
        e.validate();
    } catch (const std::invalid_argument& ex) {
        // Point at the first field the message names, when there is one.
        const std::string msg = ex.what();
        const std::string field = msg.substr(0, msg.find(' '));
        for (const char* section : {"evolution", "simulation", "material", "body"}) {
            if (doc.contains(section) && doc[section].contains(field))
                r.fail({section, field}, msg);
        }
        throw ConfigError("config: " + msg);
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c)
{
    const EvolutionConfig& e = c.evolution;
    ordered_json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["output_directory"] = c.output_directory.string();
    j["run_count"] = c.run_count;
    j["seed_list"] = c.seed_list;
    j["regimes"] = json::array();
    for (auto g : c.regimes)
        j["regimes"].push_back(std::string(to_string(g)));
    j["evolution"] = {{"population_size", e.population_size},
                      {"generations", e.generations},
                      {"replacement_fraction", e.replacement_fraction},
                      {"crossover_rate", e.crossover_rate},
                      {"mutation_rate_per_bit", e.mutation_rate_per_bit},
                      {"sim_duration", e.sim_duration},
                      {"workers", e.workers}};
    j["simulation"] = sim_json(e.sim);
    j["material"] = {{"low_youngs_modulus", e.low_material.youngs_modulus},
                     {"cable_cross_section", e.low_material.cable_cross_section},
                     {"cable_damping_ratio", e.low_material.cable_damping_ratio}};
    j["body"] = {{"strut_length", e.body.strut_length},
                 {"node_mass", e.body.node_mass},
                 {"cable_prestrain", e.body.cable_prestrain},
                 {"max_contraction", e.body.max_contraction},
                 {"actuation_stiffness_factor", e.body.actuation_stiffness_factor},
                 {"spawn_clearance", e.body.spawn_clearance}};
    j["gait"] = {{"static_displacement", e.gait.static_displacement},
                 {"hop_airborne_fraction", e.gait.hop_airborne_fraction},
                 {"caterpillar_max_airborne", e.gait.caterpillar_max_airborne},
                 {"phase_wave_correlation", e.gait.phase_wave_correlation},
                 {"roll_angle", e.gait.roll_angle},
                 {"caterpillar_min_modules", e.gait.caterpillar_min_modules},
                 {"min_duration", e.gait.min_duration}};
    return j.dump(2) + "\n";
}

std::string champion_to_json(const Champion& champion)
{
    const DecodedRobot decoded = decode(champion.genome);
    ordered_json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["regime"] = std::string(to_string(champion.regime));
    j["seed"] = champion.seed;
    j["genome_bits"] = kGenomeBits;
    j["genome_hex"] = to_hex(champion.genome);
    j["fitness"] = champion.fitness;
    j["module_count"] = decoded.module_count();
    j["gait"] = champion.gait;
    j["morphology"] = json::array();
    for (const auto& p : decoded.placements) {
        ordered_json m;
        m["module"] = p.module_index;
        if (p.parent_index) {
            m["parent"] = *p.parent_index;
            m["parent_face"] = p.parent_face;
            m["orientation"] = p.orientation;
        } else {
            m["parent"] = nullptr;
        }
        m["actuation_face"] = p.actuation_face;
        j["morphology"].push_back(m);
    }
    j["control"] = json::array();
    for (const auto& g : decoded.control)
        j["control"].push_back({{"frequency", g.frequency}, {"amplitude", g.amplitude}, {"phase", g.phase}});
    return j.dump(2) + "\n";
}

Champion champion_from_json(std::string_view text)
{
    try {
        const json j = json::parse(text);
        Champion c;
        c.genome = genome_from_hex(j.at("genome_hex").get<std::string>());
        c.regime = parse_regime(j.at("regime").get<std::string>());
        c.seed = j.value("seed", std::uint64_t{0});
        c.fitness = j.at("fitness").get<double>();
        c.gait = j.value("gait", std::string{});
        return c;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed genome artifact: ") + e.what());
    }
}

std::string module_template_json(const ModuleTemplate& module)
{
    ordered_json j;
    j["strut_length"] = module.strut_length;
    j["nodes"] = json::array();
    for (const auto& n : module.nodes)
        j["nodes"].push_back({n.x(), n.y(), n.z()});
    j["struts"] = json::array();
    for (const auto& [a, b] : module.struts)
        j["struts"].push_back({a, b});
    j["cables"] = json::array();
    for (const auto& [a, b] : module.cables)
        j["cables"].push_back({a, b});
    j["faces"] = json::array();
    for (int f = 0; f < kFacesPerModule; ++f) {
        const Face& face = module.faces[f];
        ordered_json o;
        o["id"] = f;
        o["vertices"] = face.vertex_ids;
        o["normal"] = {face.outward_normal.x(), face.outward_normal.y(), face.outward_normal.z()};
        j["faces"].push_back(o);
    }
    return j.dump(2) + "\n";
}

std::string gait_label(const Genome& genome, const EvolutionConfig& config)
{
    try {
        const Simulation s = simulate(genome, config);
        return std::string(to_label(classify_gait(s.trajectory, s.decoded, config.gait)));
    } catch (const SimulationDiverged&) {
        return "Unavailable";
    } catch (const ClassificationUnavailable&) {
        return "Unavailable";
    }
}

std::filesystem::path run_directory(const std::filesystem::path& root, StiffnessRegime regime, std::uint64_t seed)
{
    return root / (std::string(to_string(regime)) + "_seed" + std::to_string(seed));
}

void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& rows)
{
    out << "seed,regime,best_fitness,best_module_count,gait\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.best_fitness);
        out << r.seed << ',' << to_string(r.regime) << ',' << buf << ',' << r.best_module_count << ',' << r.gait
            << '\n';
    }
}

void write_summary_table(std::ostream& out, const std::vector<RunSummary>& rows)
{
    out << std::left << std::setw(6) << "Run" << std::setw(10) << "Seed" << std::setw(11) << "Stiffness"
        << std::setw(10) << "Modules" << std::setw(14) << "Fitness (m)" << "Strategy\n";
    int i = 1;
    for (const auto& r : rows) {
        std::ostringstream fit;
        fit << std::fixed << std::setprecision(4) << r.best_fitness;
        out << std::left << std::setw(6) << i++ << std::setw(10) << r.seed << std::setw(11)
            << (r.regime == StiffnessRegime::High ? "High" : "Low") << std::setw(10) << r.best_module_count
            << std::setw(14) << fit.str() << r.gait << '\n';
    }
}

namespace {

void write_file_atomically(const std::filesystem::path& path, const std::string& content)
{
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out)
            throw std::runtime_error("failed writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunSummary execute_run(const ExperimentConfig& config, StiffnessRegime regime, std::uint64_t seed, int eval_workers)
{
    const auto dir = run_directory(config.output_directory, regime, seed);
    const auto marker = dir / "DONE";
    const auto genome_path = dir / "best_genome.json";

    if (std::filesystem::exists(marker) && std::filesystem::exists(genome_path)) {
        const Champion c = champion_from_json(read_file(genome_path));
        return {regime, seed, c.fitness, decode(c.genome).module_count(), c.gait};
    }

    std::filesystem::create_directories(dir);
    EvolutionConfig rc = config.run_config(regime, seed);
    rc.workers = eval_workers;
    const EvolutionHistory history = run_evolution(rc);
    const HistoryRow& best = history.best();

    Champion champion{best.best_genome, regime, seed, best.best_fitness, gait_label(best.best_genome, rc)};

    std::ostringstream csv;
    write_history_csv(csv, history);
    write_file_atomically(dir / "history.csv", csv.str());
    write_file_atomically(genome_path, champion_to_json(champion));
    write_file_atomically(marker, "");
    return {regime, seed, best.best_fitness, best.best_module_count, champion.gait};
}

}  // namespace

int cmd_evolve(const std::filesystem::path& config_path, std::optional<int> workers, std::ostream& log,
               std::ostream& err)
{
    ExperimentConfig config;
    try {
        config = load_config(config_path);
        if (workers) {
            if (*workers < 1)
                throw ConfigError("--workers must be at least 1");
            config.evolution.workers = *workers;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        std::filesystem::create_directories(config.output_directory);
        struct Job {
            StiffnessRegime regime;
            std::uint64_t seed;
        };
        std::vector<Job> jobs;
        for (auto regime : config.regimes)
            for (auto seed : config.seeds())
                jobs.push_back({regime, seed});

        const int total_workers = config.evolution.workers;
        const auto run_threads =
            std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(total_workers), jobs.size()));
        const int eval_workers = std::max(1, total_workers / static_cast<int>(run_threads));

        std::vector<RunSummary> rows(jobs.size());
        std::vector<std::string> failures(jobs.size());
        std::mutex log_mutex;
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t k = next++; k < jobs.size(); k = next++) {
                try {
                    rows[k] = execute_run(config, jobs[k].regime, jobs[k].seed, eval_workers);
                    std::lock_guard lock(log_mutex);
                    log << to_string(jobs[k].regime) << " seed " << jobs[k].seed << ": best fitness "
                        << rows[k].best_fitness << " m, " << rows[k].best_module_count << " modules, "
                        << rows[k].gait << '\n';
                } catch (const std::exception& e) {
                    failures[k] = e.what();
                }
            }
        };
        {
            std::vector<std::jthread> pool;
            for (std::size_t t = 1; t < run_threads; ++t)
                pool.emplace_back(worker);
            worker();
        }
        for (std::size_t k = 0; k < jobs.size(); ++k) {
            if (!failures[k].empty()) {
                err << "error: run " << to_string(jobs[k].regime) << " seed " << jobs[k].seed << ": " << failures[k]
                    << '\n';
                return kExitRuntime;
            }
        }

        std::ostringstream csv, table;
        write_summary_csv(csv, rows);
        write_summary_table(table, rows);
        write_file_atomically(config.output_directory / "summary.csv", csv.str());
        write_file_atomically(config.output_directory / "summary.txt", table.str());
        log << table.str();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_replay(const std::filesystem::path& genome_path, const std::filesystem::path& config_path,
               const std::filesystem::path& out_path, std::ostream& log, std::ostream& err)
{
    ExperimentConfig config;
    Champion champion;
    try {
        config = load_config(config_path);
        champion = champion_from_json(read_file(genome_path));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    StiffnessRegime regime = champion.regime;
    if (std::find(config.regimes.begin(), config.regimes.end(), regime) == config.regimes.end()) {
        regime = config.regimes.front();
        err << "warning: genome was evolved under " << to_string(champion.regime) << " stiffness; replaying under "
            << to_string(regime) << " from the config\n";
    }

    try {
        const EvolutionConfig rc = config.run_config(regime, champion.seed);
        const Simulation s = simulate(champion.genome, rc);
        std::string gait;
        try {
            gait = std::string(to_label(classify_gait(s.trajectory, s.decoded, rc.gait)));
        } catch (const ClassificationUnavailable&) {
            gait = "Unavailable";
        }
        std::ostringstream csv;
        write_trajectory_csv(csv, s.trajectory);
        write_file_atomically(out_path, csv.str());

        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", s.fitness);
        log << "regime " << to_string(regime) << '\n';
        log << "fitness " << buf << '\n';
        log << "gait " << gait << '\n';
        if (regime == champion.regime)
            log << "matches stored fitness: " << (s.fitness == champion.fitness ? "yes" : "no") << '\n';
    } catch (const SimulationDiverged& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_dump_module(const std::filesystem::path& out_path, std::ostream& err)
{
    try {
        write_file_atomically(out_path, module_template_json(build_canonical_module(BodyParams{}.strut_length)));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace tensoft

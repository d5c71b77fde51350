// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Criteria 3 and 6-8 share one desk-scale batch written under the directory
// given as the first argument (default: ./acceptance_runs).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tensoft/evolution.hpp"
#include "tensoft/experiment.hpp"
#include "tensoft/genome.hpp"
#include "tensoft/geometry.hpp"
#include "tensoft/physics.hpp"

using namespace tensoft;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- 1

Outcome geometry_suite()
{
    const ModuleTemplate m = build_canonical_module(0.2);
    std::vector<std::string> problems;
    auto require = [&](bool ok, const std::string& what) {
        if (!ok)
            problems.push_back(what);
    };
    require(m.nodes.size() == 12, "node count");
    require(m.struts.size() == 6, "strut count");
    require(m.cables.size() == 24, "cable count");

    std::set<std::pair<int, int>> cable_set;
    std::vector<int> strut_deg(12, 0), cable_deg(12, 0);
    for (auto [a, b] : m.cables) {
        cable_set.insert({std::min(a, b), std::max(a, b)});
        ++cable_deg[static_cast<std::size_t>(a)];
        ++cable_deg[static_cast<std::size_t>(b)];
    }
    for (auto [a, b] : m.struts) {
        ++strut_deg[static_cast<std::size_t>(a)];
        ++strut_deg[static_cast<std::size_t>(b)];
    }
    require(cable_set.size() == 24, "duplicate cables");
    for (int i = 0; i < 12; ++i)
        require(strut_deg[static_cast<std::size_t>(i)] == 1 && cable_deg[static_cast<std::size_t>(i)] == 4,
                "incidence of node " + std::to_string(i));

    // Every node triple: the all-cable triangles are exactly the 8 faces.
    auto is_cable = [&](int a, int b) { return cable_set.count({std::min(a, b), std::max(a, b)}) > 0; };
    std::set<std::set<int>> triangles;
    for (int a = 0; a < 12; ++a)
        for (int b = a + 1; b < 12; ++b)
            for (int c = b + 1; c < 12; ++c)
                if (is_cable(a, b) && is_cable(b, c) && is_cable(a, c))
                    triangles.insert({a, b, c});
    require(triangles.size() == 8, "cable triangle count " + std::to_string(triangles.size()));
    std::set<std::set<int>> faces;
    for (FaceId f = 0; f < 8; ++f) {
        const Face& face = m.faces[static_cast<std::size_t>(f)];
        faces.insert({face.vertex_ids[0], face.vertex_ids[1], face.vertex_ids[2]});
        require((face.outward_normal - face_direction<double>(f)).norm() < 1e-12, "face normal");
        require(face.centroid().dot(face.outward_normal) > 0.0, "face outward");
    }
    require(faces == triangles, "faces differ from cable triangles");

    int opposite_pairs = 0;
    for (FaceId f = 0; f < 4; ++f) {
        const Face& a = m.faces[static_cast<std::size_t>(f)];
        const Face& b = m.faces[static_cast<std::size_t>(opposite_face(f))];
        std::set<int> both(a.vertex_ids.begin(), a.vertex_ids.end());
        both.insert(b.vertex_ids.begin(), b.vertex_ids.end());
        if (both.size() == 6 && (a.outward_normal + b.outward_normal).norm() < 1e-12 &&
            (a.centroid() + b.centroid()).norm() < 1e-12)
            ++opposite_pairs;
    }
    require(opposite_pairs == 4, "opposite face pairs " + std::to_string(opposite_pairs));

    Outcome o;
    o.pass = problems.empty();
    o.detail = o.pass ? "12 nodes, 6 struts, 24 cables, 8 faces, 4 opposite pairs" : problems.front();
    return o;
}

// ---------------------------------------------------------------- 2

AssembledRobot chain(int modules, StiffnessRegime regime)
{
    const ModuleTemplate m = build_canonical_module(0.2);
    std::vector<ModulePlacement> p(static_cast<std::size_t>(modules));
    for (int i = 0; i < modules; ++i) {
        auto& pl = p[static_cast<std::size_t>(i)];
        pl.module_index = i;
        pl.actuation_face = (3 * i + 1) % 8;
        if (i > 0) {
            pl.parent_index = i - 1;
            pl.parent_face = i % 7;
            pl.orientation = i % 3;
        }
    }
    return assemble(p, m, material_for(regime, MaterialParams{}));
}

double strut_error(const Eigen::Matrix3Xd& x, const AssembledRobot& robot)
{
    double worst = 0.0;
    for (const auto& s : robot.struts)
        worst = std::max(worst, std::abs((x.col(s.b) - x.col(s.a)).norm() - s.length) / s.length);
    return worst;
}

Outcome physics_suite()
{
    std::vector<std::string> notes;
    bool ok = true;

    // (a) momentum in free space with random motion and active tendons.
    {
        SimParams p;
        p.gravity = 0.0;
        p.ground_enabled = false;
        double worst = 0.0;
        for (int modules : {1, 3}) {
            const AssembledRobot robot = chain(modules, StiffnessRegime::High);
            std::mt19937_64 rng(5);
            std::normal_distribution<double> n(0.0, 0.2);
            BodyState s = initial_state(robot);
            for (Eigen::Index i = 0; i < s.velocities.size(); ++i)
                s.velocities.data()[i] = n(rng);
            const std::vector<ControlGene> ctl(static_cast<std::size_t>(modules), ControlGene{0.9, 1.0, 0.2});
            const double scale = s.velocities.rowwise().sum().norm();
            for (int block = 0; block < 3; ++block) {
                const Vec3 before = s.velocities.rowwise().sum();
                for (int k = 0; k < 1000; ++k)
                    advance(s, robot, ctl, p);
                worst = std::max(worst, (s.velocities.rowwise().sum() - before).norm() / scale);
            }
        }
        ok = ok && worst <= 1e-9;
        notes.push_back("momentum " + fmt("%.1e", worst));
    }

    // (b), (c) a 10 s actuated ground run per regime, checked at every sample.
    {
        double worst_strut = 0.0;
        long bad_cables = 0, samples = 0;
        for (auto regime : {StiffnessRegime::Low, StiffnessRegime::High}) {
            const SimParams p;
            const AssembledRobot robot = chain(4, regime);
            BodyState s = settle(robot, p);
            s.time = 0.0;
            std::vector<ControlGene> ctl;
            for (int i = 0; i < 4; ++i)
                ctl.push_back(ControlGene{1.0, 1.0, 0.25 * i});
            const auto steps_per_sample = static_cast<int>(std::lround(p.sample_interval / p.timestep));
            std::vector<double> rest;
            for (int sample = 0; sample <= 1000; ++sample) {
                if (sample > 0)
                    for (int k = 0; k < steps_per_sample; ++k)
                        advance(s, robot, ctl, p);
                ++samples;
                worst_strut = std::max(worst_strut, strut_error(s.positions, robot));
                current_rest_lengths(robot, ctl, s.time, rest);
                for (std::size_t c = 0; c < robot.cables.size(); ++c) {
                    const CableForce<double> f = cable_force(s, robot.cables[c], rest[c]);
                    const Vec3 d = s.positions.col(robot.cables[c].b) - s.positions.col(robot.cables[c].a);
                    const bool slack = d.norm() <= rest[c];
                    const bool pulls = f.tension >= 0.0 && f.on_a.dot(d) >= 0.0 && (f.on_a + f.on_b).norm() == 0.0;
                    if (!pulls || (slack && f.tension != 0.0))
                        ++bad_cables;
                }
            }
        }
        ok = ok && worst_strut <= 1e-6 && bad_cables == 0;
        notes.push_back("strut drift " + fmt("%.1e", worst_strut));
        notes.push_back(std::to_string(bad_cables) + " non-tensile cable samples of " +
                        std::to_string(samples) + " states");
    }

    // (d) passive energy over every 100-step window.
    {
        double worst = -1.0;
        for (auto regime : {StiffnessRegime::Low, StiffnessRegime::High}) {
            const SimParams p;
            const AssembledRobot robot = chain(3, regime);
            BodyState s = initial_state(robot);
            std::vector<double> e;
            for (int k = 0; k <= 2000; ++k) {
                e.push_back(mechanical_energy(s, robot, {}, p));
                if (k < 2000)
                    advance(s, robot, {}, p);
            }
            for (std::size_t i = 0; i + 100 < e.size(); ++i)
                worst = std::max(worst, (e[i + 100] - e[i]) / 100.0);
        }
        ok = ok && worst <= 1e-9;
        notes.push_back("energy rise " + fmt("%.1e", worst) + " J/step");
    }

    // (e) settling of one passive module.
    {
        SimParams p;
        p.settle_duration = 2.0;
        const AssembledRobot robot = chain(1, StiffnessRegime::Low);
        const BodyState s = settle(robot, p);
        const double vmax = s.velocities.colwise().norm().maxCoeff();
        ok = ok && vmax < 1e-2;
        notes.push_back("settled speed " + fmt("%.1e", vmax) + " m/s");
    }

    std::string detail;
    for (const auto& n : notes)
        detail += (detail.empty() ? "" : ", ") + n;
    return {ok, detail};
}

// ---------------------------------------------------------------- 4

Outcome genome_suite()
{
    const ModuleTemplate m = build_canonical_module(0.2);
    long failures = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const Genome g = random_genome(seed * 2654435761u + 11);
        DecodedRobot r;
        try {
            r = decode(g);
        } catch (...) {
            ++failures;
            continue;
        }
        bool ok = r.module_count() >= 2 && r.module_count() <= 9 && r.control.size() == r.placements.size();
        for (const auto& c : r.control)
            ok = ok && c.frequency >= 0.0 && c.frequency <= 1.0 && c.amplitude >= 0.0 && c.amplitude <= 1.0 &&
                 c.phase >= 0.0 && c.phase < 1.0;
        ok = ok && decode(g) == r;
        std::vector<std::set<int>> used(r.placements.size());
        for (std::size_t i = 1; i < r.placements.size(); ++i) {
            const auto& p = r.placements[i];
            ok = ok && p.parent_index && *p.parent_index >= 0 && *p.parent_index < static_cast<int>(i);
            if (!ok)
                break;
            used[i].insert(kChildAttachFace);
            ok = ok && used[static_cast<std::size_t>(*p.parent_index)].insert(p.parent_face).second;
        }
        if (ok) {
            const AssembledRobot a = assemble(r.placements, m, MaterialParams{});
            const auto n = static_cast<std::size_t>(r.module_count());
            ok = a.node_count() == static_cast<int>(12 * n) && a.struts.size() == 6 * n &&
                 a.cables.size() == 27 * n && a.welds.size() == 3 * (n - 1);
        }
        failures += !ok;
    }
    return {failures == 0, std::to_string(10000 - failures) + "/10000 genomes valid"};
}

// ---------------------------------------------------------------- 5

Outcome onemax_suite()
{
    int hits = 0;
    std::string bests;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        EvolutionConfig c;
        c.population_size = 50;
        c.generations = 100;
        c.master_seed = seed;
        const EvolutionHistory h =
            run_evolution(c, [](const Genome& g) { return Evaluation{static_cast<double>(g.bits.count()), 2, false}; });
        const double best = h.best().best_fitness;
        hits += best >= 310.0;
        bests += (bests.empty() ? "" : " ") + std::to_string(static_cast<int>(best));
    }
    return {hits >= 9, std::to_string(hits) + "/10 seeds reach 310 (best: " + bests + ")"};
}

// ---------------------------------------------------------------- desk batch

struct RunRecord {
    StiffnessRegime regime{};
    std::uint64_t seed = 0;
    std::vector<double> best;  // per generation
    int modules = 0;
    std::string gait;
    fs::path dir;
};

ExperimentConfig desk_config(const fs::path& out, std::vector<std::uint64_t> seeds)
{
    ExperimentConfig c;
    c.evolution.population_size = 20;
    c.evolution.generations = 40;
    c.evolution.sim_duration = 5.0;
    c.evolution.sim.settle_duration = 3.0;
    c.regimes = {StiffnessRegime::High, StiffnessRegime::Low};
    c.run_count = static_cast<int>(seeds.size());
    c.seed_list = std::move(seeds);
    c.output_directory = out;
    return c;
}

fs::path write_config(const ExperimentConfig& c, const fs::path& path)
{
    fs::create_directories(path.parent_path());
    std::ofstream(path) << serialize_config(c);
    return path;
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::vector<RunRecord> run_batch(const ExperimentConfig& c, const fs::path& config_path)
{
    std::ostringstream log, err;
    if (cmd_evolve(write_config(c, config_path), worker_count(), log, err) != kExitOk)
        throw std::runtime_error("evolve failed: " + err.str());
    std::vector<RunRecord> out;
    for (auto regime : c.regimes)
        for (auto seed : c.seeds()) {
            RunRecord r;
            r.regime = regime;
            r.seed = seed;
            r.dir = run_directory(c.output_directory, regime, seed);
            std::istringstream csv(read_file(r.dir / "history.csv"));
            std::string line;
            std::getline(csv, line);
            while (std::getline(csv, line)) {
                std::istringstream row(line);
                std::string gen, best;
                std::getline(row, gen, ',');
                std::getline(row, best, ',');
                r.best.push_back(std::stod(best));
            }
            const Champion champ = champion_from_json(read_file(r.dir / "best_genome.json"));
            r.modules = decode(champ.genome).module_count();
            r.gait = champ.gait;
            out.push_back(std::move(r));
        }
    return out;
}

struct DeskBatch {
    fs::path root;
    std::vector<RunRecord> primary;  // seeds 1-5
    std::vector<RunRecord> fresh;    // seeds 6-10, only after a failed trend check

    std::vector<RunRecord> all() const
    {
        auto v = primary;
        v.insert(v.end(), fresh.begin(), fresh.end());
        return v;
    }
};

DeskBatch& batch(const fs::path& root)
{
    static DeskBatch b = [&] {
        DeskBatch d;
        d.root = root;
        d.primary = run_batch(desk_config(root / "desk", {1, 2, 3, 4, 5}), root / "desk.json");
        return d;
    }();
    return b;
}

Outcome determinism_suite(const fs::path& root)
{
    const DeskBatch& b = batch(root);
    const ExperimentConfig again = desk_config(root / "determinism", {1});
    run_batch(again, root / "determinism.json");
    int identical = 0, compared = 0;
    for (auto regime : again.regimes)
        for (const char* name : {"history.csv", "best_genome.json"}) {
            ++compared;
            identical += read_file(run_directory(root / "desk", regime, 1) / name) ==
                         read_file(run_directory(again.output_directory, regime, 1) / name);
        }

    int replays = 0, matched = 0;
    for (const auto& r : b.primary) {
        if (r.seed != 1)
            continue;
        ++replays;
        std::ostringstream log, err;
        const int code = cmd_replay(r.dir / "best_genome.json", root / "desk.json", r.dir / "replay.csv", log, err);
        matched += code == kExitOk && log.str().find("matches stored fitness: yes") != std::string::npos;
    }
    return {identical == compared && matched == replays,
            std::to_string(identical) + "/" + std::to_string(compared) + " files bit-identical, " +
                std::to_string(matched) + "/" + std::to_string(replays) + " replays match"};
}

Outcome improvement_suite(const fs::path& root)
{
    const DeskBatch& b = batch(root);
    std::map<StiffnessRegime, int> hits;
    std::string detail;
    for (const auto& r : b.primary) {
        const double ratio = r.best.front() > 0.0 ? r.best.back() / r.best.front() : INFINITY;
        hits[r.regime] += ratio >= 2.0;
        detail += std::string(detail.empty() ? "" : ", ") + std::string(to_string(r.regime)) + std::to_string(r.seed) +
                  " x" + fmt("%.2f", ratio);
    }
    const int high = hits[StiffnessRegime::High], low = hits[StiffnessRegime::Low];
    return {high >= 4 && low >= 4,
            "HIGH " + std::to_string(high) + "/5, LOW " + std::to_string(low) + "/5 doubled (" + detail + ")"};
}

Outcome trend_on(const std::vector<RunRecord>& runs)
{
    std::vector<int> high_modules, low_modules;
    int low_hop_roll = 0, high_not_hop = 0;
    std::string detail;
    for (const auto& r : runs) {
        const bool high = r.regime == StiffnessRegime::High;
        (high ? high_modules : low_modules).push_back(r.modules);
        if (high)
            high_not_hop += r.gait != "Hop" && r.gait != "Hop/Rol";
        else
            low_hop_roll += r.gait == "Hop" || r.gait == "Rol" || r.gait == "Hop/Rol";
        detail += std::string(detail.empty() ? "" : ", ") + (high ? "H" : "L") + std::to_string(r.seed) + ":" +
                  std::to_string(r.modules) + "/" + r.gait;
    }
    auto median = [](std::vector<int> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    const double mh = median(high_modules), ml = median(low_modules);
    const bool ok = mh > ml && low_hop_roll >= 3 && high_not_hop >= 3;
    return {ok, "median modules HIGH " + fmt("%g", mh) + " vs LOW " + fmt("%g", ml) + ", LOW hop/roll " +
                    std::to_string(low_hop_roll) + "/5, HIGH not hop " + std::to_string(high_not_hop) + "/5 [" +
                    detail + "]"};
}

Outcome trend_suite(const fs::path& root)
{
    DeskBatch& b = batch(root);
    const Outcome first = trend_on(b.primary);
    if (first.pass)
        return first;
    b.fresh = run_batch(desk_config(root / "desk_fresh", {6, 7, 8, 9, 10}), root / "desk_fresh.json");
    Outcome second = trend_on(b.fresh);
    second.detail = "seeds 1-5 failed (" + first.detail + "); seeds 6-10: " + second.detail;
    return second;
}

Outcome elitism_suite(const fs::path& root)
{
    const auto runs = batch(root).all();
    int monotone = 0;
    for (const auto& r : runs)
        monotone += std::is_sorted(r.best.begin(), r.best.end());
    return {monotone == static_cast<int>(runs.size()),
            std::to_string(monotone) + "/" + std::to_string(runs.size()) + " histories non-decreasing"};
}

}  // namespace

int main(int argc, char** argv)
{
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
    fs::remove_all(root);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 geometry", geometry_suite},
        {"2 physics invariants", physics_suite},
        {"3 determinism", [&] { return determinism_suite(root); }},
        {"4 genome fuzz", genome_suite},
        {"5 GA OneMax", onemax_suite},
        {"6 evolution improves", [&] { return improvement_suite(root); }},
        {"7 stiffness trend", [&] { return trend_suite(root); }},
        {"8 monotone elitism", [&] { return elitism_suite(root); }},
    };

    int failed = 0;
    for (const auto& [name, check] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << " (" << fmt("%.1f", secs)
                  << " s): " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}

#include "tensoft/robot.hpp"

#include <cmath>
#include <set>
#include <utility>

namespace tensoft {

std::string_view to_string(StiffnessRegime regime)
{
    return regime == StiffnessRegime::High ? "HIGH" : "LOW";
}

StiffnessRegime parse_regime(std::string_view text)
{
    if (text == "HIGH")
        return StiffnessRegime::High;
    if (text == "LOW")
        return StiffnessRegime::Low;
    throw std::invalid_argument("unknown stiffness regime '" + std::string(text) + "' (expected LOW or HIGH)");
}

MaterialParams material_for(StiffnessRegime regime, const MaterialParams& low)
{
    MaterialParams m = low;
    if (regime == StiffnessRegime::High)
        m.youngs_modulus *= kHighToLowStiffness;
    return m;
}

std::vector<ModulePlacement> place_modules(std::vector<ModulePlacement> placements, const ModuleTemplate& module)
{
    if (placements.empty())
        throw InvalidSpec("robot has no modules");

    std::set<std::pair<int, FaceId>> occupied;
    for (std::size_t i = 0; i < placements.size(); ++i) {
        auto& p = placements[i];
        if (p.module_index != static_cast<int>(i))
            throw InvalidSpec("placements must be listed in module order");
        if (p.actuation_face < 0 || p.actuation_face > 7)
            throw InvalidSpec("actuation face out of range");
        if (i == 0) {
            if (p.parent_index)
                throw InvalidSpec("module 0 must be the root");
            p.rigid_transform = Transform::Identity();
            continue;
        }
        if (!p.parent_index || *p.parent_index < 0 || *p.parent_index >= p.module_index)
            throw InvalidSpec("module " + std::to_string(i) + " has no valid parent");
        if (p.parent_face < 0 || p.parent_face > 7 || p.orientation < 0 || p.orientation > 2)
            throw InvalidSpec("module " + std::to_string(i) + " has an invalid face or orientation");
        const int parent = *p.parent_index;
        if (!occupied.emplace(parent, p.parent_face).second)
            throw InvalidSpec("face " + std::to_string(p.parent_face) + " of module " + std::to_string(parent) +
                              " is already occupied");
        occupied.emplace(static_cast<int>(i), kChildAttachFace);
        p.rigid_transform = placements[parent].rigid_transform *
                            mate_transform(module.faces[p.parent_face], module.faces[kChildAttachFace], p.orientation);
    }
    return placements;
}

AssembledRobot assemble(const std::vector<ModulePlacement>& placements, const ModuleTemplate& module,
                        const MaterialParams& material, const BodyParams& body)
{
    AssembledRobot robot;
    robot.placements = place_modules(placements, module);
    const int n_modules = static_cast<int>(robot.placements.size());
    robot.node_mass = body.node_mass;
    robot.node_positions.resize(3, n_modules * kNodesPerModule);

    for (int m = 0; m < n_modules; ++m) {
        const Transform& t = robot.placements[m].rigid_transform;
        for (int k = 0; k < kNodesPerModule; ++k)
            robot.node_positions.col(m * kNodesPerModule + k) = t * module.nodes[k];
    }

    const double reduced_mass = 0.5 * body.node_mass;
    auto damping_for = [&](double k) { return 2.0 * material.cable_damping_ratio * std::sqrt(k * reduced_mass); };

    const double cable_rest = (1.0 - body.cable_prestrain) * module.cable_length();
    const double passive_k = material.youngs_modulus * material.cable_cross_section / cable_rest;
    for (int m = 0; m < n_modules; ++m) {
        const int base = m * kNodesPerModule;
        for (const auto& [a, b] : module.struts)
            robot.struts.push_back({base + a, base + b, module.strut_length});
        for (const auto& [a, b] : module.cables)
            robot.cables.push_back({base + a, base + b, cable_rest, passive_k, damping_for(passive_k), false});
    }

    const double actuation_k = body.actuation_stiffness_factor * passive_k;
    for (int m = 0; m < n_modules; ++m) {
        const int base = m * kNodesPerModule;
        const Face& face = module.faces[robot.placements[m].actuation_face];
        ActuationGroup group;
        group.max_contraction = body.max_contraction;
        for (int v = 0; v < 3; ++v) {
            const int a = face.vertex_ids[v];
            const int b = module.antipode(a);
            group.natural_length = (module.nodes[a] - module.nodes[b]).norm();
            group.cable_ids[v] = static_cast<int>(robot.cables.size());
            robot.cables.push_back(
                {base + a, base + b, group.natural_length, actuation_k, damping_for(actuation_k), true, m});
        }
        robot.actuation_groups.push_back(group);
    }

    for (int m = 1; m < n_modules; ++m) {
        const auto& p = robot.placements[m];
        const Face& parent_face = module.faces[p.parent_face];
        const Face& child_face = module.faces[kChildAttachFace];
        for (int v = 0; v < 3; ++v) {
            const int parent_node = *p.parent_index * kNodesPerModule +
                                    parent_face.vertex_ids[mated_vertex_slot(v, p.orientation)];
            const int child_node = m * kNodesPerModule + child_face.vertex_ids[v];
            robot.welds.push_back({parent_node, child_node, 0.0});
        }
    }

    const double lowest = robot.node_positions.row(2).minCoeff();
    robot.node_positions.row(2).array() += body.spawn_clearance - lowest;
    return robot;
}

}  // namespace tensoft

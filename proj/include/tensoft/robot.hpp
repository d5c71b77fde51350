#ifndef TENSOFT_ROBOT_HPP
#define TENSOFT_ROBOT_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tensoft/control.hpp"
#include "tensoft/geometry.hpp"

namespace tensoft {

enum class StiffnessRegime { Low, High };

inline constexpr double kHighToLowStiffness = 4.0;

std::string_view to_string(StiffnessRegime regime);
StiffnessRegime parse_regime(std::string_view text);

struct MaterialParams {
    double youngs_modulus = 20e6;       // Pa
    double cable_cross_section = 1e-6;  // m^2
    double cable_damping_ratio = 0.1;
};

/// Material for a regime given the LOW-regime modulus; HIGH is 4x LOW.
MaterialParams material_for(StiffnessRegime regime, const MaterialParams& low);

/// Module dimensions and the tendon/prestress settings used when building
/// the structure.
struct BodyParams {
    double strut_length = 0.20;  // m
    double node_mass = 0.01;     // kg, 12 nodes per module
    double cable_prestrain = 0.10;  // rest length = (1 - prestrain) * canonical length
    double max_contraction = 0.35;
    double actuation_stiffness_factor = 10.0;
    double spawn_clearance = 0.005;  // m, lowest node above ground at spawn
};

struct CableSpec {
    int a = 0;
    int b = 0;
    double rest_length = 0.0;
    double stiffness = 0.0;  // N/m
    double damping = 0.0;    // N s/m
    bool actuated = false;
    int group = -1;  // actuation group for tendon cables
};

struct DistanceConstraint {
    int a = 0;
    int b = 0;
    double length = 0.0;
};

struct ModulePlacement {
    int module_index = 0;
    std::optional<int> parent_index;  // empty for the root
    FaceId parent_face = 0;
    int orientation = 0;
    FaceId actuation_face = 0;
    Transform rigid_transform = Transform::Identity();

    bool operator==(const ModulePlacement& o) const
    {
        return module_index == o.module_index && parent_index == o.parent_index &&
               parent_face == o.parent_face && orientation == o.orientation &&
               actuation_face == o.actuation_face;
    }
};

/// Children always latch with this face of their own template.
inline constexpr FaceId kChildAttachFace = 7;

struct InvalidSpec : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Multi-module structure flattened to point masses. Module m owns nodes
/// [12m, 12m + 12); cables are all passive cables (module-major) followed
/// by the actuation cables.
struct AssembledRobot {
    Eigen::Matrix3Xd node_positions;
    double node_mass = 0.0;
    std::vector<DistanceConstraint> struts;
    std::vector<DistanceConstraint> welds;
    std::vector<CableSpec> cables;
    std::vector<ActuationGroup> actuation_groups;
    std::vector<ModulePlacement> placements;  // with resolved world transforms

    int module_count() const { return static_cast<int>(actuation_groups.size()); }
    int node_count() const { return static_cast<int>(node_positions.cols()); }
};

/// Resolves each placement's transform relative to the root frame.
std::vector<ModulePlacement> place_modules(std::vector<ModulePlacement> placements,
                                           const ModuleTemplate& module);

AssembledRobot assemble(const std::vector<ModulePlacement>& placements, const ModuleTemplate& module,
                        const MaterialParams& material, const BodyParams& body = {});

}  // namespace tensoft

#endif  // TENSOFT_ROBOT_HPP

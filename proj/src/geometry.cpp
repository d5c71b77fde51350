#include "tensoft/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tensoft {

namespace {

constexpr double kPhi = std::numbers::phi;

// Node index = 4 * permutation + 2 * (a < 0) + (b < 0) for the base point
// (0, a, b) with a = ±1 and b = ±φ. Permutation 0 keeps (0, a, b),
// 1 gives (b, 0, a), 2 gives (a, b, 0).
Vec3 canonical_node(int index)
{
    const int perm = index / 4;
    const double a = (index & 2) ? -1.0 : 1.0;
    const double b = (index & 1) ? -kPhi : kPhi;
    switch (perm) {
    case 0:
        return {0.0, a, b};
    case 1:
        return {b, 0.0, a};
    default:
        return {a, b, 0.0};
    }
}

bool is_strut(int i, int j) { return i / 2 == j / 2; }

}  // namespace

int ModuleTemplate::antipode(int node) const { return node ^ 3; }

double ModuleTemplate::cable_length() const
{
    const auto [a, b] = cables.front();
    return (nodes[a] - nodes[b]).norm();
}

double ModuleTemplate::face_pair_spacing() const
{
    return 2.0 * faces[0].centroid().dot(faces[0].outward_normal);
}

ModuleTemplate build_canonical_module(double strut_length)
{
    if (!(strut_length > 0.0) || !std::isfinite(strut_length))
        throw std::invalid_argument("strut_length must be positive");

    ModuleTemplate m;
    m.strut_length = strut_length;
    const double scale = strut_length / (2.0 * kPhi);
    for (int i = 0; i < kNodesPerModule; ++i)
        m.nodes.push_back(canonical_node(i) * scale);

    for (int i = 0; i < kNodesPerModule; i += 2)
        m.struts.emplace_back(i, i + 1);

    // Icosahedron edges have length 2 in unscaled units; drop the six that
    // join the two struts of a parallel pair.
    const double edge = 2.0 * scale;
    for (int i = 0; i < kNodesPerModule; ++i) {
        for (int j = i + 1; j < kNodesPerModule; ++j) {
            const double d = (m.nodes[i] - m.nodes[j]).norm();
            if (std::abs(d - edge) > 1e-9 * edge)
                continue;
            if (i / 4 == j / 4)  // same permutation: parallel strut pair
                continue;
            m.cables.emplace_back(i, j);
        }
    }
    m.faces = enumerate_faces(m);
    return m;
}

std::array<Face, kFacesPerModule> enumerate_faces(const ModuleTemplate& module)
{
    std::array<Face, kFacesPerModule> faces{};
    std::array<bool, kFacesPerModule> found{};

    auto has_cable = [&](int a, int b) {
        return std::any_of(module.cables.begin(), module.cables.end(), [&](const NodePair& c) {
            return (c.first == a && c.second == b) || (c.first == b && c.second == a);
        });
    };

    const int n = static_cast<int>(module.nodes.size());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (!has_cable(i, j))
                continue;
            for (int k = j + 1; k < n; ++k) {
                if (!has_cable(i, k) || !has_cable(j, k))
                    continue;
                if (is_strut(i, j) || is_strut(i, k) || is_strut(j, k))
                    continue;
                const Vec3 c = (module.nodes[i] + module.nodes[j] + module.nodes[k]) / 3.0;
                if ((c.array().abs() < 1e-12 * module.strut_length).any())
                    continue;  // not aligned with a (±1,±1,±1) direction
                const FaceId id = (c.x() < 0 ? 1 : 0) | (c.y() < 0 ? 2 : 0) | (c.z() < 0 ? 4 : 0);
                Face f;
                f.outward_normal = face_direction(id);
                // Cable triangles that are not connective faces have
                // centroids off the diagonal directions.
                if (c.normalized().dot(f.outward_normal) < 1.0 - 1e-12)
                    continue;
                const Vec3 cross = (module.nodes[j] - module.nodes[i]).cross(module.nodes[k] - module.nodes[i]);
                f.vertex_ids = cross.dot(f.outward_normal) > 0 ? std::array{i, j, k} : std::array{i, k, j};
                for (int v = 0; v < 3; ++v)
                    f.vertices[v] = module.nodes[f.vertex_ids[v]];
                faces[id] = f;
                found[id] = true;
            }
        }
    }
    if (!std::all_of(found.begin(), found.end(), [](bool b) { return b; }))
        throw std::logic_error("module template does not expose 8 connective faces");
    return faces;
}

Transform mate_transform(const Face& parent_face, const Face& child_face, int orientation)
{
    if (orientation < 0 || orientation > 2)
        throw std::invalid_argument("orientation must be 0, 1 or 2");
    const double parent_edge = (parent_face.vertices[1] - parent_face.vertices[0]).norm();
    const double child_edge = (child_face.vertices[1] - child_face.vertices[0]).norm();
    if (std::abs(parent_edge - child_edge) > 1e-9 * std::max(parent_edge, child_edge))
        throw std::invalid_argument("mate_transform: faces come from modules of different scale");

    const Vec3 child_c = child_face.centroid();
    const Vec3 parent_c = parent_face.centroid();

    Eigen::Matrix3d from;
    from.col(0) = (child_face.vertices[0] - child_c).normalized();
    from.col(2) = child_face.outward_normal.normalized();
    from.col(1) = from.col(2).cross(from.col(0));

    Eigen::Matrix3d to;
    to.col(0) = (parent_face.vertices[mated_vertex_slot(0, orientation)] - parent_c).normalized();
    to.col(2) = -parent_face.outward_normal.normalized();
    to.col(1) = to.col(2).cross(to.col(0));

    Transform t = Transform::Identity();
    t.linear() = to * from.transpose();
    t.translation() = parent_c - t.linear() * child_c;
    return t;
}

}  // namespace tensoft

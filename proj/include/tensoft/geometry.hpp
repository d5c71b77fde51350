#ifndef TENSOFT_GEOMETRY_HPP
#define TENSOFT_GEOMETRY_HPP

#include <array>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace tensoft {

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
using Vec3 = Vec3T<double>;
using Transform = Eigen::Isometry3d;

using NodePair = std::pair<int, int>;

inline constexpr int kNodesPerModule = 12;
inline constexpr int kStrutsPerModule = 6;
inline constexpr int kCablesPerModule = 24;
inline constexpr int kFacesPerModule = 8;

/// Face ids encode the sign pattern of the outward normal: bit 0 set means
/// x < 0, bit 1 means y < 0, bit 2 means z < 0. Face 0 points along
/// (+1,+1,+1), face 7 along (-1,-1,-1), and the opposite of face f is 7 - f.
using FaceId = int;

inline constexpr FaceId opposite_face(FaceId f) { return 7 - f; }

template <typename Scalar = double>
Vec3T<Scalar> face_direction(FaceId f)
{
    const Scalar inv_sqrt3 = Scalar(1) / std::sqrt(Scalar(3));
    return Vec3T<Scalar>((f & 1) ? -inv_sqrt3 : inv_sqrt3,
                         (f & 2) ? -inv_sqrt3 : inv_sqrt3,
                         (f & 4) ? -inv_sqrt3 : inv_sqrt3);
}

/// A connective triangle of the icosahedron. Vertices are counterclockwise
/// seen from outside the module, starting at the lowest node index.
struct Face {
    std::array<int, 3> vertex_ids{};
    std::array<Vec3, 3> vertices{};
    Vec3 outward_normal = Vec3::Zero();

    Vec3 centroid() const { return (vertices[0] + vertices[1] + vertices[2]) / 3.0; }
};

struct ModuleTemplate {
    std::vector<Vec3> nodes;        // 12
    std::vector<NodePair> struts;   // 6
    std::vector<NodePair> cables;   // 24
    std::array<Face, kFacesPerModule> faces{};  // indexed by FaceId
    double strut_length = 0.0;

    /// Node at the point reflection of `node` through the module centre.
    int antipode(int node) const;
    double cable_length() const;
    /// Distance between the planes of two opposite faces.
    double face_pair_spacing() const;
};

/// Icosahedron tensegrity: nodes at the cyclic permutations of (0, ±1, ±φ)
/// scaled so that each strut is `strut_length` long.
ModuleTemplate build_canonical_module(double strut_length);

/// The 8 cable-bounded triangles, indexed by FaceId.
std::array<Face, kFacesPerModule> enumerate_faces(const ModuleTemplate& module);

/// Rigid transform that takes a child module (in its own canonical frame)
/// onto a parent (in the parent's canonical frame) so that the two faces are
/// flush and facing each other. Child vertex i lands on parent vertex
/// (orientation - i) mod 3; the index runs backwards because both triangles
/// are counterclockwise from their own outside.
Transform mate_transform(const Face& parent_face, const Face& child_face, int orientation);

/// Parent vertex slot that child vertex `child_slot` is latched to.
inline constexpr int mated_vertex_slot(int child_slot, int orientation)
{
    return ((orientation - child_slot) % 3 + 3) % 3;
}

}  // namespace tensoft

#endif  // TENSOFT_GEOMETRY_HPP

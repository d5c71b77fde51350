#ifndef TENSOFT_PHYSICS_HPP
#define TENSOFT_PHYSICS_HPP

#include <cmath>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tensoft/control.hpp"
#include "tensoft/robot.hpp"

namespace tensoft {

struct SimParams {
    double timestep = 5e-4;  // s
    double gravity = 9.81;   // m/s^2, acting along -z
    double ground_normal_stiffness = 5000.0;  // N/m
    // Critical damping for a single 0.01 kg node on the default spring.
    double ground_normal_damping = 14.142135623730951;  // N s/m
    double friction_coefficient = 0.6;
    double friction_regularization_speed = 1e-3;  // m/s
    int constraint_iterations = 4;
    double settle_duration = 2.0;   // s
    double sample_interval = 0.01;  // s
    bool ground_enabled = true;
};

struct BodyState {
    Eigen::Matrix3Xd positions;
    Eigen::Matrix3Xd velocities;
    double time = 0.0;

    bool operator==(const BodyState& o) const
    {
        return time == o.time && positions == o.positions && velocities == o.velocities;
    }
};

using ContactFlags = Eigen::Array<bool, Eigen::Dynamic, 1>;

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::Matrix3Xd> positions;
    std::vector<ContactFlags> contacts;
    std::vector<Vec3> center_of_mass;

    std::size_t size() const { return times.size(); }
    int contact_count(std::size_t sample) const { return static_cast<int>(contacts[sample].count()); }
    double duration() const { return times.empty() ? 0.0 : times.back() - times.front(); }

    bool operator==(const Trajectory& o) const
    {
        if (times != o.times || center_of_mass != o.center_of_mass || positions != o.positions)
            return false;
        for (std::size_t i = 0; i < contacts.size(); ++i)
            if ((contacts[i] != o.contacts[i]).any())
                return false;
        return true;
    }
};

struct SimulationDiverged : std::runtime_error {
    explicit SimulationDiverged(double t)
        : std::runtime_error("simulation diverged at t = " + std::to_string(t) + " s"), time(t)
    {
    }
    double time;
};

template <typename Scalar>
struct CableForce {
    Vec3T<Scalar> on_a = Vec3T<Scalar>::Zero();
    Vec3T<Scalar> on_b = Vec3T<Scalar>::Zero();
    Scalar tension = Scalar(0);
};

/// Tension-only spring-damper between two endpoints.
template <typename Scalar>
CableForce<Scalar> cable_force(const Vec3T<Scalar>& pa, const Vec3T<Scalar>& pb, const Vec3T<Scalar>& va,
                               const Vec3T<Scalar>& vb, Scalar rest_length, Scalar stiffness, Scalar damping)
{
    CableForce<Scalar> f;
    const Vec3T<Scalar> d = pb - pa;
    const Scalar length = d.norm();
    if (!(length > rest_length) || length == Scalar(0))
        return f;
    const Vec3T<Scalar> dir = d / length;
    const Scalar stretch_rate = (vb - va).dot(dir);
    const Scalar tension = stiffness * (length - rest_length) + damping * stretch_rate;
    if (!(tension > Scalar(0)))
        return f;
    f.tension = tension;
    f.on_a = tension * dir;
    f.on_b = -f.on_a;
    return f;
}

CableForce<double> cable_force(const BodyState& state, const CableSpec& cable, double rest_length);

/// Penalty spring-damper normal force plus regularized Coulomb friction for
/// a node against the plane z = 0.
template <typename Scalar>
Vec3T<Scalar> ground_contact_force(const Vec3T<Scalar>& position, const Vec3T<Scalar>& velocity,
                                   const SimParams& params)
{
    const Scalar depth = -position.z();
    if (!(depth > Scalar(0)))
        return Vec3T<Scalar>::Zero();
    Scalar normal = Scalar(params.ground_normal_stiffness) * depth -
                    Scalar(params.ground_normal_damping) * velocity.z();
    if (!(normal > Scalar(0)))
        return Vec3T<Scalar>::Zero();
    const Vec3T<Scalar> tangential(velocity.x(), velocity.y(), Scalar(0));
    const Scalar speed = tangential.norm();
    const Scalar denom = std::max(speed, Scalar(params.friction_regularization_speed));
    Vec3T<Scalar> force = -Scalar(params.friction_coefficient) * normal / denom * tangential;
    force.z() = normal;
    return force;
}

BodyState initial_state(const AssembledRobot& robot);

/// Current rest length of every cable given the control clock `t`. An empty
/// `controls` span leaves every tendon at its natural length.
void current_rest_lengths(const AssembledRobot& robot, std::span<const ControlGene> controls, double t,
                          std::vector<double>& out);

/// Advances `state` by one timestep in place.
void advance(BodyState& state, const AssembledRobot& robot, std::span<const ControlGene> controls,
             const SimParams& params);

/// Semi-implicit Euler for cable, ground normal and gravity forces, then
/// Gauss-Seidel projection of struts (positions, then velocities). Welded
/// nodes move as a single particle, so welds hold exactly. Ground friction
/// acts last, on the constrained velocities. At least
/// `constraint_iterations` rounds run, more while a strut is still off.
/// The control clock is `state.time`.
BodyState step(BodyState state, const AssembledRobot& robot, std::span<const ControlGene> controls,
               const SimParams& params);

/// Runs `settle_duration` from the spawn pose with every tendon relaxed.
BodyState settle(const AssembledRobot& robot, const SimParams& params);

/// Actuated run starting from `initial`; the control clock restarts at 0.
Trajectory run(const AssembledRobot& robot, const BodyState& initial, std::span<const ControlGene> controls,
               double duration, const SimParams& params);

/// Node velocities at the time of `state.positions`. The stored velocities
/// lag half a step behind the positions (semi-implicit Euler); this applies
/// the remaining half kick and the velocity projection to a copy.
Eigen::Matrix3Xd synchronized_velocities(const BodyState& state, const AssembledRobot& robot,
                                         std::span<const ControlGene> controls, const SimParams& params);

/// Kinetic + gravitational + cable elastic + ground penalty elastic energy.
/// The kinetic term uses the synchronized velocities.
double mechanical_energy(const BodyState& state, const AssembledRobot& robot,
                         std::span<const ControlGene> controls, const SimParams& params);

Vec3 center_of_mass(const Eigen::Matrix3Xd& positions);

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace tensoft

#endif  // TENSOFT_PHYSICS_HPP

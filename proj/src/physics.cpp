#include "tensoft/physics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace tensoft {

CableForce<double> cable_force(const BodyState& state, const CableSpec& cable, double rest_length)
{
    return cable_force<double>(state.positions.col(cable.a), state.positions.col(cable.b),
                               state.velocities.col(cable.a), state.velocities.col(cable.b), rest_length,
                               cable.stiffness, cable.damping);
}

BodyState initial_state(const AssembledRobot& robot)
{
    BodyState s;
    s.positions = robot.node_positions;
    s.velocities = Eigen::Matrix3Xd::Zero(3, robot.node_count());
    s.time = 0.0;
    return s;
}

void current_rest_lengths(const AssembledRobot& robot, std::span<const ControlGene> controls, double t,
                          std::vector<double>& out)
{
    if (!controls.empty() && controls.size() != robot.actuation_groups.size())
        throw std::invalid_argument("one control gene per module is required");
    out.resize(robot.cables.size());
    for (std::size_t c = 0; c < robot.cables.size(); ++c) {
        const CableSpec& cable = robot.cables[c];
        if (!cable.actuated || controls.empty()) {
            out[c] = cable.rest_length;
            continue;
        }
        const auto g = static_cast<std::size_t>(cable.group);
        out[c] = rest_length_at(t, controls[g], robot.actuation_groups[g]);
    }
}

namespace {

// Scratch buffers reused across steps on the same thread.
struct StepScratch {
    Eigen::Matrix3Xd forces;
    Eigen::VectorXd normal;
    std::vector<double> rest;
    Eigen::Matrix3Xd previous;
    Eigen::Matrix3Xd predicted;
    Eigen::VectorXd weight;
    Eigen::Matrix3Xd group_weight;
    Eigen::Matrix3Xd group_sum;
    std::vector<int> head;     // weld group representative of every node
    std::vector<int> heads;    // representatives of groups with members
    std::vector<int> members;  // grouped nodes other than their head
};

StepScratch& scratch()
{
    thread_local StepScratch s;
    return s;
}

// Gauss-Seidel rounds continue past the requested count until the largest
// residual seen in a round is below these tolerances, up to a hard cap.
constexpr int kMaxProjectionRounds = 64;
constexpr double kStrutStrain = 1e-12;  // relative length error
constexpr double kStrutRate = 1e-9;     // m/s of stretch

// Latched nodes move as one particle. Each weld group is represented by
// its lowest node; the other members copy the head after every projection,
// so welds hold exactly.
void build_groups(const AssembledRobot& robot)
{
    auto& buf = scratch();
    const auto n = static_cast<std::size_t>(robot.node_count());
    auto& head = buf.head;
    head.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        head[i] = static_cast<int>(i);
    auto find = [&](int i) {
        while (head[static_cast<std::size_t>(i)] != i)
            i = head[static_cast<std::size_t>(i)];
        return i;
    };
    for (const auto& w : robot.welds) {
        const int a = find(w.a), b = find(w.b);
        if (a != b)
            head[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
    buf.members.clear();
    buf.heads.clear();
    for (std::size_t i = 0; i < n; ++i) {
        head[i] = find(static_cast<int>(i));
        if (head[i] != static_cast<int>(i)) {
            buf.members.push_back(static_cast<int>(i));
            if (std::find(buf.heads.begin(), buf.heads.end(), head[i]) == buf.heads.end())
                buf.heads.push_back(head[i]);
        }
    }
}

// Per-axis inverse mass of every particle relative to a free node. A node
// held by sticking friction resists tangential motion; its weight is the
// slope of the implicit friction update. The vertical weight of a node is
// always 1. Only head columns are meaningful for grouped nodes.
void group_weights(const Eigen::VectorXd& weight)
{
    auto& buf = scratch();
    auto& gw = buf.group_weight;
    gw.resize(3, weight.size());
    for (Eigen::Index i = 0; i < weight.size(); ++i)
        gw.col(i) = Vec3(weight[i], weight[i], 1.0);
    for (int h : buf.heads)
        gw.col(h) = gw.col(h).cwiseInverse().eval();
    for (int i : buf.members)
        gw.col(buf.head[static_cast<std::size_t>(i)]) += gw.col(i).cwiseInverse();
    for (int h : buf.heads)
        gw.col(h) = gw.col(h).cwiseInverse().eval();
}

void copy_heads(Eigen::Matrix3Xd& m)
{
    const auto& buf = scratch();
    for (int i : buf.members)
        m.col(i) = m.col(buf.head[static_cast<std::size_t>(i)]);
}

// Replaces each group's member values with their inverse-weighted mean,
// the exact projection onto "all members equal".
void merge_groups(Eigen::Matrix3Xd& m, const Eigen::VectorXd& weight)
{
    const auto& buf = scratch();
    if (buf.members.empty())
        return;
    auto scaled = [&](int i) -> Vec3 {
        const Vec3 v = m.col(i);
        return {v.x() / weight[i], v.y() / weight[i], v.z()};
    };
    Eigen::Matrix3Xd& sum = scratch().group_sum;
    sum.resize(3, m.cols());
    for (int h : buf.heads)
        sum.col(h) = scaled(h);
    for (int i : buf.members)
        sum.col(buf.head[static_cast<std::size_t>(i)]) += scaled(i);
    for (int h : buf.heads)
        m.col(h) = sum.col(h).cwiseProduct(buf.group_weight.col(h));
    copy_heads(m);
}

// Position pass (SHAKE): each strut is corrected along its start-of-step
// direction, solving the length equation exactly, so internal corrections
// stay central with respect to the positions the momentum was built from.
void project_positions(Eigen::Matrix3Xd& x, const Eigen::Matrix3Xd& previous, const Eigen::VectorXd& weight,
                       const AssembledRobot& robot, int iterations)
{
    const auto& buf = scratch();
    const auto& gw = buf.group_weight;
    merge_groups(x, weight);
    for (int it = 0;; ++it) {
        double worst = 0.0;
        for (const auto& s : robot.struts) {
            const int a = buf.head[static_cast<std::size_t>(s.a)];
            const int b = buf.head[static_cast<std::size_t>(s.b)];
            const Vec3 d = x.col(b) - x.col(a);
            const Vec3 r = previous.col(s.b) - previous.col(s.a);
            const Vec3 ra = gw.col(a).cwiseProduct(r);
            const Vec3 rb = gw.col(b).cwiseProduct(r);
            const Vec3 u = ra + rb;
            const double uu = u.squaredNorm();
            const double du = d.dot(u);
            const double excess = d.squaredNorm() - s.length * s.length;
            worst = std::max(worst, std::abs(excess) / (s.length * s.length));
            const double disc = du * du - uu * excess;
            if (uu > 0.0 && disc >= 0.0) {
                // x_a += mu W_a r, x_b -= mu W_b r; smaller root of the quadratic.
                const double mu = excess / (du + std::copysign(std::sqrt(disc), du));
                x.col(a) += mu * ra;
                x.col(b) -= mu * rb;
            } else {
                const double length = d.norm();
                if (length == 0.0)
                    continue;
                const Vec3 corr = 0.5 * (length - s.length) / length * d;
                x.col(a) += corr;
                x.col(b) -= corr;
            }
        }
        if (it + 1 >= kMaxProjectionRounds || (it + 1 >= iterations && worst <= 2.0 * kStrutStrain))
            break;
    }
    copy_heads(x);
}

// Velocity pass (RATTLE): no strut changes length.
void project_velocities(const Eigen::Matrix3Xd& x, Eigen::Matrix3Xd& v, const Eigen::VectorXd& weight,
                        const AssembledRobot& robot, int iterations)
{
    const auto& buf = scratch();
    const auto& gw = buf.group_weight;
    merge_groups(v, weight);
    for (int it = 0;; ++it) {
        double worst = 0.0;
        for (const auto& s : robot.struts) {
            const int a = buf.head[static_cast<std::size_t>(s.a)];
            const int b = buf.head[static_cast<std::size_t>(s.b)];
            const Vec3 n = (x.col(b) - x.col(a)).normalized();
            const Vec3 na = gw.col(a).cwiseProduct(n);
            const Vec3 nb = gw.col(b).cwiseProduct(n);
            const double rel = (v.col(b) - v.col(a)).dot(n);
            worst = std::max(worst, std::abs(rel));
            const double lambda = rel / n.dot(na + nb);
            v.col(a) += lambda * na;
            v.col(b) -= lambda * nb;
        }
        if (it + 1 >= kMaxProjectionRounds || (it + 1 >= iterations && worst <= kStrutRate))
            break;
    }
    copy_heads(v);
}

}  // namespace

namespace {

// Velocity kick over `dt` from cables, the ground normal force and gravity.
// Leaves the normal force of every node in the scratch buffer.
void kick(BodyState& state, const AssembledRobot& robot, std::span<const ControlGene> controls,
          const SimParams& params, double dt)
{
    const int n = robot.node_count();
    const double m = robot.node_mass;
    auto& buf = scratch();

    buf.forces.resize(3, n);
    buf.forces.setZero();

    current_rest_lengths(robot, controls, state.time, buf.rest);
    for (std::size_t c = 0; c < robot.cables.size(); ++c) {
        const CableSpec& cable = robot.cables[c];
        const auto f = cable_force(state, cable, buf.rest[c]);
        buf.forces.col(cable.a) += f.on_a;
        buf.forces.col(cable.b) += f.on_b;
    }

    buf.normal.setZero(n);
    if (params.ground_enabled) {
        for (int i = 0; i < n; ++i) {
            const double depth = -state.positions(2, i);
            if (!(depth > 0.0))
                continue;
            const double normal =
                params.ground_normal_stiffness * depth - params.ground_normal_damping * state.velocities(2, i);
            if (normal > 0.0) {
                buf.normal[i] = normal;
                buf.forces(2, i) += normal;
            }
        }
    }

    state.velocities += (dt / m) * buf.forces;
    state.velocities.row(2).array() -= dt * params.gravity;
}

// Tangential weight of every node for a friction impulse over `dt`: nodes
// that friction would bring inside the regularization band are sticking.
void friction_weights(const BodyState& state, const AssembledRobot& robot, const SimParams& params, double dt)
{
    auto& buf = scratch();
    buf.weight.setOnes(robot.node_count());
    const double eps = params.friction_regularization_speed;
    for (int i = 0; i < robot.node_count(); ++i) {
        if (buf.normal[i] == 0.0)
            continue;
        const double drop = dt * params.friction_coefficient * buf.normal[i] / robot.node_mass;
        const double speed = std::hypot(state.velocities(0, i), state.velocities(1, i));
        if (speed - drop < eps)
            buf.weight[i] = 1.0 / (1.0 + drop / eps);
    }
}

// Friction acts on the constrained velocity and is integrated implicitly:
// the regularized Coulomb law is evaluated at the end-of-step tangential
// velocity, so it can stop a node but never reverse it.
void apply_friction(BodyState& state, const AssembledRobot& robot, const SimParams& params, double dt)
{
    const auto& buf = scratch();
    const double eps = params.friction_regularization_speed;
    for (int i = 0; i < robot.node_count(); ++i) {
        if (buf.normal[i] == 0.0)
            continue;
        const double vx = state.velocities(0, i);
        const double vy = state.velocities(1, i);
        const double speed = std::hypot(vx, vy);
        if (speed == 0.0)
            continue;
        const double drop = dt * params.friction_coefficient * buf.normal[i] / robot.node_mass;
        const double new_speed = speed - drop >= eps ? speed - drop : speed / (1.0 + drop / eps);
        const double scale = new_speed / speed;
        state.velocities(0, i) = vx * scale;
        state.velocities(1, i) = vy * scale;
    }
}

}  // namespace

void advance(BodyState& state, const AssembledRobot& robot, std::span<const ControlGene> controls,
             const SimParams& params)
{
    const double h = params.timestep;
    const int iterations = params.constraint_iterations;
    auto& buf = scratch();

    build_groups(robot);
    kick(state, robot, controls, params, h);
    friction_weights(state, robot, params, h);
    group_weights(buf.weight);

    buf.previous = state.positions;
    state.positions += h * state.velocities;
    buf.predicted = state.positions;
    project_positions(state.positions, buf.previous, buf.weight, robot, iterations);
    state.velocities += (state.positions - buf.predicted) / h;
    project_velocities(state.positions, state.velocities, buf.weight, robot, iterations);

    if (params.ground_enabled) {
        apply_friction(state, robot, params, h);
        project_velocities(state.positions, state.velocities, buf.weight, robot, iterations);
    }
    state.time += h;

    if (!state.positions.allFinite() || !state.velocities.allFinite())
        throw SimulationDiverged(state.time);
}

BodyState step(BodyState state, const AssembledRobot& robot, std::span<const ControlGene> controls,
               const SimParams& params)
{
    advance(state, robot, controls, params);
    return state;
}

BodyState settle(const AssembledRobot& robot, const SimParams& params)
{
    // Dynamic relaxation with kinetic damping: whenever kinetic energy passes
    // a peak, every velocity is zeroed. The slow breathing mode of the
    // module is barely touched by cable damping, so plain integration would
    // still be ringing at the end of the settle.
    BodyState state = initial_state(robot);
    const auto steps = static_cast<long>(std::llround(params.settle_duration / params.timestep));
    double previous = 0.0;
    for (long k = 0; k < steps; ++k) {
        advance(state, robot, {}, params);
        const double kinetic = state.velocities.squaredNorm();
        if (kinetic < previous) {
            state.velocities.setZero();
            previous = 0.0;
        } else {
            previous = kinetic;
        }
    }
    return state;
}

Vec3 center_of_mass(const Eigen::Matrix3Xd& positions) { return positions.rowwise().mean(); }

namespace {

ContactFlags contact_flags(const BodyState& state, const SimParams& params)
{
    ContactFlags flags = ContactFlags::Constant(state.positions.cols(), false);
    if (!params.ground_enabled)
        return flags;
    for (Eigen::Index i = 0; i < state.positions.cols(); ++i) {
        const Vec3 f = ground_contact_force<double>(state.positions.col(i), state.velocities.col(i), params);
        flags[i] = !f.isZero(0.0);
    }
    return flags;
}

void record(Trajectory& traj, const BodyState& state, double t, const SimParams& params)
{
    traj.times.push_back(t);
    traj.positions.push_back(state.positions);
    traj.contacts.push_back(contact_flags(state, params));
    traj.center_of_mass.push_back(center_of_mass(state.positions));
}

}  // namespace

Trajectory run(const AssembledRobot& robot, const BodyState& initial, std::span<const ControlGene> controls,
               double duration, const SimParams& params)
{
    if (!(duration > 0.0))
        throw std::invalid_argument("run duration must be positive");
    const auto steps_per_sample = std::max(1L, std::lround(params.sample_interval / params.timestep));
    const auto intervals = std::lround(duration / params.sample_interval);

    BodyState state = initial;
    state.time = 0.0;

    Trajectory traj;
    traj.times.reserve(intervals + 1);
    traj.positions.reserve(intervals + 1);
    traj.contacts.reserve(intervals + 1);
    traj.center_of_mass.reserve(intervals + 1);
    record(traj, state, 0.0, params);
    for (long s = 1; s <= intervals; ++s) {
        for (long k = 0; k < steps_per_sample; ++k)
            advance(state, robot, controls, params);
        record(traj, state, static_cast<double>(s) * params.sample_interval, params);
    }
    return traj;
}

Eigen::Matrix3Xd synchronized_velocities(const BodyState& state, const AssembledRobot& robot,
                                         std::span<const ControlGene> controls, const SimParams& params)
{
    const double half_step = 0.5 * params.timestep;
    auto& buf = scratch();
    BodyState half = state;
    build_groups(robot);
    kick(half, robot, controls, params, half_step);
    friction_weights(half, robot, params, half_step);
    group_weights(buf.weight);
    project_velocities(half.positions, half.velocities, buf.weight, robot, params.constraint_iterations);
    if (params.ground_enabled) {
        apply_friction(half, robot, params, half_step);
        project_velocities(half.positions, half.velocities, buf.weight, robot, params.constraint_iterations);
    }
    return half.velocities;
}

double mechanical_energy(const BodyState& state, const AssembledRobot& robot,
                         std::span<const ControlGene> controls, const SimParams& params)
{
    const double m = robot.node_mass;
    double energy = 0.5 * m * synchronized_velocities(state, robot, controls, params).squaredNorm();
    energy += m * params.gravity * state.positions.row(2).sum();

    std::vector<double> rest;
    current_rest_lengths(robot, controls, state.time, rest);
    for (std::size_t c = 0; c < robot.cables.size(); ++c) {
        const CableSpec& cable = robot.cables[c];
        const double stretch = (state.positions.col(cable.b) - state.positions.col(cable.a)).norm() - rest[c];
        if (stretch > 0.0)
            energy += 0.5 * cable.stiffness * stretch * stretch;
    }
    if (params.ground_enabled) {
        for (Eigen::Index i = 0; i < state.positions.cols(); ++i) {
            const double depth = -state.positions(2, i);
            if (depth > 0.0)
                energy += 0.5 * params.ground_normal_stiffness * depth * depth;
        }
    }
    return energy;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory)
{
    const Eigen::Index nodes = trajectory.positions.empty() ? 0 : trajectory.positions.front().cols();
    out << "t,com_x,com_y,com_z,contact_count";
    for (Eigen::Index i = 0; i < nodes; ++i)
        out << ",n" << i << "x,n" << i << "y,n" << i << "z";
    out << '\n';

    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (std::size_t s = 0; s < trajectory.size(); ++s) {
        put(trajectory.times[s]);
        for (int k = 0; k < 3; ++k) {
            out << ',';
            put(trajectory.center_of_mass[s][k]);
        }
        out << ',' << trajectory.contact_count(s);
        for (Eigen::Index i = 0; i < nodes; ++i) {
            for (int k = 0; k < 3; ++k) {
                out << ',';
                put(trajectory.positions[s](k, i));
            }
        }
        out << '\n';
    }
}

}  // namespace tensoft

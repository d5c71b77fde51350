#include "tensoft/gait.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace tensoft {

std::string_view to_label(GaitClass gait)
{
    switch (gait) {
    case GaitClass::Static:
        return "Static";
    case GaitClass::Caterpillar:
        return "CAT";
    case GaitClass::Hop:
        return "Hop";
    case GaitClass::Roll:
        return "Rol";
    case GaitClass::HopRoll:
        return "Hop/Rol";
    case GaitClass::Mixed:
        return "Mixed";
    }
    return "Mixed";
}

GaitClass gait_from_label(std::string_view label)
{
    for (auto g : {GaitClass::Static, GaitClass::Caterpillar, GaitClass::Hop, GaitClass::Roll, GaitClass::HopRoll,
                   GaitClass::Mixed})
        if (to_label(g) == label)
            return g;
    throw std::invalid_argument("unknown gait label '" + std::string(label) + "'");
}

namespace {

std::vector<double> average_ranks(std::span<const double> v)
{
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]])
            ++j;
        const double r = 0.5 * static_cast<double>(i + j);
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// Best-fit rotation taking the centred cloud `from` onto `to`.
Eigen::Matrix3d kabsch(const Eigen::Matrix3Xd& from, const Eigen::Matrix3Xd& to)
{
    const Eigen::Matrix3Xd p = from.colwise() - from.rowwise().mean();
    const Eigen::Matrix3Xd q = to.colwise() - to.rowwise().mean();
    const Eigen::Matrix3d h = p * q.transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0)
        fix(2, 2) = -1.0;
    return svd.matrixV() * fix * svd.matrixU().transpose();
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        return 0.0;
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const Eigen::Map<const Eigen::VectorXd> a(rx.data(), static_cast<Eigen::Index>(rx.size()));
    const Eigen::Map<const Eigen::VectorXd> b(ry.data(), static_cast<Eigen::Index>(ry.size()));
    const Eigen::VectorXd ca = a.array() - a.mean();
    const Eigen::VectorXd cb = b.array() - b.mean();
    const double denom = ca.norm() * cb.norm();
    return denom > 0.0 ? ca.dot(cb) / denom : 0.0;
}

GaitFeatures gait_features(const Trajectory& trajectory, const DecodedRobot& decoded)
{
    GaitFeatures f;
    const std::size_t n = trajectory.size();
    if (n < 2)
        return f;

    const Vec3 start = trajectory.center_of_mass.front();
    const Vec3 end = trajectory.center_of_mass.back();
    const Eigen::Vector2d travel(end.x() - start.x(), end.y() - start.y());
    f.displacement = travel.norm();

    std::size_t airborne = 0;
    for (std::size_t s = 0; s < n; ++s)
        if (trajectory.contact_count(s) == 0)
            ++airborne;
    f.airborne_fraction = static_cast<double>(airborne) / static_cast<double>(n);

    if (f.displacement > 0.0) {
        const Vec3 dir(travel.x() / f.displacement, travel.y() / f.displacement, 0.0);
        const Vec3 axis = Vec3::UnitZ().cross(dir);
        for (std::size_t s = 1; s < n; ++s) {
            const Eigen::AngleAxisd delta(kabsch(trajectory.positions[s - 1], trajectory.positions[s]));
            f.roll += delta.angle() * delta.axis().dot(axis);
        }
    }

    const int modules = decoded.module_count();
    const auto& first = trajectory.positions.front();
    if (modules >= 2 && first.cols() >= modules * kNodesPerModule) {
        Eigen::Matrix3Xd centroids(3, modules);
        for (int m = 0; m < modules; ++m)
            centroids.col(m) = first.middleCols(m * kNodesPerModule, kNodesPerModule).rowwise().mean();
        const Eigen::Matrix3Xd centred = centroids.colwise() - centroids.rowwise().mean();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(centred * centred.transpose());
        const Vec3 body_axis = eig.eigenvectors().col(2);
        std::vector<double> position(modules), phase(modules);
        for (int m = 0; m < modules; ++m) {
            position[m] = centred.col(m).dot(body_axis);
            phase[m] = decoded.control[m].phase;
        }
        f.phase_wave = spearman(position, phase);
    }
    return f;
}

GaitClass classify_gait(const Trajectory& trajectory, const DecodedRobot& decoded, const GaitThresholds& thresholds)
{
    if (trajectory.size() < 2 || trajectory.duration() < thresholds.min_duration)
        throw ClassificationUnavailable("trajectory shorter than " + std::to_string(thresholds.min_duration) + " s");

    const GaitFeatures f = gait_features(trajectory, decoded);
    if (f.displacement < thresholds.static_displacement)
        return GaitClass::Static;

    const bool hop = f.airborne_fraction > thresholds.hop_airborne_fraction;
    const bool roll = std::abs(f.roll) > thresholds.roll_angle;
    if (hop && roll)
        return GaitClass::HopRoll;
    if (hop)
        return GaitClass::Hop;
    if (roll)
        return GaitClass::Roll;
    if (f.airborne_fraction <= thresholds.caterpillar_max_airborne &&
        std::abs(f.phase_wave) > thresholds.phase_wave_correlation &&
        decoded.module_count() >= thresholds.caterpillar_min_modules)
        return GaitClass::Caterpillar;
    return GaitClass::Mixed;
}

}  // namespace tensoft

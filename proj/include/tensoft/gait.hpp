#ifndef TENSOFT_GAIT_HPP
#define TENSOFT_GAIT_HPP

#include <numbers>
#include <span>
#include <stdexcept>
#include <string_view>

#include "tensoft/genome.hpp"
#include "tensoft/physics.hpp"

namespace tensoft {

enum class GaitClass { Static, Caterpillar, Hop, Roll, HopRoll, Mixed };

/// Short labels as used in result tables: Static, CAT, Hop, Rol, Hop/Rol, Mixed.
std::string_view to_label(GaitClass gait);
GaitClass gait_from_label(std::string_view label);

struct GaitThresholds {
    double static_displacement = 0.02;      // m
    double hop_airborne_fraction = 0.15;
    double caterpillar_max_airborne = 0.05;
    double phase_wave_correlation = 0.7;
    double roll_angle = std::numbers::pi;   // rad
    int caterpillar_min_modules = 4;
    double min_duration = 2.0;              // s
};

struct ClassificationUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GaitFeatures {
    double displacement = 0.0;       // horizontal COM, first to last sample
    double airborne_fraction = 0.0;  // samples with no node touching ground
    double roll = 0.0;               // rad about the horizontal axis across travel
    double phase_wave = 0.0;         // Spearman(chain position, phase)
};

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side has no spread.
double spearman(std::span<const double> x, std::span<const double> y);

GaitFeatures gait_features(const Trajectory& trajectory, const DecodedRobot& decoded);

GaitClass classify_gait(const Trajectory& trajectory, const DecodedRobot& decoded,
                        const GaitThresholds& thresholds = {});

}  // namespace tensoft

#endif  // TENSOFT_GAIT_HPP

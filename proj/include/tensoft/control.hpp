#ifndef TENSOFT_CONTROL_HPP
#define TENSOFT_CONTROL_HPP

#include <array>
#include <cmath>

namespace tensoft {

/// Open-loop sawtooth parameters of one module's servo.
struct ControlGene {
    double frequency = 0.0;  // Hz, [0, 1]
    double amplitude = 0.0;  // [0, 1]
    double phase = 0.0;      // fraction of a period, [0, 1)

    bool operator==(const ControlGene&) const = default;
};

/// The three tendon cables running from each vertex of the actuated face to
/// the opposite vertex of the parallel face.
struct ActuationGroup {
    std::array<int, 3> cable_ids{};
    double natural_length = 0.0;
    double max_contraction = 0.35;
};

/// Slow wind from 0 towards 1, then instantaneous reset.
template <typename Scalar>
Scalar sawtooth(Scalar t, const ControlGene& gene)
{
    const Scalar x = Scalar(gene.frequency) * t + Scalar(gene.phase);
    return x - std::floor(x);
}

template <typename Scalar>
Scalar rest_length_at(Scalar t, const ControlGene& gene, const ActuationGroup& group)
{
    return Scalar(group.natural_length) *
           (Scalar(1) - Scalar(group.max_contraction) * Scalar(gene.amplitude) * sawtooth(t, gene));
}

}  // namespace tensoft

#endif  // TENSOFT_CONTROL_HPP

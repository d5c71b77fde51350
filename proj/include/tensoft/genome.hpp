#ifndef TENSOFT_GENOME_HPP
#define TENSOFT_GENOME_HPP

#include <bitset>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tensoft/control.hpp"
#include "tensoft/robot.hpp"

namespace tensoft {

// Bit layout (bit 0 first, fields read most-significant bit first):
//   [0, 3)            header: module count = 2 + value
//   [3 + 36 s, ...)   slot s = 0..8, 36 bits each:
//       parent 4 | parent face 3 | orientation 2 | actuation face 3 |
//       frequency 8 | amplitude 8 | phase 8
// Slot 0 is the root; its parent, face and orientation fields are unused.
inline constexpr int kHeaderBits = 3;
inline constexpr int kSlotBits = 36;
inline constexpr int kMaxModules = 9;
inline constexpr int kMinModules = 2;
inline constexpr int kGenomeBits = kHeaderBits + kMaxModules * kSlotBits;  // 327

struct SlotLayout {
    static constexpr int parent = 0, parent_width = 4;
    static constexpr int face = 4, face_width = 3;
    static constexpr int orientation = 7, orientation_width = 2;
    static constexpr int actuation = 9, actuation_width = 3;
    static constexpr int frequency = 12, frequency_width = 8;
    static constexpr int amplitude = 20, amplitude_width = 8;
    static constexpr int phase = 28, phase_width = 8;
};

struct Genome {
    std::bitset<kGenomeBits> bits;

    bool operator==(const Genome&) const = default;

    unsigned field(int offset, int width) const;
    void set_field(int offset, int width, unsigned value);
    static constexpr int slot_offset(int slot) { return kHeaderBits + slot * kSlotBits; }
};

/// 82 lowercase hex digits; bit 0 is the most significant bit of the first
/// digit and the final digit carries one padding zero bit.
std::string to_hex(const Genome& genome);
Genome genome_from_hex(std::string_view hex);

struct DecodedRobot {
    std::vector<ModulePlacement> placements;
    std::vector<ControlGene> control;

    int module_count() const { return static_cast<int>(placements.size()); }
    bool operator==(const DecodedRobot&) const = default;
};

/// Total: every genome decodes to a valid tree. Occupied parent faces are
/// repaired by probing the next faces, then the next parents.
DecodedRobot decode(const Genome& genome);

/// The GA's random source. Uniform variates are built from raw 64-bit draws
/// so the stream does not depend on the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

Genome random_genome(std::uint64_t seed);
Genome mutate(const Genome& genome, double per_bit_rate, Rng& rng);
/// One-point crossover with the cut uniform in [1, kGenomeBits - 1].
std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Rng& rng);
/// Children take a's (resp. b's) bits before `cut` and the other's after.
std::pair<Genome, Genome> crossover_at(const Genome& a, const Genome& b, int cut);

}  // namespace tensoft

template <>
struct std::hash<tensoft::Genome> {
    std::size_t operator()(const tensoft::Genome& g) const noexcept
    {
        return std::hash<std::bitset<tensoft::kGenomeBits>>{}(g.bits);
    }
};

#endif  // TENSOFT_GENOME_HPP

#include "tensoft/genome.hpp"

#include <array>
#include <stdexcept>

namespace tensoft {

unsigned Genome::field(int offset, int width) const
{
    unsigned value = 0;
    for (int i = 0; i < width; ++i)
        value = (value << 1) | (bits[offset + i] ? 1u : 0u);
    return value;
}

void Genome::set_field(int offset, int width, unsigned value)
{
    for (int i = 0; i < width; ++i)
        bits[offset + i] = (value >> (width - 1 - i)) & 1u;
}

std::string to_hex(const Genome& genome)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (int i = 0; i < kGenomeBits; i += 4) {
        unsigned nibble = 0;
        for (int k = 0; k < 4; ++k)
            nibble = (nibble << 1) | ((i + k < kGenomeBits && genome.bits[i + k]) ? 1u : 0u);
        out.push_back(digits[nibble]);
    }
    return out;
}

Genome genome_from_hex(std::string_view hex)
{
    constexpr std::size_t expected = (kGenomeBits + 3) / 4;
    if (hex.size() != expected)
        throw std::invalid_argument("genome hex must be " + std::to_string(expected) + " digits");
    Genome g;
    for (std::size_t d = 0; d < hex.size(); ++d) {
        const char c = hex[d];
        unsigned nibble;
        if (c >= '0' && c <= '9')
            nibble = static_cast<unsigned>(c - '0');
        else if (c >= 'a' && c <= 'f')
            nibble = static_cast<unsigned>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F')
            nibble = static_cast<unsigned>(c - 'A' + 10);
        else
            throw std::invalid_argument("genome hex contains a non-hex character");
        for (int k = 0; k < 4; ++k) {
            const int bit = static_cast<int>(d) * 4 + k;
            const bool on = (nibble >> (3 - k)) & 1u;
            if (bit < kGenomeBits)
                g.bits[bit] = on;
            else if (on)
                throw std::invalid_argument("genome hex sets a padding bit");
        }
    }
    return g;
}

DecodedRobot decode(const Genome& genome)
{
    using L = SlotLayout;
    DecodedRobot robot;
    const int count = kMinModules + static_cast<int>(genome.field(0, kHeaderBits) % 8);

    std::array<std::array<bool, kFacesPerModule>, kMaxModules> occupied{};
    for (int i = 0; i < count; ++i) {
        const int off = Genome::slot_offset(i);
        ModulePlacement p;
        p.module_index = i;
        p.actuation_face = static_cast<FaceId>(genome.field(off + L::actuation, L::actuation_width));

        if (i > 0) {
            int parent = static_cast<int>(genome.field(off + L::parent, L::parent_width)) % i;
            const int requested = static_cast<int>(genome.field(off + L::face, L::face_width));
            int face = -1;
            for (int attempt = 0; attempt < i && face < 0; ++attempt) {
                for (int probe = 0; probe < kFacesPerModule; ++probe) {
                    const int f = (requested + probe) % kFacesPerModule;
                    if (!occupied[parent][f]) {
                        face = f;
                        break;
                    }
                }
                if (face < 0)
                    parent = (parent + 1) % i;
            }
            // The root always has a free face while fewer than 9 children
            // exist, so probing terminates with a face.
            occupied[parent][face] = true;
            occupied[i][kChildAttachFace] = true;
            p.parent_index = parent;
            p.parent_face = face;
            p.orientation = static_cast<int>(genome.field(off + L::orientation, L::orientation_width)) % 3;
        }
        robot.placements.push_back(p);

        ControlGene c;
        c.frequency = genome.field(off + L::frequency, L::frequency_width) / 255.0;
        c.amplitude = genome.field(off + L::amplitude, L::amplitude_width) / 255.0;
        c.phase = genome.field(off + L::phase, L::phase_width) / 256.0;
        robot.control.push_back(c);
    }
    return robot;
}

std::uint64_t Rng::below(std::uint64_t n)
{
    if (n == 0)
        throw std::invalid_argument("Rng::below needs n > 0");
    // Rejection sampling keeps the result unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

Genome random_genome(std::uint64_t seed)
{
    std::mt19937_64 engine(seed);
    Genome g;
    std::uint64_t word = 0;
    for (int i = 0; i < kGenomeBits; ++i) {
        if (i % 64 == 0)
            word = engine();
        g.bits[i] = (word >> (i % 64)) & 1u;
    }
    return g;
}

Genome mutate(const Genome& genome, double per_bit_rate, Rng& rng)
{
    if (!(per_bit_rate >= 0.0 && per_bit_rate <= 1.0))
        throw std::invalid_argument("mutation rate must lie in [0, 1]");
    Genome out = genome;
    for (int i = 0; i < kGenomeBits; ++i)
        if (rng.uniform() < per_bit_rate)
            out.bits.flip(i);
    return out;
}

std::pair<Genome, Genome> crossover_at(const Genome& a, const Genome& b, int cut)
{
    if (cut < 0 || cut > kGenomeBits)
        throw std::invalid_argument("crossover cut out of range");
    Genome c1 = a, c2 = b;
    for (int i = cut; i < kGenomeBits; ++i) {
        c1.bits[i] = b.bits[i];
        c2.bits[i] = a.bits[i];
    }
    return {c1, c2};
}

std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Rng& rng)
{
    const int cut = 1 + static_cast<int>(rng.below(kGenomeBits - 1));
    return crossover_at(a, b, cut);
}

}  // namespace tensoft

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mfg {

// Philox4x32-10 counter-based generator (Salmon et al. construction).
// Pure function of (counter, key): no state, so every draw in a simulation
// is addressable as (seed, replication, agent, kind, step). Varying the
// population size N leaves all other streams untouched, which is what makes
// common-random-number sweeps over N well defined.
namespace philox {

constexpr uint32_t kMult0 = 0xD2511F53u;
constexpr uint32_t kMult1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

using Counter = std::array<uint32_t, 4>;
using Key = std::array<uint32_t, 2>;

inline Counter round_once(const Counter& c, const Key& k) {
    const uint64_t p0 = uint64_t(kMult0) * c[0];
    const uint64_t p1 = uint64_t(kMult1) * c[2];
    const uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
    const uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline Counter block(Counter c, Key k) {
    for (int r = 0;;) {
        c = round_once(c, k);
        if (++r == 10) break;
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

} // namespace philox

// Stream kinds. The numeric values are part of the reproducibility contract:
// changing them changes every artifact byte.
enum class StreamKind : uint32_t {
    idiosyncratic = 0, // per-agent Brownian increments
    common = 1,        // shared W0 increments
    init = 2,          // initial state draws
    probe = 3,         // convexity-probe random controls
    deviation = 4,     // deviation-suite random controls/offsets
};

class NoiseStream {
public:
    NoiseStream(uint64_t seed, uint32_t replication, uint32_t agent, StreamKind kind)
        : key_{uint32_t(seed), uint32_t(seed >> 32)},
          base_{0, agent, replication, static_cast<uint32_t>(kind)} {}

    // 128 random bits for draw index `idx` within the stream.
    philox::Counter bits(uint32_t idx) const {
        philox::Counter c = base_;
        c[0] = idx;
        return philox::block(c, key_);
    }

    // u in [0, 1), 53-bit resolution.
    double uniform(uint32_t idx) const {
        const philox::Counter b = bits(idx);
        const uint64_t w = (uint64_t(b[1]) << 32) | b[0];
        return double(w >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller on the two 64-bit halves of one block.
    // No rejection loop, so the draw is a pure function of the index.
    double gaussian(uint32_t idx) const {
        const philox::Counter b = bits(idx);
        const uint64_t w0 = (uint64_t(b[1]) << 32) | b[0];
        const uint64_t w1 = (uint64_t(b[3]) << 32) | b[2];
        const double u1 = (double(w0 >> 11) + 0.5) * 0x1.0p-53; // (0,1)
        const double u2 = double(w1 >> 11) * 0x1.0p-53;         // [0,1)
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

private:
    philox::Key key_;
    philox::Counter base_;
};

} // namespace mfg

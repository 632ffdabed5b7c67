#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace habit {

/// Philox4x32-10 counter-based block cipher (Salmon et al. constants). Pure
/// function of (counter, key), so any (seed, path, step) triple can be hashed
/// to random bits with no sequential state.
struct Philox4x32 {
    static constexpr std::uint32_t M0 = 0xD2511F53u;
    static constexpr std::uint32_t M1 = 0xCD9E8D57u;
    static constexpr std::uint32_t W0 = 0x9E3779B9u;
    static constexpr std::uint32_t W1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> c,
                                              std::array<std::uint32_t, 2> k) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t(M0) * c[0];
            const std::uint64_t p1 = std::uint64_t(M1) * c[2];
            c = {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1),
                 std::uint32_t(p0 >> 32) ^ c[3] ^ k[1], std::uint32_t(p0)};
            k[0] += W0;
            k[1] += W1;
        }
        return c;
    }
};

struct NormalPair {
    double z1;
    double z2;
};

/// Two independent standard normals from the Philox block keyed on
/// (seed; path, step): Box-Muller on the first two output lanes.
/// u1 is mapped into (0,1] so the log never sees zero.
inline NormalPair normal_pair(std::uint64_t seed, std::uint64_t path, std::uint64_t step) {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    const std::array<std::uint32_t, 4> ctr = {
        std::uint32_t(step), std::uint32_t(step >> 32),
        std::uint32_t(path), std::uint32_t(path >> 32)};
    const std::array<std::uint32_t, 2> key = {std::uint32_t(seed), std::uint32_t(seed >> 32)};
    const auto x = Philox4x32::block(ctr, key);
    const double u1 = (double(x[0]) + 1.0) * 0x1p-32;
    const double u2 = (double(x[1]) + 0.5) * 0x1p-32;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2)};
}

/// Uniform in [0,1) keyed on (seed; path, step, lane 2). Used by test samplers.
inline double uniform01(std::uint64_t seed, std::uint64_t path, std::uint64_t step) {
    const std::array<std::uint32_t, 4> ctr = {
        std::uint32_t(step), std::uint32_t(step >> 32),
        std::uint32_t(path), std::uint32_t(path >> 32)};
    const std::array<std::uint32_t, 2> key = {std::uint32_t(seed), std::uint32_t(seed >> 32)};
    return double(Philox4x32::block(ctr, key)[2]) * 0x1p-32;
}

} // namespace habit

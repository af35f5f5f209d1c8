#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace experts {

// Counter-based generator: Philox4x32-10.
//
// Every draw is a pure function of (key, stream, counter), so independent
// streams can be handed to parallel workers and replayed exactly. The
// generator name below is recorded in output artifacts so results stay
// reproducible across versions.
inline constexpr std::string_view kRngName = "philox4x32-10";

class Philox {
public:
    explicit Philox(uint64_t key, uint64_t stream = 0) noexcept
        : key_(key), stream_(stream) {}

    // One 4x32 block per counter value.
    static std::array<uint32_t, 4> block(uint64_t key, uint64_t stream, uint64_t counter) noexcept {
        uint32_t c0 = static_cast<uint32_t>(counter);
        uint32_t c1 = static_cast<uint32_t>(counter >> 32);
        uint32_t c2 = static_cast<uint32_t>(stream);
        uint32_t c3 = static_cast<uint32_t>(stream >> 32);
        uint32_t k0 = static_cast<uint32_t>(key);
        uint32_t k1 = static_cast<uint32_t>(key >> 32);

        round(c0, c1, c2, c3, k0, k1);
        for (int r = 1; r < 10; ++r) {
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
            round(c0, c1, c2, c3, k0, k1);
        }
        return {c0, c1, c2, c3};
    }

    uint32_t next_u32() noexcept {
        if (pos_ == 4) {
            buf_ = block(key_, stream_, counter_++);
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    uint64_t next_u64() noexcept {
        uint64_t lo = next_u32();
        uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n) via multiply-shift; n must be > 0.
    uint32_t bounded(uint32_t n) noexcept {
        return static_cast<uint32_t>((static_cast<uint64_t>(next_u32()) * n) >> 32);
    }

    uint64_t key() const noexcept { return key_; }
    uint64_t stream() const noexcept { return stream_; }

private:
    static void round(uint32_t& c0, uint32_t& c1, uint32_t& c2, uint32_t& c3,
                      uint32_t k0, uint32_t k1) noexcept {
        uint64_t p0 = 0xD2511F53ull * c0;
        uint64_t p1 = 0xCD9E8D57ull * c2;
        uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
        uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
        uint32_t n0 = hi1 ^ c1 ^ k0;
        uint32_t n2 = hi0 ^ c3 ^ k1;
        c0 = n0;
        c1 = lo1;
        c2 = n2;
        c3 = lo0;
    }

    uint64_t key_;
    uint64_t stream_;
    uint64_t counter_ = 0;
    std::array<uint32_t, 4> buf_{};
    int pos_ = 4;
};

// 64-bit mix (splitmix64 finalizer). Used to derive sub-stream ids.
inline uint64_t mix64(uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace experts

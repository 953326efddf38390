#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace rankinfer {

// SplitMix64 finalizer, used to derive well-mixed stream keys.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Derives a child seed from a master seed and up to two tags. Different tag
// combinations yield independent streams, so replications and bootstrap
// draws can be seeded without coordinating across threads.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag_a,
                                 std::uint64_t tag_b = 0) {
    std::uint64_t h = mix64(master);
    h = mix64(h ^ mix64(tag_a + 0x9E3779B97F4A7C15ull));
    h = mix64(h ^ mix64(tag_b + 0xBF58476D1CE4E5B9ull));
    return h;
}

// FNV-1a, for turning labels into seed tags.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

// Philox 4x32-10 counter-based generator (Salmon et al. 2011).
//
// The state is (key, counter) and each (seed, stream) pair indexes a
// disjoint counter range, so sequences for different streams never overlap
// and can be generated in any order, on any number of threads, with
// identical output.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          ctr2_(static_cast<std::uint32_t>(stream)),
          ctr3_(static_cast<std::uint32_t>(stream >> 32)) {}

    std::uint64_t next_u64() {
        if (idx_ > 2) {
            refill();
            idx_ = 0;
        }
        const std::uint64_t v =
            (static_cast<std::uint64_t>(out_[idx_ + 1]) << 32) | out_[idx_];
        idx_ += 2;
        return v;
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log argument.
    double uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Unbiased uniform integer on [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller; the paired variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double angle = 6.283185307179586476925286766559 * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

  private:
    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                        std::uint32_t& lo) {
        const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        lo = static_cast<std::uint32_t>(p);
    }

    void refill() {
        std::uint32_t c0 = ctr0_, c1 = ctr1_, c2 = ctr2_, c3 = ctr3_;
        std::uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            std::uint32_t hi0, lo0, hi1, lo1;
            mulhilo(0xD2511F53u, c0, hi0, lo0);
            mulhilo(0xCD9E8D57u, c2, hi1, lo1);
            const std::uint32_t n0 = hi1 ^ c1 ^ k0;
            const std::uint32_t n1 = lo1;
            const std::uint32_t n2 = hi0 ^ c3 ^ k1;
            const std::uint32_t n3 = lo0;
            c0 = n0;
            c1 = n1;
            c2 = n2;
            c3 = n3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        out_[0] = c0;
        out_[1] = c1;
        out_[2] = c2;
        out_[3] = c3;
        if (++ctr0_ == 0) ++ctr1_;
    }

    std::uint32_t key0_, key1_;
    std::uint32_t ctr0_ = 0, ctr1_ = 0, ctr2_, ctr3_;
    std::uint32_t out_[4] = {0, 0, 0, 0};
    int idx_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Equal-probability multinomial counts, formed from `trials` independent
// uniform category draws.
inline std::vector<std::int64_t> multinomial_counts(std::int64_t trials,
                                                    std::int64_t categories,
                                                    CounterRng& rng) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(categories), 0);
    for (std::int64_t i = 0; i < trials; ++i) {
        ++counts[rng.next_below(static_cast<std::uint64_t>(categories))];
    }
    return counts;
}

}  // namespace rankinfer

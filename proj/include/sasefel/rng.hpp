#pragma once

#include <array>
#include <cstdint>
#include <random>

namespace sasefel {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Random stream for one realization. Streams are derived from a
/// (master seed, stream index) pair, so any realization can be regenerated
/// without replaying the others.
class RngStream {
public:
    using engine_type = std::mt19937_64;

    RngStream(std::uint64_t master_seed, std::uint64_t index) {
        std::uint64_t s = master_seed ^ detail::splitmix64(index);
        std::array<std::uint32_t, 8> words{};
        for (std::size_t i = 0; i < words.size(); i += 2) {
            const std::uint64_t w = detail::splitmix64(s);
            words[i] = static_cast<std::uint32_t>(w);
            words[i + 1] = static_cast<std::uint32_t>(w >> 32);
        }
        std::seed_seq seq(words.begin(), words.end());
        engine_.seed(seq);
    }

    explicit RngStream(std::uint64_t seed) : RngStream(seed, 0) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    engine_type& engine() noexcept { return engine_; }

private:
    engine_type engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace sasefel

#include "ustatbench/rng.hpp"

#include <array>

namespace ustatbench {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

Seed Seed::derive(std::uint64_t tag) const noexcept {
    return Seed{splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL)), tag};
}

Engine make_engine(Seed seed) {
    const std::array<std::uint32_t, 4> words{
        static_cast<std::uint32_t>(seed.master),
        static_cast<std::uint32_t>(seed.master >> 32),
        static_cast<std::uint32_t>(seed.stream),
        static_cast<std::uint32_t>(seed.stream >> 32),
    };
    std::seed_seq seq(words.begin(), words.end());
    return Engine(seq);
}

} // namespace ustatbench

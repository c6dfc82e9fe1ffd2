// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace isprm {

// splitmix64 finalizer; every seed in the toolkit is derived through it so
// results do not depend on thread scheduling.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// derive_seed(base, a, b, ...) = splitmix64(...splitmix64(splitmix64(base) ^ a) ^ b ...)
template <typename... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t base, Parts... parts) noexcept
{
    std::uint64_t h = splitmix64(base);
    ((h = splitmix64(h ^ static_cast<std::uint64_t>(parts))), ...);
    return h;
}

/// Maps the top 53 bits to [0, 1).
constexpr double to_unit(std::uint64_t x) noexcept
{
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Counter-based stream keyed on (key, counter): the n-th draw is a pure
/// function of the key, so independent streams can be split off freely.
class CounterRng {
  public:
    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    constexpr std::uint64_t next() noexcept { return derive_seed(key_, counter_++); }
    constexpr double uniform() noexcept { return to_unit(next()); }
    /// Uniform integer in [0, bound).
    constexpr std::uint64_t below(std::uint64_t bound) noexcept
    {
        return bound == 0 ? 0 : static_cast<std::uint64_t>(uniform() * static_cast<double>(bound));
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace isprm

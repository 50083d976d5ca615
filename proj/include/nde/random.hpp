#pragma once

#include <cstdint>

namespace nde {

/// Stateless generator: the value at (key, counter) does not depend on which
/// other counters were drawn, so index-parallel sampling is reproducible.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t bits(std::uint64_t counter) const;
    double uniform(std::uint64_t counter) const;  // [0, 1)
    double normal(std::uint64_t counter) const;   // standard normal, uses counters 2c and 2c+1

private:
    std::uint64_t key_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace nde

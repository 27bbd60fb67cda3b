#pragma once

#include <vector>

#include "sizer/rng.hpp"

namespace sizer {

using UnitPoint = std::vector<double>;

/// Latin hypercube of n points inside the box [lower, upper] of the unit cube.
std::vector<UnitPoint> latin_hypercube(std::size_t n, const std::vector<double>& lower,
                                       const std::vector<double>& upper, Rng& rng);
std::vector<UnitPoint> latin_hypercube(std::size_t n, std::size_t dim, Rng& rng);

/// Halton sequence with a random digit permutation per dimension, in [0,1)^dim.
std::vector<UnitPoint> scrambled_halton(std::size_t n, std::size_t dim, Rng& rng);

}  // namespace sizer

#include "cllab/rng.hpp"

#include <cmath>
#include <numbers>

namespace cllab {

double next_normal(RngState& s) {
    // 1 - u keeps the log argument in (0, 1].
    double u1 = 1.0 - next_uniform(s);
    double u2 = next_uniform(s);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace cllab

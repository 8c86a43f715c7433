#include "hrg/random.hpp"

#include <cmath>
#include <numbers>

namespace hrg {

double NormalSampler::operator()() noexcept
{
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = rng_.uniform_pos();
    const double u2 = rng_.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(t);
    has_cached_ = true;
    return r * std::cos(t);
}

} // namespace hrg

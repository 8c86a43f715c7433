#pragma once

#include <algorithm>
#include <cmath>

/// |a - b| <= abs_tol + rel_tol * max(|a|, |b|)
inline bool close(double a, double b, double rel_tol, double abs_tol = 0.0)
{
    return std::abs(a - b) <= abs_tol + rel_tol * std::max(std::abs(a), std::abs(b));
}

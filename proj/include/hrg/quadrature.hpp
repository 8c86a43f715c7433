#pragma once

#include <vector>

namespace hrg {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<double> log_weights; ///< accurate even where weights underflow
};

/// E[f(Z)], Z ~ N(0,1), as sum_i w_i f(x_i). Weights sum to 1. Rules are cached per order.
const QuadratureRule& gauss_hermite_normal(int order);

/// int_0^inf x^alpha e^{-x} f(x) dx as sum_i w_i f(x_i), alpha > -1. Cached per (order, alpha).
const QuadratureRule& gauss_laguerre(int order, double alpha);

} // namespace hrg

#include "hrg/quadrature.hpp"

#include "hrg/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

namespace hrg {

namespace {

// Nodes are eigenvalues of the Jacobi matrix (diag a_k, off-diagonal b_k). Weights come from the
// Christoffel function 1 / sum_k p_k(x)^2 of the orthonormal polynomials, accumulated with a running
// log scale so that far-tail weights keep full relative accuracy.
QuadratureRule gauss_rule(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double mu0)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(a, b, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw QuadratureError("Jacobi matrix eigensolve failed");
    const auto n = a.size();
    QuadratureRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    r.log_weights.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = es.eigenvalues()(i);
        double prev = 0.0, cur = 1.0 / std::sqrt(mu0);
        double log_scale = 0.0, sum = cur * cur;
        for (Eigen::Index k = 0; k + 1 < n; ++k) {
            const double bk = k > 0 ? b(k - 1) : 0.0;
            const double next = ((x - a(k)) * cur - bk * prev) / b(k);
            prev = cur;
            cur = next;
            sum += cur * cur;
            if (std::abs(cur) > 1e100) {
                prev *= 1e-100;
                cur *= 1e-100;
                sum *= 1e-200;
                log_scale += 200.0 * std::log(10.0);
            }
        }
        r.nodes[i] = x;
        r.log_weights[i] = -(std::log(sum) + log_scale);
        r.weights[i] = std::exp(r.log_weights[i]);
    }
    return r;
}

std::mutex cache_mutex;

} // namespace

const QuadratureRule& gauss_hermite_normal(int order)
{
    if (order < 1) throw QuadratureError("quadrature order must be positive");
    static std::map<int, QuadratureRule> cache;
    std::lock_guard lock(cache_mutex);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;

    // Probabilists' Hermite polynomials: x p_k = p_{k+1} + k p_{k-1}.
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
    Eigen::VectorXd off(order > 1 ? order - 1 : 0);
    for (int k = 1; k < order; ++k) off(k - 1) = std::sqrt(double(k));
    auto rule = gauss_rule(diag, off, 1.0);
    return cache.emplace(order, std::move(rule)).first->second;
}

const QuadratureRule& gauss_laguerre(int order, double alpha)
{
    if (order < 1) throw QuadratureError("quadrature order must be positive");
    if (!(alpha > -1.0)) throw QuadratureError("Laguerre exponent must exceed -1");
    static std::map<std::pair<int, double>, QuadratureRule> cache;
    std::lock_guard lock(cache_mutex);
    auto key = std::make_pair(order, alpha);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    Eigen::VectorXd diag(order);
    Eigen::VectorXd off(order > 1 ? order - 1 : 0);
    for (int k = 0; k < order; ++k) diag(k) = 2.0 * k + alpha + 1.0;
    for (int k = 1; k < order; ++k) off(k - 1) = std::sqrt(k * (k + alpha));
    auto rule = gauss_rule(diag, off, std::tgamma(alpha + 1.0));
    return cache.emplace(key, std::move(rule)).first->second;
}

} // namespace hrg

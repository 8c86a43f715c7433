#include "hrg/oracle.hpp"

#include "hrg/errors.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hrg {

std::vector<double> DenseOperator::spectrum() const
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

std::vector<int> site_coordinates(const HierLattice& lat, std::size_t site)
{
    const int L = lat.L(), d = lat.d();
    std::vector<int> coord(d, 0);
    int scale = 1;
    for (int level = 0; level < lat.N(); ++level) {
        for (int i = 0; i < d; ++i) {
            coord[i] += int(site % L) * scale;
            site /= L;
        }
        scale *= L;
    }
    return coord;
}

namespace {

struct Geometry {
    std::vector<std::vector<int>> coords;
    int L;

    bool same_block(std::size_t x, std::size_t y, int j) const
    {
        int side = 1;
        for (int k = 0; k < j; ++k) side *= L;
        for (std::size_t i = 0; i < coords[x].size(); ++i)
            if (coords[x][i] / side != coords[y][i] / side) return false;
        return true;
    }
};

Geometry make_geometry(const HierLattice& lat)
{
    if (lat.num_sites() > kDenseCapacity) throw CapacityError("dense oracle: |Lambda| exceeds 4096");
    Geometry g{{}, lat.L()};
    g.coords.reserve(lat.num_sites());
    for (std::size_t x = 0; x < lat.num_sites(); ++x) g.coords.push_back(site_coordinates(lat, x));
    return g;
}

Eigen::MatrixXd block_matrix(const Geometry& g, const HierLattice& lat, int j)
{
    const std::size_t V = lat.num_sites();
    const double inv = 1.0 / std::pow(double(lat.L()), double(lat.d() * j));
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(V, V);
    for (std::size_t x = 0; x < V; ++x)
        for (std::size_t y = 0; y < V; ++y)
            if (g.same_block(x, y, j)) Q(x, y) = inv;
    return Q;
}

} // namespace

DenseHierOperators dense_hier_operators(const CovarianceDecomposition& decomp)
{
    const auto& lat = decomp.lattice;
    const auto g = make_geometry(lat);
    const int N = lat.N();
    const std::size_t V = lat.num_sites();

    DenseHierOperators ops;
    for (int j = 0; j <= N; ++j) ops.block_averages.push_back({block_matrix(g, lat, j)});

    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(V, V);
    for (int j = 1; j <= N; ++j)
        lap += std::pow(double(lat.L()), -2.0 * (j - 1)) *
               (ops.block_averages[j - 1].matrix - ops.block_averages[j].matrix);
    ops.neg_laplacian = {lap};

    Eigen::MatrixXd M;
    if (const auto* m = std::get_if<MassiveMode>(&decomp.mode)) {
        M = lap + m->m2 * Eigen::MatrixXd::Identity(V, V);
    } else {
        const double beta = std::get<SineGordonMode>(decomp.mode).beta;
        const double eps = beta * std::pow(double(lat.L()), -2.0 * N);
        M = beta * lap + eps * ops.block_averages[N].matrix;
    }
    ops.coupling = {M};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    const auto& U = es.eigenvectors();
    ops.covariance = {U * es.eigenvalues().cwiseInverse().asDiagonal() * U.transpose()};
    return ops;
}

DenseOperator dense_block_sum(const HierLattice& lat, const std::vector<double>& weights)
{
    const auto g = make_geometry(lat);
    const std::size_t V = lat.num_sites();
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(V, V);
    for (std::size_t j = 0; j < weights.size() && int(j) <= lat.N(); ++j)
        S += weights[j] * block_matrix(g, lat, int(j));
    return {S};
}

namespace {

// Interval outside of which energy - min(energy) exceeds `cut`.
std::pair<double, double> support_interval(const std::function<double(double)>& H, double cut)
{
    const int P = 8001;
    const double R = 40.0;
    std::vector<double> xs(P), hs(P);
    double hmin = INFINITY;
    for (int i = 0; i < P; ++i) {
        xs[i] = -R + 2.0 * R * i / (P - 1);
        hs[i] = H(xs[i]);
        hmin = std::min(hmin, hs[i]);
    }
    int a = 0, b = P - 1;
    while (a < P && hs[a] - hmin > cut) ++a;
    while (b >= 0 && hs[b] - hmin > cut) --b;
    if (a == 0 || b == P - 1) throw ResolutionError("oracle: measure not confined to [-40, 40]");
    return {xs[a - 1], xs[b + 1]};
}

double tridiagonal_second_eigenvalue(const Eigen::VectorXd& diag, const Eigen::VectorXd& off)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("oracle: tridiagonal eigensolve failed");
    return es.eigenvalues()(1);
}

double fd_gap(const std::function<double(double)>& H, double a, double lo, double hi, int P)
{
    const double h = (hi - lo) / P;
    std::vector<double> hv(P + 1), hm(P);
    double hmin = INFINITY;
    for (int i = 0; i <= P; ++i) {
        hv[i] = H(lo + i * h);
        hmin = std::min(hmin, hv[i]);
    }
    for (int i = 0; i < P; ++i) hm[i] = H(lo + (i + 0.5) * h);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(P + 1), off(P);
    for (int i = 0; i < P; ++i) {
        // conductance between i and i+1, in units where node masses are e^{-H_i}
        const double c = a / (h * h) * std::exp(-(hm[i] - hmin));
        const double wi = std::exp(-(hv[i] - hmin)), wj = std::exp(-(hv[i + 1] - hmin));
        diag(i) += c / wi;
        diag(i + 1) += c / wj;
        off(i) = -c / std::sqrt(wi * wj);
    }
    return tridiagonal_second_eigenvalue(diag, off);
}

} // namespace

GeneratorGap generator_gap_1d(const std::function<double(double)>& energy, double diffusion, int points)
{
    const auto [lo, hi] = support_interval(energy, 46.0);
    GeneratorGap g;
    g.lo = lo;
    g.hi = hi;
    g.spacing = (hi - lo) / points;
    g.coarse = fd_gap(energy, diffusion, lo, hi, points);
    g.fine = fd_gap(energy, diffusion, lo, hi, 2 * points);
    g.gap = (4.0 * g.fine - g.coarse) / 3.0;
    if (!(std::abs(g.gap - g.fine) <= 0.01 * std::abs(g.gap)))
        throw ResolutionError("generator_gap_1d: Richardson extrapolation moved the gap by more than 1%");
    return g;
}

DGSingleSiteGap dg_exact_gap(double beta, double psi, int K)
{
    if (!(beta > 0.0)) throw ParameterError("dg_exact_gap: beta must be positive");
    if (K < 1) throw ParameterError("dg_exact_gap: truncation K must be >= 1");
    if (2 * K + 2 > 4000) throw CapacityError("dg_exact_gap: truncation too large");
    const double pi = std::numbers::pi;
    const double a = psi / (2.0 * pi);
    const int k0 = int(std::floor(a)) - K, k1 = int(std::ceil(a)) + K;

    std::vector<double> logw;
    std::vector<int> ks;
    for (int k = k0; k <= k1; ++k) {
        ks.push_back(k);
        logw.push_back(-2.0 * pi * pi * beta * (k - a) * (k - a));
    }
    const double lmax = *std::max_element(logw.begin(), logw.end());
    // Edge states must carry negligible mass.
    const double edge = std::max(logw.front(), logw.back()) - lmax;
    if (edge > std::log(1e-13)) throw TruncationError("dg_exact_gap: truncation K leaves mass at the edges");

    std::vector<double> mu;
    std::vector<int> idx;
    for (std::size_t s = 0; s < ks.size(); ++s)
        if (logw[s] - lmax > -600.0) {
            mu.push_back(std::exp(logw[s] - lmax));
            idx.push_back(ks[s]);
        }
    double Z = 0.0;
    for (double m : mu) Z += m;
    for (double& m : mu) m /= Z;
    const int S = int(mu.size());

    DGSingleSiteGap out;
    out.states = S;
    double mean = 0.0, second = 0.0;
    for (int s = 0; s < S; ++s) {
        mean += mu[s] * idx[s];
        second += mu[s] * double(idx[s]) * idx[s];
    }
    out.variance = second - mean * mean;

    if (S == 1) {
        out.gap = INFINITY;
        out.path_constant = 0.0;
        return out;
    }

    // 1/gap = sup over mean-zero g of sum_i G_i^2 / c_i / sum mu g^2, where G_i is the cumulative
    // mu-weighted sum of g up to i (equivalently minus the sum beyond i) and c_i = mu_i + mu_{i+1}.
    // Accumulating from the nearer tail keeps every matrix entry bounded.
    const int mode = int(std::max_element(mu.begin(), mu.end()) - mu.begin());
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(S, S);
    Eigen::VectorXd w(S);
    for (int i = 0; i + 1 < S; ++i) {
        const double c = mu[i] + mu[i + 1];
        w.setZero();
        if (i < mode)
            for (int m = 0; m <= i; ++m) w(m) = std::sqrt(mu[m]);
        else
            for (int m = i + 1; m < S; ++m) w(m) = -std::sqrt(mu[m]);
        B.noalias() += (w / c) * w.transpose();
    }
    Eigen::VectorXd u(S);
    for (int s = 0; s < S; ++s) u(s) = std::sqrt(mu[s]);
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(S, S) - u * u.transpose();
    const Eigen::MatrixXd PBP = P * B * P;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (PBP + PBP.transpose()), Eigen::EigenvaluesOnly);
    const double inv_gap = es.eigenvalues()(S - 1);
    out.gap = 1.0 / inv_gap;

    // Path-method bound: max_i sum_{n <= i < m} mu_n mu_m (m - n) / (mu_i + mu_{i+1}).
    double cmax = 0.0;
    for (int i = 0; i + 1 < S; ++i) {
        const double c = mu[i] + mu[i + 1];
        if (c < 1e-300) continue;
        double right_mass = 0.0, right_moment = 0.0;
        for (int m = i + 1; m < S; ++m) {
            right_mass += mu[m];
            right_moment += mu[m] * (m - i);
        }
        double total = 0.0;
        for (int n = 0; n <= i; ++n) total += mu[n] * (right_moment + (i - n) * right_mass);
        cmax = std::max(cmax, total / c);
    }
    out.path_constant = cmax;
    return out;
}

namespace {

struct Box {
    Eigen::VectorXd lo, hi;
};

Box gibbs_box(const GibbsModel& model, const Eigen::VectorXd& c)
{
    const int k = model.dim;
    const double cut = 50.0;
    double R = 10.0 * model.scale;
    for (int attempt = 0; attempt < 8; ++attempt, R *= 2.0) {
        const int P = k == 1 ? 4001 : 201;
        const double step = 2.0 * R / (P - 1);
        std::vector<double> vals;
        vals.reserve(std::size_t(std::pow(P, k)));
        Eigen::VectorXd x(k);
        double hmin = INFINITY;
        const int total = k == 1 ? P : P * P;
        for (int t = 0; t < total; ++t) {
            x(0) = c(0) - R + step * (t % P);
            if (k == 2) x(1) = c(1) - R + step * (t / P);
            const double h = model.energy(x);
            vals.push_back(h);
            hmin = std::min(hmin, h);
        }
        Eigen::VectorXd lo = Eigen::VectorXd::Constant(k, INFINITY), hi = Eigen::VectorXd::Constant(k, -INFINITY);
        bool touches = false;
        for (int t = 0; t < total; ++t) {
            if (vals[t] - hmin > cut) continue;
            const int ix = t % P, iy = t / P;
            if (ix == 0 || ix == P - 1 || (k == 2 && (iy == 0 || iy == P - 1))) touches = true;
            lo(0) = std::min(lo(0), c(0) - R + step * ix);
            hi(0) = std::max(hi(0), c(0) - R + step * ix);
            if (k == 2) {
                lo(1) = std::min(lo(1), c(1) - R + step * iy);
                hi(1) = std::max(hi(1), c(1) - R + step * iy);
            }
        }
        if (!touches) {
            lo.array() -= step;
            hi.array() += step;
            return {lo, hi};
        }
    }
    throw ResolutionError("gibbs_exact_moments: could not confine the measure");
}

GibbsMoments trapezoid(const GibbsModel& model, const Box& box, int P)
{
    const int k = model.dim;
    Eigen::VectorXd h = (box.hi - box.lo) / P;
    const int total = k == 1 ? P + 1 : (P + 1) * (P + 1);
    std::vector<double> e(total);
    Eigen::VectorXd x(k);
    auto point = [&](int t) {
        x(0) = box.lo(0) + h(0) * (t % (P + 1));
        if (k == 2) x(1) = box.lo(1) + h(1) * (t / (P + 1));
        return x;
    };
    double emin = INFINITY;
    for (int t = 0; t < total; ++t) {
        e[t] = model.energy(point(t));
        emin = std::min(emin, e[t]);
    }
    double Z = 0.0;
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd bl = Eigen::MatrixXd::Zero(k, k);
    for (int t = 0; t < total; ++t) {
        const Eigen::VectorXd& p = point(t);
        const double w = std::exp(-(e[t] - emin));
        Z += w;
        m1 += w * p;
        m2 += w * p * p.transpose();
        if (model.hessian) bl += w * model.hessian(p).inverse();
    }
    GibbsMoments g;
    g.points_per_axis = P + 1;
    g.log_normalizer = std::log(Z * h.prod()) - emin;
    g.mean = m1 / Z;
    g.covariance = m2 / Z - g.mean * g.mean.transpose();
    if (model.hessian) g.bl_form = bl / Z;
    return g;
}

} // namespace

GibbsMoments gibbs_exact_moments(const GibbsModel& model, double tol)
{
    if (model.dim < 1 || model.dim > 2) throw CapacityError("gibbs_exact_moments: at most 2 degrees of freedom");
    const Eigen::VectorXd c = model.center.size() == model.dim ? model.center : Eigen::VectorXd::Zero(model.dim);
    const Box box = gibbs_box(model, c);
    const int pmax = model.dim == 1 ? 1 << 15 : 1 << 11;
    GibbsMoments prev = trapezoid(model, box, 64);
    for (int P = 128; P <= pmax; P *= 2) {
        GibbsMoments cur = trapezoid(model, box, P);
        const double scale = std::max(1.0, cur.covariance.cwiseAbs().maxCoeff());
        const double dz = std::abs(cur.log_normalizer - prev.log_normalizer);
        const double dm = (cur.mean - prev.mean).cwiseAbs().maxCoeff() / std::sqrt(scale);
        const double dc = (cur.covariance - prev.covariance).cwiseAbs().maxCoeff() / scale;
        if (dz < tol && dm < tol && dc < tol) return cur;
        prev = std::move(cur);
    }
    throw QuadratureError("gibbs_exact_moments: trapezoid refinement did not converge");
}

double hs_covariance_1d(const std::function<double(double)>& energy,
                        const std::function<double(double)>& energy_second,
                        const std::function<double(double)>& dF, const std::function<double(double)>& dG,
                        int points)
{
    const auto [lo, hi] = support_interval(energy, 46.0);
    const int P = points;
    const double h = (hi - lo) / P;
    std::vector<double> hv(P + 1);
    double hmin = INFINITY;
    for (int i = 0; i <= P; ++i) {
        hv[i] = energy(lo + i * h);
        hmin = std::min(hmin, hv[i]);
    }
    // (L + H'') u = G' with L u = -e^{H} (e^{-H} u')'; Neumann ends. Symmetrized by the node weights.
    std::vector<double> w(P + 1), sub(P + 1, 0.0), dia(P + 1, 0.0), sup(P + 1, 0.0), rhs(P + 1);
    for (int i = 0; i <= P; ++i) w[i] = std::exp(-(hv[i] - hmin));
    for (int i = 0; i < P; ++i) {
        const double c = std::exp(-(energy(lo + (i + 0.5) * h) - hmin)) / (h * h);
        dia[i] += c / w[i];
        sup[i] = -c / w[i];
        dia[i + 1] += c / w[i + 1];
        sub[i + 1] = -c / w[i + 1];
    }
    for (int i = 0; i <= P; ++i) {
        const double x = lo + i * h;
        dia[i] += energy_second(x);
        rhs[i] = dG(x);
    }
    // Thomas algorithm
    for (int i = 1; i <= P; ++i) {
        const double f = sub[i] / dia[i - 1];
        dia[i] -= f * sup[i - 1];
        rhs[i] -= f * rhs[i - 1];
    }
    std::vector<double> u(P + 1);
    u[P] = rhs[P] / dia[P];
    for (int i = P - 1; i >= 0; --i) u[i] = (rhs[i] - sup[i] * u[i + 1]) / dia[i];
    double num = 0.0, Z = 0.0;
    for (int i = 0; i <= P; ++i) {
        num += w[i] * dF(lo + i * h) * u[i];
        Z += w[i];
    }
    return num / Z;
}

namespace {

// Smallest nonzero eigenvalue of the symmetrized finite-volume generator on a P x P grid.
double fd_gap_2d(const std::function<double(const Eigen::VectorXd&)>& H, double a, const Eigen::VectorXd& lo,
                 const Eigen::VectorXd& hi, int P)
{
    const double hx = (hi(0) - lo(0)) / P, hy = (hi(1) - lo(1)) / P;
    const int n1 = P + 1;
    const int n = n1 * n1;
    auto at = [&](double i, double j) {
        Eigen::VectorXd x(2);
        x << lo(0) + i * hx, lo(1) + j * hy;
        return H(x);
    };
    std::vector<double> hv(n);
    double hmin = INFINITY;
    for (int j = 0; j < n1; ++j)
        for (int i = 0; i < n1; ++i) {
            hv[j * n1 + i] = at(i, j);
            hmin = std::min(hmin, hv[j * n1 + i]);
        }
    std::vector<double> w(n);
    for (int t = 0; t < n; ++t) w[t] = std::exp(-(hv[t] - hmin));

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    auto edge = [&](int s, int t, double c) {
        diag(s) += c / w[s];
        diag(t) += c / w[t];
        const double o = -c / std::sqrt(w[s] * w[t]);
        trip.emplace_back(s, t, o);
        trip.emplace_back(t, s, o);
    };
    for (int j = 0; j < n1; ++j)
        for (int i = 0; i < n1; ++i) {
            const int s = j * n1 + i;
            if (i + 1 < n1) edge(s, s + 1, a / (hx * hx) * std::exp(-(at(i + 0.5, j) - hmin)));
            if (j + 1 < n1) edge(s, s + n1, a / (hy * hy) * std::exp(-(at(i, j + 0.5) - hmin)));
        }
    Eigen::VectorXd u0(n);
    for (int t = 0; t < n; ++t) u0(t) = std::sqrt(w[t]);
    u0.normalize();
    const double shift = 1e-3 * diag.maxCoeff() / double(n) + 1e-8;
    for (int t = 0; t < n; ++t) trip.emplace_back(t, t, diag(t) + shift);
    Eigen::SparseMatrix<double> S(n, n);
    S.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(S);
    if (solver.info() != Eigen::Success) throw NumericalError("generator_gap_2d: factorization failed");

    // subspace iteration for the smallest eigenvalues orthogonal to the ground state
    const int k = 6;
    Eigen::MatrixXd X(n, k);
    for (int c = 0; c < k; ++c)
        for (int t = 0; t < n; ++t) X(t, c) = std::sin(0.37 * (c + 1) * t + 0.11 * c * c) + 0.01 * (c + 1);
    double prev = INFINITY;
    for (int it = 0; it < 500; ++it) {
        X -= u0 * (u0.transpose() * X);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
        X = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
        Eigen::MatrixXd Y(n, k);
        for (int c = 0; c < k; ++c) Y.col(c) = solver.solve(X.col(c));
        // Rayleigh-Ritz for the shifted operator through its inverse
        const Eigen::MatrixXd G = X.transpose() * Y;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()));
        const double top = es.eigenvalues()(k - 1);
        const double lam = 1.0 / top - shift;
        X = Y * es.eigenvectors();
        if (std::abs(lam - prev) <= 1e-13 * std::abs(lam)) return lam;
        prev = lam;
    }
    throw NumericalError("generator_gap_2d: subspace iteration did not converge");
}

} // namespace

GeneratorGap generator_gap_2d(const std::function<double(const Eigen::VectorXd&)>& energy, double diffusion,
                              int points)
{
    GibbsModel m;
    m.dim = 2;
    m.energy = energy;
    const Box box = gibbs_box(m, Eigen::VectorXd::Zero(2));
    GeneratorGap g;
    g.lo = box.lo(0);
    g.hi = box.hi(0);
    g.spacing = (box.hi - box.lo).maxCoeff() / points;
    g.coarse = fd_gap_2d(energy, diffusion, box.lo, box.hi, points);
    g.fine = fd_gap_2d(energy, diffusion, box.lo, box.hi, 2 * points);
    g.gap = (4.0 * g.fine - g.coarse) / 3.0;
    if (!(std::abs(g.gap - g.fine) <= 0.01 * std::abs(g.gap)))
        throw ResolutionError("generator_gap_2d: Richardson extrapolation moved the gap by more than 1%");
    return g;
}

DGSiteConstants dg_site_constants(double beta, int psi_points)
{
    if (psi_points < 2) throw ParameterError("dg_site_constants: need at least 2 psi points");
    const int K = dg_default_truncation(beta);
    DGSiteConstants c;
    const double pi = std::numbers::pi;
    // mu_psi is symmetric under psi -> -psi and 2 pi periodic, so [0, pi] suffices
    for (int i = 0; i < psi_points; ++i) {
        const auto r = dg_exact_gap(beta, pi * i / (psi_points - 1), K);
        c.inverse_gap_sup = std::max(c.inverse_gap_sup, std::isfinite(r.gap) ? 1.0 / r.gap : 0.0);
        c.spin_variance_sup = std::max(c.spin_variance_sup, 4.0 * pi * pi * r.variance);
    }
    return c;
}

} // namespace hrg

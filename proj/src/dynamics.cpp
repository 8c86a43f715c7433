#include "hrg/dynamics.hpp"

#include "hrg/errors.hpp"
#include "hrg/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hrg {

const std::vector<double>& Trajectory::observable(const std::string& name) const
{
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return series[i];
    throw ParameterError("trajectory has no observable '" + name + "'");
}

double curvature_estimate(const LangevinModel& model)
{
    double c = model.coupling.max_eigenvalue(model.lattice);
    if (const auto* p = std::get_if<Phi4SitePotential>(&model.site)) c += std::abs(p->nu) + 3.0 * p->g;
    if (const auto* p = std::get_if<PeriodicSitePotential>(&model.site))
        c += fourier_second_derivative_sup(p->V).coefficient_bound;
    return c;
}

double default_step(const LangevinModel& model) { return 0.01 / curvature_estimate(model); }

Trajectory langevin_run(const LangevinModel& model, const LangevinParams& params, std::uint64_t seed)
{
    const auto& lat = model.lattice;
    const int n = lat.n();
    const int N = lat.N();
    const std::size_t V = lat.num_sites();
    const double h = params.h > 0.0 ? params.h : default_step(model);
    if (h * curvature_estimate(model) >= 0.5) throw InstabilityError("langevin_run: step too large for the curvature");
    if (std::holds_alternative<PeriodicSitePotential>(model.site) && n != 1)
        throw ParameterError("langevin_run: periodic site potential requires n = 1");
    if (params.thin < 1 || params.steps < 1) throw ParameterError("langevin_run: steps and thinning must be positive");

    long burn = params.burn_in;
    if (burn < 0) {
        double slow = model.coupling.min_eigenvalue(lat);
        if (const auto* p = std::get_if<Phi4SitePotential>(&model.site)) slow += p->nu;
        burn = slow > 0.0 ? long(std::ceil(10.0 / (slow * h))) : params.steps / 10;
    }

    std::vector<double> coeff(N + 1, 0.0);
    std::vector<std::size_t> bv(N + 1);
    for (int j = 0; j <= N; ++j) bv[j] = lat.block_volume(j);
    for (int j = 1; j <= N; ++j)
        coeff[j] = model.coupling.laplacian_coeff * std::pow(double(lat.L()), -2.0 * (j - 1));

    std::vector<double> phi(V * n, 0.0), force(V * n, 0.0);
    std::vector<std::vector<double>> means;
    NormalSampler noise(CounterRng(stream_key(seed, 0x4c414e47ULL)));
    const double amp = std::sqrt(2.0 * h);

    Trajectory tr;
    tr.seed = seed;
    tr.dt = h * params.thin;
    tr.names.push_back("F");
    if (params.record_modes)
        for (int j = 1; j <= N; ++j) tr.names.push_back("P" + std::to_string(j));
    const std::size_t first_sum = tr.names.size();
    for (const auto& o : params.site_sums) tr.names.push_back(o.name);
    tr.series.assign(tr.names.size(), {});
    for (auto& s : tr.series) s.reserve(std::size_t(params.steps / params.thin) + 1);
    tr.info["h"] = h;
    tr.info["burn_in_steps"] = double(burn);

    const long total = burn + params.steps;
    for (long step = 0; step < total; ++step) {
        all_block_means(lat, phi, means);
        for (std::size_t x = 0; x < V; ++x) {
            double r2 = 0.0;
            if (const auto* p = std::get_if<Phi4SitePotential>(&model.site); p && p->g != 0.0)
                for (int i = 0; i < n; ++i) r2 += phi[x * n + i] * phi[x * n + i];
            for (int i = 0; i < n; ++i) {
                const double v = phi[x * n + i];
                double acc = model.coupling.mass2 * v + model.coupling.external * means[N][i];
                double prev = v;
                for (int j = 1; j <= N; ++j) {
                    const double cur = means[j][(x / bv[j]) * n + i];
                    acc += coeff[j] * (prev - cur);
                    prev = cur;
                }
                if (const auto* p = std::get_if<Phi4SitePotential>(&model.site)) acc += (p->g * r2 + p->nu) * v;
                else if (const auto* q = std::get_if<PeriodicSitePotential>(&model.site)) acc += q->V.derivative(v);
                force[x * n + i] = acc;
            }
        }
        bool bad = false;
        for (std::size_t k = 0; k < phi.size(); ++k) {
            phi[k] += -h * force[k] + amp * noise();
            bad |= !(std::abs(phi[k]) <= 1e6);
        }
        if (bad) throw InstabilityError("langevin_run: field exceeded 1e6; reduce the step size");

        if (step >= burn && (step - burn) % params.thin == 0) {
            double F = 0.0;
            for (std::size_t x = 0; x < V; ++x) F += phi[x * n];
            tr.series[0].push_back(F);
            if (params.record_modes) {
                all_block_means(lat, phi, means);
                for (int j = 1; j <= N; ++j) tr.series[j].push_back(means[j - 1][0] - means[j][0]);
            }
            for (std::size_t o = 0; o < params.site_sums.size(); ++o) {
                double S = 0.0;
                for (std::size_t x = 0; x < V; ++x) S += params.site_sums[o].f(phi[x * n]);
                tr.series[first_sum + o].push_back(S);
            }
        }
    }
    return tr;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kClockRate = 1.0 / (2.0 * kTwoPi * kTwoPi);

double exponential(CounterRng& rng, double rate) { return -std::log(rng.uniform_pos()) / rate; }

// Energy bookkeeping for H = (sigma, M sigma)/2, sigma = 2 pi k, via integer block sums at every scale.
class DGState {
public:
    explicit DGState(const DGModel& m) : m_(m), lat_(m.lattice)
    {
        const int N = lat_.N();
        k_.assign(lat_.num_sites(), 0);
        sums_.resize(N + 1);
        for (int j = 0; j <= N; ++j) sums_[j].assign(lat_.num_blocks(j), 0);
        bv_.resize(N + 1);
        coeff_.assign(N + 1, 0.0);
        for (int j = 0; j <= N; ++j) bv_[j] = lat_.block_volume(j);
        for (int j = 1; j <= N; ++j) coeff_[j] = m.beta * std::pow(double(lat_.L()), -2.0 * (j - 1));
        diag_ = m.eps / double(lat_.num_sites());
        for (int j = 1; j <= N; ++j) diag_ += coeff_[j] * (1.0 / double(bv_[j - 1]) - 1.0 / double(bv_[j]));
    }

    // H(sigma + delta e_x) - H(sigma)
    double delta_energy(std::size_t x, int dir) const
    {
        const int N = lat_.N();
        double Ms = m_.eps * kTwoPi * double(sums_[N][0]) / double(lat_.num_sites());
        double prev = kTwoPi * double(k_[x]);
        for (int j = 1; j <= N; ++j) {
            const double cur = kTwoPi * double(sums_[j][x / bv_[j]]) / double(bv_[j]);
            Ms += coeff_[j] * (prev - cur);
            prev = cur;
        }
        const double d = kTwoPi * dir;
        return d * Ms + 0.5 * d * d * diag_;
    }

    void move(std::size_t x, int dir)
    {
        k_[x] += dir;
        for (int j = 0; j <= lat_.N(); ++j) sums_[j][x / bv_[j]] += dir;
    }

    double total() const { return kTwoPi * double(sums_[lat_.N()][0]); }
    std::size_t sites() const { return k_.size(); }

private:
    const DGModel& m_;
    const HierLattice& lat_;
    std::vector<long long> k_;
    std::vector<std::vector<long long>> sums_;
    std::vector<std::size_t> bv_;
    std::vector<double> coeff_;
    double diag_ = 0.0;
};

double move_rate(DGRates rule, double dH)
{
    if (rule == DGRates::metropolis) return kClockRate * std::min(1.0, std::exp(-dH));
    return kClockRate * (1.0 + std::exp(-dH));
}

// Samples a piecewise-constant path at record times.
struct Recorder {
    double next;
    double dt;
    double end;
    std::vector<double>& out;

    void advance_to(double t, double value)
    {
        while (next <= t && next <= end + 1e-12) {
            out.push_back(value);
            next += dt;
        }
    }
};

} // namespace

Trajectory dg_glauber_run(const DGModel& model, const DGParams& params, std::uint64_t seed)
{
    if (!(model.beta > 0.0) || !(model.eps > 0.0)) throw ParameterError("dg_glauber_run: beta and eps must be positive");
    if (!(params.record_dt > 0.0) || !(params.t_max > 0.0)) throw ParameterError("dg_glauber_run: bad time parameters");
    if (model.lattice.num_sites() > 1u << 16) throw CapacityError("dg_glauber_run: lattice too large");
    DGState st(model);
    CounterRng rng(stream_key(seed, 0x4447ULL));
    const std::size_t V = st.sites();

    Trajectory tr;
    tr.seed = seed;
    tr.dt = params.record_dt;
    tr.names = {"F"};
    tr.series.assign(1, {});
    const double end = params.burn_in + params.t_max;
    Recorder rec{params.burn_in, params.record_dt, end - 0.5 * params.record_dt, tr.series[0]};

    double t = 0.0;
    long events = 0, proposals = 0;
    std::vector<double> rates(2 * V);
    while (t < end) {
        double R = 0.0;
        std::size_t pick = 0;
        int dir = 0;
        if (model.rates == DGRates::metropolis) {
            // all clocks ring at the same rate: uniformized proposal then acceptance
            R = 2.0 * double(V) * kClockRate;
            const double tn = t + exponential(rng, R);
            rec.advance_to(tn, st.total());
            t = tn;
            if (t >= end) break;
            pick = std::size_t(rng.uniform() * double(2 * V)) % (2 * V);
            dir = (pick & 1) ? -1 : 1;
            ++proposals;
            const double dH = st.delta_energy(pick / 2, dir);
            if (dH <= 0.0 || rng.uniform() < std::exp(-dH)) {
                st.move(pick / 2, dir);
                ++events;
            }
            continue;
        }
        for (std::size_t x = 0; x < V; ++x) {
            rates[2 * x] = move_rate(model.rates, st.delta_energy(x, 1));
            rates[2 * x + 1] = move_rate(model.rates, st.delta_energy(x, -1));
            R += rates[2 * x] + rates[2 * x + 1];
        }
        const double tn = t + exponential(rng, R);
        rec.advance_to(tn, st.total());
        t = tn;
        if (t >= end) break;
        double u = rng.uniform() * R;
        for (pick = 0; pick + 1 < rates.size() && u >= rates[pick]; ++pick) u -= rates[pick];
        st.move(pick / 2, (pick & 1) ? -1 : 1);
        ++events;
    }
    rec.advance_to(end, st.total());
    tr.info["events"] = double(events);
    tr.info["proposals"] = double(proposals);
    return tr;
}

Trajectory dg_single_site_run(double beta, double psi, DGRates rates, const DGParams& params, std::uint64_t seed)
{
    if (!(beta > 0.0)) throw ParameterError("dg_single_site_run: beta must be positive");
    CounterRng rng(stream_key(seed, 0x5353ULL));
    auto dE = [&](long long k, int dir) {
        const double a = kTwoPi * double(k) - psi, b = kTwoPi * double(k + dir) - psi;
        return 0.5 * beta * (b * b - a * a);
    };
    Trajectory tr;
    tr.seed = seed;
    tr.dt = params.record_dt;
    tr.names = {"sigma"};
    tr.series.assign(1, {});
    const double end = params.burn_in + params.t_max;
    Recorder rec{params.burn_in, params.record_dt, end - 0.5 * params.record_dt, tr.series[0]};

    long long k = std::llround(psi / kTwoPi);
    double t = 0.0;
    double proposals0 = 0, accepted0 = 0, up0 = 0, down1 = 0;
    auto record_move = [&](long long from, int dir) {
        if (from == 0 && dir == 1) ++up0;
        if (from == 1 && dir == -1) ++down1;
    };
    while (t < end) {
        if (rates == DGRates::metropolis) {
            const double tn = t + exponential(rng, 2.0 * kClockRate);
            rec.advance_to(tn, kTwoPi * double(k));
            t = tn;
            if (t >= end) break;
            const int dir = rng.uniform() < 0.5 ? 1 : -1;
            const bool counted = t >= params.burn_in;
            if (counted && k == 0) ++proposals0;
            const double dH = dE(k, dir);
            if (dH <= 0.0 || rng.uniform() < std::exp(-dH)) {
                if (counted) {
                    if (k == 0) ++accepted0;
                    record_move(k, dir);
                }
                k += dir;
            }
            continue;
        }
        const double ru = move_rate(rates, dE(k, 1)), rd = move_rate(rates, dE(k, -1));
        const double tn = t + exponential(rng, ru + rd);
        rec.advance_to(tn, kTwoPi * double(k));
        t = tn;
        if (t >= end) break;
        const int dir = rng.uniform() * (ru + rd) < ru ? 1 : -1;
        if (t >= params.burn_in) record_move(k, dir);
        k += dir;
    }
    rec.advance_to(end, kTwoPi * double(k));
    tr.info["proposals_0"] = proposals0;
    tr.info["accepted_0"] = accepted0;
    tr.info["up_0"] = up0;
    tr.info["down_1"] = down1;
    return tr;
}

std::vector<double> autocorrelation(const std::vector<double>& x, std::size_t max_lag)
{
    const std::size_t n = x.size();
    if (n < 2) throw ParameterError("autocorrelation: series too short");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= double(n);
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    max_lag = std::min(max_lag, n - 1);
    std::vector<double> acf(max_lag + 1, 0.0);
    if (c0 == 0.0) return acf;
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) s += (x[i] - mean) * (x[i + k] - mean);
        acf[k] = s / c0;
    }
    return acf;
}

namespace {

// ACF at lags lo..hi using a fixed mean; normalized by the lag-0 sum of the same segment.
std::vector<double> acf_range(const double* x, std::size_t n, double mean, std::size_t lo, std::size_t hi)
{
    double c0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) c0 += (x[i] - mean) * (x[i] - mean);
    std::vector<double> r;
    for (std::size_t k = lo; k <= hi; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) s += (x[i] - mean) * (x[i + k] - mean);
        r.push_back(c0 > 0.0 ? s / c0 : 0.0);
    }
    return r;
}

// Rate from a weighted fit of log(acf) against lag time. The ACF noise is roughly constant in absolute
// terms, so log(acf) has variance ~ 1/acf^2 and the weights are acf^2. NaN with fewer than 2 usable points.
double fit_rate(const std::vector<double>& acf, std::size_t lo, double dt)
{
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < acf.size(); ++i) {
        if (!(acf[i] > 0.0)) continue;
        const double w = acf[i] * acf[i];
        const double t = double(lo + i) * dt, y = std::log(acf[i]);
        sw += w;
        sx += w * t;
        sy += w * y;
        sxx += w * t * t;
        sxy += w * t * y;
        ++m;
    }
    if (m < 2) return std::numeric_limits<double>::quiet_NaN();
    return -(sw * sxy - sx * sy) / (sw * sxx - sx * sx);
}

} // namespace

GapEstimate estimate_gap(const Trajectory& traj, const std::string& observable, double dirichlet)
{
    const auto& x = traj.observable(observable);
    const std::size_t n = x.size();
    GapEstimate g;
    g.observable = observable;
    if (n < 64) {
        g.inconclusive = true;
        return g;
    }
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= double(n);

    // scan lags until the ACF drops below 0.05
    const std::size_t cap = n / 4;
    std::size_t lo = 0, hi = 0;
    bool in_range = false;
    std::vector<double> acf;
    for (std::size_t k = 1; k <= cap; ++k) {
        const double a = acf_range(x.data(), n, mean, k, k)[0];
        if (!in_range && a <= 0.5) {
            if (a < 0.05) break;
            in_range = true;
            lo = k;
        }
        if (in_range) {
            if (a < 0.05) break;
            hi = k;
            acf.push_back(a);
        }
    }
    if (!in_range || acf.size() < 2) {
        g.inconclusive = true;
        return g;
    }
    g.fit_points = int(acf.size());
    g.gamma = fit_rate(acf, lo, traj.dt);

    const int B = 16;
    const std::size_t len = n / B;
    std::vector<double> rates;
    int failed = 0;
    for (int b = 0; b < B; ++b) {
        const double r = fit_rate(acf_range(x.data() + b * len, len, mean, lo, hi), lo, traj.dt);
        if (std::isfinite(r)) rates.push_back(r);
        else ++failed;
    }
    if (rates.size() >= 2) {
        double m = 0.0, s = 0.0;
        for (double r : rates) m += r;
        m /= double(rates.size());
        for (double r : rates) s += (r - m) * (r - m);
        g.se = std::sqrt(s / double(rates.size() - 1) / double(rates.size()));
    }
    g.inconclusive = failed > 4 || !(g.gamma > 0.0) || !(g.se <= 0.5 * g.gamma);
    if (dirichlet > 0.0) {
        double v = 0.0;
        for (double a : x) v += (a - mean) * (a - mean);
        g.variance_ratio = v / double(n) * g.gamma / dirichlet;
    }
    return g;
}

VarianceEstimate estimate_covariance(const Trajectory& traj, const std::string& a, const std::string& b)
{
    const auto& x = traj.observable(a);
    const auto& y = traj.observable(b);
    const std::size_t n = x.size();
    if (n < 32) throw ParameterError("estimate_covariance: series too short");
    VarianceEstimate e;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        e.mean += x[i];
        my += y[i];
    }
    e.mean /= double(n);
    my /= double(n);
    for (std::size_t i = 0; i < n; ++i) e.variance += (x[i] - e.mean) * (y[i] - my);
    e.variance /= double(n);
    const int B = 16;
    const std::size_t len = n / B;
    std::vector<double> bv(B, 0.0);
    for (int k = 0; k < B; ++k) {
        for (std::size_t i = 0; i < len; ++i) bv[k] += (x[k * len + i] - e.mean) * (y[k * len + i] - my);
        bv[k] /= double(len);
    }
    double m = 0.0, s = 0.0;
    for (double v : bv) m += v;
    m /= B;
    for (double v : bv) s += (v - m) * (v - m);
    e.se = std::sqrt(s / (B - 1) / B);
    return e;
}

VarianceEstimate estimate_variance(const Trajectory& traj, const std::string& observable)
{
    return estimate_covariance(traj, observable, observable);
}

} // namespace hrg

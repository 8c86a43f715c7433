#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace hrg {

/// Hierarchical lattice of side L^N in d dimensions carrying n-component spins.
///
/// Sites are numbered 0..L^{dN}-1 in hierarchical order: the base-L^d digits of a
/// site index, most significant first, name the nested blocks containing it. The
/// scale-j block of site x is therefore x / L^{dj}.
class HierLattice {
public:
    HierLattice(int L, int N, int d, int n = 1);

    int L() const noexcept { return L_; }
    int N() const noexcept { return N_; }
    int d() const noexcept { return d_; }
    int n() const noexcept { return n_; }

    std::size_t num_sites() const noexcept { return sites_; }
    /// L^d, the number of scale-j blocks inside one scale-(j+1) block.
    std::size_t reblock_factor() const noexcept { return block_volume(1); }
    /// |B_j| = L^{dj}.
    std::size_t block_volume(int j) const;
    /// |B_j| as a double; valid for scales beyond the lattice depth too.
    double block_volume_real(int j) const;
    /// L^{d(N-j)}.
    std::size_t num_blocks(int j) const;
    std::size_t block_of(std::size_t site, int j) const;

    bool operator==(const HierLattice&) const = default;

private:
    int L_, N_, d_, n_;
    std::size_t sites_;
};

/// Spin configuration: values[site * n + component].
struct FieldVector {
    HierLattice lattice;
    std::vector<double> values;

    explicit FieldVector(const HierLattice& lat);
    FieldVector(const HierLattice& lat, std::vector<double> vals);

    static FieldVector constant(const HierLattice& lat, double c);

    double& at(std::size_t site, int comp) { return values[site * lattice.n() + comp]; }
    double at(std::size_t site, int comp) const { return values[site * lattice.n() + comp]; }
    std::size_t size() const noexcept { return values.size(); }
};

double dot(const FieldVector& a, const FieldVector& b);
FieldVector operator-(const FieldVector& a, const FieldVector& b);
FieldVector operator+(const FieldVector& a, const FieldVector& b);
FieldVector operator*(double s, const FieldVector& a);
double max_abs_diff(const FieldVector& a, const FieldVector& b);

/// Q_j f: each value replaced by its scale-j block mean, per component.
FieldVector block_average(const FieldVector& f, int j);

/// P_j f = Q_{j-1} f - Q_j f, for 1 <= j <= N.
FieldVector fluctuation_projection(const FieldVector& f, int j);

/// (-Delta_H) f = sum_j L^{-2(j-1)} P_j f.
FieldVector apply_hier_laplacian(const FieldVector& f);

/// Quadratic coupling M = a (-Delta_H) + m2 Id + ext Q_N, diagonal in the band decomposition.
struct GaussianCoupling {
    double laplacian_coeff = 1.0;
    double mass2 = 0.0;
    double external = 0.0;

    /// Eigenvalue on range(P_band) for band = 1..N, and on constants for band = N+1.
    double band_eigenvalue(const HierLattice& lat, int band) const;
    double min_eigenvalue(const HierLattice& lat) const;
    double max_eigenvalue(const HierLattice& lat) const;
};

/// M f, matrix free; O(N |Lambda| n).
FieldVector apply_coupling(const GaussianCoupling& M, const FieldVector& f);

/// Block means of f at every scale, written into out[j][block * n + comp] for j = 0..N.
void all_block_means(const HierLattice& lat, std::span<const double> f,
                     std::vector<std::vector<double>>& out);

struct MassiveMode {
    double m2;
};
struct SineGordonMode {
    double beta;
};
using CovarianceMode = std::variant<MassiveMode, SineGordonMode>;

/// Scale decomposition of the Gaussian covariance, sum_j lambda_j Q_j.
struct CovarianceDecomposition {
    HierLattice lattice;
    CovarianceMode mode;
    std::vector<double> lambdas; ///< lambda_0..lambda_N
    std::vector<double> theta;   ///< 2^{-(j - j_m)_+}; empty in sine-gordon mode
    int mass_scale = 0;          ///< j_m = floor(log_L m^{-1}); massive mode only

    bool is_massive() const noexcept { return std::holds_alternative<MassiveMode>(mode); }
    /// epsilon = beta L^{-2N} in sine-gordon mode, m^2 in massive mode.
    double zero_mode_coupling() const;
    /// Per-site variance of the scale-j fluctuation field, lambda_j L^{-dj}.
    double site_variance(int j) const;
    /// The coupling matrix whose inverse this decomposition represents.
    GaussianCoupling precision() const;
    /// Diagonal Green-function entry sum_j lambda_j L^{-dj}.
    double green_diagonal() const;
};

CovarianceDecomposition build_covariance_decomposition(const HierLattice& lat, CovarianceMode mode);

/// Dense check of sum_j lambda_j Q_j against the inverse of the coupling; max abs entry error.
/// Requires |Lambda| <= 4096.
double verify_decomposition(const CovarianceDecomposition& decomp);

/// Fluctuation field zeta in X_j: constant on scale-j blocks, i.i.d. N(0, lambda_j L^{-dj}) per
/// block and component. Each (scale, block) pair draws from its own counter stream.
FieldVector sample_fluctuation(const CovarianceDecomposition& decomp, int j, std::uint64_t seed);

/// Least-squares slope of green_diagonal() in N for N in [n_lo, n_hi] at d = 2, m2 = L^{-2N}.
double green_diagonal_slope(int L, int n_lo, int n_hi);

inline constexpr std::size_t kDenseCapacity = 4096;

} // namespace hrg

#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace shelab {

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussRule gauss_legendre(int n);

/// Sign of omega_x selecting a half sphere.
enum class Hemisphere : int { Negative = -1, Positive = 1 };

inline Hemisphere opposite(Hemisphere h) {
    return h == Hemisphere::Positive ? Hemisphere::Negative : Hemisphere::Positive;
}

/**
 * Product quadrature on the unit sphere.
 *
 * Each hemisphere carries its own Gauss-Legendre rule in mu = |omega_x| on
 * (0, 1), so no node sits on the grazing set omega_x = 0 and hemisphere
 * integrals of |omega_x|^k are exact. The azimuth phi is sampled uniformly,
 * which makes rotations about the x-axis exact phase shifts of the azimuthal
 * Fourier modes.
 *
 * Node enumeration: hemisphere (negative first), then mu, then phi.
 */
class SphereGrid {
public:
    SphereGrid(int n_mu_per_hemisphere, int n_phi);

    int n_mu() const { return n_mu_; }
    int n_phi() const { return n_phi_; }
    std::size_t size() const { return 2 * hemisphere_size(); }
    std::size_t hemisphere_size() const { return static_cast<std::size_t>(n_mu_) * n_phi_; }
    std::size_t ring_count() const { return 2 * static_cast<std::size_t>(n_mu_); }

    /// Highest polynomial degree in mu integrated exactly on each hemisphere.
    int mu_degree() const { return 2 * n_mu_ - 1; }

    std::size_t index(Hemisphere h, int k, int m) const {
        std::size_t s = h == Hemisphere::Negative ? 0 : 1;
        return (s * n_mu_ + k) * n_phi_ + m;
    }
    /// Offset of the first node of a hemisphere in the full enumeration.
    std::size_t hemisphere_offset(Hemisphere h) const {
        return h == Hemisphere::Negative ? 0 : hemisphere_size();
    }
    /// Ring r groups the n_phi nodes sharing one signed omega_x.
    std::size_t ring_of(std::size_t i) const { return i / n_phi_; }
    int phi_index(std::size_t i) const { return static_cast<int>(i % n_phi_); }
    int mu_index(std::size_t i) const { return static_cast<int>((i / n_phi_) % n_mu_); }
    Hemisphere hemisphere(std::size_t i) const {
        return i < hemisphere_size() ? Hemisphere::Negative : Hemisphere::Positive;
    }

    /// Positive half-range nodes mu_k in (0, 1) and their weights (sum 1).
    double mu(int k) const { return mu_[k]; }
    double mu_weight(int k) const { return mu_w_[k]; }
    double phi(int m) const;
    double phi_weight() const;

    /// Signed omega_x values per ring, in enumeration order.
    std::vector<double> mu_nodes() const;
    std::vector<double> mu_weights() const;

    double omega_x(std::size_t i) const { return omega_[i].x(); }
    double omega_y(std::size_t i) const { return omega_[i].y(); }
    double omega_z(std::size_t i) const { return omega_[i].z(); }
    const Eigen::Vector3d& omega(std::size_t i) const { return omega_[i]; }
    double weight(std::size_t i) const { return weight_[i]; }
    std::span<const double> weights() const { return weight_; }

    /// omega -> (-omega_x, omega_y, omega_z)
    std::size_t mirror_index(std::size_t i) const;
    /// omega -> -omega
    std::size_t antipode_index(std::size_t i) const;

private:
    int n_mu_;
    int n_phi_;
    std::vector<double> mu_;
    std::vector<double> mu_w_;
    std::vector<Eigen::Vector3d> omega_;
    std::vector<double> weight_;
};

using GridPtr = std::shared_ptr<const SphereGrid>;

/// Validated construction; throws ConfigurationError on odd or too small counts.
GridPtr build_sphere_grid(int n_mu_per_hemisphere, int n_phi);

/// Uniform partition of [0, eps_max] in the energy variable eps = |v|^2 / 2.
class EnergyGrid {
public:
    EnergyGrid(int n_cells, double eps_max);

    int size() const { return static_cast<int>(centers_.size()); }
    double eps_max() const { return edges_.back(); }
    double width(int k) const { return edges_[k + 1] - edges_[k]; }
    const std::vector<double>& edges() const { return edges_; }
    const std::vector<double>& centers() const { return centers_; }
    /// Density of states N(eps) = sqrt(2 eps) at the cell centers.
    const std::vector<double>& dos() const { return dos_; }
    /// Exact integral of N over cell k.
    double dos_integral(int k) const;

    static double density_of_states(double eps);

private:
    std::vector<double> edges_;
    std::vector<double> centers_;
    std::vector<double> dos_;
};

/// Values of a function on all nodes of a SphereGrid.
class SphereFunction {
public:
    /// Empty function bound to no grid.
    SphereFunction() = default;
    explicit SphereFunction(GridPtr grid);
    SphereFunction(GridPtr grid, std::vector<double> values);

    static SphereFunction from(GridPtr grid, const std::function<double(const Eigen::Vector3d&)>& f);

    const SphereGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    /// Azimuthal DFT per ring, c_m = (1/n_phi) sum_j f_j exp(-i m phi_j), ring-major.
    std::vector<std::complex<double>> spectrum() const;
    static SphereFunction from_spectrum(GridPtr grid, std::span<const std::complex<double>> coeffs);

private:
    GridPtr grid_;
    std::vector<double> values_;
};

/// Values on one hemisphere, indexed k * n_phi + m.
struct HemisphereFunction {
    Hemisphere side = Hemisphere::Positive;
    std::vector<double> values;
};

HemisphereFunction restrict_to(const SphereFunction& f, Hemisphere h);

/// Discrete integral over the sphere, sum f_i w_i.
double quad_sphere(const SphereFunction& f, const SphereGrid& grid);

/// Integral of phi(eps, omega) dv in energy-angle coordinates (dv = N(eps) deps domega).
double coarea_integrate(const std::function<double(double, const Eigen::Vector3d&)>& phi,
                        const SphereGrid& grid, const EnergyGrid& egrid);

/// g(omega) = f(R(angle) omega) where R rotates (omega_y, omega_z) counterclockwise
/// by angle about the x-axis. Exact for functions band-limited below Nyquist.
SphereFunction rotate_about_x(const SphereFunction& f, double angle);

/// Real n x n matrix S with (S v)_j = trigonometric interpolant of v at phi_j + angle.
Eigen::MatrixXd azimuthal_shift_matrix(int n_phi, double angle);

/// Spectral derivative d/dphi on a ring of n equally spaced samples.
Eigen::MatrixXd azimuthal_derivative_matrix(int n_phi);

/// Partial derivatives of f(|v|, omega_y, omega_z) at fixed sign of v_x.
struct SphericalPartials {
    double d_speed = 0;
    double d_omega_y = 0;
    double d_omega_z = 0;
};

/// Cartesian gradient (df/dv_x, df/dv_y, df/dv_z) from the spherical partials
/// by the chain rule. Throws SingularPointError at |v| = 0 and ContractViolation
/// on the grazing set omega_x = 0, where the chart (sigma, omega_y, omega_z) breaks down.
Eigen::Vector3d velocity_derivatives(const SphericalPartials& partials, double speed,
                                     const Eigen::Vector3d& omega);

}  // namespace shelab

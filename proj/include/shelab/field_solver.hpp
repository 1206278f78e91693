#pragma once

#include <functional>
#include <vector>

#include "shelab/sphere_grid.hpp"

namespace shelab {

/// Periodic grid over xi = (y, z); cell centers at ((i + 1/2) h_y, (j + 1/2) h_z).
class XiGrid {
public:
    XiGrid(int n_y, int n_z, double L_y, double L_z);

    int n_y() const { return n_y_; }
    int n_z() const { return n_z_; }
    std::size_t size() const { return static_cast<std::size_t>(n_y_) * n_z_; }
    double L_y() const { return L_y_; }
    double L_z() const { return L_z_; }
    double h_y() const { return L_y_ / n_y_; }
    double h_z() const { return L_z_ / n_z_; }
    double cell_area() const { return h_y() * h_z(); }
    double y(int i) const { return (i + 0.5) * h_y(); }
    double z(int j) const { return (j + 0.5) * h_z(); }

    /// Periodic wrap of indices.
    std::size_t index(int i, int j) const {
        i = ((i % n_y_) + n_y_) % n_y_;
        j = ((j % n_z_) + n_z_) % n_z_;
        return static_cast<std::size_t>(i) * n_z_ + j;
    }
    /// Cell containing a point, after periodic wrap.
    std::pair<int, int> locate(double y, double z) const;
    double wrap_y(double y) const;
    double wrap_z(double z) const;

private:
    int n_y_, n_z_;
    double L_y_, L_z_;
};

/// Values on XiGrid, index(i, j).
using XiField = std::vector<double>;

XiField sample(const XiGrid& grid, const std::function<double(double, double)>& f);

struct FieldState {
    XiField phi;
    XiField E_y;
    XiField E_z;
    XiField rho;
    /// Mean removed from rho when the neutralize flag was set (0 otherwise).
    double removed_mean = 0;
};

/// rho = 4 pi sum_k sqrt(2 eps_k) F_k d_eps - C, with F stored cell-major
/// F[index(i, j) * n_eps + k].
XiField charge_density(const std::vector<double>& F, const XiGrid& grid, const EnergyGrid& egrid,
                       const XiField& doping);

/**
 * Cell values of an energy distribution F_I(y, z, eps), defined through the
 * cell mass: 4 pi sqrt(2 eps_k) F d_eps dA equals the integral of
 * 4 pi N(eps) F_I over the (xi, eps) cell (Gauss-Legendre in y, z and sqrt(eps)).
 * Particle sampling and the SHE initial state both use this convention.
 */
std::vector<double> cell_mass_F(const std::function<double(double, double, double)>& F_I, const XiGrid& grid,
                                const EnergyGrid& egrid);

/// Total mass sum 4 pi sqrt(2 eps_k) F d_eps dA.
double total_mass(const std::vector<double>& F, const XiGrid& grid, const EnergyGrid& egrid);

inline constexpr double kNeutralityTolerance = 1e-10;

/// Spectral solve of -Laplace phi = rho on the periodic box, mean(phi) = 0, E = -grad phi.
FieldState solve_poisson(const XiField& rho, const XiGrid& grid, bool neutralize = false,
                         double tolerance = kNeutralityTolerance);

/// max |-Laplace phi - rho| with the spectral Laplacian.
double poisson_residual(const FieldState& state, const XiGrid& grid);

/// Spectral discrete curl dE_z/dy - dE_y/dz, max norm.
double field_curl(const FieldState& state, const XiGrid& grid);

/// Trigonometric interpolant of a field evaluated at all cell centers shifted by (dy, dz).
XiField shift_field(const XiField& f, const XiGrid& grid, double dy, double dz);

/// Bilinear interpolation between cell centers at an arbitrary point.
double interpolate(const XiField& f, const XiGrid& grid, double y, double z);

}  // namespace shelab

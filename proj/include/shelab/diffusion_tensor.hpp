#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "shelab/boundary_kernel.hpp"
#include "shelab/field_solver.hpp"
#include "shelab/sphere_grid.hpp"

namespace shelab {

/// Diffusivity tensor in the (y, z) plane at one (xi, eps).
struct DiffTensor {
    double yy = 0, yz = 0, zy = 0, zz = 0;
    double xi_y = 0, xi_z = 0;
    double epsilon = 0;
    double B = 0;
    int n_mu = 0, n_phi = 0;

    Eigen::Matrix2d matrix() const {
        Eigen::Matrix2d m;
        m << yy, yz, zy, zz;
        return m;
    }
    /// Frobenius norm.
    double norm() const { return matrix().norm(); }
};

/// D_ij = (2 eps)^{3/2} int_0^1 int_S2 chi_i omega_j dx domega.
DiffTensor assemble_D(double B, double epsilon, std::shared_ptr<const BoundaryKernel> kernel);

/// Smallest eigenvalue of (D + D^T) / 2.
double check_positivity(const DiffTensor& D);

/// Tensors per (xi cell, eps cell), cell-major [c * n_eps + k].
struct DiffTensorTable {
    int n_xi = 0;
    int n_eps = 0;
    std::vector<DiffTensor> entries;
    std::vector<double> B_samples;  // B at each xi cell

    const DiffTensor& at(std::size_t cell, int k) const { return entries[cell * n_eps + k]; }
};

/// Fills the table with assemble_D at cell centers. Cells sharing the same B
/// value reuse one solve (the tensor depends on xi only through B).
DiffTensorTable tabulate_D(const std::function<double(double, double)>& B_field, const XiGrid& xi,
                           const EnergyGrid& egrid, std::shared_ptr<const BoundaryKernel> kernel);

/// Table with every entry equal to a fixed tensor (test injection).
DiffTensorTable constant_table(const Eigen::Matrix2d& D, const XiGrid& xi, const EnergyGrid& egrid);

struct MsdEstimate {
    Eigen::Matrix2d mean = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d std_error = Eigen::Matrix2d::Zero();
    /// Naive <dxi dxi^T> / (2 t) at t_final, for reference.
    Eigen::Matrix2d naive = Eigen::Matrix2d::Zero();
    std::size_t n_particles = 0;
    double t_final = 0;
};

/**
 * Mean-square-displacement estimate of the effective lateral diffusivity for
 * particles of fixed speed sqrt(2 eps) under the fast dynamics (E = 0, no xi
 * dependence), started from the uniform stationary state. Uses the slope
 *   [dxi dxi^T (t) - dxi dxi^T (t/2)] / t
 * per particle, which cancels the bounded initial transient. The target is the
 * symmetric part of D / (4 pi sqrt(2 eps)).
 */
MsdEstimate msd_oracle(double B, double epsilon, const BoundaryKernel& kernel, std::size_t n_particles,
                       double t_final, std::uint64_t rng_seed);

}  // namespace shelab

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "shelab/sphere_grid.hpp"

namespace shelab {

/// The two plates, x = 0 and x = 1.
enum class Wall : int { Left = 0, Right = 1 };

/// Directions leaving the slab through a wall (the trace gamma^+).
inline Hemisphere outgoing(Wall w) { return w == Wall::Left ? Hemisphere::Negative : Hemisphere::Positive; }
/// Directions re-entering the slab from a wall (the trace gamma^-).
inline Hemisphere incoming(Wall w) { return opposite(outgoing(w)); }

enum class KernelKind { Isotropic, Custom, EtaPerturbed, Specular };

std::string to_string(KernelKind kind);

/**
 * Discrete reflection law of a wall.
 *
 * For each wall the kernel is stored as the operator matrix A acting on
 * outgoing nodal values, (K g)(omega_i) = sum_j A_ij g(omega'_j), so that
 * A_ij = K(omega'_j -> omega_i) |omega'_x| w_j. Rows index incoming nodes,
 * columns outgoing nodes, both by the hemisphere-local index k * n_phi + m.
 * The specular operator has no kernel density but fits the same storage.
 */
class BoundaryKernel {
public:
    BoundaryKernel(GridPtr grid, KernelKind kind, Eigen::MatrixXd left, Eigen::MatrixXd right, double eta = 0);

    const GridPtr& grid_ptr() const { return grid_; }
    const SphereGrid& grid() const { return *grid_; }
    KernelKind kind() const { return kind_; }
    double eta() const { return eta_; }

    const Eigen::MatrixXd& operator_matrix(Wall w) const { return w == Wall::Left ? left_ : right_; }
    /// Matrix of K* acting on incoming values, (K* h)_j = sum_i K_ij |omega_x,i| w_i h_i.
    Eigen::MatrixXd adjoint_matrix(Wall w) const;
    /// Kernel value K(omega'_j -> omega_i) (infinite for specular reflection).
    double value(Wall w, std::size_t in, std::size_t out) const;

    /// Wall reemission can be sampled for continuous directions.
    bool has_sampler() const { return kind_ == KernelKind::Isotropic || kind_ == KernelKind::Specular; }

private:
    GridPtr grid_;
    KernelKind kind_;
    Eigen::MatrixXd left_;
    Eigen::MatrixXd right_;
    double eta_;
};

/// Hemisphere flux weights |omega_x| w on the local node set (identical on both halves).
Eigen::VectorXd flux_weights(const SphereGrid& grid);

BoundaryKernel make_isotropic_kernel(GridPtr grid);

/// Kernel from raw positive values raw(in, out) (rows incoming, columns outgoing,
/// local indices), used at both walls. Columns are rescaled so flux is conserved.
BoundaryKernel make_custom_kernel(const Eigen::MatrixXd& raw, GridPtr grid);
/// Same, with raw evaluated per wall from the actual directions: raw(omega_out, omega_in).
BoundaryKernel make_custom_kernel(const std::function<double(const Eigen::Vector3d&, const Eigen::Vector3d&)>& raw,
                                  GridPtr grid);

/// Pure mirror reflection omega' -> (-omega'_x, omega'_y, omega'_z).
BoundaryKernel make_specular_kernel(GridPtr grid);

/// K_eta = K P^+ + (1 / (1 + eta)) J Q^+; deliberately not flux conserving.
BoundaryKernel make_eta_kernel(const BoundaryKernel& kernel, double eta);

HemisphereFunction apply_K(const BoundaryKernel& kernel, Wall wall, const HemisphereFunction& g_plus);
HemisphereFunction apply_K_adjoint(const BoundaryKernel& kernel, Wall wall, const HemisphereFunction& g_minus);

SphereFunction apply_mirror(const SphereFunction& f);
HemisphereFunction apply_mirror(const HemisphereFunction& f);

/// Flux-weighted average as a constant function, Qf = sum f |omega_x| w / sum |omega_x| w.
HemisphereFunction project_Q(const HemisphereFunction& f, const SphereGrid& grid);
HemisphereFunction project_P(const HemisphereFunction& f, const SphereGrid& grid);

/// sum f g |omega_x| w over a hemisphere.
double flux_inner(const HemisphereFunction& f, const HemisphereFunction& g, const SphereGrid& grid);

struct KernelReport {
    double flux_defect = 0;
    double norm_defect = 0;
    double reciprocity_defect = 0;
    double dg_min_margin = 0;
    double dg_constant_defect = 0;
    double k0 = 0;
    int null_dim = 0;
    int null_dim_left = 0;
    int null_dim_right = 0;
    double operator_norm = 0;
    std::map<std::string, double> algebra_defects;
};

/// Singular values below this count toward the null space of I - J K*.
inline constexpr double kNullTolerance = 1e-8;

KernelReport check_kernel(const BoundaryKernel& kernel, int n_random_trials, std::uint64_t rng_seed);

}  // namespace shelab

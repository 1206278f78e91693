#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "shelab/diffusion_tensor.hpp"
#include "shelab/field_solver.hpp"
#include "shelab/sphere_grid.hpp"

namespace shelab {

/**
 * Finite-volume state of the SHE system
 *   4 pi N(eps) dF/dt + div_xi J + d/deps (E . J) = 0,   J = -D (grad_xi F + E dF/deps)
 * on a periodic xi box times [0, eps_max] with zero energy flux at both ends.
 * F is cell-major, F[c * n_eps + k]. The conserved cell quantity is 4 pi N(eps_k) F.
 */
struct SheState {
    XiGrid xi;
    EnergyGrid egrid;
    std::vector<double> F;
    double t = 0;
    FieldState field;
    std::shared_ptr<const DiffTensorTable> tensor_table;
    XiField doping;
    /// Prescribed field; when empty the field comes from the Poisson solve.
    std::function<Eigen::Vector2d(double, double)> frozen_E;
    bool neutralize = false;
    /// E_y on y-faces (i + 1/2, j) and E_z on z-faces (i, j + 1/2).
    XiField E_yface;
    XiField E_zface;
};

/// J_y on y-faces and J_z on z-faces (cell-major with the face owned by the cell below),
/// J_eps on energy faces, [c * (n_eps + 1) + k] for the face below cell k.
struct SheCurrent {
    std::vector<double> J_y;
    std::vector<double> J_z;
    std::vector<double> J_eps;
};

struct SheInit {
    std::function<double(double, double, double)> F_I;  // F_I(y, z, eps)
    std::function<double(double, double)> doping;      // empty: matched to the mean density
    std::function<Eigen::Vector2d(double, double)> frozen_E;
    bool neutralize = false;
};

/// Samples F_I (cell-mass convention), attaches the tensor table and solves for the initial field.
SheState init_state(const SheInit& init, const XiGrid& xi, const EnergyGrid& egrid,
                    std::shared_ptr<const DiffTensorTable> table);

SheCurrent compute_current(const SheState& state);

/// Largest stable explicit step times the safety factor.
double max_stable_dt(const SheState& state, double c_safe = 0.9);

/// Mass sum 4 pi N F d_eps dA.
double she_mass(const SheState& state);
/// Weighted norm sum 4 pi N F^2 d_eps dA.
double she_weighted_norm(const SheState& state);
/// Mass fraction in the top 10% of the energy cells.
double truncation_fraction(const SheState& state);

/// Explicit Euler step followed by the field update. Throws StepSizeError when
/// dt exceeds max_stable_dt and PositivityError when F drops below -1e-12.
SheState step(const SheState& state, double dt, double c_safe = 0.9);

struct SheSnapshot {
    double t = 0;
    std::vector<double> F;
    SheCurrent current;
    XiField phi;
};

struct SheRunReport {
    std::vector<SheSnapshot> snapshots;
    std::vector<double> times;
    std::vector<double> mass;
    std::vector<double> weighted_norm;
    std::vector<double> cfl;  // dt / max_stable_dt per step
    double max_mass_drift = 0;  // max relative mass change in one step
    double truncation_fraction = 0;
    int steps = 0;
};

/// Fixed-step loop to t_final; dt <= 0 picks the stable step. Snapshots every
/// snapshot_every steps and at the end (and at t = 0).
SheRunReport run(SheState& state, double t_final, double dt, int snapshot_every, double c_safe = 0.9);

}  // namespace shelab

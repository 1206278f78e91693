#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shelab/config.hpp"
#include "shelab/diffusion_tensor.hpp"
#include "shelab/field_solver.hpp"
#include "shelab/io.hpp"
#include "shelab/kinetic_solver.hpp"
#include "shelab/she_solver.hpp"

namespace shelab {

XiGrid make_xi_grid(const Config& config);
EnergyGrid make_energy_grid(const Config& config);
std::function<double(double, double)> make_B_field(const Config& config);
InitialData make_initial_data(const Config& config);
/// E_y = E0 sin(2 pi y / L_y), E_z = 0.
std::function<Eigen::Vector2d(double, double)> make_frozen_E(const Config& config);

/// Tensor table from the configured B field and kernel, then the initial SHE state.
SheState make_she_state(const Config& config, std::shared_ptr<const BoundaryKernel> kernel);

/**
 * Weighted L2 distance between the particle density and the SHE solution on
 * coarse (y, eps) bins, with weight 4 pi N:
 *   d^2 = sum_b (m_b^MC - m_b^SHE)^2 / C_b,   C_b = sum over fine cells of 4 pi N d_eps dA.
 * The expected Monte Carlo contribution sum_b Var(m_b^MC) / C_b is subtracted
 * from d^2 (noise_floor) so the estimate targets the deterministic distance.
 */
struct Distance {
    double value = 0;      // sqrt(max(d^2 - noise_floor, 0))
    double std_error = 0;  // delta-method standard error of value
    double raw = 0;        // sqrt(d^2) before the noise correction
    double noise_floor = 0;
};

Distance binned_distance(const ParticleEnsemble& ensemble, const std::vector<double>& F_she, const XiGrid& xi,
                         const EnergyGrid& egrid, int y_bins, int eps_bins);

/// One reduced-mode relaxation run from f0 = 1 + omega_y.
struct ReducedRun {
    double alpha = 1;
    double dt = 0;
    int steps = 0;
    std::vector<double> times;
    std::vector<double> l2;  // squared discrete L2 norm after each step (and initially)
    std::vector<double> anisotropy;
    double max_budget_defect = 0;
    double max_l2_increase = 0;
    double anisotropy_integral = 0;  // sum over steps of dt * |P gamma^+ f|^2
};

/// Runs to t_final with dt = 0.9 of the CFL bound (the fast-time step is then
/// independent of alpha); stops early once the anisotropy is below stop_ratio times its initial value.
ReducedRun run_reduced(GridPtr grid, std::shared_ptr<const BoundaryKernel> kernel, int n_x, double speed, double B,
                       double alpha, double t_final, double stop_ratio = 1e-10,
                       const std::function<double(double, const Eigen::Vector3d&)>& f0 = {});

/// Relative increase of the L2 norm per step attributed to rounding.
inline constexpr double kL2RoundingTolerance = 1e-14;

struct WeakDiagnostics {
    bool l2_nonincreasing = true;
    double max_l2_increase = 0;
    double max_budget_defect = 0;
    std::vector<double> alphas;
    std::vector<double> anisotropy_integrals;
    double slope = 0;  // least-squares log-log slope of the integrals against alpha
};

WeakDiagnostics diagnostics_weak_estimates(const std::vector<ReducedRun>& runs);

enum class Verdict { Pass, Inconclusive, Fail };
std::string to_string(Verdict v);

struct ConvergenceRow {
    double alpha = 0;
    double t = 0;
    double distance = 0;
    double std_error = 0;
};

struct ConvergenceResult {
    std::vector<ConvergenceRow> rows;
    Verdict verdict = Verdict::Inconclusive;
    std::string reason;
    WeakDiagnostics weak;
    Json report;
};

/// SHE once, kinetic Monte Carlo per alpha in the frozen field, distances at
/// t_final / 2 and t_final, verdict on the final distances, reduced-mode weak diagnostics.
ConvergenceResult run_converge(const Config& config);

CsvTable convergence_csv(const ConvergenceResult& result);

/// Software version written into every report.
inline constexpr const char* kVersion = "0.1.0";

}  // namespace shelab

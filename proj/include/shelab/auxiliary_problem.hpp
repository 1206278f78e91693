#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "shelab/boundary_kernel.hpp"
#include "shelab/sphere_grid.hpp"

namespace shelab {

/// How the singular boundary system is resolved (both give the minimum-norm solution).
enum class LeastSquaresMethod { Svd, CompleteOrthogonal };

/**
 * Cell problem  -v_x d/dx chi + (v x B) . grad_v chi = g  on [0,1] x S^2
 * with the adjoint wall law  gamma^+ chi = K* gamma^- chi  at x = 0 and x = 1.
 *
 * The source g is independent of x and must have no Nyquist azimuthal content.
 */
struct AuxiliaryProblemSpec {
    double B = 1.0;
    double speed = 1.0;
    std::shared_ptr<const BoundaryKernel> kernel;
    int n_x = 32;
    SphereFunction rhs;
    LeastSquaresMethod method = LeastSquaresMethod::Svd;
};

/// Tolerances used by solve_auxiliary.
inline constexpr double kSolvabilityTolerance = 1e-10;
inline constexpr double kRankTolerance = 1e-9;

/**
 * Solution of the cell problem in closed form: per ring, the value at x = 0
 * and the source spectrum determine chi(x) for every x exactly. Samples at
 * x_j = j / n_x are kept for output.
 */
class AuxiliarySolution {
public:
    AuxiliarySolution(const AuxiliaryProblemSpec& spec, std::vector<std::complex<double>> chi0_spectrum);

    const SphereGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }

    /// chi(x, .) on all sphere nodes.
    SphereFunction evaluate(double x) const;
    /// int_0^1 chi(x, .) dx, exact.
    SphereFunction x_average() const;
    /// Adds a constant (a homogeneous solution) to chi.
    void shift_by_constant(double c);

    std::vector<double> x;
    std::vector<SphereFunction> chi;
    double mean = 0;             // (1/4pi) int int chi dx domega
    double residual_norm = 0;    // max cell-averaged residual of the transport equation
    double boundary_defect = 0;  // max |gamma^+ chi - K* gamma^- chi| over both walls

private:
    GridPtr grid_;
    std::vector<double> theta_;                        // per ring, B / (|v| omega_x)
    std::vector<double> inv_flux_speed_;               // per ring, 1 / (|v| omega_x)
    std::vector<std::complex<double>> chi0_;           // spectrum of chi(0, .)
    std::vector<std::complex<double>> source_;         // spectrum of g
    void resample(int n_x);
};

/// Solves the cell problem; throws SolvabilityError when int int g != 0 and
/// DegenerateKernelError when the boundary system has more than one null direction.
AuxiliarySolution solve_auxiliary(const AuxiliaryProblemSpec& spec);

/// chi as a function of x for residual evaluation.
using ChiField = std::function<SphereFunction(double)>;

/**
 * Cell-averaged residual of the transport equation, max over cells and nodes:
 *   (1/h) [ -|v| omega_x (chi(x_{j+1}) - chi(x_j)) - B D_phi int_cell chi dx ] - g
 * with D_phi the spectral azimuthal derivative and the cell integral taken by
 * 8-point Gauss-Legendre. Uses only pointwise values of chi.
 */
double residual(const ChiField& chi, const AuxiliaryProblemSpec& spec);
double residual(const AuxiliarySolution& solution, const AuxiliaryProblemSpec& spec);

/// Max wall defect |gamma^+ chi - K* gamma^- chi|.
double boundary_defect(const ChiField& chi, const BoundaryKernel& kernel);

/// Discrete Green identity: returns |2 int int chi g - |v| (||gamma^- chi||^2 - ||gamma^+ chi||^2)|.
double green_identity_defect(const AuxiliarySolution& solution, const AuxiliaryProblemSpec& spec);

/// chi_y and chi_z for sources omega_y, omega_z at speed sqrt(2 eps).
std::pair<AuxiliarySolution, AuxiliarySolution> chi_components(double B, double epsilon,
                                                                std::shared_ptr<const BoundaryKernel> kernel,
                                                                int n_x = 32);

/// (e^z - 1) / z and (e^z - 1 - z) / z^2 with series near zero.
std::complex<double> phi1(std::complex<double> z);
std::complex<double> phi2(std::complex<double> z);

}  // namespace shelab

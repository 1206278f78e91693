#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "shelab/boundary_kernel.hpp"
#include "shelab/field_solver.hpp"
#include "shelab/random.hpp"
#include "shelab/sphere_grid.hpp"

namespace shelab {

/// One Monte Carlo particle. Velocity is Cartesian; x is the fast (cell) variable.
struct Particle {
    double x = 0.5;
    double y = 0;
    double z = 0;
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    double weight = 1;
    Rng rng;

    double energy() const { return 0.5 * v.squaredNorm(); }
};

struct ParticleEnsemble {
    std::vector<Particle> particles;
    double alpha = 1;
    double t = 0;
    std::uint64_t seed = 0;
    long long bounces = 0;
    /// Independent sampling groups; particles of one replica are contiguous.
    int replicas = 1;

    double total_weight() const;
    int replica_of(std::size_t i) const {
        return static_cast<int>(i * static_cast<std::size_t>(replicas) / particles.size());
    }
};

/// Per-bin sums of particle contributions with standard errors. With several
/// replicas the error comes from the spread of the replica sums (each scaled to
/// the full ensemble), which stays valid for stratified sampling; otherwise the
/// particles are treated as i.i.d.
struct BinnedSums {
    std::vector<double> sum;
    std::vector<double> std_error;
};

/// bin(p) returns the bin of a particle or bins (skip); value(p) its contribution.
BinnedSums binned_sums(const ParticleEnsemble& ensemble, std::size_t bins,
                       const std::function<std::size_t(const Particle&)>& bin,
                       const std::function<double(const Particle&)>& value);

/// Fast-time motion between wall events:
///   dx/dtau = v_x,  d(v_y, v_z)/dtau = B J (v_y, v_z) + alpha E,  d(y, z)/dtau = alpha (v_y, v_z)
/// with J the quarter turn (v_y, v_z) -> (-v_z, v_y) and E frozen.
struct FlightParams {
    double B = 0;
    double alpha = 1;
    double E_y = 0;
    double E_z = 0;
};

struct WallEvent {
    bool hit = false;
    Wall wall = Wall::Left;
    double tau = 0;  // fast time actually advanced
};

/// Advances up to dtau in fast time with the exact solution; stops on the wall if it is reached first.
WallEvent advance_fast(Particle& p, const FlightParams& params, double dtau);

/// Elastic reemission from a wall: |v| kept, new direction drawn from K(omega' -> omega)|omega_x|.
void wall_bounce(Particle& p, Wall wall, const BoundaryKernel& kernel);

/// Alternates advance_fast and wall_bounce until dtau is used; returns the bounce count.
long long fly(Particle& p, const FlightParams& params, double dtau, const BoundaryKernel& kernel);

/// Energy-only-in-velocity initial data F_I(y, z, eps).
using InitialData = std::function<double(double, double, double)>;

inline constexpr int kDefaultReplicas = 16;

/**
 * Draws particles with density proportional to F_I(xi, eps) N(eps) on the box
 * times [0, eps_max], uniform in x and omega. Weights are equal and sum to the
 * mass of F_I on the grids (cell_mass_F convention), so binned moments compare
 * directly with the SHE state.
 *
 * Sampling is stratified: each replica spreads its particles over the
 * (xi, eps) cells by systematic sampling of the cell masses (one random
 * offset per replica), then draws positions and energies inside the cell by
 * rejection. The expected count per cell is exact; replicas are independent.
 */
ParticleEnsemble sample_initial(const InitialData& F_I, std::size_t n_particles, const XiGrid& xi,
                                const EnergyGrid& egrid, double alpha, std::uint64_t seed,
                                int replicas = kDefaultReplicas);

/// In-plane electric and magnetic fields seen by the particles.
struct KineticFields {
    std::function<Eigen::Vector2d(double, double)> E;  // empty means E = 0
    std::function<double(double, double)> B;           // must be set
};

struct KineticStepOptions {
    /// Largest allowed velocity kick dt max|E| / alpha per macro step.
    double max_kick = 0.5;
    /// Use the midpoint field (predictor on a copy) instead of the field at the start of the step.
    bool midpoint = true;
};

/// Advances the ensemble by macro time dt (fast time dt / alpha^2).
void step_kinetic(ParticleEnsemble& ensemble, double dt, const KineticFields& fields, const BoundaryKernel& kernel,
                  const KineticStepOptions& options = {});

/// Cloud-in-cell density n(xi) = sum w / cell area, deposited on cell centers.
XiField deposit_density(const ParticleEnsemble& ensemble, const XiGrid& xi);

/// Self-consistent macro step: Poisson from the deposited charge, then step_kinetic with that field.
FieldState step_selfconsistent(ParticleEnsemble& ensemble, double dt, const XiGrid& xi, const XiField& doping,
                               const std::function<double(double, double)>& B, const BoundaryKernel& kernel,
                               const KineticStepOptions& options = {});

/// Binned F^alpha and J^alpha with standard errors, cell-major [c * n_eps + k].
struct MomentFields {
    std::vector<double> F, F_stderr;
    std::vector<double> J_y, J_y_stderr;
    std::vector<double> J_z, J_z_stderr;
    std::vector<bool> empty;
    double overflow_weight = 0;  // weight above eps_max
};

MomentFields estimate_moments(const ParticleEnsemble& ensemble, const XiGrid& xi, const EnergyGrid& egrid);

/**
 * Deterministic reduced relaxation problem on [0,1] x S^2 at fixed speed:
 *   df/dt + (1/alpha^2)(v_x df/dx + B df/dphi) = 0,  gamma^- f = K gamma^+ f.
 * f is stored cell-major, f[j * grid.size() + i].
 */
struct ReducedState {
    GridPtr grid;
    int n_x = 32;
    double speed = 1;
    double B = 1;
    double alpha = 1;
    double t = 0;
    std::vector<double> f;

    double l2_squared() const;
    double mean() const;
    /// Discrete L2 norm of f - <f>.
    double anisotropy() const;
};

ReducedState make_reduced_state(GridPtr grid, int n_x, double speed, double B, double alpha,
                                const std::function<double(double, const Eigen::Vector3d&)>& f0);

/// Terms of the exact discrete L2 budget of one relax_step:
///   l2_after - l2_before = -wall_dissipation - upwind_dissipation - nyquist_loss.
struct RelaxBudget {
    double l2_before = 0;
    double l2_after = 0;
    double wall_dissipation = 0;    // dtau |v| sum over walls (|gamma^+|^2 - |K gamma^+|^2), flux weighted
    double upwind_dissipation = 0;  // numerical diffusion of the upwind sweep
    double nyquist_loss = 0;        // damping of the Nyquist azimuthal mode by the shift interpolant
    double wall_anisotropy = 0;     // sum over walls of the flux norm |P gamma^+ f|^2 before the step

    double defect() const {
        return std::abs((l2_after - l2_before) + wall_dissipation + upwind_dissipation + nyquist_loss);
    }
};

/// Largest macro step allowed by the x-advection CFL condition.
double reduced_max_dt(const ReducedState& state);

RelaxBudget relax_step(ReducedState& state, double dt, const BoundaryKernel& kernel);

}  // namespace shelab

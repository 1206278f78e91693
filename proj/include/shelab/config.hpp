#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "shelab/boundary_kernel.hpp"
#include "shelab/io.hpp"
#include "shelab/sphere_grid.hpp"

namespace shelab {

struct GridConfig {
    int n_mu = 8;       // Gauss nodes per hemisphere
    int n_phi = 16;
    int n_x = 32;
    int n_y = 16;
    int n_z = 1;
    double L_y = 1.0;
    double L_z = 1.0;
    int n_eps = 40;
    double eps_max = 10.0;
};

struct PhysicsConfig {
    double B = 1.0;
    double B_modulation = 0.0;  // B(y) = B (1 + B_modulation cos(2 pi y / L_y))
    std::string kernel = "isotropic";  // isotropic | specular | custom | eta
    double kernel_anisotropy = 0.1;    // custom: raw = 1/pi + a omega_y omega'_y
    double kernel_eta = 0.1;
    std::vector<double> alphas{0.4, 0.2, 0.1};
    double epsilon = 0.5;         // energy for aux, tensor and reduced runs
    double E0 = 0.0;              // frozen field E_y = E0 sin(2 pi y / L_y)
    bool frozen_field = true;
    std::string doping = "matched";  // matched | uniform
    double doping_value = 0.0;
    double init_amplitude = 0.5;  // F_I = exp(-eps / T) (1 + a cos(2 pi y / L_y))
    double init_temperature = 1.0;
};

struct RunConfig {
    double t_final = 0.5;
    double dt = 0.0;  // SHE step; 0 picks the stable step
    double c_safe = 0.9;
    int snapshot_every = 10;
    std::uint64_t seed = 1;
    std::size_t particles = 100000;
    std::string mode = "mc";  // mc | reduced | mc-selfconsistent
    double kinetic_dt = 0.005;
    int workers = 0;
    bool neutralize = false;
    double msd_t_final = 200.0;
    std::size_t msd_particles = 100000;
    int compare_y_bins = 8;
    int compare_eps_bins = 4;
    double reduced_t_final = 10.0;  // macro horizon of the reduced alpha sweep
};

struct Config {
    GridConfig grid;
    PhysicsConfig physics;
    RunConfig run;
    std::filesystem::path output_dir = "out";
};

/// Parses an INI file; unknown sections or keys and invalid values raise ConfigurationError.
Config load_config(const std::filesystem::path& path);
Config parse_config(const std::string& text, const std::string& source = "<string>");
void validate(const Config& config);
Json to_json(const Config& config);

GridPtr make_sphere_grid(const Config& config);
std::shared_ptr<const BoundaryKernel> make_kernel(const Config& config, GridPtr grid);

}  // namespace shelab

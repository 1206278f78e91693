#include "shelab/field_solver.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "shelab/errors.hpp"

namespace shelab {

namespace {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

// Forward 2-D DFT (unnormalized), layout index(i, j) = i * n_z + j.
// Eigen's FFT does not handle length 1, where the transform is the identity.
void transform(Eigen::FFT<double>& fft, std::vector<Complex>& out, const std::vector<Complex>& in, bool inverse) {
    if (in.size() == 1) {
        out = in;
        return;
    }
    if (inverse)
        fft.inv(out, in);
    else
        fft.fwd(out, in);
}

Spectrum fft2(const XiField& f, const XiGrid& g) {
    Eigen::FFT<double> fft;
    const int ny = g.n_y(), nz = g.n_z();
    Spectrum s(g.size());
    std::vector<Complex> in, out;
    for (int i = 0; i < ny; ++i) {
        in.assign(f.begin() + i * nz, f.begin() + (i + 1) * nz);
        transform(fft, out, in, false);
        for (int j = 0; j < nz; ++j) s[i * nz + j] = out[j];
    }
    in.resize(ny);
    for (int j = 0; j < nz; ++j) {
        for (int i = 0; i < ny; ++i) in[i] = s[i * nz + j];
        transform(fft, out, in, false);
        for (int i = 0; i < ny; ++i) s[i * nz + j] = out[i];
    }
    return s;
}

XiField ifft2(Spectrum s, const XiGrid& g) {
    Eigen::FFT<double> fft;
    const int ny = g.n_y(), nz = g.n_z();
    std::vector<Complex> in, out;
    in.resize(ny);
    for (int j = 0; j < nz; ++j) {
        for (int i = 0; i < ny; ++i) in[i] = s[i * nz + j];
        transform(fft, out, in, true);
        for (int i = 0; i < ny; ++i) s[i * nz + j] = out[i];
    }
    XiField f(g.size());
    for (int i = 0; i < ny; ++i) {
        in.assign(s.begin() + i * nz, s.begin() + (i + 1) * nz);
        transform(fft, out, in, true);
        for (int j = 0; j < nz; ++j) f[i * nz + j] = out[j].real();
    }
    return f;
}

int frequency(int m, int n) { return m < (n + 1) / 2 ? m : m - n; }
bool nyquist(int m, int n) { return n % 2 == 0 && m == n / 2; }

double wavenumber(int m, int n, double L) { return 2.0 * std::numbers::pi * frequency(m, n) / L; }

// Wavenumbers used for first derivatives: the Nyquist mode has no real derivative.
double gradient_wavenumber(int m, int n, double L) { return nyquist(m, n) ? 0.0 : wavenumber(m, n, L); }

}  // namespace

XiGrid::XiGrid(int n_y, int n_z, double L_y, double L_z) : n_y_(n_y), n_z_(n_z), L_y_(L_y), L_z_(L_z) {
    if (n_y < 1 || n_z < 1) throw ConfigurationError("xi grid needs at least one cell per direction");
    if (!(L_y > 0) || !(L_z > 0)) throw ConfigurationError("xi box lengths must be positive");
}

double XiGrid::wrap_y(double y) const {
    double w = std::fmod(y, L_y_);
    return w < 0 ? w + L_y_ : w;
}

double XiGrid::wrap_z(double z) const {
    double w = std::fmod(z, L_z_);
    return w < 0 ? w + L_z_ : w;
}

std::pair<int, int> XiGrid::locate(double y, double z) const {
    int i = std::min(n_y_ - 1, static_cast<int>(wrap_y(y) / h_y()));
    int j = std::min(n_z_ - 1, static_cast<int>(wrap_z(z) / h_z()));
    return {i, j};
}

XiField sample(const XiGrid& grid, const std::function<double(double, double)>& f) {
    XiField out(grid.size());
    for (int i = 0; i < grid.n_y(); ++i)
        for (int j = 0; j < grid.n_z(); ++j) out[grid.index(i, j)] = f(grid.y(i), grid.z(j));
    return out;
}

XiField charge_density(const std::vector<double>& F, const XiGrid& grid, const EnergyGrid& egrid,
                       const XiField& doping) {
    const auto ne = static_cast<std::size_t>(egrid.size());
    require(F.size() == grid.size() * ne, "charge_density: F does not match the grids");
    require(doping.empty() || doping.size() == grid.size(), "charge_density: doping does not match the grid");
    XiField rho(grid.size(), 0.0);
    for (std::size_t c = 0; c < grid.size(); ++c) {
        double n = 0;
        for (std::size_t k = 0; k < ne; ++k) n += egrid.dos()[k] * F[c * ne + k] * egrid.width(static_cast<int>(k));
        rho[c] = 4.0 * std::numbers::pi * n - (doping.empty() ? 0.0 : doping[c]);
    }
    return rho;
}

std::vector<double> cell_mass_F(const std::function<double(double, double, double)>& F_I, const XiGrid& grid,
                                const EnergyGrid& egrid) {
    const GaussRule space = gauss_legendre(4);
    const GaussRule energy = gauss_legendre(6);
    const auto ne = static_cast<std::size_t>(egrid.size());
    std::vector<double> F(grid.size() * ne);
    for (int i = 0; i < grid.n_y(); ++i) {
        for (int j = 0; j < grid.n_z(); ++j) {
            for (std::size_t k = 0; k < ne; ++k) {
                // int N(eps) F de over the cell with eps = s^2: int 2 sqrt(2) s^2 F(s^2) ds
                double s0 = std::sqrt(egrid.edges()[k]), s1 = std::sqrt(egrid.edges()[k + 1]);
                double acc = 0;
                for (std::size_t a = 0; a < space.nodes.size(); ++a) {
                    double y = grid.y(i) + 0.5 * grid.h_y() * space.nodes[a];
                    for (std::size_t b = 0; b < space.nodes.size(); ++b) {
                        double z = grid.z(j) + 0.5 * grid.h_z() * space.nodes[b];
                        for (std::size_t q = 0; q < energy.nodes.size(); ++q) {
                            double s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * energy.nodes[q];
                            double f = F_I(y, z, s * s);
                            if (!(f >= 0)) throw ValidationError("initial distribution must be nonnegative");
                            acc += 0.25 * space.weights[a] * space.weights[b] * 0.5 * (s1 - s0) * energy.weights[q] *
                                   2.0 * std::numbers::sqrt2 * s * s * f;
                        }
                    }
                }
                int kk = static_cast<int>(k);
                F[grid.index(i, j) * ne + k] = acc / (egrid.dos()[k] * egrid.width(kk));
            }
        }
    }
    return F;
}

double total_mass(const std::vector<double>& F, const XiGrid& grid, const EnergyGrid& egrid) {
    const auto ne = static_cast<std::size_t>(egrid.size());
    require(F.size() == grid.size() * ne, "total_mass: F does not match the grids");
    double m = 0;
    for (std::size_t c = 0; c < grid.size(); ++c)
        for (std::size_t k = 0; k < ne; ++k)
            m += 4.0 * std::numbers::pi * egrid.dos()[k] * F[c * ne + k] * egrid.width(static_cast<int>(k));
    return m * grid.cell_area();
}

FieldState solve_poisson(const XiField& rho, const XiGrid& grid, bool neutralize, double tolerance) {
    require(rho.size() == grid.size(), "solve_poisson: rho does not match the grid");
    FieldState state;
    state.rho = rho;
    double mean = 0;
    for (double r : rho) mean += r;
    mean /= static_cast<double>(rho.size());
    if (std::abs(mean) > tolerance) {
        if (!neutralize)
            throw NeutralityError("Poisson source has nonzero mean " + std::to_string(mean) +
                                  " on the periodic box; set the neutralize flag to subtract it");
        for (double& r : state.rho) r -= mean;
        state.removed_mean = mean;
    } else {
        for (double& r : state.rho) r -= mean;
    }

    const int ny = grid.n_y(), nz = grid.n_z();
    Spectrum s = fft2(state.rho, grid);
    Spectrum phi(s.size()), ey(s.size()), ez(s.size());
    const Complex I(0, 1);
    for (int i = 0; i < ny; ++i) {
        for (int j = 0; j < nz; ++j) {
            std::size_t idx = static_cast<std::size_t>(i) * nz + j;
            double ky = wavenumber(i, ny, grid.L_y()), kz = wavenumber(j, nz, grid.L_z());
            double k2 = ky * ky + kz * kz;
            phi[idx] = k2 > 0 ? s[idx] / k2 : Complex(0);
            ey[idx] = -I * gradient_wavenumber(i, ny, grid.L_y()) * phi[idx];
            ez[idx] = -I * gradient_wavenumber(j, nz, grid.L_z()) * phi[idx];
        }
    }
    state.phi = ifft2(phi, grid);
    state.E_y = ifft2(ey, grid);
    state.E_z = ifft2(ez, grid);
    return state;
}

double poisson_residual(const FieldState& state, const XiGrid& grid) {
    const int ny = grid.n_y(), nz = grid.n_z();
    Spectrum s = fft2(state.phi, grid);
    for (int i = 0; i < ny; ++i) {
        for (int j = 0; j < nz; ++j) {
            double ky = wavenumber(i, ny, grid.L_y()), kz = wavenumber(j, nz, grid.L_z());
            s[static_cast<std::size_t>(i) * nz + j] *= ky * ky + kz * kz;
        }
    }
    XiField lap = ifft2(s, grid);
    double worst = 0;
    for (std::size_t c = 0; c < lap.size(); ++c) worst = std::max(worst, std::abs(lap[c] - state.rho[c]));
    return worst;
}

double field_curl(const FieldState& state, const XiGrid& grid) {
    const int ny = grid.n_y(), nz = grid.n_z();
    Spectrum ey = fft2(state.E_y, grid), ez = fft2(state.E_z, grid), curl(ey.size());
    const Complex I(0, 1);
    for (int i = 0; i < ny; ++i) {
        for (int j = 0; j < nz; ++j) {
            std::size_t idx = static_cast<std::size_t>(i) * nz + j;
            curl[idx] = I * gradient_wavenumber(i, ny, grid.L_y()) * ez[idx] -
                        I * gradient_wavenumber(j, nz, grid.L_z()) * ey[idx];
        }
    }
    double worst = 0;
    for (double c : ifft2(curl, grid)) worst = std::max(worst, std::abs(c));
    return worst;
}

XiField shift_field(const XiField& f, const XiGrid& grid, double dy, double dz) {
    const int ny = grid.n_y(), nz = grid.n_z();
    Spectrum s = fft2(f, grid);
    for (int i = 0; i < ny; ++i) {
        for (int j = 0; j < nz; ++j) {
            auto factor = [](int m, int n, double L, double d) -> Complex {
                if (nyquist(m, n)) return std::cos(std::numbers::pi * n * d / L);
                return std::polar(1.0, wavenumber(m, n, L) * d);
            };
            s[static_cast<std::size_t>(i) * nz + j] *=
                factor(i, ny, grid.L_y(), dy) * factor(j, nz, grid.L_z(), dz);
        }
    }
    return ifft2(s, grid);
}

double interpolate(const XiField& f, const XiGrid& grid, double y, double z) {
    double sy = grid.wrap_y(y) / grid.h_y() - 0.5;
    double sz = grid.wrap_z(z) / grid.h_z() - 0.5;
    int i0 = static_cast<int>(std::floor(sy));
    int j0 = static_cast<int>(std::floor(sz));
    double ty = sy - i0, tz = sz - j0;
    return (1 - ty) * (1 - tz) * f[grid.index(i0, j0)] + ty * (1 - tz) * f[grid.index(i0 + 1, j0)] +
           (1 - ty) * tz * f[grid.index(i0, j0 + 1)] + ty * tz * f[grid.index(i0 + 1, j0 + 1)];
}

}  // namespace shelab

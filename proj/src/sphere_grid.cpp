#include "shelab/sphere_grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "shelab/errors.hpp"

namespace shelab {

namespace {
constexpr double pi = std::numbers::pi;
}

GaussRule gauss_legendre(int n) {
    if (n < 1) throw ConfigurationError("gauss_legendre: n must be positive");
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1, p1 = 0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute derivative at the converged root
        double p0 = 1, p1 = 0;
        for (int j = 0; j < n; ++j) {
            double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

SphereGrid::SphereGrid(int n_mu_per_hemisphere, int n_phi)
    : n_mu_(n_mu_per_hemisphere), n_phi_(n_phi) {
    GaussRule rule = gauss_legendre(n_mu_);
    mu_.resize(n_mu_);
    mu_w_.resize(n_mu_);
    for (int k = 0; k < n_mu_; ++k) {
        mu_[k] = 0.5 * (1.0 + rule.nodes[k]);
        mu_w_[k] = 0.5 * rule.weights[k];
    }
    omega_.resize(size());
    weight_.resize(size());
    double dphi = phi_weight();
    for (Hemisphere h : {Hemisphere::Negative, Hemisphere::Positive}) {
        double sign = static_cast<int>(h);
        for (int k = 0; k < n_mu_; ++k) {
            double s = std::sqrt((1.0 - mu_[k]) * (1.0 + mu_[k]));
            for (int m = 0; m < n_phi_; ++m) {
                std::size_t i = index(h, k, m);
                double ph = phi(m);
                omega_[i] = Eigen::Vector3d(sign * mu_[k], s * std::cos(ph), s * std::sin(ph));
                weight_[i] = mu_w_[k] * dphi;
            }
        }
    }
}

double SphereGrid::phi(int m) const { return 2.0 * pi * m / n_phi_; }
double SphereGrid::phi_weight() const { return 2.0 * pi / n_phi_; }

std::vector<double> SphereGrid::mu_nodes() const {
    std::vector<double> out;
    for (int k = 0; k < n_mu_; ++k) out.push_back(-mu_[k]);
    for (int k = 0; k < n_mu_; ++k) out.push_back(mu_[k]);
    return out;
}

std::vector<double> SphereGrid::mu_weights() const {
    std::vector<double> out(mu_w_);
    out.insert(out.end(), mu_w_.begin(), mu_w_.end());
    return out;
}

std::size_t SphereGrid::mirror_index(std::size_t i) const {
    return index(opposite(hemisphere(i)), mu_index(i), phi_index(i));
}

std::size_t SphereGrid::antipode_index(std::size_t i) const {
    int m = (phi_index(i) + n_phi_ / 2) % n_phi_;
    return index(opposite(hemisphere(i)), mu_index(i), m);
}

GridPtr build_sphere_grid(int n_mu_per_hemisphere, int n_phi) {
    if (n_mu_per_hemisphere < 2 || n_mu_per_hemisphere % 2 != 0)
        throw ConfigurationError("n_mu_per_hemisphere must be an even integer >= 2, got " +
                                 std::to_string(n_mu_per_hemisphere));
    if (n_phi < 4 || n_phi % 2 != 0)
        throw ConfigurationError("n_phi must be an even integer >= 4, got " + std::to_string(n_phi));
    return std::make_shared<const SphereGrid>(n_mu_per_hemisphere, n_phi);
}

EnergyGrid::EnergyGrid(int n_cells, double eps_max) {
    if (n_cells < 1) throw ConfigurationError("energy grid needs at least one cell");
    if (!(eps_max > 0)) throw ConfigurationError("eps_max must be positive");
    edges_.resize(n_cells + 1);
    for (int k = 0; k <= n_cells; ++k) edges_[k] = eps_max * k / n_cells;
    edges_.back() = eps_max;
    for (int k = 0; k < n_cells; ++k) {
        centers_.push_back(0.5 * (edges_[k] + edges_[k + 1]));
        dos_.push_back(density_of_states(centers_.back()));
    }
}

double EnergyGrid::density_of_states(double eps) { return std::sqrt(2.0 * eps); }

double EnergyGrid::dos_integral(int k) const {
    // int sqrt(2 e) de = (2 sqrt 2 / 3) e^{3/2}
    auto prim = [](double e) { return 2.0 * std::numbers::sqrt2 / 3.0 * e * std::sqrt(e); };
    return prim(edges_[k + 1]) - prim(edges_[k]);
}

SphereFunction::SphereFunction(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}

SphereFunction::SphereFunction(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    require(values_.size() == grid_->size(), "SphereFunction: value count does not match grid");
}

SphereFunction SphereFunction::from(GridPtr grid, const std::function<double(const Eigen::Vector3d&)>& f) {
    SphereFunction out(grid);
    for (std::size_t i = 0; i < grid->size(); ++i) out[i] = f(grid->omega(i));
    return out;
}

std::vector<std::complex<double>> SphereFunction::spectrum() const {
    const int n = grid_->n_phi();
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> out;
    out.reserve(values_.size());
    std::vector<double> ring(n);
    std::vector<std::complex<double>> coeffs;
    for (std::size_t r = 0; r < grid_->ring_count(); ++r) {
        for (int m = 0; m < n; ++m) ring[m] = values_[r * n + m];
        fft.fwd(coeffs, ring);
        for (int m = 0; m < n; ++m) out.push_back(coeffs[m] / static_cast<double>(n));
    }
    return out;
}

SphereFunction SphereFunction::from_spectrum(GridPtr grid, std::span<const std::complex<double>> coeffs) {
    require(coeffs.size() == grid->size(), "from_spectrum: coefficient count does not match grid");
    const int n = grid->n_phi();
    Eigen::FFT<double> fft;
    SphereFunction out(grid);
    std::vector<std::complex<double>> ring(n), back;
    for (std::size_t r = 0; r < grid->ring_count(); ++r) {
        for (int m = 0; m < n; ++m) ring[m] = coeffs[r * n + m] * static_cast<double>(n);
        fft.inv(back, ring);
        for (int m = 0; m < n; ++m) out[r * n + m] = back[m].real();
    }
    return out;
}

HemisphereFunction restrict_to(const SphereFunction& f, Hemisphere h) {
    const SphereGrid& g = f.grid();
    auto vals = f.values().subspan(g.hemisphere_offset(h), g.hemisphere_size());
    return {h, std::vector<double>(vals.begin(), vals.end())};
}

double quad_sphere(const SphereFunction& f, const SphereGrid& grid) {
    require(f.values().size() == grid.size(), "quad_sphere: function not defined on this grid");
    double sum = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) sum += f[i] * grid.weight(i);
    return sum;
}

double coarea_integrate(const std::function<double(double, const Eigen::Vector3d&)>& phi,
                        const SphereGrid& grid, const EnergyGrid& egrid) {
    if (grid.size() == 0 || egrid.size() == 0) throw ConfigurationError("coarea_integrate: empty grid");
    double total = 0;
    for (int k = 0; k < egrid.size(); ++k) {
        double eps = egrid.centers()[k];
        double shell = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) shell += phi(eps, grid.omega(i)) * grid.weight(i);
        total += shell * egrid.dos()[k] * egrid.width(k);
    }
    return total;
}

Eigen::MatrixXd azimuthal_shift_matrix(int n, double angle) {
    Eigen::MatrixXd s(n, n);
    const double dphi = 2.0 * pi / n;
    const int half = n / 2;
    for (int j = 0; j < n; ++j) {
        for (int l = 0; l < n; ++l) {
            double d = dphi * (j - l) + angle;
            double acc = 1.0;
            for (int m = 1; m < (n + 1) / 2; ++m) acc += 2.0 * std::cos(m * d);
            if (n % 2 == 0) acc += ((l % 2) ? -1.0 : 1.0) * std::cos(half * (dphi * j + angle));
            s(j, l) = acc / n;
        }
    }
    return s;
}

Eigen::MatrixXd azimuthal_derivative_matrix(int n) {
    Eigen::MatrixXd d(n, n);
    const double dphi = 2.0 * pi / n;
    for (int j = 0; j < n; ++j) {
        for (int l = 0; l < n; ++l) {
            double acc = 0;
            for (int m = 1; m < (n + 1) / 2; ++m) acc -= 2.0 * m * std::sin(m * dphi * (j - l));
            d(j, l) = acc / n;
        }
    }
    return d;
}

SphereFunction rotate_about_x(const SphereFunction& f, double angle) {
    const SphereGrid& g = f.grid();
    const int n = g.n_phi();
    auto coeffs = f.spectrum();
    for (std::size_t r = 0; r < g.ring_count(); ++r) {
        for (int m = 0; m < n; ++m) {
            auto& c = coeffs[r * n + m];
            if (n % 2 == 0 && m == n / 2) {
                c *= std::cos(0.5 * n * angle);
                continue;
            }
            int freq = m < (n + 1) / 2 ? m : m - n;
            c *= std::polar(1.0, freq * angle);
        }
    }
    return SphereFunction::from_spectrum(f.grid_ptr(), coeffs);
}

Eigen::Vector3d velocity_derivatives(const SphericalPartials& p, double speed, const Eigen::Vector3d& w) {
    if (!(speed > 0)) throw SingularPointError("velocity_derivatives: |v| = 0 is a singular point");
    require(std::abs(w.x()) > 1e-14, "velocity_derivatives: chart undefined on omega_x = 0");
    const double inv = 1.0 / speed;
    // d omega_y / d v_j = (delta_yj - omega_y omega_j) / |v|, same for omega_z
    Eigen::Vector3d grad;
    grad.x() = p.d_speed * w.x() - p.d_omega_y * w.x() * w.y() * inv - p.d_omega_z * w.x() * w.z() * inv;
    grad.y() = p.d_speed * w.y() + p.d_omega_y * (1.0 - w.y() * w.y()) * inv - p.d_omega_z * w.y() * w.z() * inv;
    grad.z() = p.d_speed * w.z() - p.d_omega_y * w.y() * w.z() * inv + p.d_omega_z * (1.0 - w.z() * w.z()) * inv;
    return grad;
}

}  // namespace shelab

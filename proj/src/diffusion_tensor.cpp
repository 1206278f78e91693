#include "shelab/diffusion_tensor.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "shelab/auxiliary_problem.hpp"
#include "shelab/errors.hpp"
#include "shelab/kinetic_solver.hpp"
#include "shelab/parallel.hpp"

namespace shelab {

DiffTensor assemble_D(double B, double epsilon, std::shared_ptr<const BoundaryKernel> kernel) {
    if (!(epsilon > 0)) throw ValidationError("assemble_D: epsilon must be positive");
    auto [chi_y, chi_z] = chi_components(B, epsilon, kernel, 8);
    const SphereGrid& g = kernel->grid();
    SphereFunction ay = chi_y.x_average(), az = chi_z.x_average();
    double s_yy = 0, s_yz = 0, s_zy = 0, s_zz = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double w = g.weight(i);
        s_yy += ay[i] * g.omega_y(i) * w;
        s_yz += ay[i] * g.omega_z(i) * w;
        s_zy += az[i] * g.omega_y(i) * w;
        s_zz += az[i] * g.omega_z(i) * w;
    }
    const double pref = std::pow(2.0 * epsilon, 1.5);
    DiffTensor D;
    D.yy = pref * s_yy;
    D.yz = pref * s_yz;
    D.zy = pref * s_zy;
    D.zz = pref * s_zz;
    D.epsilon = epsilon;
    D.B = B;
    D.n_mu = g.n_mu();
    D.n_phi = g.n_phi();
    return D;
}

double check_positivity(const DiffTensor& D) {
    Eigen::Matrix2d m = D.matrix();
    Eigen::Matrix2d sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

DiffTensorTable tabulate_D(const std::function<double(double, double)>& B_field, const XiGrid& xi,
                           const EnergyGrid& egrid, std::shared_ptr<const BoundaryKernel> kernel) {
    DiffTensorTable table;
    table.n_xi = static_cast<int>(xi.size());
    table.n_eps = egrid.size();
    table.B_samples.resize(xi.size());
    std::map<double, std::size_t> distinct;
    std::vector<double> values;
    for (int i = 0; i < xi.n_y(); ++i) {
        for (int j = 0; j < xi.n_z(); ++j) {
            double b = B_field(xi.y(i), xi.z(j));
            if (!(b > 0))
                throw ValidationError("tabulate_D: B must be positive, got " + std::to_string(b) + " at cell (" +
                                      std::to_string(i) + ", " + std::to_string(j) + ")");
            table.B_samples[xi.index(i, j)] = b;
            if (distinct.emplace(b, values.size()).second) values.push_back(b);
        }
    }
    const auto ne = static_cast<std::size_t>(egrid.size());
    std::vector<DiffTensor> solved(values.size() * ne);
    parallel_for(solved.size(), [&](std::size_t n) {
        std::size_t v = n / ne, k = n % ne;
        try {
            solved[n] = assemble_D(values[v], egrid.centers()[k], kernel);
        } catch (const NumericalError& e) {
            throw NumericalError("tabulate_D failed at B = " + std::to_string(values[v]) +
                                 ", eps cell " + std::to_string(k) + ": " + e.what());
        }
    });
    table.entries.resize(xi.size() * ne);
    for (int i = 0; i < xi.n_y(); ++i) {
        for (int j = 0; j < xi.n_z(); ++j) {
            std::size_t c = xi.index(i, j);
            std::size_t v = distinct.at(table.B_samples[c]);
            for (std::size_t k = 0; k < ne; ++k) {
                DiffTensor d = solved[v * ne + k];
                d.xi_y = xi.y(i);
                d.xi_z = xi.z(j);
                table.entries[c * ne + k] = d;
            }
        }
    }
    return table;
}

DiffTensorTable constant_table(const Eigen::Matrix2d& D, const XiGrid& xi, const EnergyGrid& egrid) {
    DiffTensorTable table;
    table.n_xi = static_cast<int>(xi.size());
    table.n_eps = egrid.size();
    table.B_samples.assign(xi.size(), 0.0);
    for (int i = 0; i < xi.n_y(); ++i) {
        for (int j = 0; j < xi.n_z(); ++j) {
            for (int k = 0; k < egrid.size(); ++k) {
                DiffTensor d;
                d.yy = D(0, 0);
                d.yz = D(0, 1);
                d.zy = D(1, 0);
                d.zz = D(1, 1);
                d.xi_y = xi.y(i);
                d.xi_z = xi.z(j);
                d.epsilon = egrid.centers()[k];
                table.entries.push_back(d);
            }
        }
    }
    return table;
}

MsdEstimate msd_oracle(double B, double epsilon, const BoundaryKernel& kernel, std::size_t n_particles,
                       double t_final, std::uint64_t rng_seed) {
    if (!(epsilon > 0)) throw ValidationError("msd_oracle: epsilon must be positive");
    if (!(B > 0)) throw ValidationError("msd_oracle: B must be positive (the B = 0 diffusivity is infinite)");
    if (n_particles < 2) throw ValidationError("msd_oracle: need at least two particles");
    if (!(t_final > 0)) throw ValidationError("msd_oracle: t_final must be positive");
    const double speed = std::sqrt(2.0 * epsilon);
    const FlightParams params{B, 1.0, 0.0, 0.0};

    // per particle: slope sample (3 entries: yy, yz, zz) and the naive sample
    std::vector<Eigen::Vector3d> slope(n_particles), naive(n_particles);
    parallel_for(n_particles, [&](std::size_t n) {
        Particle p;
        p.rng = make_stream(rng_seed, n);
        p.x = uniform01(p.rng);
        double wx = 2.0 * uniform01(p.rng) - 1.0;
        double ph = 2.0 * std::numbers::pi * uniform01(p.rng);
        double s = std::sqrt((1.0 - wx) * (1.0 + wx));
        p.v = speed * Eigen::Vector3d(wx, s * std::cos(ph), s * std::sin(ph));
        fly(p, params, 0.5 * t_final, kernel);
        Eigen::Vector2d half(p.y, p.z);
        fly(p, params, 0.5 * t_final, kernel);
        Eigen::Vector2d full(p.y, p.z);
        auto outer = [](const Eigen::Vector2d& d) { return Eigen::Vector3d(d.x() * d.x(), d.x() * d.y(), d.y() * d.y()); };
        slope[n] = (outer(full) - outer(half)) / t_final;
        naive[n] = outer(full) / (2.0 * t_final);
    });
    Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sum2 = Eigen::Vector3d::Zero(), nsum = Eigen::Vector3d::Zero();
    for (std::size_t n = 0; n < n_particles; ++n) {
        sum += slope[n];
        sum2 += slope[n].cwiseProduct(slope[n]);
        nsum += naive[n];
    }
    const double count = static_cast<double>(n_particles);
    Eigen::Vector3d mean = sum / count;
    Eigen::Vector3d var = (sum2 / count - mean.cwiseProduct(mean)) * count / (count - 1);
    Eigen::Vector3d se = (var.cwiseMax(0.0) / count).cwiseSqrt();
    MsdEstimate est;
    est.mean << mean[0], mean[1], mean[1], mean[2];
    est.std_error << se[0], se[1], se[1], se[2];
    nsum /= count;
    est.naive << nsum[0], nsum[1], nsum[1], nsum[2];
    est.n_particles = n_particles;
    est.t_final = t_final;
    return est;
}

}  // namespace shelab

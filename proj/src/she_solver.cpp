#include "shelab/she_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "shelab/errors.hpp"

namespace shelab {

namespace {

constexpr double pi = std::numbers::pi;

double capacity(const EnergyGrid& eg, int k) { return 4.0 * pi * eg.dos()[k]; }

void update_field(SheState& s) {
    const XiGrid& xi = s.xi;
    if (s.frozen_E) {
        s.field = FieldState{};
        s.field.phi.assign(xi.size(), 0.0);
        s.field.rho.assign(xi.size(), 0.0);
        s.field.E_y.resize(xi.size());
        s.field.E_z.resize(xi.size());
        s.E_yface.resize(xi.size());
        s.E_zface.resize(xi.size());
        for (int i = 0; i < xi.n_y(); ++i) {
            for (int j = 0; j < xi.n_z(); ++j) {
                std::size_t c = xi.index(i, j);
                Eigen::Vector2d e = s.frozen_E(xi.y(i), xi.z(j));
                s.field.E_y[c] = e.x();
                s.field.E_z[c] = e.y();
                s.E_yface[c] = s.frozen_E(xi.y(i) + 0.5 * xi.h_y(), xi.z(j)).x();
                s.E_zface[c] = s.frozen_E(xi.y(i), xi.z(j) + 0.5 * xi.h_z()).y();
            }
        }
        return;
    }
    XiField rho = charge_density(s.F, xi, s.egrid, s.doping);
    s.field = solve_poisson(rho, xi, s.neutralize);
    s.E_yface = shift_field(s.field.E_y, xi, 0.5 * xi.h_y(), 0.0);
    s.E_zface = shift_field(s.field.E_z, xi, 0.0, 0.5 * xi.h_z());
}

// Centered energy difference (F_{k+1} - F_{k-1}) / (2 de) with halved one-sided ends;
// this choice makes the energy flux below exactly adjoint to the gradient.
std::vector<double> energy_difference(const SheState& s) {
    const int ne = s.egrid.size();
    const double de = s.egrid.width(0);
    std::vector<double> d(s.F.size(), 0.0);
    if (ne < 2) return d;
    for (std::size_t c = 0; c < s.xi.size(); ++c) {
        const double* f = s.F.data() + c * ne;
        double* out = d.data() + c * ne;
        out[0] = (f[1] - f[0]) / (2 * de);
        for (int k = 1; k < ne - 1; ++k) out[k] = (f[k + 1] - f[k - 1]) / (2 * de);
        out[ne - 1] = (f[ne - 1] - f[ne - 2]) / (2 * de);
    }
    return d;
}

}  // namespace

SheState init_state(const SheInit& init, const XiGrid& xi, const EnergyGrid& egrid,
                    std::shared_ptr<const DiffTensorTable> table) {
    if (!init.F_I) throw ConfigurationError("init_state: no initial distribution");
    require(table && table->n_xi == static_cast<int>(xi.size()) && table->n_eps == egrid.size(),
            "init_state: tensor table does not match the grids");
    SheState s{xi, egrid, cell_mass_F(init.F_I, xi, egrid), 0.0, {}, std::move(table), {}, init.frozen_E,
               init.neutralize, {}, {}};
    if (init.doping) {
        s.doping = sample(xi, init.doping);
    } else {
        XiField n = charge_density(s.F, xi, egrid, {});
        double mean = 0;
        for (double v : n) mean += v;
        mean /= static_cast<double>(n.size());
        s.doping.assign(xi.size(), mean);
    }
    update_field(s);
    return s;
}

SheCurrent compute_current(const SheState& s) {
    const XiGrid& xi = s.xi;
    const int ny = xi.n_y(), nz = xi.n_z(), ne = s.egrid.size();
    const double hy = xi.h_y(), hz = xi.h_z();
    const auto nen = static_cast<std::size_t>(ne);
    const DiffTensorTable& D = *s.tensor_table;
    std::vector<double> dF = energy_difference(s);
    auto F = [&](int i, int j, int k) { return s.F[xi.index(i, j) * nen + k]; };
    auto dE = [&](int i, int j, int k) { return dF[xi.index(i, j) * nen + k]; };

    // tilde gradients on faces
    std::vector<double> gy(s.F.size()), gz(s.F.size());
    for (int i = 0; i < ny; ++i) {
        for (int j = 0; j < nz; ++j) {
            std::size_t c = xi.index(i, j);
            for (int k = 0; k < ne; ++k) {
                gy[c * nen + k] = (F(i + 1, j, k) - F(i, j, k)) / hy +
                                  s.E_yface[c] * 0.5 * (dE(i, j, k) + dE(i + 1, j, k));
                gz[c * nen + k] = (F(i, j + 1, k) - F(i, j, k)) / hz +
                                  s.E_zface[c] * 0.5 * (dE(i, j, k) + dE(i, j + 1, k));
            }
        }
    }
    auto Gy = [&](int i, int j, int k) { return gy[xi.index(i, j) * nen + k]; };
    auto Gz = [&](int i, int j, int k) { return gz[xi.index(i, j) * nen + k]; };

    SheCurrent cur;
    cur.J_y.resize(s.F.size());
    cur.J_z.resize(s.F.size());
    cur.J_eps.assign(xi.size() * (nen + 1), 0.0);
    for (int i = 0; i < ny; ++i) {
        for (int j = 0; j < nz; ++j) {
            std::size_t c = xi.index(i, j), cy = xi.index(i + 1, j), cz = xi.index(i, j + 1);
            for (int k = 0; k < ne; ++k) {
                const DiffTensor& a = D.at(c, k);
                const DiffTensor& by = D.at(cy, k);
                const DiffTensor& bz = D.at(cz, k);
                double gz_avg = 0.25 * (Gz(i, j, k) + Gz(i, j - 1, k) + Gz(i + 1, j, k) + Gz(i + 1, j - 1, k));
                double gy_avg = 0.25 * (Gy(i, j, k) + Gy(i - 1, j, k) + Gy(i, j + 1, k) + Gy(i - 1, j + 1, k));
                cur.J_y[c * nen + k] =
                    -(0.5 * (a.yy + by.yy) * Gy(i, j, k) + 0.5 * (a.yz + by.yz) * gz_avg);
                cur.J_z[c * nen + k] =
                    -(0.5 * (a.zy + bz.zy) * gy_avg + 0.5 * (a.zz + bz.zz) * Gz(i, j, k));
            }
        }
    }
    // energy flux: half-sums of E . J over the faces of each cell, averaged onto energy faces
    for (int i = 0; i < ny; ++i) {
        for (int j = 0; j < nz; ++j) {
            std::size_t c = xi.index(i, j), cym = xi.index(i - 1, j), czm = xi.index(i, j - 1);
            std::vector<double> work(nen);
            for (int k = 0; k < ne; ++k) {
                work[k] = 0.5 * (s.E_yface[c] * cur.J_y[c * nen + k] + s.E_yface[cym] * cur.J_y[cym * nen + k]) +
                          0.5 * (s.E_zface[c] * cur.J_z[c * nen + k] + s.E_zface[czm] * cur.J_z[czm * nen + k]);
            }
            for (int k = 1; k < ne; ++k) cur.J_eps[c * (nen + 1) + k] = 0.5 * (work[k - 1] + work[k]);
        }
    }
    return cur;
}

double max_stable_dt(const SheState& s, double c_safe) {
    const XiGrid& xi = s.xi;
    const int ne = s.egrid.size();
    const double hy = xi.h_y(), hz = xi.h_z(), de = s.egrid.width(0);
    const DiffTensorTable& D = *s.tensor_table;
    double worst = 0;
    for (int i = 0; i < xi.n_y(); ++i) {
        for (int j = 0; j < xi.n_z(); ++j) {
            std::size_t c = xi.index(i, j);
            double ey = std::max(std::abs(s.E_yface[c]), std::abs(s.E_yface[xi.index(i - 1, j)]));
            double ez = std::max(std::abs(s.E_zface[c]), std::abs(s.E_zface[xi.index(i, j - 1)]));
            double e2 = ey * ey + ez * ez;
            for (int k = 0; k < ne; ++k) {
                double dyy = 0, dzz = 0, dx = 0, dn = 0;
                for (std::size_t nb : {c, xi.index(i + 1, j), xi.index(i - 1, j), xi.index(i, j + 1), xi.index(i, j - 1)}) {
                    const DiffTensor& t = D.at(nb, k);
                    dyy = std::max(dyy, std::abs(t.yy));
                    dzz = std::max(dzz, std::abs(t.zz));
                    dx = std::max(dx, std::abs(t.yz) + std::abs(t.zy));
                    dn = std::max(dn, t.norm());
                }
                for (int kk : {k - 1, k + 1}) {
                    if (kk < 0 || kk >= ne) continue;
                    dn = std::max(dn, D.at(c, kk).norm());
                }
                double rate = 2.0 / capacity(s.egrid, k) *
                              (dyy / (hy * hy) + dzz / (hz * hz) + dx / (hy * hz) + dn * e2 / (de * de) +
                               dn * std::sqrt(e2) * (1.0 / hy + 1.0 / hz) / de);
                worst = std::max(worst, rate);
            }
        }
    }
    return worst > 0 ? c_safe / worst : std::numeric_limits<double>::infinity();
}

double she_mass(const SheState& s) { return total_mass(s.F, s.xi, s.egrid); }

double she_weighted_norm(const SheState& s) {
    const auto ne = static_cast<std::size_t>(s.egrid.size());
    double m = 0;
    for (std::size_t c = 0; c < s.xi.size(); ++c)
        for (std::size_t k = 0; k < ne; ++k) {
            double f = s.F[c * ne + k];
            m += capacity(s.egrid, static_cast<int>(k)) * f * f * s.egrid.width(static_cast<int>(k));
        }
    return m * s.xi.cell_area();
}

double truncation_fraction(const SheState& s) {
    const int ne = s.egrid.size();
    const int top = std::max(1, ne / 10);
    double total = 0, high = 0;
    for (std::size_t c = 0; c < s.xi.size(); ++c) {
        for (int k = 0; k < ne; ++k) {
            double m = capacity(s.egrid, k) * s.F[c * ne + k] * s.egrid.width(k);
            total += m;
            if (k >= ne - top) high += m;
        }
    }
    return total > 0 ? high / total : 0.0;
}

SheState step(const SheState& state, double dt, double c_safe) {
    if (!(dt > 0)) throw StepSizeError("SHE step: dt must be positive");
    double limit = max_stable_dt(state, c_safe);
    if (dt > limit * (1 + 1e-12))
        throw StepSizeError("SHE step: dt = " + std::to_string(dt) + " exceeds the stability bound " +
                            std::to_string(limit));
    const XiGrid& xi = state.xi;
    const int ne = state.egrid.size();
    const auto nen = static_cast<std::size_t>(ne);
    const double hy = xi.h_y(), hz = xi.h_z(), de = state.egrid.width(0);
    SheCurrent cur = compute_current(state);
    SheState next = state;
    double most_negative = 0;
    for (int i = 0; i < xi.n_y(); ++i) {
        for (int j = 0; j < xi.n_z(); ++j) {
            std::size_t c = xi.index(i, j), cym = xi.index(i - 1, j), czm = xi.index(i, j - 1);
            for (int k = 0; k < ne; ++k) {
                double div = (cur.J_y[c * nen + k] - cur.J_y[cym * nen + k]) / hy +
                             (cur.J_z[c * nen + k] - cur.J_z[czm * nen + k]) / hz +
                             (cur.J_eps[c * (nen + 1) + k + 1] - cur.J_eps[c * (nen + 1) + k]) / de;
                double& f = next.F[c * nen + k];
                f -= dt * div / capacity(state.egrid, k);
                most_negative = std::min(most_negative, f);
            }
        }
    }
    if (most_negative < -1e-12)
        throw PositivityError("SHE step produced F = " + std::to_string(most_negative) + " at t = " +
                              std::to_string(state.t + dt));
    next.t = state.t + dt;
    update_field(next);
    return next;
}

SheRunReport run(SheState& state, double t_final, double dt, int snapshot_every, double c_safe) {
    if (t_final < 0) throw ConfigurationError("t_final must be nonnegative");
    if (snapshot_every < 1) throw ConfigurationError("snapshot cadence must be at least 1");
    SheRunReport rep;
    auto snap = [&] { rep.snapshots.push_back({state.t, state.F, compute_current(state), state.field.phi}); };
    auto record = [&] {
        rep.times.push_back(state.t);
        rep.mass.push_back(she_mass(state));
        rep.weighted_norm.push_back(she_weighted_norm(state));
    };
    snap();
    record();
    int n_fixed = 0;
    if (dt > 0) n_fixed = std::max(1, static_cast<int>(std::ceil(t_final / dt - 1e-12)));
    const double t0 = state.t;
    while (state.t - t0 < t_final * (1 - 1e-14) && t_final > 0) {
        double limit = max_stable_dt(state, c_safe);
        double h = n_fixed > 0 ? t_final / n_fixed : std::min(limit, t_final - (state.t - t0));
        rep.cfl.push_back(h / (limit / c_safe));
        double before = rep.mass.back();
        state = step(state, h, c_safe);
        ++rep.steps;
        record();
        double scale = before != 0 ? std::abs(before) : 1.0;
        rep.max_mass_drift = std::max(rep.max_mass_drift, std::abs(rep.mass.back() - before) / scale);
        if (rep.steps % snapshot_every == 0) snap();
        if (n_fixed > 0 && rep.steps == n_fixed) break;
    }
    if (rep.snapshots.back().t != state.t) snap();
    rep.truncation_fraction = truncation_fraction(state);
    return rep;
}

}  // namespace shelab

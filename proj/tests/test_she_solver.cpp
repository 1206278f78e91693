#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "shelab/errors.hpp"
#include "shelab/she_solver.hpp"

using namespace shelab;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Vector2d no_field(double, double) { return Eigen::Vector2d::Zero(); }

SheState identity_state(const XiGrid& xi, const EnergyGrid& eg, std::function<double(double, double, double)> F_I,
                        std::function<Eigen::Vector2d(double, double)> E = no_field) {
    auto table = std::make_shared<const DiffTensorTable>(constant_table(Eigen::Matrix2d::Identity(), xi, eg));
    SheInit init;
    init.F_I = std::move(F_I);
    init.frozen_E = std::move(E);
    return init_state(init, xi, eg, table);
}

}  // namespace

TEST_CASE("explicit steps conserve mass") {
    XiGrid xi(8, 4, 1.0, 1.0);
    EnergyGrid eg(8, 4.0);
    auto E = [](double y, double z) { return Eigen::Vector2d(0.5 * std::sin(2 * kPi * y), 0.3 * std::cos(2 * kPi * z)); };
    SheState s = identity_state(
        xi, eg, [](double y, double z, double e) { return (1 + 0.5 * std::cos(2 * kPi * y) * std::sin(2 * kPi * z)) * std::exp(-e); },
        E);
    SheRunReport r = run(s, 0.5, 0.0, 10);
    CHECK(r.max_mass_drift < 1e-13);
    CHECK(std::abs(r.mass.back() / r.mass.front() - 1) < 1e-12);
    for (double c : r.cfl) CHECK(c <= 0.9 + 1e-12);
    CHECK(r.snapshots.front().t == 0.0);
    CHECK(r.snapshots.back().t == doctest::Approx(0.5));
}

TEST_CASE("identity tensor decays a Fourier mode at the discrete rate") {
    XiGrid xi(16, 1, 1.0, 1.0);
    EnergyGrid eg(4, 2.0);
    SheState s = identity_state(xi, eg, [](double y, double, double) { return 1.0 + 0.2 * std::cos(2 * kPi * y); });
    std::vector<double> amp0(eg.size());
    for (int k = 0; k < eg.size(); ++k) amp0[k] = s.F[xi.index(0, 0) * eg.size() + k] - s.F[xi.index(8, 0) * eg.size() + k];
    const double dt = 0.5 * max_stable_dt(s, 1.0);
    const int n = 40;
    for (int t = 0; t < n; ++t) s = step(s, dt);
    const double h = xi.h_y();
    const double lam = (2 - 2 * std::cos(2 * kPi * h)) / (h * h);
    for (int k = 0; k < eg.size(); ++k) {
        double amp = s.F[xi.index(0, 0) * eg.size() + k] - s.F[xi.index(8, 0) * eg.size() + k];
        double factor = std::pow(1 - dt * lam / (4 * kPi * eg.dos()[k]), n);
        CHECK(amp == doctest::Approx(amp0[k] * factor).epsilon(1e-10));
    }
}

TEST_CASE("spatially uniform states are stationary without a field") {
    XiGrid xi(4, 4, 1.0, 1.0);
    EnergyGrid eg(6, 3.0);
    SheState s = identity_state(xi, eg, [](double, double, double e) { return std::exp(-2 * e) + 0.1; });
    std::vector<double> f0 = s.F;
    SheRunReport r = run(s, 0.2, 0.0, 100);
    for (std::size_t i = 0; i < f0.size(); ++i) CHECK(s.F[i] == doctest::Approx(f0[i]).epsilon(1e-14));
    CHECK(r.weighted_norm.back() == doctest::Approx(r.weighted_norm.front()));
}

TEST_CASE("equilibrium in a potential is nearly stationary and improves with resolution") {
    // the assembled tensor vanishes as eps -> 0, which suppresses the one-sided energy
    // differences in the first cell; an eps-independent tensor would not
    auto kernel = std::make_shared<const BoundaryKernel>(make_isotropic_kernel(build_sphere_grid(4, 8)));
    auto drift = [&](int n_y, int n_eps) {
        XiGrid xi(n_y, 1, 1.0, 1.0);
        EnergyGrid eg(n_eps, 8.0);
        auto table = std::make_shared<const DiffTensorTable>(
            tabulate_D([](double, double) { return 1.0; }, xi, eg, kernel));
        auto phi = [](double y) { return 0.3 * std::sin(2 * kPi * y); };
        SheInit init;
        init.F_I = [&](double y, double, double e) { return std::exp(-(e + phi(y))); };
        init.frozen_E = [](double y, double) { return Eigen::Vector2d(-0.6 * kPi * std::cos(2 * kPi * y), 0.0); };
        SheState s = init_state(init, xi, eg, table);
        double dt = max_stable_dt(s);
        SheState s1 = step(s, dt);
        double change = 0, mass = 0;
        for (std::size_t i = 0; i < s.F.size(); ++i) {
            double cap = 4 * kPi * eg.dos()[i % n_eps] * eg.width(0) * xi.cell_area();
            change += std::abs(s1.F[i] - s.F[i]) * cap / dt;
            mass += s.F[i] * cap;
        }
        return change / mass;
    };
    double r1 = drift(8, 16), r2 = drift(16, 32), r3 = drift(32, 64);
    MESSAGE("relative mass redistribution rate " << r1 << " -> " << r2 << " -> " << r3);
    CHECK(r2 < 0.5 * r1);
    CHECK(r3 < 0.5 * r2);
}

TEST_CASE("oversized steps are refused") {
    XiGrid xi(8, 1, 1.0, 1.0);
    EnergyGrid eg(4, 2.0);
    SheState s = identity_state(xi, eg, [](double y, double, double) { return 1.0 + 0.2 * std::cos(2 * kPi * y); });
    CHECK_THROWS_AS(step(s, 2.0 * max_stable_dt(s)), StepSizeError);
}

TEST_CASE("weighted norm decays under pure diffusion") {
    XiGrid xi(8, 8, 1.0, 1.0);
    EnergyGrid eg(4, 2.0);
    SheState s = identity_state(
        xi, eg, [](double y, double z, double) { return 1.0 + 0.5 * std::sin(2 * kPi * y) * std::cos(2 * kPi * z); });
    SheRunReport r = run(s, 0.3, 0.0, 1);
    for (std::size_t i = 1; i < r.weighted_norm.size(); ++i)
        CHECK(r.weighted_norm[i] <= r.weighted_norm[i - 1] * (1 + 1e-14));
}

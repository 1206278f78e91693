#include <doctest.h>

#include <cmath>
#include <numbers>

#include "shelab/errors.hpp"
#include "shelab/sphere_grid.hpp"

using namespace shelab;
using std::numbers::pi;

TEST_CASE("gauss_legendre is exact up to degree 2n - 1") {
    for (int n : {1, 2, 5, 8}) {
        GaussRule r = gauss_legendre(n);
        for (int p = 0; p <= 2 * n - 1; ++p) {
            double s = 0;
            for (int i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.nodes[i], p);
            double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
            CHECK(s == doctest::Approx(exact).epsilon(1e-14));
        }
    }
}

TEST_CASE("sphere quadrature moments") {
    GridPtr g = build_sphere_grid(4, 16);
    auto integrate = [&](auto f) { return quad_sphere(SphereFunction::from(g, f), *g); };
    CHECK(integrate([](const Eigen::Vector3d&) { return 1.0; }) == doctest::Approx(4 * pi).epsilon(1e-14));
    CHECK(integrate([](const Eigen::Vector3d& w) { return w.x() * w.x(); }) == doctest::Approx(4 * pi / 3).epsilon(1e-14));
    CHECK(integrate([](const Eigen::Vector3d& w) { return w.y() * w.y(); }) == doctest::Approx(4 * pi / 3).epsilon(1e-14));
    CHECK(std::abs(integrate([](const Eigen::Vector3d& w) { return w.y() * w.z(); })) < 1e-14);
    // hemisphere flux moment int_{omega_x > 0} omega_x domega = pi
    CHECK(integrate([](const Eigen::Vector3d& w) { return w.x() > 0 ? w.x() : 0.0; }) == doctest::Approx(pi).epsilon(1e-14));
    for (std::size_t i = 0; i < g->size(); ++i) {
        CHECK(g->omega(i).norm() == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(std::abs(g->omega_x(i)) > 0);
    }
}

TEST_CASE("grid rejects odd or empty resolutions") {
    CHECK_THROWS_AS(build_sphere_grid(3, 16), ConfigurationError);
    CHECK_THROWS_AS(build_sphere_grid(4, 15), ConfigurationError);
    CHECK_THROWS_AS(build_sphere_grid(0, 16), ConfigurationError);
}

TEST_CASE("mirror and antipode are involutions with the right geometry") {
    GridPtr g = build_sphere_grid(4, 8);
    for (std::size_t i = 0; i < g->size(); ++i) {
        std::size_t m = g->mirror_index(i), a = g->antipode_index(i);
        CHECK(g->mirror_index(m) == i);
        CHECK(g->antipode_index(a) == i);
        CHECK((g->omega(m) - Eigen::Vector3d(-g->omega_x(i), g->omega_y(i), g->omega_z(i))).norm() < 1e-15);
        CHECK((g->omega(a) + g->omega(i)).norm() < 1e-15);
    }
}

TEST_CASE("rotation about x is exact for band-limited functions") {
    GridPtr g = build_sphere_grid(4, 16);
    const double a = 0.37;
    SphereFunction f = SphereFunction::from(g, [](const Eigen::Vector3d& w) { return w.y() + 0.5 * w.y() * w.z(); });
    SphereFunction r = rotate_about_x(f, a);
    for (std::size_t i = 0; i < g->size(); ++i) {
        const Eigen::Vector3d& w = g->omega(i);
        double y = std::cos(a) * w.y() - std::sin(a) * w.z();
        double z = std::sin(a) * w.y() + std::cos(a) * w.z();
        CHECK(r[i] == doctest::Approx(y + 0.5 * y * z).epsilon(1e-13));
    }
}

TEST_CASE("spectrum round trip") {
    GridPtr g = build_sphere_grid(2, 8);
    SphereFunction f = SphereFunction::from(g, [](const Eigen::Vector3d& w) { return std::exp(w.y()) + w.x() * w.z(); });
    auto c = f.spectrum();
    SphereFunction back = SphereFunction::from_spectrum(g, c);
    for (std::size_t i = 0; i < g->size(); ++i) CHECK(back[i] == doctest::Approx(f[i]).epsilon(1e-14));
}

TEST_CASE("velocity_derivatives matches finite differences") {
    // f(v) = |v|^2 omega_y + omega_z^3 at a generic point
    auto f = [](const Eigen::Vector3d& v) {
        double s = v.norm();
        return s * s * v.y() / s + std::pow(v.z() / s, 3);
    };
    Eigen::Vector3d v(0.3, -0.7, 0.5);
    double s = v.norm();
    Eigen::Vector3d w = v / s;
    SphericalPartials p{2 * s * w.y(), s * s, 3 * w.z() * w.z()};
    Eigen::Vector3d grad = velocity_derivatives(p, s, w);
    for (int j = 0; j < 3; ++j) {
        Eigen::Vector3d h = Eigen::Vector3d::Zero();
        h[j] = 1e-6;
        double fd = (f(v + h) - f(v - h)) / 2e-6;
        CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-7));
    }
    CHECK_THROWS_AS(velocity_derivatives(p, 0.0, w), SingularPointError);
    CHECK_THROWS_AS(velocity_derivatives(p, 1.0, Eigen::Vector3d(0, 1, 0)), ContractViolation);
}

TEST_CASE("energy grid density of states") {
    EnergyGrid e(10, 5.0);
    double total = 0;
    for (int k = 0; k < e.size(); ++k) {
        double a = e.edges()[k], b = e.edges()[k + 1];
        double exact = 2.0 * std::sqrt(2.0) / 3.0 * (std::pow(b, 1.5) - std::pow(a, 1.5));
        CHECK(e.dos_integral(k) == doctest::Approx(exact).epsilon(1e-14));
        CHECK(e.dos()[k] == doctest::Approx(std::sqrt(2.0 * e.centers()[k])));
        total += e.dos_integral(k);
    }
    CHECK(total == doctest::Approx(2.0 * std::sqrt(2.0) / 3.0 * std::pow(5.0, 1.5)));
}

TEST_CASE("coarea integral converges to the ball volume") {
    GridPtr g = build_sphere_grid(2, 4);
    const double E = 2.0, exact = 4.0 / 3.0 * pi * std::pow(2 * E, 1.5);
    auto one = [](double, const Eigen::Vector3d&) { return 1.0; };
    double e1 = std::abs(coarea_integrate(one, *g, EnergyGrid(20, E)) - exact);
    double e2 = std::abs(coarea_integrate(one, *g, EnergyGrid(80, E)) - exact);
    CHECK(e1 < 1e-2 * exact);
    CHECK(e2 < e1);
}

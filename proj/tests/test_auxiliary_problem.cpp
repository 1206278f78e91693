#include <doctest.h>

#include <cmath>
#include <complex>
#include <memory>

#include "shelab/auxiliary_problem.hpp"
#include "shelab/errors.hpp"

using namespace shelab;

namespace {

AuxiliaryProblemSpec make_spec(GridPtr g, std::shared_ptr<const BoundaryKernel> k, double B,
                               const std::function<double(const Eigen::Vector3d&)>& src) {
    AuxiliaryProblemSpec spec;
    spec.B = B;
    spec.kernel = std::move(k);
    spec.rhs = SphereFunction::from(g, src);
    return spec;
}

}  // namespace

TEST_CASE("constant source is not solvable") {
    GridPtr g = build_sphere_grid(4, 16);
    auto k = std::make_shared<const BoundaryKernel>(make_isotropic_kernel(g));
    auto spec = make_spec(g, k, 1.0, [](const Eigen::Vector3d&) { return 1.0; });
    CHECK_THROWS_AS(solve_auxiliary(spec), SolvabilityError);
}

TEST_CASE("transverse sources are solved to rounding") {
    GridPtr g = build_sphere_grid(4, 16);
    auto k = std::make_shared<const BoundaryKernel>(make_isotropic_kernel(g));
    for (double B : {0.5, 1.0, 3.0}) {
        for (int comp : {1, 2}) {
            auto spec = make_spec(g, k, B, [comp](const Eigen::Vector3d& w) { return w[comp]; });
            AuxiliarySolution s = solve_auxiliary(spec);
            CHECK(s.residual_norm < 1e-8);
            CHECK(s.boundary_defect < 1e-10);
            CHECK(residual(s, spec) < 1e-8);
            CHECK(green_identity_defect(s, spec) < 1e-10);
        }
    }
}

TEST_CASE("both least-squares methods agree") {
    GridPtr g = build_sphere_grid(4, 8);
    auto k = std::make_shared<const BoundaryKernel>(
        make_custom_kernel([](const Eigen::Vector3d& o, const Eigen::Vector3d& i) { return 1.0 + 0.3 * o.z() * i.z(); }, g));
    auto spec = make_spec(g, k, 2.0, [](const Eigen::Vector3d& w) { return w.y() + 0.5 * w.y() * w.z(); });
    AuxiliarySolution a = solve_auxiliary(spec);
    spec.method = LeastSquaresMethod::CompleteOrthogonal;
    AuxiliarySolution b = solve_auxiliary(spec);
    for (double x : {0.0, 0.3, 1.0}) {
        SphereFunction fa = a.evaluate(x), fb = b.evaluate(x);
        for (std::size_t i = 0; i < g->size(); ++i) CHECK(fa[i] == doctest::Approx(fb[i]).epsilon(1e-9));
    }
    CHECK(a.boundary_defect < 1e-10);
}

TEST_CASE("adding a constant keeps the residual and shifts the mean") {
    GridPtr g = build_sphere_grid(4, 8);
    auto k = std::make_shared<const BoundaryKernel>(make_isotropic_kernel(g));
    auto spec = make_spec(g, k, 1.0, [](const Eigen::Vector3d& w) { return w.z(); });
    AuxiliarySolution s = solve_auxiliary(spec);
    double m = s.mean;
    SphereFunction before = s.evaluate(0.4);
    s.shift_by_constant(2.5);
    SphereFunction after = s.evaluate(0.4);
    for (std::size_t i = 0; i < g->size(); ++i) CHECK(after[i] - before[i] == doctest::Approx(2.5));
    CHECK(s.mean == doctest::Approx(m + 2.5));
    CHECK(residual(s, spec) < 1e-8);
}

TEST_CASE("x average equals the integral of samples") {
    GridPtr g = build_sphere_grid(2, 8);
    auto k = std::make_shared<const BoundaryKernel>(make_isotropic_kernel(g));
    auto spec = make_spec(g, k, 1.5, [](const Eigen::Vector3d& w) { return w.y(); });
    spec.n_x = 2000;
    AuxiliarySolution s = solve_auxiliary(spec);
    SphereFunction avg = s.x_average();
    for (std::size_t i = 0; i < g->size(); ++i) {
        double trap = 0;
        for (std::size_t j = 0; j + 1 < s.x.size(); ++j)
            trap += 0.5 * (s.chi[j][i] + s.chi[j + 1][i]) * (s.x[j + 1] - s.x[j]);
        CHECK(avg[i] == doctest::Approx(trap).epsilon(1e-6));
    }
}

TEST_CASE("specular walls leave the problem degenerate") {
    GridPtr g = build_sphere_grid(2, 8);
    auto k = std::make_shared<const BoundaryKernel>(make_specular_kernel(g));
    auto spec = make_spec(g, k, 1.0, [](const Eigen::Vector3d& w) { return w.y(); });
    CHECK_THROWS_AS(solve_auxiliary(spec), DegenerateKernelError);
}

TEST_CASE("phi functions are smooth through zero") {
    for (double r : {1e-12, 1e-6, 1e-3, 0.5}) {
        std::complex<double> z(r, 0.7 * r);
        CHECK(std::abs(phi1(z) - (std::exp(z) - 1.0) / z) < 1e-10 * (r < 1e-4 ? 1e6 : 1.0));
        CHECK(std::abs(phi1(z) - 1.0) < 2 * r);
        CHECK(std::abs(phi2(z) - 0.5) < 2 * r);
    }
    std::complex<double> z(2.0, -1.0);
    CHECK(std::abs(phi2(z) - (std::exp(z) - 1.0 - z) / (z * z)) < 1e-14);
}

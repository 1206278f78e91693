#include <doctest.h>

#include <cmath>
#include <memory>

#include "shelab/diffusion_tensor.hpp"
#include "shelab/errors.hpp"

using namespace shelab;

namespace {
std::shared_ptr<const BoundaryKernel> isotropic(int n_mu, int n_phi) {
    return std::make_shared<const BoundaryKernel>(make_isotropic_kernel(build_sphere_grid(n_mu, n_phi)));
}
}  // namespace

TEST_CASE("isotropic walls give a positive rotation-invariant tensor") {
    auto k = isotropic(4, 16);
    for (double B : {0.5, 1.0, 4.0}) {
        DiffTensor D = assemble_D(B, 1.0, k);
        CHECK(check_positivity(D) > 0);
        CHECK(D.yy == doctest::Approx(D.zz).epsilon(1e-10));
        CHECK(D.yz == doctest::Approx(-D.zy).epsilon(1e-10));
    }
}

TEST_CASE("tensor follows the speed scaling") {
    // chi scales as 1/|v| at fixed B/|v|, so D(2B, 4 eps) = 4 D(B, eps)
    auto k = isotropic(4, 16);
    DiffTensor a = assemble_D(0.8, 0.5, k);
    DiffTensor b = assemble_D(1.6, 2.0, k);
    CHECK((b.matrix() - 4.0 * a.matrix()).norm() < 1e-10 * b.norm());
}

TEST_CASE("stronger field reduces lateral transport") {
    auto k = isotropic(4, 16);
    CHECK(assemble_D(4.0, 1.0, k).yy < assemble_D(1.0, 1.0, k).yy);
}

TEST_CASE("tabulation reuses solves for equal B and matches direct assembly") {
    auto k = isotropic(4, 8);
    XiGrid xi(4, 2, 1.0, 1.0);
    EnergyGrid eg(3, 3.0);
    auto B = [](double y, double) { return y < 0.5 ? 1.0 : 2.0; };
    DiffTensorTable t = tabulate_D(B, xi, eg, k);
    REQUIRE(t.entries.size() == xi.size() * eg.size());
    for (int i = 0; i < xi.n_y(); ++i)
        for (int j = 0; j < xi.n_z(); ++j)
            for (int e = 0; e < eg.size(); ++e) {
                const DiffTensor& d = t.at(xi.index(i, j), e);
                DiffTensor ref = assemble_D(B(xi.y(i), xi.z(j)), eg.centers()[e], k);
                CHECK((d.matrix() - ref.matrix()).norm() <= 1e-12 * ref.norm());
            }
}

TEST_CASE("nonpositive inputs are rejected") {
    auto k = isotropic(2, 8);
    XiGrid xi(2, 1, 1.0, 1.0);
    EnergyGrid eg(2, 1.0);
    CHECK_THROWS_AS(tabulate_D([](double, double) { return 0.0; }, xi, eg, k), ValidationError);
    CHECK_THROWS_AS(assemble_D(1.0, 0.0, k), ValidationError);
    CHECK_THROWS_AS(msd_oracle(0.0, 1.0, *k, 10, 1.0, 1), ValidationError);
}

TEST_CASE("constant table repeats the injected tensor") {
    XiGrid xi(3, 2, 1.0, 2.0);
    EnergyGrid eg(4, 2.0);
    Eigen::Matrix2d m;
    m << 1.0, 0.2, -0.2, 1.5;
    DiffTensorTable t = constant_table(m, xi, eg);
    for (const DiffTensor& d : t.entries) CHECK((d.matrix() - m).norm() == 0.0);
}

TEST_CASE("particle displacement matches the quadrature tensor") {
    auto k = isotropic(8, 16);
    const double B = 2.0, eps = 0.5;
    DiffTensor D = assemble_D(B, eps, k);
    Eigen::Matrix2d target = 0.5 * (D.matrix() + D.matrix().transpose()) / (4.0 * M_PI * std::sqrt(2.0 * eps));
    MsdEstimate m = msd_oracle(B, eps, *k, 4000, 40.0, 11);
    for (int r = 0; r < 2; ++r) {
        double tol = std::max(4.0 * m.std_error(r, r), 0.1 * target(r, r));
        CHECK(std::abs(m.mean(r, r) - target(r, r)) < tol);
    }
}

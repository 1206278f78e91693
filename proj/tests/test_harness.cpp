#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "shelab/config.hpp"
#include "shelab/errors.hpp"
#include "shelab/harness.hpp"

using namespace shelab;

TEST_CASE("configuration parses sections, lists and scientific counts") {
    Config c = parse_config(
        "[grid]\nn_mu = 4\nn_y = 8\n[physics]\nalphas = 0.5, 0.25,0.125\nB = 2\nfrozen_field = false\n"
        "[run]\nparticles = 1e5\nseed = 42\n[output]\ndir = results\n");
    CHECK(c.grid.n_mu == 4);
    CHECK(c.physics.alphas == std::vector<double>{0.5, 0.25, 0.125});
    CHECK(c.physics.B == 2.0);
    CHECK_FALSE(c.physics.frozen_field);
    CHECK(c.run.particles == 100000);
    CHECK(c.run.seed == 42);
    CHECK(c.output_dir == "results");
}

TEST_CASE("bad configurations are rejected") {
    CHECK_THROWS_AS(parse_config("[grid]\nn_muu = 4\n"), ConfigurationError);
    CHECK_THROWS_AS(parse_config("[gird]\nn_mu = 4\n"), ConfigurationError);
    CHECK_THROWS_AS(parse_config("[physics]\nalphas = 0.5, 0\n"), ConfigurationError);
    CHECK_THROWS_AS(parse_config("[physics]\nalphas = 1.5\n"), ConfigurationError);
    CHECK_THROWS_AS(parse_config("[grid]\nn_mu = 3\n"), ConfigurationError);
    CHECK_THROWS_AS(parse_config("[grid]\nn_mu = four\n"), ConfigurationError);
    CHECK_THROWS_AS(parse_config("[run]\nparticles = -5\n"), ConfigurationError);
    CHECK_THROWS_AS(parse_config("[run]\nparticles = 2.5\n"), ConfigurationError);
    CHECK_THROWS_AS(parse_config("[run]\ncompare_y_bins = 3\n"), ConfigurationError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigurationError);
}

TEST_CASE("error messages name the offending line") {
    try {
        parse_config("[grid]\nn_mu = 4\n\nbogus = 1\n", "cfg.ini");
        FAIL("expected an error");
    } catch (const ConfigurationError& e) {
        CHECK(std::string(e.what()).find("cfg.ini:4") != std::string::npos);
    }
}

TEST_CASE("converge needs three alphas and a frozen field") {
    Config c;
    c.physics.alphas = {0.5};
    CHECK_THROWS_AS(run_converge(c), ConfigurationError);
    c.physics.alphas = {0.5, 0.25, 0.125};
    c.physics.frozen_field = false;
    CHECK_THROWS_AS(run_converge(c), ConfigurationError);
}

TEST_CASE("numbers format as shortest round trip") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(-2.5e-12) == "-2.5e-12");
    for (double v : {1.0 / 3.0, std::numbers::pi, 6.02214076e23, 5e-324})
        CHECK(std::strtod(format_number(v).c_str(), nullptr) == v);
}

TEST_CASE("csv tables keep header and row order") {
    CsvTable t({"a", "b"});
    t.add_row({1.0, 0.5});
    t.add_row({-3.0, 1e-20});
    CHECK(t.rows() == 2);
    CHECK(t.str() == "a,b\n1,0.5\n-3,1e-20\n");
    CHECK_THROWS_AS(t.add_row({1.0}), ContractViolation);
}

TEST_CASE("convergence csv lists every checkpoint") {
    ConvergenceResult r;
    r.rows = {{0.4, 0.25, 0.1, 0.01}, {0.4, 0.5, 0.2, 0.02}};
    CsvTable t = convergence_csv(r);
    CHECK(t.header() == std::vector<std::string>{"alpha", "t", "distance", "stderr"});
    CHECK(t.str() == "alpha,t,distance,stderr\n0.4,0.25,0.1,0.01\n0.4,0.5,0.2,0.02\n");
}

TEST_CASE("particles drawn from the SHE initial state are at zero distance") {
    Config c;
    c.grid.n_y = 8;
    c.grid.n_eps = 8;
    c.grid.eps_max = 4.0;
    XiGrid xi = make_xi_grid(c);
    EnergyGrid eg = make_energy_grid(c);
    InitialData F = make_initial_data(c);
    std::vector<double> F_she = cell_mass_F(F, xi, eg);
    ParticleEnsemble ens = sample_initial(F, 50000, xi, eg, 0.5, 3);
    Distance d = binned_distance(ens, F_she, xi, eg, 4, 2);
    CHECK(d.value < 3 * d.std_error + 1e-3);
    CHECK(d.noise_floor > 0);

    std::vector<double> shifted = F_she;
    for (double& v : shifted) v *= 1.2;
    Distance far = binned_distance(ens, shifted, xi, eg, 4, 2);
    CHECK(far.value > 10 * far.std_error);
}

TEST_CASE("reduced sweep gives the quadratic weak estimate") {
    GridPtr g = build_sphere_grid(4, 8);
    auto k = std::make_shared<const BoundaryKernel>(make_isotropic_kernel(g));
    std::vector<ReducedRun> runs;
    for (double a : {0.4, 0.2, 0.1}) runs.push_back(run_reduced(g, k, 16, 1.0, 1.0, a, 10.0));
    WeakDiagnostics w = diagnostics_weak_estimates(runs);
    CHECK(w.l2_nonincreasing);
    CHECK(w.max_budget_defect < 1e-10);
    CHECK(w.slope == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("verdict names are stable") {
    CHECK(to_string(Verdict::Pass) == "pass");
    CHECK(to_string(Verdict::Inconclusive) == "inconclusive");
    CHECK(to_string(Verdict::Fail) == "fail");
}

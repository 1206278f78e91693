#include "shelab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "shelab/errors.hpp"
#include "shelab/random.hpp"

namespace shelab {

namespace {
constexpr double pi = std::numbers::pi;
}

XiGrid make_xi_grid(const Config& c) { return XiGrid(c.grid.n_y, c.grid.n_z, c.grid.L_y, c.grid.L_z); }

EnergyGrid make_energy_grid(const Config& c) { return EnergyGrid(c.grid.n_eps, c.grid.eps_max); }

std::function<double(double, double)> make_B_field(const Config& c) {
    const double B = c.physics.B, m = c.physics.B_modulation, L = c.grid.L_y;
    return [B, m, L](double y, double) { return B * (1.0 + m * std::cos(2.0 * pi * y / L)); };
}

InitialData make_initial_data(const Config& c) {
    const double a = c.physics.init_amplitude, T = c.physics.init_temperature, L = c.grid.L_y;
    return [a, T, L](double y, double, double eps) { return std::exp(-eps / T) * (1.0 + a * std::cos(2.0 * pi * y / L)); };
}

std::function<Eigen::Vector2d(double, double)> make_frozen_E(const Config& c) {
    const double E0 = c.physics.E0, L = c.grid.L_y;
    return [E0, L](double y, double) { return Eigen::Vector2d(E0 * std::sin(2.0 * pi * y / L), 0.0); };
}

SheState make_she_state(const Config& c, std::shared_ptr<const BoundaryKernel> kernel) {
    XiGrid xi = make_xi_grid(c);
    EnergyGrid eg = make_energy_grid(c);
    auto table = std::make_shared<const DiffTensorTable>(tabulate_D(make_B_field(c), xi, eg, std::move(kernel)));
    SheInit init;
    init.F_I = make_initial_data(c);
    if (c.physics.doping == "uniform") {
        double v = c.physics.doping_value;
        init.doping = [v](double, double) { return v; };
    }
    if (c.physics.frozen_field) init.frozen_E = make_frozen_E(c);
    init.neutralize = c.run.neutralize;
    return init_state(init, xi, eg, std::move(table));
}

Distance binned_distance(const ParticleEnsemble& ens, const std::vector<double>& F_she, const XiGrid& xi,
                         const EnergyGrid& eg, int y_bins, int eps_bins) {
    const int ne = eg.size();
    require(xi.n_y() % y_bins == 0 && ne % eps_bins == 0, "binned_distance: bins must divide the grids");
    require(F_she.size() == xi.size() * static_cast<std::size_t>(ne), "binned_distance: F does not match");
    const int cy = xi.n_y() / y_bins, ce = ne / eps_bins;
    const std::size_t nb = static_cast<std::size_t>(y_bins) * eps_bins;
    auto bin_of = [&](int i, int k) { return static_cast<std::size_t>(i / cy) * eps_bins + k / ce; };

    std::vector<double> cap(nb, 0), m_she(nb, 0);
    for (int i = 0; i < xi.n_y(); ++i)
        for (int j = 0; j < xi.n_z(); ++j)
            for (int k = 0; k < ne; ++k) {
                double c = 4.0 * pi * eg.dos()[k] * eg.width(k) * xi.cell_area();
                cap[bin_of(i, k)] += c;
                m_she[bin_of(i, k)] += c * F_she[xi.index(i, j) * ne + k];
            }
    const double de = eg.eps_max() / ne;
    BinnedSums m = binned_sums(
        ens, nb,
        [&](const Particle& p) {
            double eps = p.energy();
            if (eps >= eg.eps_max()) return nb;
            int k = std::min(ne - 1, static_cast<int>(eps / de));
            return bin_of(xi.locate(p.y, p.z).first, k);
        },
        [](const Particle& p) { return p.weight; });
    double s = 0, noise = 0, var_s = 0;
    for (std::size_t b = 0; b < nb; ++b) {
        double var = m.std_error[b] * m.std_error[b];
        double d = m.sum[b] - m_she[b];
        s += d * d / cap[b];
        noise += var / cap[b];
        var_s += (4 * d * d * var + 2 * var * var) / (cap[b] * cap[b]);
    }
    Distance out;
    out.raw = std::sqrt(s);
    out.noise_floor = noise;
    out.value = std::sqrt(std::max(s - noise, 0.0));
    double se_s = std::sqrt(var_s);
    out.std_error = se_s / (2.0 * std::max(out.value, std::sqrt(se_s)));
    return out;
}

ReducedRun run_reduced(GridPtr grid, std::shared_ptr<const BoundaryKernel> kernel, int n_x, double speed, double B,
                       double alpha, double t_final, double stop_ratio,
                       const std::function<double(double, const Eigen::Vector3d&)>& f0) {
    auto init = f0 ? f0 : [](double, const Eigen::Vector3d& w) { return 1.0 + w.y(); };
    ReducedState st = make_reduced_state(std::move(grid), n_x, speed, B, alpha, init);
    ReducedRun run;
    run.alpha = alpha;
    run.dt = 0.9 * reduced_max_dt(st);
    run.times.push_back(0);
    run.l2.push_back(st.l2_squared());
    run.anisotropy.push_back(st.anisotropy());
    const double a0 = run.anisotropy.front();
    const int max_steps = static_cast<int>(std::ceil(t_final / run.dt - 1e-9));
    for (int n = 0; n < max_steps; ++n) {
        RelaxBudget b = relax_step(st, run.dt, *kernel);
        ++run.steps;
        run.anisotropy_integral += run.dt * b.wall_anisotropy;
        run.max_budget_defect = std::max(run.max_budget_defect, b.defect());
        run.max_l2_increase = std::max(run.max_l2_increase, b.l2_after - b.l2_before);
        run.times.push_back(st.t);
        run.l2.push_back(b.l2_after);
        run.anisotropy.push_back(st.anisotropy());
        if (run.anisotropy.back() <= stop_ratio * a0) break;
    }
    return run;
}

WeakDiagnostics diagnostics_weak_estimates(const std::vector<ReducedRun>& runs) {
    WeakDiagnostics d;
    for (const auto& r : runs) {
        d.max_l2_increase = std::max(d.max_l2_increase, r.max_l2_increase);
        d.max_budget_defect = std::max(d.max_budget_defect, r.max_budget_defect);
        // increases at the level of rounding (relative 1e-14) do not count
        for (std::size_t n = 1; n < r.l2.size(); ++n)
            if (r.l2[n] > r.l2[n - 1] + kL2RoundingTolerance * r.l2.front()) d.l2_nonincreasing = false;
        d.alphas.push_back(r.alpha);
        d.anisotropy_integrals.push_back(r.anisotropy_integral);
    }
    // least squares in log-log coordinates (only meaningful for positive integrals)
    std::vector<double> lx, ly;
    for (std::size_t n = 0; n < runs.size(); ++n) {
        if (d.anisotropy_integrals[n] > 0) {
            lx.push_back(std::log(d.alphas[n]));
            ly.push_back(std::log(d.anisotropy_integrals[n]));
        }
    }
    if (lx.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t n = 0; n < lx.size(); ++n) {
            mx += lx[n];
            my += ly[n];
        }
        mx /= static_cast<double>(lx.size());
        my /= static_cast<double>(lx.size());
        double sxy = 0, sxx = 0;
        for (std::size_t n = 0; n < lx.size(); ++n) {
            sxy += (lx[n] - mx) * (ly[n] - my);
            sxx += (lx[n] - mx) * (lx[n] - mx);
        }
        d.slope = sxx > 0 ? sxy / sxx : 0.0;
    }
    return d;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Inconclusive: return "inconclusive";
        case Verdict::Fail: return "fail";
    }
    return "unknown";
}

ConvergenceResult run_converge(const Config& c) {
    if (c.physics.alphas.size() < 3)
        throw ConfigurationError("converge needs at least three alpha values, got " +
                                 std::to_string(c.physics.alphas.size()));
    if (!c.physics.frozen_field) throw ConfigurationError("converge runs in frozen-field mode (physics.frozen_field)");
    auto t_start = std::chrono::steady_clock::now();
    std::vector<double> alphas = c.physics.alphas;
    std::sort(alphas.begin(), alphas.end(), std::greater<>());

    GridPtr grid = make_sphere_grid(c);
    auto kernel = make_kernel(c, grid);
    SheState she = make_she_state(c, kernel);
    const std::vector<double> checkpoints{0.5 * c.run.t_final, c.run.t_final};

    std::vector<std::vector<double>> she_F;
    Json she_json = Json::array();
    for (double t : checkpoints) {
        SheRunReport rep = run(she, t - she.t, c.run.dt, 1 << 30, c.run.c_safe);
        she_F.push_back(she.F);
        she_json.push_back({{"t", she.t}, {"steps", rep.steps}, {"max_mass_drift", rep.max_mass_drift},
                            {"truncation_fraction", rep.truncation_fraction}});
    }

    ConvergenceResult result;
    XiGrid xi = make_xi_grid(c);
    EnergyGrid eg = make_energy_grid(c);
    KineticFields fields;
    fields.B = make_B_field(c);
    fields.E = make_frozen_E(c);
    Json kin_json = Json::array();
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        const double alpha = alphas[a];
        ParticleEnsemble ens =
            sample_initial(make_initial_data(c), c.run.particles, xi, eg, alpha, stream_seed(c.run.seed, a));
        const double w0 = ens.total_weight();
        Json per_t = Json::array();
        for (std::size_t n = 0; n < checkpoints.size(); ++n) {
            double span = checkpoints[n] - ens.t;
            int steps = std::max(1, static_cast<int>(std::ceil(span / c.run.kinetic_dt - 1e-9)));
            for (int s = 0; s < steps; ++s) step_kinetic(ens, span / steps, fields, *kernel);
            Distance d = binned_distance(ens, she_F[n], xi, eg, c.run.compare_y_bins, c.run.compare_eps_bins);
            result.rows.push_back({alpha, checkpoints[n], d.value, d.std_error});
            per_t.push_back({{"t", checkpoints[n]}, {"distance", d.value}, {"stderr", d.std_error},
                             {"raw_distance", d.raw}, {"noise_floor", d.noise_floor}});
        }
        kin_json.push_back({{"alpha", alpha},
                            {"particles", ens.particles.size()},
                            {"bounces", ens.bounces},
                            {"weight_drift", std::abs(ens.total_weight() - w0) / w0},
                            {"distances", per_t}});
    }

    // verdict on the final-time distances, alpha decreasing
    std::vector<ConvergenceRow> last;
    for (const auto& r : result.rows)
        if (r.t == checkpoints.back()) last.push_back(r);
    result.verdict = Verdict::Pass;
    for (std::size_t n = 0; n + 1 < last.size(); ++n) {
        double gap = last[n].distance - last[n + 1].distance;
        double sep = 2.0 * std::hypot(last[n].std_error, last[n + 1].std_error);
        if (gap < -sep) {
            result.verdict = Verdict::Fail;
            result.reason = "distance increases from alpha = " + format_number(last[n].alpha) + " to " +
                            format_number(last[n + 1].alpha);
            break;
        }
        if (gap <= sep && result.verdict == Verdict::Pass) {
            result.verdict = Verdict::Inconclusive;
            result.reason = "distances at alpha = " + format_number(last[n].alpha) + " and " +
                            format_number(last[n + 1].alpha) + " are not separated by 2 standard errors";
        }
    }
    if (result.verdict == Verdict::Pass) result.reason = "distances decrease with 2-sigma separation";

    // reduced-mode weak estimates over the same alpha list
    std::vector<ReducedRun> reduced;
    const double speed = std::sqrt(2.0 * c.physics.epsilon);
    for (double alpha : alphas)
        reduced.push_back(run_reduced(grid, kernel, c.grid.n_x, speed, c.physics.B, alpha, c.run.reduced_t_final));
    result.weak = diagnostics_weak_estimates(reduced);

    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    Json rows = Json::array();
    for (const auto& r : result.rows)
        rows.push_back({{"alpha", r.alpha}, {"t", r.t}, {"distance", r.distance}, {"stderr", r.std_error}});
    result.report = {
        {"verdict", to_string(result.verdict)},
        {"reason", result.reason},
        {"convergence", rows},
        {"she", she_json},
        {"kinetic", kin_json},
        {"weak_estimates",
         {{"label", "diagnostic"},
          {"l2_nonincreasing", result.weak.l2_nonincreasing},
          {"max_l2_increase", result.weak.max_l2_increase},
          {"max_budget_defect", result.weak.max_budget_defect},
          {"alphas", result.weak.alphas},
          {"anisotropy_integrals", result.weak.anisotropy_integrals},
          {"slope", result.weak.slope}}},
        {"poisson_surrogate", "periodic box, zero-mean gauge"},
        {"energy_closure", "zero flux at eps_max"},
        {"wall_clock_seconds", seconds},
        {"seed", c.run.seed},
        {"version", kVersion},
        {"config", to_json(c)},
    };
    return result;
}

CsvTable convergence_csv(const ConvergenceResult& result) {
    CsvTable t({"alpha", "t", "distance", "stderr"});
    for (const auto& r : result.rows) t.add_row({r.alpha, r.t, r.distance, r.std_error});
    return t;
}

}  // namespace shelab

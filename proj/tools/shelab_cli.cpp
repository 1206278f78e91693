#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shelab/auxiliary_problem.hpp"
#include "shelab/boundary_kernel.hpp"
#include "shelab/config.hpp"
#include "shelab/diffusion_tensor.hpp"
#include "shelab/errors.hpp"
#include "shelab/field_solver.hpp"
#include "shelab/harness.hpp"
#include "shelab/io.hpp"
#include "shelab/kinetic_solver.hpp"
#include "shelab/parallel.hpp"
#include "shelab/she_solver.hpp"

namespace fs = std::filesystem;
using namespace shelab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInconclusive = 4;

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
};

Config resolve_config(const CommonOptions& o) {
    Config c = o.config_path.empty() ? Config{} : load_config(o.config_path);
    if (!o.out_dir.empty()) c.output_dir = o.out_dir;
    if (o.workers) c.run.workers = *o.workers;
    if (o.seed) c.run.seed = *o.seed;
    validate(c);
    worker_count() = c.run.workers;
    fs::create_directories(c.output_dir);
    return c;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Json kernel_json(const KernelReport& r, const BoundaryKernel& k) {
    Json alg = Json::object();
    for (const auto& [name, v] : r.algebra_defects) alg[name] = v;
    return {{"kernel", to_string(k.kind())},
            {"n_mu", k.grid().n_mu()},
            {"n_phi", k.grid().n_phi()},
            {"flux_defect", r.flux_defect},
            {"norm_defect", r.norm_defect},
            {"reciprocity_defect", r.reciprocity_defect},
            {"dg_min_margin", r.dg_min_margin},
            {"dg_constant_defect", r.dg_constant_defect},
            {"k0", r.k0},
            {"null_dim", r.null_dim},
            {"null_dim_left", r.null_dim_left},
            {"null_dim_right", r.null_dim_right},
            {"operator_norm", r.operator_norm},
            {"algebra_defects", alg}};
}

int cmd_check_kernel(const CommonOptions& o, int trials) {
    Config c = resolve_config(o);
    auto kernel = make_kernel(c, make_sphere_grid(c));
    Json doc = kernel_json(check_kernel(*kernel, trials, c.run.seed), *kernel);
    write_json(c.output_dir / "kernel_report.json", doc);
    std::cout << doc.dump(2) << "\n";
    return kExitOk;
}

int cmd_aux(const CommonOptions& o) {
    auto t0 = std::chrono::steady_clock::now();
    Config c = resolve_config(o);
    GridPtr grid = make_sphere_grid(c);
    auto kernel = make_kernel(c, grid);
    const double eps = c.physics.epsilon, speed = std::sqrt(2.0 * eps);
    auto [chi_y, chi_z] = chi_components(c.physics.B, eps, kernel, c.grid.n_x);

    CsvTable csv({"x", "mu", "phi", "sigma", "chi_y", "chi_z"});
    for (std::size_t j = 0; j < chi_y.x.size(); ++j) {
        for (std::size_t i = 0; i < grid->size(); ++i) {
            double sigma = grid->hemisphere(i) == Hemisphere::Positive ? 1.0 : -1.0;
            csv.add_row({chi_y.x[j], grid->mu(grid->mu_index(i)), grid->phi(grid->phi_index(i)), sigma,
                         chi_y.chi[j][i], chi_z.chi[j][i]});
        }
    }
    csv.write(c.output_dir / "aux.csv");

    auto component = [&](const AuxiliarySolution& s, int axis) {
        AuxiliaryProblemSpec spec{c.physics.B, speed, kernel, c.grid.n_x,
                                  SphereFunction::from(grid, [axis](const Eigen::Vector3d& w) { return w[axis]; })};
        return Json{{"residual", s.residual_norm},
                    {"boundary_defect", s.boundary_defect},
                    {"mean", s.mean},
                    {"green_identity_defect", green_identity_defect(s, spec)}};
    };
    // the solvability condition must reject a source with nonzero mean
    std::string constant_source;
    try {
        AuxiliaryProblemSpec spec{c.physics.B, speed, kernel, c.grid.n_x,
                                  SphereFunction::from(grid, [](const Eigen::Vector3d&) { return 1.0; })};
        solve_auxiliary(spec);
        constant_source = "solved (unexpected)";
    } catch (const SolvabilityError& e) {
        constant_source = std::string("SolvabilityError: ") + e.what();
    }
    Json doc{{"B", c.physics.B},
             {"epsilon", eps},
             {"kernel", c.physics.kernel},
             {"chi_y", component(chi_y, 1)},
             {"chi_z", component(chi_z, 2)},
             {"constant_source", constant_source},
             {"wall_clock_seconds", seconds_since(t0)},
             {"seed", c.run.seed},
             {"version", kVersion},
             {"config", to_json(c)}};
    write_json(c.output_dir / "aux_report.json", doc);
    return kExitOk;
}

int cmd_tensor(const CommonOptions& o, bool oracle) {
    auto t0 = std::chrono::steady_clock::now();
    Config c = resolve_config(o);
    auto kernel = make_kernel(c, make_sphere_grid(c));
    XiGrid xi = make_xi_grid(c);
    EnergyGrid eg = make_energy_grid(c);
    DiffTensorTable table = tabulate_D(make_B_field(c), xi, eg, kernel);

    std::vector<std::string> header{"xi_y", "xi_z", "epsilon", "D_yy", "D_yz", "D_zy", "D_zz", "lambda_min"};
    if (oracle) {
        for (const char* col : {"target_yy", "target_yz", "target_zz", "msd_yy", "msd_yz", "msd_zz", "msd_stderr_yy",
                                "msd_stderr_yz", "msd_stderr_zz"})
            header.push_back(col);
    }
    CsvTable csv(header);
    // oracle runs once per distinct (B, eps); the seed depends only on that pair's order of appearance
    std::map<std::pair<double, double>, MsdEstimate> msd;
    double lambda_lo = INFINITY, norm_hi = 0;
    int oracle_fail = 0;
    for (std::size_t cell = 0; cell < xi.size(); ++cell) {
        for (int k = 0; k < eg.size(); ++k) {
            const DiffTensor& d = table.at(cell, k);
            double lam = check_positivity(d);
            lambda_lo = std::min(lambda_lo, lam);
            norm_hi = std::max(norm_hi, d.norm());
            std::vector<double> row{d.xi_y, d.xi_z, d.epsilon, d.yy, d.yz, d.zy, d.zz, lam};
            if (oracle) {
                double B = table.B_samples[cell];
                auto key = std::make_pair(B, d.epsilon);
                auto it = msd.find(key);
                if (it == msd.end())
                    it = msd.emplace(key, msd_oracle(B, d.epsilon, *kernel, c.run.msd_particles, c.run.msd_t_final,
                                                     stream_seed(c.run.seed, msd.size())))
                             .first;
                const MsdEstimate& m = it->second;
                Eigen::Matrix2d s = 0.5 * (d.matrix() + d.matrix().transpose()) /
                                    (4.0 * std::numbers::pi * std::sqrt(2.0 * d.epsilon));
                double tol = std::max(3.0 * m.std_error(0, 0), 0.1 * std::abs(s(0, 0)));
                if (std::abs(m.mean(0, 0) - s(0, 0)) > tol) ++oracle_fail;
                for (double v : {s(0, 0), s(0, 1), s(1, 1), m.mean(0, 0), m.mean(0, 1), m.mean(1, 1),
                                 m.std_error(0, 0), m.std_error(0, 1), m.std_error(1, 1)})
                    row.push_back(v);
            }
            csv.add_row(row);
        }
    }
    csv.write(c.output_dir / "tensor.csv");
    Json doc{{"rows", csv.rows()},
             {"distinct_B", Json::array()},
             {"lambda_min", lambda_lo},
             {"max_norm", norm_hi},
             {"positive_definite", lambda_lo > 0},
             {"wall_clock_seconds", seconds_since(t0)},
             {"seed", c.run.seed},
             {"version", kVersion},
             {"config", to_json(c)}};
    std::vector<double> distinct(table.B_samples.begin(), table.B_samples.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    doc["distinct_B"] = distinct;
    if (oracle) {
        doc["oracle"] = {{"particles", c.run.msd_particles},
                         {"t_final", c.run.msd_t_final},
                         {"evaluations", msd.size()},
                         {"yy_outside_tolerance", oracle_fail}};
    }
    write_json(c.output_dir / "tensor_report.json", doc);
    return kExitOk;
}

// Cell-centered moment rows shared by the she and kinetic outputs.
std::vector<std::string> moment_header(bool with_stderr) {
    std::vector<std::string> h{"t", "y", "z", "epsilon", "F", "J_y", "J_z", "J_eps", "phi"};
    if (with_stderr)
        for (const char* col : {"F_stderr", "J_y_stderr", "J_z_stderr"}) h.push_back(col);
    return h;
}

void add_field_rows(CsvTable& csv, const XiGrid& xi, const FieldState& f) {
    for (int i = 0; i < xi.n_y(); ++i)
        for (int j = 0; j < xi.n_z(); ++j) {
            std::size_t c = xi.index(i, j);
            csv.add_row({xi.y(i), xi.z(j), f.phi[c], f.E_y[c], f.E_z[c]});
        }
}

int cmd_she(const CommonOptions& o) {
    auto t0 = std::chrono::steady_clock::now();
    Config c = resolve_config(o);
    auto kernel = make_kernel(c, make_sphere_grid(c));
    SheState st = make_she_state(c, kernel);
    const XiGrid xi = st.xi;
    const EnergyGrid eg = st.egrid;
    const int ne = eg.size();
    SheRunReport rep = run(st, c.run.t_final, c.run.dt, c.run.snapshot_every, c.run.c_safe);

    CsvTable csv(moment_header(false));
    for (const auto& s : rep.snapshots) {
        for (int i = 0; i < xi.n_y(); ++i)
            for (int j = 0; j < xi.n_z(); ++j) {
                std::size_t cell = xi.index(i, j), below_y = xi.index(i - 1, j), below_z = xi.index(i, j - 1);
                for (int k = 0; k < ne; ++k) {
                    double jy = 0.5 * (s.current.J_y[cell * ne + k] + s.current.J_y[below_y * ne + k]);
                    double jz = 0.5 * (s.current.J_z[cell * ne + k] + s.current.J_z[below_z * ne + k]);
                    double je = 0.5 * (s.current.J_eps[cell * (ne + 1) + k] + s.current.J_eps[cell * (ne + 1) + k + 1]);
                    csv.add_row({s.t, xi.y(i), xi.z(j), eg.centers()[k], s.F[cell * ne + k], jy, jz, je, s.phi[cell]});
                }
            }
    }
    csv.write(c.output_dir / "she_snapshots.csv");
    CsvTable field({"y", "z", "phi", "E_y", "E_z"});
    add_field_rows(field, xi, st.field);
    field.write(c.output_dir / "field.csv");

    std::vector<double> dissipation;
    for (std::size_t n = 1; n < rep.weighted_norm.size(); ++n)
        dissipation.push_back(rep.weighted_norm[n - 1] - rep.weighted_norm[n]);
    Json doc{{"steps", rep.steps},
             {"t_final", st.t},
             {"times", rep.times},
             {"mass", rep.mass},
             {"weighted_norm", rep.weighted_norm},
             {"dissipation", dissipation},
             {"cfl", rep.cfl},
             {"max_mass_drift", rep.max_mass_drift},
             {"truncation_fraction", rep.truncation_fraction},
             {"poisson_surrogate", "periodic box, zero-mean gauge"},
             {"wall_clock_seconds", seconds_since(t0)},
             {"seed", c.run.seed},
             {"version", kVersion},
             {"config", to_json(c)}};
    write_json(c.output_dir / "she_report.json", doc);
    return kExitOk;
}

double mean_energy(const ParticleEnsemble& ens) {
    double e = 0, w = 0;
    for (const auto& p : ens.particles) {
        e += p.weight * p.energy();
        w += p.weight;
    }
    return w > 0 ? e / w : 0.0;
}

int cmd_kinetic_reduced(const Config& c, std::chrono::steady_clock::time_point t0) {
    GridPtr grid = make_sphere_grid(c);
    auto kernel = make_kernel(c, grid);
    const double speed = std::sqrt(2.0 * c.physics.epsilon);
    std::vector<ReducedRun> runs;
    CsvTable csv({"alpha", "t", "l2", "anisotropy"});
    for (double alpha : c.physics.alphas) {
        runs.push_back(run_reduced(grid, kernel, c.grid.n_x, speed, c.physics.B, alpha, c.run.reduced_t_final));
        const auto& r = runs.back();
        for (std::size_t n = 0; n < r.times.size(); ++n) csv.add_row({alpha, r.times[n], r.l2[n], r.anisotropy[n]});
    }
    csv.write(c.output_dir / "reduced.csv");
    WeakDiagnostics w = diagnostics_weak_estimates(runs);
    Json per = Json::array();
    for (const auto& r : runs)
        per.push_back({{"alpha", r.alpha},
                       {"dt", r.dt},
                       {"steps", r.steps},
                       {"l2_initial", r.l2.front()},
                       {"l2_final", r.l2.back()},
                       {"anisotropy_ratio", r.anisotropy.back() / r.anisotropy.front()},
                       {"max_budget_defect", r.max_budget_defect},
                       {"anisotropy_integral", r.anisotropy_integral}});
    Json doc{{"mode", "reduced"},
             {"runs", per},
             {"weak_estimates",
              {{"label", "diagnostic"},
               {"l2_nonincreasing", w.l2_nonincreasing},
               {"max_l2_increase", w.max_l2_increase},
               {"max_budget_defect", w.max_budget_defect},
               {"slope", w.slope}}},
             {"wall_clock_seconds", seconds_since(t0)},
             {"seed", c.run.seed},
             {"version", kVersion},
             {"config", to_json(c)}};
    write_json(c.output_dir / "kinetic_report.json", doc);
    return kExitOk;
}

int cmd_kinetic(const CommonOptions& o, const std::string& mode_override, std::optional<double> alpha_override) {
    auto t0 = std::chrono::steady_clock::now();
    Config c = resolve_config(o);
    const std::string mode = mode_override.empty() ? c.run.mode : mode_override;
    if (mode == "reduced") return cmd_kinetic_reduced(c, t0);
    if (mode != "mc" && mode != "mc-selfconsistent")
        throw ConfigurationError("kinetic: unknown mode '" + mode + "' (mc | reduced | mc-selfconsistent)");
    const bool selfconsistent = mode == "mc-selfconsistent";
    if (!selfconsistent && !c.physics.frozen_field)
        throw ConfigurationError("kinetic: mode mc needs physics.frozen_field = true; use mc-selfconsistent");
    const double alpha = alpha_override ? *alpha_override : c.physics.alphas.front();
    if (!(alpha > 0 && alpha <= 1)) throw ValidationError("kinetic: alpha must be in (0, 1]");

    auto kernel = make_kernel(c, make_sphere_grid(c));
    XiGrid xi = make_xi_grid(c);
    EnergyGrid eg = make_energy_grid(c);
    const int ne = eg.size();
    ParticleEnsemble ens = sample_initial(make_initial_data(c), c.run.particles, xi, eg, alpha, c.run.seed);
    const double w0 = ens.total_weight(), e0 = mean_energy(ens);

    KineticFields fields;
    fields.B = make_B_field(c);
    FieldState field;
    XiField doping;
    if (selfconsistent) {
        XiField n0 = deposit_density(ens, xi);
        double mean = 0;
        for (double v : n0) mean += v;
        mean /= static_cast<double>(n0.size());
        doping.assign(xi.size(), c.physics.doping == "uniform" ? c.physics.doping_value : mean);
        XiField rho(xi.size());
        for (std::size_t n = 0; n < rho.size(); ++n) rho[n] = n0[n] - doping[n];
        field = solve_poisson(rho, xi, c.run.neutralize);
    } else {
        fields.E = make_frozen_E(c);
        field.phi.assign(xi.size(), 0.0);
        field.E_y = sample(xi, [&](double y, double z) { return fields.E(y, z).x(); });
        field.E_z = sample(xi, [&](double y, double z) { return fields.E(y, z).y(); });
    }

    CsvTable csv(moment_header(true));
    auto snapshot = [&] {
        MomentFields m = estimate_moments(ens, xi, eg);
        for (int i = 0; i < xi.n_y(); ++i)
            for (int j = 0; j < xi.n_z(); ++j) {
                std::size_t cell = xi.index(i, j);
                for (int k = 0; k < ne; ++k) {
                    std::size_t n = cell * ne + k;
                    double je = field.E_y[cell] * m.J_y[n] + field.E_z[cell] * m.J_z[n];
                    csv.add_row({ens.t, xi.y(i), xi.z(j), eg.centers()[k], m.F[n], m.J_y[n], m.J_z[n], je,
                                 field.phi[cell], m.F_stderr[n], m.J_y_stderr[n], m.J_z_stderr[n]});
                }
            }
    };
    snapshot();
    const int steps = std::max(1, static_cast<int>(std::ceil(c.run.t_final / c.run.kinetic_dt - 1e-9)));
    const double dt = c.run.t_final / steps;
    std::vector<double> times{0.0}, weight{w0}, energy{e0};
    for (int s = 1; s <= steps; ++s) {
        if (selfconsistent)
            field = step_selfconsistent(ens, dt, xi, doping, fields.B, *kernel);
        else
            step_kinetic(ens, dt, fields, *kernel);
        times.push_back(ens.t);
        weight.push_back(ens.total_weight());
        energy.push_back(mean_energy(ens));
        if (s % c.run.snapshot_every == 0 || s == steps) snapshot();
    }
    csv.write(c.output_dir / "kinetic_moments.csv");
    if (selfconsistent) {
        CsvTable f({"y", "z", "phi", "E_y", "E_z"});
        add_field_rows(f, xi, field);
        f.write(c.output_dir / "field.csv");
    }
    Json doc{{"mode", mode},
             {"alpha", alpha},
             {"particles", ens.particles.size()},
             {"steps", steps},
             {"dt", dt},
             {"times", times},
             {"total_weight", weight},
             {"mean_energy", energy},
             {"weight_drift", std::abs(weight.back() - w0) / w0},
             {"energy_drift", std::abs(energy.back() - e0) / e0},
             {"bounces", ens.bounces},
             {"bounces_per_particle", static_cast<double>(ens.bounces) / static_cast<double>(ens.particles.size())},
             {"wall_clock_seconds", seconds_since(t0)},
             {"seed", c.run.seed},
             {"version", kVersion},
             {"config", to_json(c)}};
    write_json(c.output_dir / "kinetic_report.json", doc);
    return kExitOk;
}

int cmd_converge(const CommonOptions& o) {
    Config c = resolve_config(o);
    ConvergenceResult r = run_converge(c);
    convergence_csv(r).write(c.output_dir / "convergence.csv");
    write_json(c.output_dir / "converge_report.json", r.report);
    std::cout << "verdict: " << to_string(r.verdict) << " (" << r.reason << ")\n";
    switch (r.verdict) {
        case Verdict::Pass: return kExitOk;
        case Verdict::Inconclusive: return kExitInconclusive;
        case Verdict::Fail: return kExitNumerical;
    }
    return kExitNumerical;
}

// Merges the JSON reports of a run directory (or the given files) into report.json.
int cmd_report(const CommonOptions& o, std::vector<std::string> inputs) {
    fs::path out = o.out_dir.empty() ? fs::path("out") : fs::path(o.out_dir);
    if (inputs.empty()) {
        if (!fs::is_directory(out)) throw ConfigurationError("report: no directory " + out.string());
        for (const auto& e : fs::directory_iterator(out))
            if (e.path().extension() == ".json" && e.path().filename() != "report.json")
                inputs.push_back(e.path().string());
        std::sort(inputs.begin(), inputs.end());
    }
    if (inputs.empty()) throw ConfigurationError("report: no JSON reports found in " + out.string());
    Json doc{{"version", kVersion}, {"reports", Json::object()}};
    for (const auto& in : inputs) {
        std::ifstream f(in);
        if (!f) throw ConfigurationError("report: cannot open " + in);
        Json j;
        try {
            j = Json::parse(f);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError("report: " + in + " is not valid JSON: " + e.what());
        }
        doc["reports"][fs::path(in).stem().string()] = j;
        std::cout << fs::path(in).filename().string();
        if (j.contains("verdict")) std::cout << "  verdict " << j["verdict"].get<std::string>();
        std::cout << "\n";
    }
    fs::create_directories(out);
    write_json(out / "report.json", doc);
    return kExitOk;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("-c,--config", o.config_path, "INI configuration file")->check(CLI::ExistingFile);
    cmd->add_option("-o,--out", o.out_dir, "output directory (overrides the config)");
    cmd->add_option("-w,--workers", o.workers, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", o.seed, "random seed (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shelab: kinetic slab transport and its diffusion limit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    CommonOptions opts;

    int trials = 100;
    auto* ck = app.add_subcommand("check-kernel", "boundary kernel identities as JSON");
    add_common(ck, opts);
    ck->add_option("--trials", trials, "random traces for the Darrozes-Guiraud check");

    auto* aux = app.add_subcommand("aux", "cell problem solution chi and residual report");
    add_common(aux, opts);

    bool oracle = false;
    auto* tensor = app.add_subcommand("tensor", "diffusion tensor table");
    add_common(tensor, opts);
    tensor->add_flag("--oracle", oracle, "add Monte Carlo mean-square-displacement columns");

    auto* she = app.add_subcommand("she", "spherical harmonics expansion (SHE) solver run");
    add_common(she, opts);

    std::string mode;
    std::optional<double> alpha;
    auto* kin = app.add_subcommand("kinetic", "kinetic run: mc | reduced | mc-selfconsistent");
    add_common(kin, opts);
    kin->add_option("--mode", mode, "overrides run.mode");
    kin->add_option("--alpha", alpha, "scaling parameter for mc modes (default: first of physics.alphas)");

    auto* conv = app.add_subcommand("converge", "alpha-convergence study");
    add_common(conv, opts);

    std::vector<std::string> inputs;
    auto* report = app.add_subcommand("report", "merge JSON reports into report.json");
    report->add_option("-o,--out", opts.out_dir, "run directory (default out)");
    report->add_option("inputs", inputs, "report files (default: every *.json in the run directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (ck->parsed()) return cmd_check_kernel(opts, trials);
        if (aux->parsed()) return cmd_aux(opts);
        if (tensor->parsed()) return cmd_tensor(opts, oracle);
        if (she->parsed()) return cmd_she(opts);
        if (kin->parsed()) return cmd_kinetic(opts, mode, alpha);
        if (conv->parsed()) return cmd_converge(opts);
        if (report->parsed()) return cmd_report(opts, inputs);
    } catch (const ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ContractViolation& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "file error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}

#include "shelab/auxiliary_problem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shelab/errors.hpp"

namespace shelab {

namespace {

constexpr std::complex<double> I(0.0, 1.0);

int signed_frequency(int m, int n) { return m < (n + 1) / 2 ? m : m - n; }

bool is_nyquist(int m, int n) { return n % 2 == 0 && m == n / 2; }

}  // namespace

std::complex<double> phi1(std::complex<double> z) {
    if (std::abs(z) < 0.1) {
        // sum_{k>=0} z^k / (k+1)!
        std::complex<double> term = 1.0, sum = 1.0;
        for (int k = 1; k < 12; ++k) {
            term *= z / static_cast<double>(k + 1);
            sum += term;
        }
        return sum;
    }
    return (std::exp(z) - 1.0) / z;
}

std::complex<double> phi2(std::complex<double> z) {
    if (std::abs(z) < 0.1) {
        // sum_{k>=0} z^k / (k+2)!
        std::complex<double> term = 0.5, sum = 0.5;
        for (int k = 1; k < 12; ++k) {
            term *= z / static_cast<double>(k + 2);
            sum += term;
        }
        return sum;
    }
    return (std::exp(z) - 1.0 - z) / (z * z);
}

AuxiliarySolution::AuxiliarySolution(const AuxiliaryProblemSpec& spec,
                                     std::vector<std::complex<double>> chi0_spectrum)
    : grid_(spec.kernel->grid_ptr()), chi0_(std::move(chi0_spectrum)), source_(spec.rhs.spectrum()) {
    const SphereGrid& g = *grid_;
    for (std::size_t r = 0; r < g.ring_count(); ++r) {
        double wx = g.omega_x(r * g.n_phi());
        inv_flux_speed_.push_back(1.0 / (spec.speed * wx));
        theta_.push_back(spec.B / (spec.speed * wx));
    }
    resample(spec.n_x);
}

void AuxiliarySolution::resample(int n_x) {
    x.clear();
    chi.clear();
    for (int j = 0; j <= n_x; ++j) {
        x.push_back(static_cast<double>(j) / n_x);
        chi.push_back(evaluate(x.back()));
    }
}

SphereFunction AuxiliarySolution::evaluate(double xq) const {
    const SphereGrid& g = *grid_;
    const int n = g.n_phi();
    std::vector<std::complex<double>> coeffs(g.size());
    for (std::size_t r = 0; r < g.ring_count(); ++r) {
        for (int m = 0; m < n; ++m) {
            std::size_t idx = r * n + m;
            if (is_nyquist(m, n)) {
                // source has no Nyquist content; homogeneous part damps like the shift interpolant
                coeffs[idx] = chi0_[idx] * std::cos(0.5 * n * theta_[r] * xq);
                continue;
            }
            double a = signed_frequency(m, n) * theta_[r];
            coeffs[idx] = std::exp(-I * (a * xq)) * chi0_[idx] -
                          source_[idx] * inv_flux_speed_[r] * xq * phi1(-I * (a * xq));
        }
    }
    return SphereFunction::from_spectrum(grid_, coeffs);
}

SphereFunction AuxiliarySolution::x_average() const {
    const SphereGrid& g = *grid_;
    const int n = g.n_phi();
    std::vector<std::complex<double>> coeffs(g.size());
    for (std::size_t r = 0; r < g.ring_count(); ++r) {
        for (int m = 0; m < n; ++m) {
            std::size_t idx = r * n + m;
            if (is_nyquist(m, n)) {
                double b = 0.5 * n * theta_[r];
                double avg = std::abs(b) < 1e-12 ? 1.0 : std::sin(b) / b;
                coeffs[idx] = chi0_[idx] * avg;
                continue;
            }
            double a = signed_frequency(m, n) * theta_[r];
            coeffs[idx] = phi1(-I * a) * chi0_[idx] - source_[idx] * inv_flux_speed_[r] * phi2(-I * a);
        }
    }
    return SphereFunction::from_spectrum(grid_, coeffs);
}

void AuxiliarySolution::shift_by_constant(double c) {
    const int n = grid_->n_phi();
    for (std::size_t r = 0; r < grid_->ring_count(); ++r) chi0_[r * n] += c;
    mean += c;
    resample(static_cast<int>(x.size()) - 1);
}

namespace {

void validate(const AuxiliaryProblemSpec& spec) {
    if (!spec.kernel) throw ConfigurationError("auxiliary problem: no boundary kernel");
    if (!(spec.speed > 0)) throw ValidationError("auxiliary problem: speed must be positive");
    if (spec.n_x < 2) throw ValidationError("auxiliary problem: n_x must be at least 2");
    if (!std::isfinite(spec.B)) throw ValidationError("auxiliary problem: B must be finite");
    require(spec.rhs.grid_ptr().get() == spec.kernel->grid_ptr().get() ||
                spec.rhs.values().size() == spec.kernel->grid().size(),
            "auxiliary problem: source and kernel live on different grids");
    const int n = spec.kernel->grid().n_phi();
    auto spec_g = spec.rhs.spectrum();
    for (std::size_t r = 0; r < spec.kernel->grid().ring_count(); ++r)
        require(std::abs(spec_g[r * n + n / 2]) < 1e-12,
                "auxiliary problem: source must not carry the Nyquist azimuthal mode");
}

}  // namespace

AuxiliarySolution solve_auxiliary(const AuxiliaryProblemSpec& spec) {
    validate(spec);
    const SphereGrid& g = spec.kernel->grid();
    const BoundaryKernel& kernel = *spec.kernel;
    const int n = g.n_phi();
    const auto hsize = static_cast<Eigen::Index>(g.hemisphere_size());

    double total = quad_sphere(spec.rhs, g);  // x-independent source: int_0^1 dx = 1
    if (std::abs(total) > kSolvabilityTolerance)
        throw SolvabilityError("auxiliary problem not solvable: int int g dx domega = " + std::to_string(total));

    // Unknowns a = chi(0, +) and c = chi(0, -). With T the exact transfer over
    // [0, 1] and h its source part, chi(1, .) = T chi(0, .) + h. Wall laws:
    //   x = 0: c = K0* a            x = 1: T+ a + h+ = K1* (T- c + h-)
    // hence (T+ - K1* T- K0*) a = K1* h- - h+.
    AuxiliaryProblemSpec zero_spec = spec;
    AuxiliarySolution source_only(zero_spec, std::vector<std::complex<double>>(g.size(), 0.0));
    SphereFunction h_full = source_only.evaluate(1.0);

    Eigen::MatrixXd t_plus = Eigen::MatrixXd::Zero(hsize, hsize);
    Eigen::MatrixXd t_minus = Eigen::MatrixXd::Zero(hsize, hsize);
    for (int k = 0; k < g.n_mu(); ++k) {
        double theta = spec.B / (spec.speed * g.mu(k));
        t_plus.block(k * n, k * n, n, n) = azimuthal_shift_matrix(n, -theta);
        t_minus.block(k * n, k * n, n, n) = azimuthal_shift_matrix(n, theta);
    }
    auto hemi = [&](const SphereFunction& f, Hemisphere side) {
        auto v = f.values().subspan(g.hemisphere_offset(side), g.hemisphere_size());
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), hsize));
    };
    Eigen::VectorXd h_plus = hemi(h_full, Hemisphere::Positive);
    Eigen::VectorXd h_minus = hemi(h_full, Hemisphere::Negative);
    Eigen::MatrixXd k0_adj = kernel.adjoint_matrix(Wall::Left);
    Eigen::MatrixXd k1_adj = kernel.adjoint_matrix(Wall::Right);

    Eigen::MatrixXd system = t_plus - k1_adj * t_minus * k0_adj;
    Eigen::VectorXd rhs = k1_adj * h_minus - h_plus;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(system, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    double cutoff = kRankTolerance * std::max(sv[0], 1.0);
    Eigen::Index nullity = (sv.array() < cutoff).count();
    if (nullity > 1)
        throw DegenerateKernelError("auxiliary boundary system has a " + std::to_string(nullity) +
                                    "-dimensional kernel (expected 1: the constants)");
    Eigen::VectorXd a;
    if (spec.method == LeastSquaresMethod::Svd) {
        svd.setThreshold(cutoff / sv[0]);
        a = svd.solve(rhs);
    } else {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(system);
        cod.setThreshold(cutoff / sv[0]);
        a = cod.solve(rhs);
    }
    Eigen::VectorXd c = k0_adj * a;

    SphereFunction chi0(kernel.grid_ptr());
    for (Eigen::Index l = 0; l < hsize; ++l) {
        chi0[g.hemisphere_offset(Hemisphere::Positive) + l] = a[l];
        chi0[g.hemisphere_offset(Hemisphere::Negative) + l] = c[l];
    }
    AuxiliarySolution sol(spec, chi0.spectrum());

    // zero mean normalization
    double mean = quad_sphere(sol.x_average(), g) / (4.0 * std::numbers::pi);
    sol.shift_by_constant(-mean);
    sol.mean = quad_sphere(sol.x_average(), g) / (4.0 * std::numbers::pi);
    sol.residual_norm = residual(sol, spec);
    ChiField field = [&sol](double xq) { return sol.evaluate(xq); };
    sol.boundary_defect = boundary_defect(field, kernel);
    return sol;
}

double residual(const ChiField& chi, const AuxiliaryProblemSpec& spec) {
    const SphereGrid& g = spec.rhs.grid();
    const int n = g.n_phi();
    const Eigen::MatrixXd dphi = azimuthal_derivative_matrix(n);
    const GaussRule rule = gauss_legendre(8);
    const double h = 1.0 / spec.n_x;
    double worst = 0;
    SphereFunction left = chi(0.0);
    for (int j = 0; j < spec.n_x; ++j) {
        double x0 = j * h;
        SphereFunction right = chi(x0 + h);
        Eigen::VectorXd integral = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            SphereFunction v = chi(x0 + 0.5 * h * (1.0 + rule.nodes[q]));
            for (std::size_t i = 0; i < g.size(); ++i) integral[i] += 0.5 * h * rule.weights[q] * v[i];
        }
        for (std::size_t r = 0; r < g.ring_count(); ++r) {
            Eigen::VectorXd ring_int = integral.segment(r * n, n);
            Eigen::VectorXd rot = dphi * ring_int;
            for (int m = 0; m < n; ++m) {
                std::size_t i = r * n + m;
                double transport = -spec.speed * g.omega_x(i) * (right[i] - left[i]);
                double res = (transport - spec.B * rot[m]) / h - spec.rhs[i];
                worst = std::max(worst, std::abs(res));
            }
        }
        left = std::move(right);
    }
    return worst;
}

double residual(const AuxiliarySolution& solution, const AuxiliaryProblemSpec& spec) {
    return residual([&solution](double xq) { return solution.evaluate(xq); }, spec);
}

double boundary_defect(const ChiField& chi, const BoundaryKernel& kernel) {
    const SphereGrid& g = kernel.grid();
    double worst = 0;
    for (Wall w : {Wall::Left, Wall::Right}) {
        SphereFunction trace = chi(w == Wall::Left ? 0.0 : 1.0);
        HemisphereFunction in = restrict_to(trace, incoming(w));
        HemisphereFunction out = restrict_to(trace, outgoing(w));
        HemisphereFunction expected = apply_K_adjoint(kernel, w, in);
        for (std::size_t l = 0; l < g.hemisphere_size(); ++l)
            worst = std::max(worst, std::abs(out.values[l] - expected.values[l]));
    }
    return worst;
}

double green_identity_defect(const AuxiliarySolution& solution, const AuxiliaryProblemSpec& spec) {
    const SphereGrid& g = solution.grid();
    SphereFunction avg = solution.x_average();
    double volume = 0;
    for (std::size_t i = 0; i < g.size(); ++i) volume += 2.0 * avg[i] * spec.rhs[i] * g.weight(i);
    double walls = 0;
    for (Wall w : {Wall::Left, Wall::Right}) {
        SphereFunction trace = solution.evaluate(w == Wall::Left ? 0.0 : 1.0);
        HemisphereFunction in = restrict_to(trace, incoming(w));
        HemisphereFunction out = restrict_to(trace, outgoing(w));
        walls += flux_inner(in, in, g) - flux_inner(out, out, g);
    }
    return std::abs(volume - spec.speed * walls);
}

std::pair<AuxiliarySolution, AuxiliarySolution> chi_components(double B, double epsilon,
                                                                std::shared_ptr<const BoundaryKernel> kernel,
                                                                int n_x) {
    if (!(epsilon > 0)) throw ValidationError("chi_components: epsilon must be positive");
    GridPtr grid = kernel->grid_ptr();
    AuxiliaryProblemSpec spec;
    spec.B = B;
    spec.speed = std::sqrt(2.0 * epsilon);
    spec.kernel = kernel;
    spec.n_x = n_x;
    spec.rhs = SphereFunction::from(grid, [](const Eigen::Vector3d& w) { return w.y(); });
    AuxiliarySolution chi_y = solve_auxiliary(spec);
    spec.rhs = SphereFunction::from(grid, [](const Eigen::Vector3d& w) { return w.z(); });
    AuxiliarySolution chi_z = solve_auxiliary(spec);
    return {std::move(chi_y), std::move(chi_z)};
}

}  // namespace shelab

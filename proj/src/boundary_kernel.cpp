#include "shelab/boundary_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shelab/errors.hpp"
#include "shelab/random.hpp"

namespace shelab {

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::Isotropic: return "isotropic";
        case KernelKind::Custom: return "custom";
        case KernelKind::EtaPerturbed: return "eta-perturbed";
        case KernelKind::Specular: return "specular";
    }
    return "unknown";
}

Eigen::VectorXd flux_weights(const SphereGrid& grid) {
    Eigen::VectorXd a(grid.hemisphere_size());
    std::size_t off = grid.hemisphere_offset(Hemisphere::Positive);
    for (std::size_t l = 0; l < grid.hemisphere_size(); ++l)
        a[l] = std::abs(grid.omega_x(off + l)) * grid.weight(off + l);
    return a;
}

BoundaryKernel::BoundaryKernel(GridPtr grid, KernelKind kind, Eigen::MatrixXd left, Eigen::MatrixXd right,
                               double eta)
    : grid_(std::move(grid)), kind_(kind), left_(std::move(left)), right_(std::move(right)), eta_(eta) {
    auto h = static_cast<Eigen::Index>(grid_->hemisphere_size());
    require(left_.rows() == h && left_.cols() == h && right_.rows() == h && right_.cols() == h,
            "BoundaryKernel: operator matrices must be hemisphere sized");
}

Eigen::MatrixXd BoundaryKernel::adjoint_matrix(Wall w) const {
    // <K f, g>_- = <f, K* g>_+ with diagonal flux weights a on both sides
    Eigen::VectorXd a = flux_weights(*grid_);
    const Eigen::MatrixXd& op = operator_matrix(w);
    return a.cwiseInverse().asDiagonal() * op.transpose() * a.asDiagonal();
}

double BoundaryKernel::value(Wall w, std::size_t in, std::size_t out) const {
    if (kind_ == KernelKind::Specular)
        return in == out ? std::numeric_limits<double>::infinity() : 0.0;
    Eigen::VectorXd a = flux_weights(*grid_);
    return operator_matrix(w)(in, out) / a[out];
}

BoundaryKernel make_isotropic_kernel(GridPtr grid) {
    Eigen::VectorXd a = flux_weights(*grid);
    // 1/pi with pi replaced by its discrete value sum(a), so (con) holds to rounding
    Eigen::MatrixXd op = Eigen::VectorXd::Ones(a.size()) * (a.transpose() / a.sum());
    return BoundaryKernel(grid, KernelKind::Isotropic, op, op);
}

namespace {

Eigen::MatrixXd conserving_operator(const Eigen::MatrixXd& raw, const Eigen::VectorXd& a) {
    if (raw.rows() != a.size() || raw.cols() != a.size())
        throw ValidationError("custom kernel: raw matrix must be hemisphere sized");
    if (!(raw.array() > 0).all() || !raw.allFinite())
        throw ValidationError("custom kernel: entries must be finite and strictly positive");
    Eigen::MatrixXd op(raw.rows(), raw.cols());
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        double flux = raw.col(j).dot(a);
        op.col(j) = raw.col(j) * (a[j] / flux);
    }
    return op;
}

}  // namespace

BoundaryKernel make_custom_kernel(const Eigen::MatrixXd& raw, GridPtr grid) {
    Eigen::MatrixXd op = conserving_operator(raw, flux_weights(*grid));
    return BoundaryKernel(grid, KernelKind::Custom, op, op);
}

BoundaryKernel make_custom_kernel(const std::function<double(const Eigen::Vector3d&, const Eigen::Vector3d&)>& raw,
                                  GridPtr grid) {
    const auto h = grid->hemisphere_size();
    Eigen::VectorXd a = flux_weights(*grid);
    Eigen::MatrixXd ops[2];
    for (Wall w : {Wall::Left, Wall::Right}) {
        std::size_t in_off = grid->hemisphere_offset(incoming(w));
        std::size_t out_off = grid->hemisphere_offset(outgoing(w));
        Eigen::MatrixXd m(h, h);
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < h; ++j) m(i, j) = raw(grid->omega(out_off + j), grid->omega(in_off + i));
        ops[static_cast<int>(w)] = conserving_operator(m, a);
    }
    return BoundaryKernel(grid, KernelKind::Custom, ops[0], ops[1]);
}

BoundaryKernel make_specular_kernel(GridPtr grid) {
    auto h = static_cast<Eigen::Index>(grid->hemisphere_size());
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(h, h);
    return BoundaryKernel(grid, KernelKind::Specular, id, id);
}

BoundaryKernel make_eta_kernel(const BoundaryKernel& kernel, double eta) {
    if (!(eta > 0)) throw ValidationError("make_eta_kernel: eta must be positive");
    Eigen::VectorXd a = flux_weights(kernel.grid());
    auto h = a.size();
    Eigen::MatrixXd q = Eigen::VectorXd::Ones(h) * (a.transpose() / a.sum());
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(h, h) - q;
    Eigen::MatrixXd ops[2];
    for (Wall w : {Wall::Left, Wall::Right})
        ops[static_cast<int>(w)] = kernel.operator_matrix(w) * p + q / (1.0 + eta);
    return BoundaryKernel(kernel.grid_ptr(), KernelKind::EtaPerturbed, ops[0], ops[1], eta);
}

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(const HemisphereFunction& f) {
    return {f.values.data(), static_cast<Eigen::Index>(f.values.size())};
}

HemisphereFunction from_vector(Hemisphere side, const Eigen::VectorXd& v) {
    return {side, std::vector<double>(v.data(), v.data() + v.size())};
}

}  // namespace

HemisphereFunction apply_K(const BoundaryKernel& kernel, Wall wall, const HemisphereFunction& g_plus) {
    require(g_plus.side == outgoing(wall), "apply_K: input must live on the outgoing hemisphere of the wall");
    require(g_plus.values.size() == kernel.grid().hemisphere_size(), "apply_K: size mismatch");
    return from_vector(incoming(wall), kernel.operator_matrix(wall) * as_vector(g_plus));
}

HemisphereFunction apply_K_adjoint(const BoundaryKernel& kernel, Wall wall, const HemisphereFunction& g_minus) {
    require(g_minus.side == incoming(wall), "apply_K_adjoint: input must live on the incoming hemisphere");
    require(g_minus.values.size() == kernel.grid().hemisphere_size(), "apply_K_adjoint: size mismatch");
    return from_vector(outgoing(wall), kernel.adjoint_matrix(wall) * as_vector(g_minus));
}

SphereFunction apply_mirror(const SphereFunction& f) {
    const SphereGrid& g = f.grid();
    SphereFunction out(f.grid_ptr());
    for (std::size_t i = 0; i < g.size(); ++i) out[g.mirror_index(i)] = f[i];
    return out;
}

HemisphereFunction apply_mirror(const HemisphereFunction& f) {
    // hemisphere-local indices are shared by both halves
    return {opposite(f.side), f.values};
}

HemisphereFunction project_Q(const HemisphereFunction& f, const SphereGrid& grid) {
    Eigen::VectorXd a = flux_weights(grid);
    double mean = as_vector(f).dot(a) / a.sum();
    return {f.side, std::vector<double>(f.values.size(), mean)};
}

HemisphereFunction project_P(const HemisphereFunction& f, const SphereGrid& grid) {
    HemisphereFunction q = project_Q(f, grid);
    for (std::size_t i = 0; i < q.values.size(); ++i) q.values[i] = f.values[i] - q.values[i];
    return q;
}

double flux_inner(const HemisphereFunction& f, const HemisphereFunction& g, const SphereGrid& grid) {
    Eigen::VectorXd a = flux_weights(grid);
    return as_vector(f).cwiseProduct(as_vector(g)).dot(a);
}

KernelReport check_kernel(const BoundaryKernel& kernel, int n_random_trials, std::uint64_t rng_seed) {
    const SphereGrid& grid = kernel.grid();
    const Eigen::VectorXd a = flux_weights(grid);
    const auto h = a.size();
    const Eigen::VectorXd sqrt_a = a.cwiseSqrt();
    const Eigen::VectorXd q = sqrt_a / std::sqrt(a.sum());
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(h, h);
    const Eigen::MatrixXd proj_q = Eigen::VectorXd::Ones(h) * (a.transpose() / a.sum());
    const Eigen::MatrixXd proj_p = id - proj_q;

    // antipode in hemisphere-local indices: (k, m) -> (k, m + n_phi / 2)
    auto antipode = [&](Eigen::Index l) {
        int n = grid.n_phi();
        return (l / n) * n + (l % n + n / 2) % n;
    };

    KernelReport rep;
    rep.dg_min_margin = std::numeric_limits<double>::infinity();
    double algebra[4] = {0, 0, 0, 0};
    Rng rng = make_stream(rng_seed, 0);

    for (Wall w : {Wall::Left, Wall::Right}) {
        const Eigen::MatrixXd& op = kernel.operator_matrix(w);

        // (con): sum_i K_ij a_i = 1, i.e. (a^T A)_j = a_j
        Eigen::VectorXd col_flux = op.transpose() * a;
        for (Eigen::Index j = 0; j < h; ++j)
            rep.flux_defect = std::max(rep.flux_defect, std::abs(col_flux[j] / a[j] - 1.0));
        // (norm): sum_j K_ij a_j = 1, i.e. row sums of A
        Eigen::VectorXd row_sum = op.rowwise().sum();
        rep.norm_defect = std::max(rep.norm_defect, (row_sum.array() - 1.0).abs().maxCoeff());
        // (rec): K(w' -> w) = K(-w -> -w'); compared on the kernel scale a_j K_ij
        for (Eigen::Index i = 0; i < h; ++i)
            for (Eigen::Index j = 0; j < h; ++j) {
                double k_ij = op(i, j) / a[j];
                double k_rev = op(antipode(j), antipode(i)) / a[antipode(i)];
                rep.reciprocity_defect = std::max(rep.reciprocity_defect, std::abs(k_ij - k_rev) * a[j]);
            }

        // Darrozes-Guiraud: ||g||^2 - ||K g||^2 >= 0 in the flux-weighted norm
        for (int t = 0; t < n_random_trials; ++t) {
            Eigen::VectorXd g(h);
            for (Eigen::Index l = 0; l < h; ++l) g[l] = 2.0 * uniform01(rng) - 1.0;
            Eigen::VectorXd kg = op * g;
            double margin = g.cwiseProduct(g).dot(a) - kg.cwiseProduct(kg).dot(a);
            rep.dg_min_margin = std::min(rep.dg_min_margin, margin);
        }
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(h);
        Eigen::VectorXd kone = op * ones;
        rep.dg_constant_defect =
            std::max(rep.dg_constant_defect, std::abs(a.sum() - kone.cwiseProduct(kone).dot(a)));

        // weighted (orthonormal) representation of K
        Eigen::MatrixXd khat = sqrt_a.asDiagonal() * op * sqrt_a.cwiseInverse().asDiagonal();
        Eigen::MatrixXd kp = khat * (id - q * q.transpose());
        Eigen::JacobiSVD<Eigen::MatrixXd> svd_kp(kp);
        rep.k0 = std::max(rep.k0, svd_kp.singularValues()[0]);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd_k(khat);
        rep.operator_norm = std::max(rep.operator_norm, svd_k.singularValues()[0]);

        // I - J K*, with J the identity on local indices and K* = khat^T
        Eigen::JacobiSVD<Eigen::MatrixXd> svd_null(id - khat.transpose());
        int nd = static_cast<int>((svd_null.singularValues().array() < kNullTolerance).count());
        (w == Wall::Left ? rep.null_dim_left : rep.null_dim_right) = nd;

        // K Q+ = Q- K = J Q+ and K P+ = P- K
        algebra[0] = std::max(algebra[0], (op * proj_q - proj_q * op).cwiseAbs().maxCoeff());
        algebra[1] = std::max(algebra[1], (proj_q * op - proj_q).cwiseAbs().maxCoeff());
        algebra[2] = std::max(algebra[2], (op * proj_q - proj_q).cwiseAbs().maxCoeff());
        algebra[3] = std::max(algebra[3], (op * proj_p - proj_p * op).cwiseAbs().maxCoeff());
    }
    if (n_random_trials <= 0) rep.dg_min_margin = 0;
    rep.null_dim = std::max(rep.null_dim_left, rep.null_dim_right);
    rep.algebra_defects = {{"KQ_minus_QK", algebra[0]},
                           {"QK_minus_JQ", algebra[1]},
                           {"KQ_minus_JQ", algebra[2]},
                           {"KP_minus_PK", algebra[3]}};
    return rep;
}

}  // namespace shelab

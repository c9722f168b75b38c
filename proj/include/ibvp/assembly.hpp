#pragma once
// Galerkin assembly of the local energy form on piecewise-linear elements:
// diffusion, the two drift terms, zero-order interior and boundary terms,
// mass matrices, measured embedding constants, the coercivity shift and the
// discrete weak-coercivity certificate.

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "coefficients.hpp"
#include "core.hpp"
#include "geometry.hpp"
#include "linalg.hpp"
#include "measure.hpp"
#include "norms.hpp"

namespace ibvp {

namespace detail_asm {

/// 6-point degree-4 triangle rule (barycentric, weights summing to 1).
inline const std::vector<detail_norms::TriPoint>& tri6() {
    static const std::vector<detail_norms::TriPoint> rule = [] {
        const double a1 = 0.108103018168070, b1 = 0.445948490915965, w1 = 0.223381589678011;
        const double a2 = 0.816847572980459, b2 = 0.091576213509771, w2 = 0.109951743655322;
        return std::vector<detail_norms::TriPoint>{{a1, b1, w1}, {b1, a1, w1}, {b1, b1, w1},
                                                   {a2, b2, w2}, {b2, a2, w2}, {b2, b2, w2}};
    }();
    return rule;
}

/// Constant gradients of the three P1 basis functions on a triangle.
inline std::array<Vec2, 3> p1_gradients(const Vec2& a, const Vec2& b, const Vec2& c,
                                        double area) {
    double inv = 1.0 / (2.0 * area);
    return {Vec2{(b.y - c.y) * inv, (c.x - b.x) * inv},
            Vec2{(c.y - a.y) * inv, (a.x - c.x) * inv},
            Vec2{(a.y - b.y) * inv, (b.x - a.x) * inv}};
}

}  // namespace detail_asm

struct InteriorForms {
    SparseOperator stiffness_alpha;
    SparseOperator convection_ahat;    // integral of (a_hat . grad v) u
    SparseOperator convection_acheck;  // integral of (a_check . grad u) v
    SparseOperator reaction_lambda;
};

/// Assembles the four interior operators of the local form.  Row index is the
/// test function v, column index the trial function u.
inline InteriorForms assemble_interior(const Mesh& mesh, const Coefficients& coeffs) {
    coeffs.validate();
    const int n = static_cast<int>(mesh.n_nodes());
    InteriorForms f;
    for (auto* op : {&f.stiffness_alpha, &f.convection_ahat, &f.convection_acheck,
                     &f.reaction_lambda})
        op->dimension = n;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tr = mesh.triangles[t];
        const Vec2 &a = mesh.nodes[tr[0]], &b = mesh.nodes[tr[1]], &c = mesh.nodes[tr[2]];
        double area = mesh.triangle_area(t);
        auto grad = detail_asm::p1_gradients(a, b, c, area);
        for (const auto& q : detail_asm::tri6()) {
            double bary[3] = {q.b1, q.b2, 1.0 - q.b1 - q.b2};
            Vec2 p = bary[0] * a + bary[1] * b + bary[2] * c;
            double w = area * q.w;
            double a11 = eval_coefficient(coeffs.alpha11, p.x, p.y);
            double a12 = eval_coefficient(coeffs.alpha12, p.x, p.y);
            double a21 = eval_coefficient(coeffs.alpha21, p.x, p.y);
            double a22 = eval_coefficient(coeffs.alpha22, p.x, p.y);
            double ah1 = eval_coefficient(coeffs.a_hat1, p.x, p.y);
            double ah2 = eval_coefficient(coeffs.a_hat2, p.x, p.y);
            double ac1 = eval_coefficient(coeffs.a_check1, p.x, p.y);
            double ac2 = eval_coefficient(coeffs.a_check2, p.x, p.y);
            double lam = eval_coefficient(coeffs.lambda, p.x, p.y);
            for (int i = 0; i < 3; ++i) {      // test v
                for (int j = 0; j < 3; ++j) {  // trial u
                    // sum_k (sum_l alpha_kl d_l u) d_k v
                    double diff = grad[i].x * (a11 * grad[j].x + a12 * grad[j].y) +
                                  grad[i].y * (a21 * grad[j].x + a22 * grad[j].y);
                    f.stiffness_alpha.add(tr[i], tr[j], w * diff);
                    // sum_k a_hat_k u d_k v : u at quadrature, gradient on v
                    double hat = (ah1 * grad[i].x + ah2 * grad[i].y) * bary[j];
                    if (hat != 0.0) f.convection_ahat.add(tr[i], tr[j], w * hat);
                    // sum_k a_check_k d_k u v
                    double chk = (ac1 * grad[j].x + ac2 * grad[j].y) * bary[i];
                    if (chk != 0.0) f.convection_acheck.add(tr[i], tr[j], w * chk);
                    if (lam != 0.0)
                        f.reaction_lambda.add(tr[i], tr[j], w * lam * bary[i] * bary[j]);
                }
            }
        }
    }
    for (auto* op : {&f.stiffness_alpha, &f.convection_ahat, &f.convection_acheck,
                     &f.reaction_lambda})
        op->compress();
    return f;
}

/// Plain Laplace stiffness (alpha = identity), used for norm Grams and
/// embedding measurements.
inline SparseOperator laplace_stiffness(const Mesh& mesh) {
    SparseOperator k;
    k.dimension = static_cast<int>(mesh.n_nodes());
    k.symmetric_flag = true;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tr = mesh.triangles[t];
        double area = mesh.triangle_area(t);
        auto grad = detail_asm::p1_gradients(mesh.nodes[tr[0]], mesh.nodes[tr[1]],
                                             mesh.nodes[tr[2]], area);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) k.add(tr[i], tr[j], area * grad[i].dot(grad[j]));
    }
    k.compress();
    return k;
}

/// Boundary zero-order operator: integral of beta u v dmu over the mesh
/// boundary (measure at mesh-edge resolution).  Lumped variant moves each
/// element's mass onto the diagonal.
inline SparseOperator assemble_boundary_beta(const Mesh& mesh, const BoundaryMeasure& mu,
                                             const ExprPtr& beta, bool lumped = true) {
    if (mu.edge_weights.size() != mesh.boundary_edges.size())
        throw validation_error("assemble_boundary_beta: measure does not match mesh boundary");
    SparseOperator m;
    m.dimension = static_cast<int>(mesh.n_nodes());
    m.symmetric_flag = true;
    if (!beta) return m;
    for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
        const auto& be = mesh.boundary_edges[e];
        for (const auto& g : detail_norms::gauss3()) {
            Vec2 p = (1.0 - g.t) * mesh.nodes[be.a] + g.t * mesh.nodes[be.b];
            double bv = eval_coefficient(beta, p.x, p.y);
            if (bv == 0.0) continue;
            double w = mu.edge_weights[e] * g.w * bv;
            double phi[2] = {1.0 - g.t, g.t};
            int idx[2] = {be.a, be.b};
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    m.add(idx[i], lumped ? idx[i] : idx[j], w * phi[i] * phi[j]);
        }
    }
    m.compress();
    return m;
}

/// Interior and boundary mass matrices; sums equal |Omega| and mu(Gamma).
inline std::pair<SparseOperator, SparseOperator> mass_matrices(const Mesh& mesh,
                                                               const BoundaryMeasure& mu,
                                                               bool lumped = true) {
    SparseOperator mi;
    mi.dimension = static_cast<int>(mesh.n_nodes());
    mi.symmetric_flag = true;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tr = mesh.triangles[t];
        double area = mesh.triangle_area(t);
        if (lumped) {
            for (int i = 0; i < 3; ++i) mi.add(tr[i], tr[i], area / 3.0);
        } else {
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    mi.add(tr[i], tr[j], area * (i == j ? 1.0 / 6.0 : 1.0 / 12.0));
        }
    }
    mi.compress();

    if (mu.edge_weights.size() != mesh.boundary_edges.size())
        throw validation_error("mass_matrices: measure does not match mesh boundary");
    SparseOperator mb;
    mb.dimension = static_cast<int>(mesh.n_nodes());
    mb.symmetric_flag = true;
    for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
        const auto& be = mesh.boundary_edges[e];
        double w = mu.edge_weights[e];
        if (lumped) {
            mb.add(be.a, be.a, 0.5 * w);
            mb.add(be.b, be.b, 0.5 * w);
        } else {
            mb.add(be.a, be.a, w / 3.0);
            mb.add(be.b, be.b, w / 3.0);
            mb.add(be.a, be.b, w / 6.0);
            mb.add(be.b, be.a, w / 6.0);
        }
    }
    mb.compress();
    return {mi, mb};
}

// ---------------------------------------------------------------------------
// Measured embedding constants and the coercivity shift
// ---------------------------------------------------------------------------

/// Candidate-vector context for measuring discrete embedding constants
/// C_eps = max_v (||v||_rho^2 - eps |grad v|_2^2) / ||v||_2^2 on the mesh.
struct EmbeddingContext {
    const Mesh* mesh = nullptr;
    BoundaryMeasure mu;  // mesh-resolution boundary measure
    SparseOperator stiffness;  // Laplace
    SparseOperator mass;       // interior (lumped)
    std::vector<std::vector<double>> candidates;
};

inline EmbeddingContext make_embedding_context(const Mesh& mesh, const BoundaryMeasure& mu,
                                               int n_eigen = 6, int n_random = 5,
                                               std::uint64_t seed = 99) {
    EmbeddingContext ctx;
    ctx.mesh = &mesh;
    ctx.mu = mu;
    ctx.stiffness = laplace_stiffness(mesh);
    ctx.mass = mass_matrices(mesh, mu).first;
    const std::size_t n = mesh.n_nodes();
    auto add_fn = [&](auto&& f) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = f(mesh.nodes[i].x, mesh.nodes[i].y);
        ctx.candidates.push_back(std::move(v));
    };
    add_fn([](double, double) { return 1.0; });
    add_fn([](double x, double) { return x; });
    add_fn([](double, double y) { return y; });
    add_fn([](double x, double y) { return x * x - y * y; });
    add_fn([](double x, double y) { return x * y; });
    add_fn([](double x, double y) { return std::sin(kPi * x) * std::cos(kPi * y); });
    Rng rng(seed);
    for (int k = 0; k < n_random; ++k) ctx.candidates.push_back(rng.normal_vector(n));
    // Low modes of the Laplace pencil: natural extremizers of the trade-off
    // between gradient and Lebesgue norms.
    if (n_eigen > 0 && n <= 4000) {
        Eigen::MatrixXd K = ctx.stiffness.to_dense_eigen();
        Eigen::MatrixXd M = ctx.mass.to_dense_eigen();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
        if (es.info() == Eigen::Success) {
            int take = std::min<int>(n_eigen, static_cast<int>(n));
            for (int k = 0; k < take; ++k) {
                std::vector<double> v(n);
                for (std::size_t i = 0; i < n; ++i) v[i] = es.eigenvectors()(i, k);
                ctx.candidates.push_back(std::move(v));
            }
        }
    }
    return ctx;
}

/// Measured constant in ||v||_{rho}^2 <= eps |grad v|^2 + C ||v||_2^2; with
/// boundary = true the left side is the trace norm ||v||_{rho, Gamma, mu}^2.
inline double measured_embedding_constant(const EmbeddingContext& ctx, double rho, double eps,
                                          bool boundary = false) {
    double best = 0.0;
    for (const auto& v : ctx.candidates) {
        double l2sq = ctx.mass.form(v, v);
        if (l2sq <= 1e-300) continue;
        double grad = ctx.stiffness.form(v, v);
        double lr = boundary ? lq_norm_boundary(*ctx.mesh, v, ctx.mu, rho)
                             : lp_norm_interior(*ctx.mesh, v, rho);
        best = std::max(best, (lr * lr - eps * grad) / l2sq);
    }
    return best;
}

/// Conjugate Lebesgue exponents entering the embedding inequalities for each
/// coefficient slot (N = 2): drift terms pair against L^{2r/(r-2)}, the
/// zero-order terms against L^{2r/(r-1)}-type exponents.
inline double drift_pair_exponent(double r) { return r > 2.0 ? 2.0 * r / (r - 2.0) : 8.0; }
inline double zero_order_pair_exponent(double r) { return 2.0 * r / (r - 1.0); }

struct ShiftReport {
    double delta_star = 0.0;
    double c0 = 0.0;
    std::optional<double> c0_star;  // Wentzell weak-coercivity constant
    double min_c = 0.0;
    double norm_ahat = 0.0, norm_acheck = 0.0, norm_lambda = 0.0, norm_beta = 0.0;
    double gamma0 = 0.0;
    double eps1 = 0.0, eps2 = 0.0, eps3 = 0.0, eps4 = 0.0, eps5 = 0.0;
    double C1 = 0.0, C2 = 0.0, C3 = 0.0, C4 = 0.0, C5 = 0.0;
};

/// Evaluates the shift
///   delta*_0 = c0 + 20 (C_{eps1^2} |a_hat|_{r1}^2 + C_{eps2^2} |a_check|_{r2}^2) / min{c0, c*0}
///              + C_{eps3} |lambda|_{r3} + C_{eps4} |beta|_s + C_{eps5} |gamma0|
/// with eps1 = min/(20 |a_hat|), eps2 = min/(20 |a_check|), eps3 = min/(10 |lambda|),
/// eps4 = min/(10 |beta|), eps5 = min/(10 |gamma0|), and all C's measured on
/// the mesh.  Vanishing coefficients contribute nothing.
inline ShiftReport compute_shift(const EmbeddingContext& ctx, const Coefficients& coeffs,
                                 double c0, std::optional<double> c0_star, double gamma0) {
    ShiftReport r;
    r.c0 = c0;
    r.c0_star = c0_star;
    r.min_c = c0_star ? std::min(c0, *c0_star) : c0;
    if (!(r.min_c > 0.0)) throw validation_error("compute_shift: nonpositive coercivity floor");
    const Mesh& mesh = *ctx.mesh;

    auto vec_norm = [&](const ExprPtr& f1, const ExprPtr& f2, double expo) {
        double n1 = integrability_report(mesh, f1, expo).norm;
        double n2 = integrability_report(mesh, f2, expo).norm;
        return std::sqrt(n1 * n1 + n2 * n2);
    };
    r.norm_ahat = vec_norm(coeffs.a_hat1, coeffs.a_hat2, coeffs.has_drift_hat() ? coeffs.r1 : 2.0);
    r.norm_acheck =
        vec_norm(coeffs.a_check1, coeffs.a_check2, coeffs.has_drift_check() ? coeffs.r2 : 2.0);
    r.norm_lambda = coeffs.lambda ? integrability_report(mesh, coeffs.lambda, coeffs.r3).norm : 0.0;
    r.norm_beta =
        coeffs.beta ? integrability_report_boundary(mesh, ctx.mu, coeffs.beta, coeffs.s).norm : 0.0;
    r.gamma0 = gamma0;

    double delta = c0;
    if (r.norm_ahat > 0.0) {
        r.eps1 = r.min_c / (20.0 * r.norm_ahat);
        r.C1 = measured_embedding_constant(ctx, drift_pair_exponent(coeffs.r1), r.eps1 * r.eps1);
        delta += 20.0 * r.C1 * r.norm_ahat * r.norm_ahat / r.min_c;
    }
    if (r.norm_acheck > 0.0) {
        r.eps2 = r.min_c / (20.0 * r.norm_acheck);
        r.C2 = measured_embedding_constant(ctx, drift_pair_exponent(coeffs.r2), r.eps2 * r.eps2);
        delta += 20.0 * r.C2 * r.norm_acheck * r.norm_acheck / r.min_c;
    }
    if (r.norm_lambda > 0.0) {
        r.eps3 = r.min_c / (10.0 * r.norm_lambda);
        r.C3 = measured_embedding_constant(ctx, zero_order_pair_exponent(coeffs.r3), r.eps3);
        delta += r.C3 * r.norm_lambda;
    }
    if (r.norm_beta > 0.0) {
        r.eps4 = r.min_c / (10.0 * r.norm_beta);
        r.C4 = measured_embedding_constant(ctx, zero_order_pair_exponent(coeffs.s), r.eps4, true);
        delta += r.C4 * r.norm_beta;
    }
    if (gamma0 > 0.0) {
        r.eps5 = r.min_c / (10.0 * gamma0);
        r.C5 = measured_embedding_constant(ctx, 2.0, r.eps5, true);
        delta += r.C5 * std::fabs(gamma0);
    }
    r.delta_star = delta;
    return r;
}

// ---------------------------------------------------------------------------
// Form bundle and the weak-coercivity certificate
// ---------------------------------------------------------------------------

struct FormBundle {
    int dimension = 0;
    SparseOperator stiffness_alpha;
    SparseOperator convection_ahat;
    SparseOperator convection_acheck;
    SparseOperator reaction_lambda;
    SparseOperator boundary_beta;
    std::optional<SparseOperator> wentzell_part;
    std::optional<DenseOperator> nonlocal_part;
    SparseOperator mass_interior;
    SparseOperator mass_boundary;
    double shift = 0.0;  // delta*_0

    /// Value of the full energy form E(u, v).
    double energy(const std::vector<double>& u, const std::vector<double>& v) const {
        double s = stiffness_alpha.form(u, v) + convection_ahat.form(u, v) +
                   convection_acheck.form(u, v) + reaction_lambda.form(u, v) +
                   boundary_beta.form(u, v);
        if (wentzell_part) s += wentzell_part->form(u, v);
        if (nonlocal_part) s += nonlocal_part->form(u, v);
        return s;
    }

    Eigen::MatrixXd dense_total() const {
        Eigen::MatrixXd e = stiffness_alpha.to_dense_eigen();
        e += convection_ahat.to_dense_eigen();
        e += convection_acheck.to_dense_eigen();
        e += reaction_lambda.to_dense_eigen();
        e += boundary_beta.to_dense_eigen();
        if (wentzell_part) e += wentzell_part->to_dense_eigen();
        if (nonlocal_part) e += nonlocal_part->to_eigen();
        return e;
    }

    /// System matrix of the stationary problem (sparse parts only; callers
    /// with a nonlocal part fold it in densely).
    SparseOperator sparse_total() const {
        SparseOperator s = stiffness_alpha;
        s.axpy(1.0, convection_ahat);
        s.axpy(1.0, convection_acheck);
        s.axpy(1.0, reaction_lambda);
        s.axpy(1.0, boundary_beta);
        if (wentzell_part) s.axpy(1.0, *wentzell_part);
        return s;
    }
};

struct CoercivityReport {
    double kappa = 0.0;
    bool passed = false;
    double shift_used = 0.0;
};

/// kappa = min over the discrete space of
///   [E_sym(v,v) + shift (v,v)_Omega] / ||v||_W^2,
/// the smallest eigenvalue of the generalized symmetric problem against the
/// W-norm Gram (gradient + interior mass, plus boundary terms in regime (W)).
inline CoercivityReport coercivity_certificate(const FormBundle& bundle,
                                               const Eigen::MatrixXd& w_gram) {
    Eigen::MatrixXd e = bundle.dense_total();
    Eigen::MatrixXd esym = 0.5 * (e + e.transpose());
    esym += bundle.shift * bundle.mass_interior.to_dense_eigen();
    CoercivityReport rep;
    rep.shift_used = bundle.shift;
    rep.kappa = smallest_generalized_eigenvalue(esym, w_gram);
    // Floor against eigenvalue roundoff: a singular pencil can report a tiny
    // positive minimum.
    rep.passed = rep.kappa > 1e-10;
    return rep;
}

/// W-norm Gram for the two boundary regimes: gradient + interior mass, plus
/// (in regime (W)) boundary mass and the Wentzell matrix.
inline Eigen::MatrixXd w_norm_gram(const Mesh& mesh, const FormBundle& bundle,
                                   bool wentzell_regime) {
    Eigen::MatrixXd g = laplace_stiffness(mesh).to_dense_eigen();
    g += bundle.mass_interior.to_dense_eigen();
    if (wentzell_regime) {
        g += bundle.mass_boundary.to_dense_eigen();
        if (bundle.wentzell_part) {
            Eigen::MatrixXd wz = bundle.wentzell_part->to_dense_eigen();
            g += 0.5 * (wz + wz.transpose());
        }
    }
    return g;
}

}  // namespace ibvp

#pragma once
// Coefficient bundle of the interior operator and boundary forms: expression
// handles, integrability-exponent declarations, ellipticity measurement and
// discrete L^r coefficient norms (with capping of integrable singularities).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "expr.hpp"
#include "geometry.hpp"
#include "norms.hpp"

namespace ibvp {

/// Cap applied to coefficient samples; unbounded-but-integrable coefficients
/// keep finite quadrature sums and the cap events are counted.
constexpr double kCoefficientCap = 1e12;

/// Wentzell boundary-form selection.
enum class WentzellKind { none, riemannian, koch_graph };

struct WentzellSpec {
    WentzellKind kind = WentzellKind::none;
    ExprPtr omega;    // Riemannian: tangential diffusion (scalar, N-1 = 1)
    ExprPtr b_hat;    // Riemannian drift terms
    ExprPtr b_check;
    double rho = 4.0;  // Koch graph renormalization
};

struct Coefficients {
    // Interior operator.
    ExprPtr alpha11, alpha12, alpha21, alpha22;
    ExprPtr a_hat1, a_hat2;    // divergence-part drift, exponent r1
    ExprPtr a_check1, a_check2;  // gradient-part drift, exponent r2
    ExprPtr lambda;            // zero-order term, exponent r3
    // Boundary forms.
    ExprPtr beta;              // boundary zero-order term, exponent s
    ExprPtr gamma;             // optional conductivity for the DtN operator
    ExprPtr kernel_a;          // optional interior nonlocal kernel amplitude
    ExprPtr kernel_b;          // optional boundary nonlocal kernel amplitude
    WentzellSpec wentzell;
    // Declared integrability exponents.
    double r1 = kInf, r2 = kInf, r3 = kInf, s = kInf;

    static Coefficients identity_laplace() {
        Coefficients c;
        c.alpha11 = parse_expr("1");
        c.alpha12 = parse_expr("0");
        c.alpha21 = parse_expr("0");
        c.alpha22 = parse_expr("1");
        return c;
    }

    bool has_drift_hat() const { return static_cast<bool>(a_hat1) || static_cast<bool>(a_hat2); }
    bool has_drift_check() const {
        return static_cast<bool>(a_check1) || static_cast<bool>(a_check2);
    }

    /// Validates exponent declarations for N = 2 (all drift exponents > 1,
    /// r3 > 1, boundary exponent s > d/(d+2-N) = 1).
    void validate() const {
        if (!alpha11 || !alpha12 || !alpha21 || !alpha22)
            throw validation_error("coefficients: diffusion matrix alpha is required");
        if (has_drift_hat() && !(r1 > 1.0))
            throw validation_error("coefficients: exponent r1 must be > 1 for N = 2");
        if (has_drift_check() && !(r2 > 1.0))
            throw validation_error("coefficients: exponent r2 must be > 1 for N = 2");
        if (lambda && !(r3 > 1.0)) throw validation_error("coefficients: exponent r3 must be > 1");
        if (beta && !(s > 1.0))
            throw validation_error("coefficients: boundary exponent s must be > 1");
        if (wentzell.kind == WentzellKind::riemannian && !wentzell.omega)
            throw validation_error("coefficients: Riemannian boundary form needs omega");
        if (wentzell.kind == WentzellKind::koch_graph && !(wentzell.rho > 1.0))
            throw validation_error("coefficients: graph renormalization rho must be > 1");
    }
};

/// Capped sample of an optional coefficient expression (absent -> 0).
inline double eval_coefficient(const ExprPtr& e, double x, double y, int* capped = nullptr,
                               int* nonfinite = nullptr) {
    if (!e) return 0.0;
    double v = eval_expr(e, x, y);
    if (!std::isfinite(v)) {
        if (nonfinite) ++*nonfinite;
        return 0.0;
    }
    if (std::fabs(v) > kCoefficientCap) {
        if (capped) ++*capped;
        return v > 0.0 ? kCoefficientCap : -kCoefficientCap;
    }
    return v;
}

/// Smallest Rayleigh quotient xi^T alpha(x) xi / |xi|^2 over the sample
/// points and unit directions; throws when the estimate is nonpositive.
inline double ellipticity_constant(const Coefficients& coeffs, const std::vector<Vec2>& samples,
                                   int n_directions = 16) {
    if (samples.empty()) throw validation_error("ellipticity_constant: no sample points");
    double c0 = kInf;
    for (const auto& p : samples) {
        double a11 = eval_coefficient(coeffs.alpha11, p.x, p.y);
        double a12 = eval_coefficient(coeffs.alpha12, p.x, p.y);
        double a21 = eval_coefficient(coeffs.alpha21, p.x, p.y);
        double a22 = eval_coefficient(coeffs.alpha22, p.x, p.y);
        for (int k = 0; k < n_directions; ++k) {
            double th = kPi * k / n_directions;  // xi and -xi give equal quotients
            double cx = std::cos(th), cy = std::sin(th);
            double q = a11 * cx * cx + (a12 + a21) * cx * cy + a22 * cy * cy;
            c0 = std::min(c0, q);
        }
    }
    if (!(c0 > 0.0))
        throw validation_error("ellipticity_constant: estimate " + fmt17(c0) +
                               " is nonpositive; operator rejected");
    return c0;
}

/// Quadrature nodes of the mesh (degree-5 triangle rule points), the default
/// ellipticity sample set.
inline std::vector<Vec2> quadrature_samples(const Mesh& mesh) {
    std::vector<Vec2> pts;
    pts.reserve(mesh.triangles.size() * 7);
    for (const auto& tr : mesh.triangles) {
        const Vec2 &a = mesh.nodes[tr[0]], &b = mesh.nodes[tr[1]], &c = mesh.nodes[tr[2]];
        for (const auto& q : detail_norms::tri7()) {
            double b3 = 1.0 - q.b1 - q.b2;
            pts.push_back(q.b1 * a + q.b2 * b + b3 * c);
        }
    }
    return pts;
}

struct IntegrabilityReport {
    double norm = 0.0;
    int capped_count = 0;
    int nonfinite_count = 0;
};

/// Discrete L^exponent norm of a coefficient expression over the mesh, with
/// singular samples capped (counted, not fatal).
inline IntegrabilityReport integrability_report(const Mesh& mesh, const ExprPtr& field,
                                                double exponent) {
    if (exponent < 1.0) throw validation_error("integrability_report: exponent must be >= 1");
    IntegrabilityReport rep;
    if (!field) return rep;
    if (exponent == kInf) {
        for (const auto& p : quadrature_samples(mesh))
            rep.norm = std::max(
                rep.norm,
                std::fabs(eval_coefficient(field, p.x, p.y, &rep.capped_count,
                                           &rep.nonfinite_count)));
        return rep;
    }
    double acc = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tr = mesh.triangles[t];
        const Vec2 &a = mesh.nodes[tr[0]], &b = mesh.nodes[tr[1]], &c = mesh.nodes[tr[2]];
        double area = mesh.triangle_area(t);
        for (const auto& q : detail_norms::tri7()) {
            double b3 = 1.0 - q.b1 - q.b2;
            Vec2 p = q.b1 * a + q.b2 * b + b3 * c;
            double v = eval_coefficient(field, p.x, p.y, &rep.capped_count, &rep.nonfinite_count);
            acc += area * q.w * std::pow(std::fabs(v), exponent);
        }
    }
    rep.norm = std::pow(acc, 1.0 / exponent);
    return rep;
}

/// Boundary analogue against a boundary measure (for beta and gamma).
inline IntegrabilityReport integrability_report_boundary(const Mesh& mesh,
                                                         const BoundaryMeasure& mu,
                                                         const ExprPtr& field, double exponent) {
    if (exponent < 1.0)
        throw validation_error("integrability_report_boundary: exponent must be >= 1");
    IntegrabilityReport rep;
    if (!field) return rep;
    double acc = 0.0;
    for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
        const auto& be = mesh.boundary_edges[e];
        for (const auto& g : detail_norms::gauss3()) {
            Vec2 p = (1.0 - g.t) * mesh.nodes[be.a] + g.t * mesh.nodes[be.b];
            double v = eval_coefficient(field, p.x, p.y, &rep.capped_count, &rep.nonfinite_count);
            if (exponent == kInf)
                rep.norm = std::max(rep.norm, std::fabs(v));
            else
                acc += mu.edge_weights[e] * g.w * std::pow(std::fabs(v), exponent);
        }
    }
    if (exponent != kInf) rep.norm = std::pow(acc, 1.0 / exponent);
    return rep;
}

/// Essential infimum surrogate of the DtN conductivity over boundary
/// quadrature samples; must be positive when gamma is present.
inline double gamma_lower_bound(const Mesh& mesh, const ExprPtr& gamma) {
    if (!gamma) return 0.0;
    double g0 = kInf;
    for (const auto& be : mesh.boundary_edges) {
        for (const auto& g : detail_norms::gauss3()) {
            Vec2 p = (1.0 - g.t) * mesh.nodes[be.a] + g.t * mesh.nodes[be.b];
            g0 = std::min(g0, eval_expr(gamma, p.x, p.y));
        }
    }
    if (!(g0 > 0.0))
        throw validation_error("gamma_lower_bound: conductivity infimum " + fmt17(g0) +
                               " is not positive");
    return g0;
}

}  // namespace ibvp

#pragma once
// Boundary (Wentzell) energy forms: the tangential Riemannian form on a
// closed polygonal boundary and the renormalized Koch graph energy, plus the
// lattice/positivity condition checks and measured boundary constants.

#include <cmath>
#include <optional>
#include <vector>

#include "assembly.hpp"
#include "core.hpp"
#include "geometry.hpp"
#include "linalg.hpp"
#include "measure.hpp"

namespace ibvp {

struct WentzellForm {
    enum class Kind { riemannian, koch_graph };
    Kind kind = Kind::riemannian;
    SparseOperator matrix;  // full DOF numbering; nonzero only on boundary nodes
    double rho = 0.0;       // graph renormalization (koch_graph only)
    int level = 0;
    /// Nodes carrying boundary-form DOFs (graph vertices or all boundary
    /// nodes).
    std::vector<int> active_nodes;
};

/// Tangential 1-D finite-element form along the closed boundary loop:
/// integral of (omega u' + b_hat u) v' + b_check u' v dmu, with ' the
/// arclength derivative.  omega must be positive at every sample.
inline WentzellForm assemble_riemannian(const Mesh& mesh, const BoundaryMeasure& mu,
                                        const ExprPtr& omega, const ExprPtr& b_hat,
                                        const ExprPtr& b_check) {
    if (!omega) throw validation_error("assemble_riemannian: omega is required");
    if (mu.edge_weights.size() != mesh.boundary_edges.size())
        throw validation_error("assemble_riemannian: measure does not match mesh boundary");
    WentzellForm form;
    form.kind = WentzellForm::Kind::riemannian;
    form.matrix.dimension = static_cast<int>(mesh.n_nodes());
    form.active_nodes = mesh.boundary_loop;
    for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
        const auto& be = mesh.boundary_edges[e];
        double len = (mesh.nodes[be.b] - mesh.nodes[be.a]).norm();
        double w = mu.edge_weights[e];
        int idx[2] = {be.a, be.b};
        double dphi[2] = {-1.0 / len, 1.0 / len};  // arclength derivative of P1 basis
        for (const auto& g : detail_norms::gauss3()) {
            Vec2 p = (1.0 - g.t) * mesh.nodes[be.a] + g.t * mesh.nodes[be.b];
            double om = eval_expr(omega, p.x, p.y);
            if (!(om > 0.0))
                throw validation_error("assemble_riemannian: omega is nonpositive at (" +
                                       fmt17(p.x) + ", " + fmt17(p.y) + ")");
            double bh = b_hat ? eval_coefficient(b_hat, p.x, p.y) : 0.0;
            double bc = b_check ? eval_coefficient(b_check, p.x, p.y) : 0.0;
            double phi[2] = {1.0 - g.t, g.t};
            for (int i = 0; i < 2; ++i) {      // test v
                for (int j = 0; j < 2; ++j) {  // trial u
                    double val = om * dphi[j] * dphi[i]     // omega u' v'
                                 + bh * phi[j] * dphi[i]    // b_hat u v'
                                 + bc * dphi[j] * phi[i];   // b_check u' v
                    form.matrix.add(idx[i], idx[j], w * g.w * val);
                }
            }
        }
    }
    form.matrix.compress();
    return form;
}

/// Renormalized graph energy rho^level * sum over graph edges (u(p)-u(q))^2
/// on an explicit vertex chain; `closed` ties the last vertex to the first.
inline SparseOperator graph_energy_matrix(int dimension, const std::vector<int>& chain,
                                          double rho, int level, bool closed) {
    SparseOperator m;
    m.dimension = dimension;
    m.symmetric_flag = true;
    double c = std::pow(rho, level);
    std::size_t n = chain.size();
    std::size_t nedges = closed ? n : n - 1;
    for (std::size_t e = 0; e < nedges; ++e) {
        int p = chain[e], q = chain[(e + 1) % n];
        m.add(p, p, c);
        m.add(q, q, c);
        m.add(p, q, -c);
        m.add(q, p, -c);
    }
    m.compress();
    return m;
}

/// Koch graph energy on a standalone prefractal curve (DOFs = curve
/// vertices).
inline WentzellForm assemble_koch_energy(const PrefractalCurve& curve, int level,
                                         double rho = 4.0) {
    if (curve.level != level)
        throw validation_error("assemble_koch_energy: curve level mismatch");
    if (!(rho > 1.0)) throw validation_error("assemble_koch_energy: rho must be > 1");
    WentzellForm form;
    form.kind = WentzellForm::Kind::koch_graph;
    form.rho = rho;
    form.level = level;
    std::vector<int> chain(curve.vertices.size());
    for (std::size_t i = 0; i < chain.size(); ++i) chain[i] = static_cast<int>(i);
    form.active_nodes = chain;
    form.matrix = graph_energy_matrix(static_cast<int>(curve.vertices.size()), chain, rho, level,
                                      /*closed=*/false);
    return form;
}

/// Koch graph energy on the boundary of a meshed prefractal domain.  The
/// graph vertices are the polygon (cell) endpoints, snapped to mesh boundary
/// nodes via the parent-edge bookkeeping; the loop closes around the domain.
inline WentzellForm assemble_koch_energy(const PolygonalDomain& domain, const Mesh& mesh,
                                         double rho = 4.0) {
    if (!(rho > 1.0)) throw validation_error("assemble_koch_energy: rho must be > 1");
    // First mesh boundary node of each polygon edge = that edge's start
    // vertex.
    std::vector<int> start_node(domain.edge_count(), -1);
    for (const auto& be : mesh.boundary_edges)
        if (start_node[be.parent_edge] < 0) start_node[be.parent_edge] = be.a;
    WentzellForm form;
    form.kind = WentzellForm::Kind::koch_graph;
    form.rho = rho;
    form.level = domain.level;
    for (std::size_t e = 0; e < domain.edge_count(); ++e) {
        if (start_node[e] < 0)
            throw numeric_error("assemble_koch_energy: polygon edge missing from mesh boundary");
        form.active_nodes.push_back(start_node[e]);
    }
    form.matrix = graph_energy_matrix(static_cast<int>(mesh.n_nodes()), form.active_nodes, rho,
                                      domain.level, /*closed=*/true);
    return form;
}

/// Effective conductance between the two endpoints of an open chain form:
/// pins u = 0 and u = 1 at the ends, minimizes the energy over interior
/// vertices and returns the minimum (the chain-resistance diagnostic).
inline double chain_effective_energy(const WentzellForm& form, int node0, int node1) {
    const int n = form.matrix.dimension;
    Eigen::MatrixXd a = form.matrix.to_dense_eigen();
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i)
        if (i != node0 && i != node1) free_idx.push_back(i);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    u[node1] = 1.0;
    const int nf = static_cast<int>(free_idx.size());
    Eigen::MatrixXd aff(nf, nf);
    Eigen::VectorXd rhs(nf);
    for (int i = 0; i < nf; ++i) {
        for (int j = 0; j < nf; ++j) aff(i, j) = a(free_idx[i], free_idx[j]);
        rhs[i] = -a(free_idx[i], node1);
    }
    Eigen::VectorXd uf = aff.ldlt().solve(rhs);
    for (int i = 0; i < nf; ++i) u[free_idx[i]] = uf[i];
    return u.dot(a * u);
}

struct BConditionReport {
    int trials = 0;
    double max_b3_violation = 0.0;       // max positive part of Lambda(u+, u-)
    double max_b4_violation = 0.0;       // max of c1*L(uk,uk)+c2|uk|_D^2-c3*rho-term - L(u,uk)
    double c_star_1 = 1.0, c_star_2 = 0.0, c_star_3 = 0.0;
    double markov_violation = 0.0;       // max of energy(clip u) - energy(u)
    bool passed(double tol) const {
        return max_b3_violation <= tol && max_b4_violation <= tol && markov_violation <= tol;
    }
};

/// Random-vector verification of (B3) Lambda(u+, u-) <= 0 and (B4) with
/// c*1 = 1, c*2 = c*3 = 0, plus the Markov (lattice clipping) property.
inline BConditionReport check_B_conditions(const WentzellForm& form, int trials,
                                           std::uint64_t seed = 20240501u) {
    if (trials < 1) throw validation_error("check_B_conditions: trials must be >= 1");
    BConditionReport rep;
    rep.trials = trials;
    Rng rng(seed);
    const int n = form.matrix.dimension;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> u(n, 0.0);
        double umax = 0.0;
        for (int i : form.active_nodes) {
            u[i] = rng.normal();
            umax = std::max(umax, std::fabs(u[i]));
        }
        std::vector<double> up(n, 0.0), um(n, 0.0);
        for (int i : form.active_nodes) {
            up[i] = std::max(u[i], 0.0);
            um[i] = std::max(-u[i], 0.0);
        }
        rep.max_b3_violation = std::max(rep.max_b3_violation, form.matrix.form(up, um));

        double k = rng.uniform(0.0, umax);
        std::vector<double> uk(n, 0.0);
        for (int i : form.active_nodes) uk[i] = std::max(u[i] - k, 0.0);
        double lhs = form.matrix.form(u, uk);
        double rhs = rep.c_star_1 * form.matrix.form(uk, uk);
        rep.max_b4_violation = std::max(rep.max_b4_violation, rhs - lhs);

        std::vector<double> clip(n, 0.0);
        for (int i : form.active_nodes) clip[i] = std::min(std::max(u[i], 0.0), 1.0);
        rep.markov_violation = std::max(
            rep.markov_violation, form.matrix.form(clip, clip) - form.matrix.form(u, u));
    }
    return rep;
}

struct WentzellConstants {
    double gamma0 = 0.0;   // shift making the symmetric part + gamma0 * mass PSD (plus margin 1)
    double c0_star = 0.0;  // measured weak-coercivity constant on the D(Lambda) norm
    double eta0_prime = 0.0;  // measured ellipticity floor of the symmetric part
};

/// Measured boundary constants on the active-node subspace: gamma0 is the
/// smallest nonnegative shift making Lambda_sym + gamma0 * M_Gamma positive
/// semidefinite, raised by 1 so the weak-coercivity constant
///   c*0 = lambda_min( (Lambda_sym + gamma0 M) , (Lambda_sym + M) )
/// is strictly positive on the D(Lambda_Gamma)-norm Gram.
inline WentzellConstants measure_wentzell_constants(const WentzellForm& form,
                                                    const SparseOperator& mass_boundary) {
    const auto& act = form.active_nodes;
    const int m = static_cast<int>(act.size());
    Eigen::MatrixXd full_l = form.matrix.to_dense_eigen();
    Eigen::MatrixXd full_m = mass_boundary.to_dense_eigen();
    Eigen::MatrixXd l(m, m), mm(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            l(i, j) = 0.5 * (full_l(act[i], act[j]) + full_l(act[j], act[i]));
            mm(i, j) = full_m(act[i], act[j]);
        }
    WentzellConstants c;
    double lmin = smallest_generalized_eigenvalue(l, mm);
    c.gamma0 = std::max(0.0, -lmin) + 1.0;
    c.c0_star = smallest_generalized_eigenvalue(l + c.gamma0 * mm, l + mm);
    c.eta0_prime = std::max(0.0, lmin);
    return c;
}

}  // namespace ibvp

#pragma once
// Time stepping for the evolution problem: theta-scheme on the assembled
// energy form (interior mass only), with the energy estimate, the windowed
// sup-norm estimates, and the mild-solution (integrated identity) residual.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "assembly.hpp"
#include "core.hpp"
#include "elliptic.hpp"
#include "norms.hpp"

namespace ibvp {

struct ParabolicData {
    ExprPtr u0;                        // initial state (interpolated at nodes)
    std::vector<double> u0_nodal;      // used instead when nonempty
    ExprPtr f, g;                      // time-dependent data f(t,x,y), g(t,x,y,n)
    double kappa1 = 2.0, kappa2 = 2.0;  // Bochner time exponents
    double p = 2.0, q = 2.0;            // spatial data exponents
    double d = 1.0;                     // boundary dimension for admissibility

    /// Admissibility of the sup-norm estimates (N = 2):
    /// 1/kappa1 + N/(2p) < 1 and 1/kappa2 + d/(2q(d+2-N)) < 1/2.
    bool admissible() const {
        if (!(kappa1 >= 2.0) || !(kappa2 >= 2.0) || !(p >= 2.0) || !(q >= 2.0)) return false;
        double lhs1 = 1.0 / kappa1 + 2.0 / (2.0 * p);
        double lhs2 = 1.0 / kappa2 + d / (2.0 * q * d);
        return lhs1 < 1.0 && lhs2 < 0.5;
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    double theta = 1.0;
    const ProblemSpec* spec = nullptr;
    const AssembledProblem* problem = nullptr;
    const ParabolicData* data = nullptr;

    double final_time() const { return times.empty() ? 0.0 : times.back(); }
};

namespace detail_par {

/// Load vector at a fixed time: interior integral of f phi_i plus the
/// boundary integral of g phi_i against the measure.
inline std::vector<double> load_at(const Mesh& mesh, const BoundaryMeasure& mu, const ExprPtr& f,
                                   const ExprPtr& g, double t) {
    std::vector<double> rhs(mesh.n_nodes(), 0.0);
    if (f) {
        for (std::size_t tt = 0; tt < mesh.triangles.size(); ++tt) {
            const auto& tr = mesh.triangles[tt];
            const Vec2 &a = mesh.nodes[tr[0]], &b = mesh.nodes[tr[1]], &c = mesh.nodes[tr[2]];
            double area = mesh.triangle_area(tt);
            for (const auto& q : detail_asm::tri6()) {
                double b3 = 1.0 - q.b1 - q.b2;
                Vec2 pt = q.b1 * a + q.b2 * b + b3 * c;
                double fv = eval_expr(f, pt.x, pt.y, t);
                double bary[3] = {q.b1, q.b2, b3};
                for (int i = 0; i < 3; ++i) rhs[tr[i]] += area * q.w * fv * bary[i];
            }
        }
    }
    if (g) {
        for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
            const auto& be = mesh.boundary_edges[e];
            Vec2 tangent = mesh.nodes[be.b] - mesh.nodes[be.a];
            double len = tangent.norm();
            Vec2 normal{tangent.y / len, -tangent.x / len};
            for (const auto& gq : detail_norms::gauss3()) {
                Vec2 pt = (1.0 - gq.t) * mesh.nodes[be.a] + gq.t * mesh.nodes[be.b];
                double gv = eval_expr(g, pt.x, pt.y, t, normal.x, normal.y);
                rhs[be.a] += mu.edge_weights[e] * gq.w * gv * (1.0 - gq.t);
                rhs[be.b] += mu.edge_weights[e] * gq.w * gv * gq.t;
            }
        }
    }
    return rhs;
}

/// Spatial L^p norm of a time-slice of a data expression.
inline double data_norm_at(const Mesh& mesh, const ExprPtr& f, double p, double t) {
    if (!f) return 0.0;
    double acc = 0.0, sup = 0.0;
    for (std::size_t tt = 0; tt < mesh.triangles.size(); ++tt) {
        const auto& tr = mesh.triangles[tt];
        const Vec2 &a = mesh.nodes[tr[0]], &b = mesh.nodes[tr[1]], &c = mesh.nodes[tr[2]];
        double area = mesh.triangle_area(tt);
        for (const auto& q : detail_norms::tri7()) {
            double b3 = 1.0 - q.b1 - q.b2;
            Vec2 pt = q.b1 * a + q.b2 * b + b3 * c;
            double v = std::fabs(eval_expr(f, pt.x, pt.y, t));
            if (p == kInf)
                sup = std::max(sup, v);
            else
                acc += area * q.w * std::pow(v, p);
        }
    }
    return p == kInf ? sup : std::pow(acc, 1.0 / p);
}

inline double boundary_data_norm_at(const Mesh& mesh, const BoundaryMeasure& mu, const ExprPtr& g,
                                    double q, double t) {
    if (!g) return 0.0;
    double acc = 0.0, sup = 0.0;
    for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
        const auto& be = mesh.boundary_edges[e];
        for (const auto& gq : detail_norms::gauss3()) {
            Vec2 pt = (1.0 - gq.t) * mesh.nodes[be.a] + gq.t * mesh.nodes[be.b];
            double v = std::fabs(eval_expr(g, pt.x, pt.y, t));
            if (q == kInf)
                sup = std::max(sup, v);
            else
                acc += mu.edge_weights[e] * gq.w * std::pow(v, q);
        }
    }
    return q == kInf ? sup : std::pow(acc, 1.0 / q);
}

}  // namespace detail_par

/// theta-scheme march: (M + theta dt E) u^{n+1} =
/// (M - (1-theta) dt E) u^n + dt (theta F^{n+1} + (1-theta) F^n).
/// The mass matrix covers the interior only (no boundary-measure term), and
/// the step matrix factorization is reused across steps.
inline Trajectory step_parabolic(const ProblemSpec& spec, const AssembledProblem& ap,
                                 const ParabolicData& data, double T, double dt, double theta) {
    if (!(dt > 0.0) || !(T > 0.0)) throw validation_error("step_parabolic: need T, dt > 0");
    if (theta < 0.5 || theta > 1.0)
        throw validation_error("step_parabolic: theta below 1/2 is unstable; refused");
    const Mesh& mesh = *spec.mesh;
    const int n = ap.bundle.dimension;

    Eigen::MatrixXd e = ap.bundle.dense_total();
    e += ap.bundle.shift * ap.bundle.mass_interior.to_dense_eigen();
    Eigen::MatrixXd m = ap.bundle.mass_interior.to_dense_eigen();
    Eigen::MatrixXd lhs = m + theta * dt * e;
    Eigen::MatrixXd rhs_mat = m - (1.0 - theta) * dt * e;
    for (int i = 0; i < n; ++i) {
        if (!ap.dirichlet[i]) continue;
        lhs.row(i).setZero();
        lhs(i, i) = 1.0;
        rhs_mat.row(i).setZero();
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
    {
        Eigen::VectorXd probe = lu.solve(Eigen::VectorXd::Ones(n));
        if (!probe.allFinite())
            throw numeric_error("step_parabolic: step matrix is not invertible");
    }

    Eigen::VectorXd u(n);
    if (!data.u0_nodal.empty()) {
        if (data.u0_nodal.size() != static_cast<std::size_t>(n))
            throw validation_error("step_parabolic: nodal initial state has wrong size");
        for (int i = 0; i < n; ++i) u[i] = data.u0_nodal[i];
    } else {
        for (int i = 0; i < n; ++i)
            u[i] = data.u0 ? eval_expr(data.u0, mesh.nodes[i].x, mesh.nodes[i].y) : 0.0;
    }
    for (int i = 0; i < n; ++i)
        if (ap.dirichlet[i]) u[i] = 0.0;

    Trajectory traj;
    traj.theta = theta;
    traj.spec = &spec;
    traj.problem = &ap;
    traj.data = &data;
    traj.times.push_back(0.0);
    traj.states.emplace_back(u.data(), u.data() + n);

    auto load = [&](double t) {
        auto v = detail_par::load_at(mesh, *spec.mu, data.f, data.g, t);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) b[i] = ap.dirichlet[i] ? 0.0 : v[i];
        return b;
    };
    const int steps = static_cast<int>(std::ceil(T / dt - 1e-12));
    Eigen::VectorXd f_prev = load(0.0);
    for (int k = 1; k <= steps; ++k) {
        double t_next = std::min(k * dt, T);
        Eigen::VectorXd f_next = load(t_next);
        Eigen::VectorXd b = rhs_mat * u + dt * (theta * f_next + (1.0 - theta) * f_prev);
        for (int i = 0; i < n; ++i)
            if (ap.dirichlet[i]) b[i] = 0.0;
        Eigen::VectorXd u_next = lu.solve(b);
        double rres = (lhs * u_next - b).norm() / std::max(1.0, b.norm());
        if (rres > 1e-9)
            throw numeric_error("step_parabolic: step residual " + fmt17(rres) +
                                " exceeds tolerance");
        u = u_next;
        f_prev = f_next;
        traj.times.push_back(t_next);
        traj.states.emplace_back(u.data(), u.data() + n);
    }
    return traj;
}

struct EnergyEstimate {
    double lhs = 0.0;
    double rhs = 0.0;
    double c_measured = 0.0;
};

/// Discrete form of the basic energy inequality:
///   sup_t ||u||_2^2 + int ||grad u||^2 dt + int ||u||_{D(Lambda)}^2 dt
///     <= c ( ||u0||_2^2 + int ||f||_2^2 dt + int ||g||_{2,Gamma}^2 dt ).
inline EnergyEstimate energy_estimate_check(const Trajectory& traj) {
    const Mesh& mesh = *traj.spec->mesh;
    const AssembledProblem& ap = *traj.problem;
    auto stiff = laplace_stiffness(mesh);
    EnergyEstimate est;
    double sup2 = 0.0, grad_t = 0.0, dnorm_t = 0.0, f_t = 0.0, g_t = 0.0;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const auto& u = traj.states[k];
        double m2 = ap.bundle.mass_interior.form(u, u);
        sup2 = std::max(sup2, m2);
        double dt = k + 1 < traj.times.size() ? traj.times[k + 1] - traj.times[k] : 0.0;
        if (dt <= 0.0) continue;
        double dn = ap.bundle.mass_boundary.form(u, u);
        if (ap.bundle.wentzell_part) {
            auto wu = ap.bundle.wentzell_part->form(u, u);
            dn += std::max(0.0, wu);
        }
        grad_t += dt * stiff.form(u, u);
        dnorm_t += dt * dn;
        double t = traj.times[k];
        double fn = detail_par::data_norm_at(mesh, traj.data->f, 2.0, t);
        double gn = detail_par::boundary_data_norm_at(mesh, *traj.spec->mu, traj.data->g, 2.0, t);
        f_t += dt * fn * fn;
        g_t += dt * gn * gn;
    }
    const auto& u0 = traj.states.front();
    est.lhs = sup2 + grad_t + dnorm_t;
    est.rhs = ap.bundle.mass_interior.form(u0, u0) + f_t + g_t;
    est.c_measured = est.rhs > 0.0 ? est.lhs / est.rhs : 0.0;
    return est;
}

enum class LinfWindow { half_tail, full, interior_window };

struct LinfReport {
    double sup_interior = 0.0;      // sup over the window of the nodal sup norm
    double sup_boundary = 0.0;
    double data_norm = 0.0;         // Bochner norm of (f, g) over [0, T]
    double u0_inf = 0.0;
    double l2l2_u = 0.0;
    double ratio = 0.0;
    bool assertion_mode = false;    // true only when the admissibility gate passes
};

/// Windowed sup-norm measurement: the half-tail window pairs the sup norm
/// with data + the L^2-in-time norm of u, the full window with data (+ the
/// initial sup norm when u0 is nonzero), and an interior window [T1, T2]
/// with data + the L^2-in-time norm.  Both interior and boundary sups are
/// reported regardless of which one the selected estimate asserts.
inline LinfReport linf_estimate_check(const Trajectory& traj, LinfWindow window,
                                      double t1 = 0.0, double t2 = 0.0) {
    const Mesh& mesh = *traj.spec->mesh;
    const ParabolicData& data = *traj.data;
    const double T = traj.final_time();
    double w0 = 0.0, w1 = T;
    switch (window) {
        case LinfWindow::half_tail: w0 = T / 2.0; break;
        case LinfWindow::full: break;
        case LinfWindow::interior_window:
            w0 = t1;
            w1 = t2;
            if (!(0.0 <= t1 && t1 < t2 && t2 <= T + 1e-12))
                throw validation_error("linf_estimate_check: window outside [0, T]");
            break;
    }
    LinfReport rep;
    rep.assertion_mode = data.admissible();
    double fk = 0.0, gk = 0.0;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        double t = traj.times[k];
        const auto& u = traj.states[k];
        if (t >= w0 - 1e-12 && t <= w1 + 1e-12) {
            double si = lp_norm_interior(mesh, u, kInf);
            double sb = 0.0;
            for (int i : mesh.boundary_loop) sb = std::max(sb, std::fabs(u[i]));
            rep.sup_interior = std::max(rep.sup_interior, si);
            rep.sup_boundary = std::max(rep.sup_boundary, sb);
        }
        double dt = k + 1 < traj.times.size() ? traj.times[k + 1] - traj.times[k] : 0.0;
        if (dt <= 0.0) continue;
        double fn = detail_par::data_norm_at(mesh, data.f, data.p, t);
        double gn = detail_par::boundary_data_norm_at(mesh, *traj.spec->mu, data.g, data.q, t);
        fk += dt * std::pow(fn, data.kappa1);
        gk += dt * std::pow(gn, data.kappa2);
        double m2 = traj.problem->bundle.mass_interior.form(u, u);
        rep.l2l2_u += dt * m2;
    }
    rep.l2l2_u = std::sqrt(rep.l2l2_u);
    rep.data_norm = std::pow(fk, 1.0 / data.kappa1) + std::pow(gk, 1.0 / data.kappa2);
    for (double v : traj.states.front()) rep.u0_inf = std::max(rep.u0_inf, std::fabs(v));
    double num = std::max(rep.sup_interior, rep.sup_boundary);
    double denom = rep.data_norm;
    switch (window) {
        case LinfWindow::half_tail: denom += rep.l2l2_u; break;
        case LinfWindow::full: denom += rep.u0_inf; break;
        case LinfWindow::interior_window: denom += rep.l2l2_u; break;
    }
    rep.ratio = denom > 0.0 ? num / denom : 0.0;
    return rep;
}

/// Max relative residual of the time-integrated identity
///   M (u(t_n) - u0) + E int_0^{t_n} u dxi = int_0^{t_n} F dxi
/// with the right-endpoint rectangle rule, so a backward Euler march
/// satisfies it exactly (each step telescopes) while other schemes leave an
/// O(dt) quadrature gap.
inline double mild_solution_residual(const Trajectory& traj) {
    const AssembledProblem& ap = *traj.problem;
    const Mesh& mesh = *traj.spec->mesh;
    const int n = ap.bundle.dimension;
    Eigen::MatrixXd e = ap.bundle.dense_total();
    e += ap.bundle.shift * ap.bundle.mass_interior.to_dense_eigen();
    Eigen::MatrixXd m = ap.bundle.mass_interior.to_dense_eigen();
    Eigen::VectorXd u0(n), iu = Eigen::VectorXd::Zero(n), iF = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) u0[i] = traj.states.front()[i];
    auto load = [&](double t) {
        auto v = detail_par::load_at(mesh, *traj.spec->mu, traj.data->f, traj.data->g, t);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) b[i] = ap.dirichlet[i] ? 0.0 : v[i];
        return b;
    };
    double worst = 0.0;
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
        double dt = traj.times[k] - traj.times[k - 1];
        Eigen::VectorXd u_cur(n);
        for (int i = 0; i < n; ++i) u_cur[i] = traj.states[k][i];
        iu += dt * u_cur;
        iF += dt * load(traj.times[k]);
        Eigen::VectorXd r = m * (u_cur - u0) + e * iu - iF;
        for (int i = 0; i < n; ++i)
            if (ap.dirichlet[i]) r[i] = 0.0;
        double scale = std::max({1.0, iF.norm(), (m * u_cur).norm()});
        worst = std::max(worst, r.norm() / scale);
    }
    return worst;
}

/// CSV export: `t,norm2,normInf_interior,normInf_boundary`.
inline void export_trajectory(const Trajectory& traj, std::ostream& os) {
    const Mesh& mesh = *traj.spec->mesh;
    os << "t,norm2,normInf_interior,normInf_boundary\n";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const auto& u = traj.states[k];
        double sb = 0.0;
        for (int i : mesh.boundary_loop) sb = std::max(sb, std::fabs(u[i]));
        os << fmt17(traj.times[k]) << ',' << fmt17(lp_norm_interior(mesh, u, 2.0)) << ','
           << fmt17(lp_norm_interior(mesh, u, kInf)) << ',' << fmt17(sb) << '\n';
    }
}

}  // namespace ibvp

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ibvp/parabolic.hpp"

using namespace ibvp;

namespace {

struct Instance {
    Mesh mesh;
    BoundaryMeasure mu;
    ProblemSpec spec;
    AssembledProblem ap;
};

// Robin problem on the unit square with beta = 1 (coercive without a shift).
Instance robin_square(double h) {
    Instance in;
    in.mesh = triangulate(unit_square(), h);
    in.mu = arc_length_measure_for(in.mesh);
    in.spec.mesh = &in.mesh;
    in.spec.mu = &in.mu;
    in.spec.coeffs = Coefficients::identity_laplace();
    in.spec.coeffs.beta = parse_expr("1");
    in.spec.coeffs.s = 2.0;
    in.spec.regime = Regime::robin;
    in.spec.shift_mode = ShiftMode::none;
    return in;
}

// Heat-equation data manufactured from u* = exp(-t) (x^2 + y^2):
//   u*_t - Laplace u* = -exp(-t)(x^2 + y^2) + 4 exp(-t) ... sign check:
//   u*_t = -u*, -Laplace u* = -4 exp(-t), so f = -exp(-t)(x^2 + y^2 + 4).
// Robin data g = du*/dnu + u*.
ParabolicData quad_data() {
    ParabolicData d;
    d.u0 = parse_expr("x^2 + y^2");
    d.f = parse_expr("0 - exp(0 - t)*(x^2 + y^2 + 4)");
    d.g = parse_expr("exp(0 - t)*(2*x*nx + 2*y*ny + x^2 + y^2)");
    return d;
}

double max_l2_gap(const Mesh& mesh, const Trajectory& coarse, const Trajectory& ref) {
    // The reference grid refines the coarse one by an integer factor.
    double worst = 0.0;
    std::size_t stride = (ref.states.size() - 1) / (coarse.states.size() - 1);
    REQUIRE(stride * (coarse.states.size() - 1) == ref.states.size() - 1);
    for (std::size_t k = 0; k < coarse.states.size(); ++k) {
        const auto& a = coarse.states[k];
        const auto& b = ref.states[k * stride];
        std::vector<double> diff(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
        worst = std::max(worst, lp_norm_interior(mesh, diff, 2.0));
    }
    return worst;
}

}  // namespace

TEST_CASE("zero data produces the zero trajectory with zero residuals") {
    auto in = robin_square(0.25);
    auto ap = assemble_problem(in.spec);
    ParabolicData d;
    auto traj = step_parabolic(in.spec, ap, d, 1.0, 0.1, 1.0);
    REQUIRE(traj.states.size() == 11);
    for (const auto& u : traj.states)
        for (double v : u) CHECK(v == 0.0);
    CHECK(mild_solution_residual(traj) == 0.0);
    auto est = energy_estimate_check(traj);
    CHECK(est.lhs == 0.0);
    CHECK(est.c_measured == 0.0);
}

TEST_CASE("backward Euler contracts the homogeneous problem in the mass norm") {
    auto in = robin_square(0.2);
    auto ap = assemble_problem(in.spec);
    ParabolicData d;
    d.u0 = parse_expr("sin(3*x)*cos(2*y) + x");
    auto traj = step_parabolic(in.spec, ap, d, 1.0, 0.05, 1.0);
    double prev = -1.0;
    for (const auto& u : traj.states) {
        double m2 = ap.bundle.mass_interior.form(u, u);
        if (prev >= 0.0) CHECK(m2 <= prev * (1.0 + 1e-12));
        prev = m2;
    }
}

TEST_CASE("time-stepping orders: first for theta = 1, second for theta = 1/2") {
    auto in = robin_square(1.0 / 16.0);
    auto ap = assemble_problem(in.spec);
    // Manufactured u* = (1 - cos t)(x^2 + y^2).  The initial state and
    // velocity vanish, so no stiff discrete transient is seeded; an
    // interpolated nonzero start would leave Crank-Nicolson oscillating at
    // the spatial-consistency level and hide its second order.
    ParabolicData d;
    d.f = parse_expr("sin(t)*(x^2 + y^2) - 4*(1 - cos(t))");
    d.g = parse_expr("(1 - cos(t))*(2*x*nx + 2*y*ny + x^2 + y^2)");
    const double T = 1.0;
    // A fine Crank-Nicolson run isolates the time-discretization error so the
    // spatial error (shared by every run on this mesh) cancels exactly.
    auto ref = step_parabolic(in.spec, ap, d, T, 1.0 / 320.0, 0.5);

    double e1a = max_l2_gap(in.mesh, step_parabolic(in.spec, ap, d, T, 1.0 / 10.0, 1.0), ref);
    double e1b = max_l2_gap(in.mesh, step_parabolic(in.spec, ap, d, T, 1.0 / 20.0, 1.0), ref);
    double rate1 = std::log2(e1a / e1b);
    CHECK(std::fabs(rate1 - 1.0) <= 0.2);

    double e2a = max_l2_gap(in.mesh, step_parabolic(in.spec, ap, d, T, 1.0 / 10.0, 0.5), ref);
    double e2b = max_l2_gap(in.mesh, step_parabolic(in.spec, ap, d, T, 1.0 / 20.0, 0.5), ref);
    double rate2 = std::log2(e2a / e2b);
    CHECK(std::fabs(rate2 - 2.0) <= 0.2);

    // And the fine run itself tracks the manufactured solution.
    std::vector<double> diff(in.mesh.n_nodes());
    const auto& uT = ref.states.back();
    for (std::size_t i = 0; i < diff.size(); ++i) {
        double x = in.mesh.nodes[i].x, y = in.mesh.nodes[i].y;
        diff[i] = uT[i] - (1.0 - std::cos(T)) * (x * x + y * y);
    }
    CHECK(lp_norm_interior(in.mesh, diff, 2.0) < 1e-3);
}

TEST_CASE("the measured energy constant is stable under time-step halving") {
    auto in = robin_square(0.125);
    auto ap = assemble_problem(in.spec);
    auto d = quad_data();
    auto t1 = step_parabolic(in.spec, ap, d, 1.0, 0.05, 1.0);
    auto t2 = step_parabolic(in.spec, ap, d, 1.0, 0.025, 1.0);
    auto e1 = energy_estimate_check(t1);
    auto e2 = energy_estimate_check(t2);
    CHECK(e1.c_measured > 0.0);
    CHECK(std::isfinite(e1.c_measured));
    double ratio = e1.c_measured / e2.c_measured;
    CHECK(ratio < 2.0);
    CHECK(ratio > 0.5);
}

TEST_CASE("backward Euler preserves positivity of nonnegative data") {
    auto in = robin_square(0.125);
    auto ap = assemble_problem(in.spec);
    ParabolicData d;
    d.u0 = parse_expr("x*y");
    d.f = parse_expr("1 + x");
    d.g = parse_expr("0.5");
    auto traj = step_parabolic(in.spec, ap, d, 1.0, 0.05, 1.0);
    double mn = 0.0, mx = 0.0;
    for (const auto& u : traj.states)
        for (double v : u) {
            mn = std::min(mn, v);
            mx = std::max(mx, std::fabs(v));
        }
    CHECK(mn >= -1e-9 * std::max(1.0, mx));
}

TEST_CASE("the march is jointly linear in initial state and data") {
    auto in = robin_square(0.25);
    auto ap = assemble_problem(in.spec);
    ParabolicData da, db, dsum;
    da.u0 = parse_expr("x");
    da.f = parse_expr("sin(t)*y");
    db.u0 = parse_expr("y^2");
    db.g = parse_expr("cos(t)");
    dsum.u0 = parse_expr("x + y^2");
    dsum.f = da.f;
    dsum.g = db.g;
    auto ta = step_parabolic(in.spec, ap, da, 0.5, 0.05, 0.5);
    auto tb = step_parabolic(in.spec, ap, db, 0.5, 0.05, 0.5);
    auto ts = step_parabolic(in.spec, ap, dsum, 0.5, 0.05, 0.5);
    for (std::size_t k = 0; k < ts.states.size(); ++k)
        for (std::size_t i = 0; i < ts.states[k].size(); ++i)
            CHECK(ts.states[k][i] ==
                  doctest::Approx(ta.states[k][i] + tb.states[k][i]).epsilon(1e-9));

    // Homogeneity: doubling all data doubles the trajectory.
    ParabolicData d2;
    d2.u0 = parse_expr("2*(x + y^2)");
    d2.f = parse_expr("2*sin(t)*y");
    d2.g = parse_expr("2*cos(t)");
    auto t2 = step_parabolic(in.spec, ap, d2, 0.5, 0.05, 0.5);
    for (std::size_t k = 0; k < ts.states.size(); ++k)
        for (std::size_t i = 0; i < ts.states[k].size(); ++i)
            CHECK(t2.states[k][i] == doctest::Approx(2.0 * ts.states[k][i]).epsilon(1e-10));
}

TEST_CASE("repeated marches are bitwise reproducible") {
    auto in = robin_square(0.2);
    auto ap = assemble_problem(in.spec);
    auto d = quad_data();
    auto a = step_parabolic(in.spec, ap, d, 0.5, 0.05, 0.5);
    auto b = step_parabolic(in.spec, ap, d, 0.5, 0.05, 0.5);
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k)
        for (std::size_t i = 0; i < a.states[k].size(); ++i)
            CHECK(a.states[k][i] == b.states[k][i]);
}

TEST_CASE("invalid step parameters are refused") {
    auto in = robin_square(0.5);
    auto ap = assemble_problem(in.spec);
    ParabolicData d;
    CHECK_THROWS_AS(step_parabolic(in.spec, ap, d, 1.0, 0.0, 1.0), validation_error);
    CHECK_THROWS_AS(step_parabolic(in.spec, ap, d, 1.0, -0.1, 1.0), validation_error);
    CHECK_THROWS_AS(step_parabolic(in.spec, ap, d, 0.0, 0.1, 1.0), validation_error);
    CHECK_THROWS_AS(step_parabolic(in.spec, ap, d, 1.0, 0.1, 0.4), validation_error);
    CHECK_THROWS_AS(step_parabolic(in.spec, ap, d, 1.0, 0.1, 1.2), validation_error);
}

TEST_CASE("the integrated identity is exact for backward Euler and shrinks with dt") {
    auto in = robin_square(0.2);
    auto ap = assemble_problem(in.spec);
    auto d = quad_data();
    auto be = step_parabolic(in.spec, ap, d, 1.0, 0.1, 1.0);
    CHECK(mild_solution_residual(be) <= 1e-10);

    // Crank-Nicolson does not telescope exactly against the rectangle rule of
    // the identity; its residual must at least halve when dt halves.
    auto cn1 = step_parabolic(in.spec, ap, d, 1.0, 0.1, 0.5);
    auto cn2 = step_parabolic(in.spec, ap, d, 1.0, 0.05, 0.5);
    double r1 = mild_solution_residual(cn1);
    double r2 = mild_solution_residual(cn2);
    CHECK(r1 > 0.0);
    CHECK(r2 <= 0.75 * r1);
}

TEST_CASE("sup-norm windows report finite ratios and gate on admissibility") {
    auto in = robin_square(0.125);
    auto ap = assemble_problem(in.spec);
    auto d = quad_data();
    d.kappa1 = 4.0;
    d.p = 4.0;
    d.kappa2 = 8.0;
    d.q = 4.0;
    d.d = 1.0;
    REQUIRE(d.admissible());
    auto traj = step_parabolic(in.spec, ap, d, 1.0, 0.05, 1.0);

    auto tail = linf_estimate_check(traj, LinfWindow::half_tail);
    auto full = linf_estimate_check(traj, LinfWindow::full);
    auto mid = linf_estimate_check(traj, LinfWindow::interior_window, 0.25, 0.75);
    for (const auto* r : {&tail, &full, &mid}) {
        CHECK(r->assertion_mode);
        CHECK(std::isfinite(r->ratio));
        CHECK(r->ratio > 0.0);
        CHECK(r->sup_interior > 0.0);
        CHECK(r->sup_boundary > 0.0);
        CHECK(r->data_norm > 0.0);
    }
    // The tail window can only see a subset of the full window's states.
    CHECK(tail.sup_interior <= full.sup_interior + 1e-15);

    // Windows outside [0, T] are rejected.
    CHECK_THROWS_AS(linf_estimate_check(traj, LinfWindow::interior_window, 0.5, 1.5),
                    validation_error);
    CHECK_THROWS_AS(linf_estimate_check(traj, LinfWindow::interior_window, 0.8, 0.2),
                    validation_error);

    // Borderline exponents fail the admissibility gate: report-only mode.
    ParabolicData bad = d;
    bad.kappa1 = 2.0;
    bad.p = 2.0;
    CHECK_FALSE(bad.admissible());
    auto traj2 = step_parabolic(in.spec, ap, bad, 1.0, 0.1, 1.0);
    auto rep = linf_estimate_check(traj2, LinfWindow::full);
    CHECK_FALSE(rep.assertion_mode);
    CHECK(std::isfinite(rep.ratio));
}

TEST_CASE("ratio invariance under joint data scaling") {
    auto in = robin_square(0.2);
    auto ap = assemble_problem(in.spec);
    auto d = quad_data();
    d.kappa1 = d.kappa2 = 4.0;
    d.p = d.q = 4.0;
    auto t1 = step_parabolic(in.spec, ap, d, 1.0, 0.05, 1.0);
    ParabolicData d3;
    d3.u0 = parse_expr("3*(x^2 + y^2)");
    d3.f = parse_expr("0 - 3*exp(0 - t)*(x^2 + y^2 + 4)");
    d3.g = parse_expr("3*exp(0 - t)*(2*x*nx + 2*y*ny + x^2 + y^2)");
    d3.kappa1 = d3.kappa2 = 4.0;
    d3.p = d3.q = 4.0;
    auto t3 = step_parabolic(in.spec, ap, d3, 1.0, 0.05, 1.0);
    auto r1 = linf_estimate_check(t1, LinfWindow::half_tail);
    auto r3 = linf_estimate_check(t3, LinfWindow::half_tail);
    CHECK(r3.ratio == doctest::Approx(r1.ratio).epsilon(1e-9));
}

TEST_CASE("trajectory CSV has the pinned header and reruns byte-identically") {
    auto in = robin_square(0.25);
    auto ap = assemble_problem(in.spec);
    auto d = quad_data();
    auto traj = step_parabolic(in.spec, ap, d, 0.5, 0.1, 1.0);
    std::ostringstream s1, s2;
    export_trajectory(traj, s1);
    export_trajectory(traj, s2);
    CHECK(s1.str() == s2.str());
    std::istringstream in_s(s1.str());
    std::string line;
    REQUIRE(std::getline(in_s, line));
    CHECK(line == "t,norm2,normInf_interior,normInf_boundary");
    int rows = 0;
    while (std::getline(in_s, line)) ++rows;
    CHECK(rows == static_cast<int>(traj.states.size()));
}

TEST_CASE("nodal initial states are accepted and size-checked") {
    auto in = robin_square(0.25);
    auto ap = assemble_problem(in.spec);
    ParabolicData d;
    d.u0_nodal.assign(in.mesh.n_nodes(), 1.0);
    auto traj = step_parabolic(in.spec, ap, d, 0.2, 0.05, 1.0);
    CHECK(traj.states.front().front() == 1.0);
    d.u0_nodal.resize(3);
    CHECK_THROWS_AS(step_parabolic(in.spec, ap, d, 0.2, 0.05, 1.0), validation_error);
}

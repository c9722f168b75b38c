#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ibvp/elliptic.hpp"

using namespace ibvp;

namespace {

struct Instance {
    Mesh mesh;
    BoundaryMeasure mu;
    ProblemSpec spec;
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

double l2_error_against(const Mesh& mesh, const std::vector<double>& u,
                        double (*exact)(double, double)) {
    std::vector<double> diff(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        diff[i] = u[i] - exact(mesh.nodes[i].x, mesh.nodes[i].y);
    return lp_norm_interior(mesh, diff, 2.0);
}

double quad_exact(double x, double y) { return x * x + y * y; }

}  // namespace

TEST_CASE("zero data in a coercive regime gives the zero solution") {
    auto in = robin_square(0.25);
    auto field = solve_elliptic(in.spec);
    for (double v : field.values) CHECK(std::fabs(v) < 1e-12);
    CHECK(field.residual_norm <= 1e-10);
}

TEST_CASE("manufactured Robin solution converges at second order") {
    // u* = x^2 + y^2 with -Laplace u* = -4 and boundary data
    // g = du*/dnu + u*; nodal L2 errors must decay at observed rate >= 1.8.
    std::vector<double> errs;
    for (double h : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0}) {
        auto in = robin_square(h);
        in.spec.f = parse_expr("0 - 4");
        in.spec.g = parse_expr("2*x*nx + 2*y*ny + x^2 + y^2");
        auto field = solve_elliptic(in.spec);
        errs.push_back(l2_error_against(in.mesh, field.values, quad_exact));
    }
    REQUIRE(errs.size() == 3);
    CHECK(std::log2(errs[0] / errs[1]) >= 1.8);
    CHECK(std::log2(errs[1] / errs[2]) >= 1.8);
}

TEST_CASE("pure Neumann requests are refused or mean-pinned by compatibility") {
    auto in = robin_square(0.25);
    in.spec.coeffs.beta = nullptr;
    in.spec.regime = Regime::neumann;
    in.spec.f = parse_expr("1");
    CHECK_THROWS_AS(solve_elliptic(in.spec), check_failure);  // incompatible data

    in.spec.f = parse_expr("x - 0.5");  // zero mean
    auto field = solve_elliptic(in.spec);
    CHECK(field.mean_pinned);
    // Pinned mean: weighted average vanishes.
    auto ap = assemble_problem(in.spec);
    std::vector<double> ones(field.values.size(), 1.0);
    CHECK(std::fabs(ap.bundle.mass_interior.form(field.values, ones)) < 1e-9);
    // The weak identity holds for every nodal test function, constants
    // included.
    auto au = ap.bundle.sparse_total().apply(field.values);
    double scale = 0.0;
    for (double v : ap.rhs) scale = std::max(scale, std::fabs(v));
    for (std::size_t i = 0; i < au.size(); ++i)
        CHECK(std::fabs(au[i] - ap.rhs[i]) <= 1e-8 * std::max(1.0, scale));
}

TEST_CASE("the solve is linear in the data") {
    auto in = robin_square(0.25);
    in.spec.f = parse_expr("sin(x)");
    auto u1 = solve_elliptic(in.spec);
    in.spec.f = nullptr;
    in.spec.g = parse_expr("y");
    auto u2 = solve_elliptic(in.spec);
    in.spec.f = parse_expr("sin(x)");
    auto u12 = solve_elliptic(in.spec);
    for (std::size_t i = 0; i < u12.values.size(); ++i)
        CHECK(u12.values[i] == doctest::Approx(u1.values[i] + u2.values[i]).epsilon(1e-9));
}

TEST_CASE("repeated assembly and solve are bitwise reproducible") {
    auto in = robin_square(0.25);
    in.spec.f = parse_expr("exp(x)*y");
    auto a = solve_elliptic(in.spec);
    auto b = solve_elliptic(in.spec);
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);
}

TEST_CASE("sub- and supersolution checks recognize exact, lowered and raised fields") {
    auto in = robin_square(0.25);
    in.spec.f = parse_expr("1");
    auto ap = assemble_problem(in.spec);
    auto field = solve_elliptic(ap);
    CHECK(check_subsolution(ap, field.values, 25));
    CHECK(check_subsolution(ap, field.values, 25, /*supersolution=*/true));
    // Subtracting a multiple of the solution of a positive source shifts the
    // weak identity down: E(u - eps w, phi) = (rhs, phi) - eps (1, phi).
    for (std::size_t i = 0; i < field.values.size(); ++i) field.values[i] *= 1.0 - 0.1;
    CHECK(check_subsolution(ap, field.values, 25));
    CHECK_FALSE(check_subsolution(ap, field.values, 25, /*supersolution=*/true));
    // A large positive constant breaks the subsolution inequality through the
    // Robin term.
    auto raised = solve_elliptic(ap).values;
    for (auto& v : raised) v += 10.0;
    CHECK_FALSE(check_subsolution(ap, raised, 25));
    CHECK(check_subsolution(ap, raised, 25, /*supersolution=*/true));
}

TEST_CASE("inverse positivity on the square and for zero data") {
    auto in = robin_square(0.25);
    in.spec.f = parse_expr("1");
    auto rep = verify_inverse_positivity(in.spec);
    CHECK(rep.passed);
    CHECK(rep.min_u > 0.0);  // strictly positive everywhere for f = 1
    in.spec.f = nullptr;
    auto zero = verify_inverse_positivity(in.spec);
    CHECK(zero.passed);
    CHECK(zero.min_u == 0.0);
    in.spec.f = parse_expr("x - 2");
    CHECK_THROWS_AS(verify_inverse_positivity(in.spec), validation_error);
}

TEST_CASE("inverse positivity holds on the snowflake with the graph boundary form") {
    auto snow = koch_snowflake(2);
    auto mesh = triangulate(snow, 1.0 / 9.0);
    auto mu = measure_on_mesh(self_similar_measure(snow, 1.0 / 3.0), snow, mesh);
    ProblemSpec spec;
    spec.mesh = &mesh;
    spec.mu = &mu;
    spec.domain = &snow;
    spec.coeffs = Coefficients::identity_laplace();
    spec.coeffs.wentzell.kind = WentzellKind::koch_graph;
    spec.regime = Regime::wentzell;
    spec.shift_mode = ShiftMode::auto_delta_star;
    spec.f = parse_expr("1");
    auto rep = verify_inverse_positivity(spec, 1e-9);
    CHECK(rep.passed);
}

TEST_CASE("truncation-edge Dirichlet masks pin those nodes to zero") {
    auto dom = ramified_domain(RamifiedFamily::F, 0.5, 1);
    auto mesh = triangulate(dom, 0.5);
    auto mu = arc_length_measure_for(mesh);
    ProblemSpec spec;
    spec.mesh = &mesh;
    spec.mu = &mu;
    spec.domain = &dom;
    spec.coeffs = Coefficients::identity_laplace();
    spec.coeffs.beta = parse_expr("1");
    spec.coeffs.s = 2.0;
    spec.shift_mode = ShiftMode::none;
    spec.dirichlet_truncation = true;
    spec.f = parse_expr("1");
    auto ap = assemble_problem(spec);
    int masked = 0;
    for (char m : ap.dirichlet) masked += m;
    CHECK(masked > 0);
    auto field = solve_elliptic(ap);
    for (std::size_t i = 0; i < field.values.size(); ++i)
        if (ap.dirichlet[i]) CHECK(field.values[i] == 0.0);
}

TEST_CASE("nonlocal data mode annihilates constant data") {
    auto in = robin_square(0.5);
    in.spec.nonlocal = NonlocalChoice::besov;
    in.spec.besov_s = 0.4;
    in.spec.besov_d = 1.0;
    in.spec.nonlocal_data = true;
    in.spec.f = parse_expr("1");
    in.spec.g = parse_expr("1");
    auto field = solve_elliptic(in.spec);
    for (double v : field.values) CHECK(std::fabs(v) < 1e-9);
}

TEST_CASE("exponent table reproduces the five printed cases") {
    // N = 3, d = 2.5: critical thresholds p* = 1.5, q* = 5/3.
    auto c1 = exponent_table(1.2, 1.5, 3.0, 2.5);
    CHECK(c1.case_index == 1);
    CHECK(c1.m1 == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(c1.m2 == doctest::Approx(5.0).epsilon(1e-12));
    auto c2 = exponent_table(1.3, 1.8, 3.0, 2.5);
    CHECK(c2.case_index == 2);
    double denom = 3.0 * 1.3 - 2.0 * 1.3 - 2.5 * 1.3 + 2.5;
    CHECK(c2.m1 == doctest::Approx(3.0 * 1.3 / denom).epsilon(1e-12));
    CHECK(c2.m2 == doctest::Approx(2.5 * 1.3 / denom).epsilon(1e-12));
    auto c3 = exponent_table(2.0, 1.6, 3.0, 2.5);
    CHECK(c3.case_index == 3);
    auto c4 = exponent_table(1.5, 2.0, 3.0, 2.5);
    CHECK(c4.case_index == 4);
    CHECK(c4.kind1 == ExponentKind::any_in_range);
    auto c5 = exponent_table(2.0, 2.0, 3.0, 2.5);
    CHECK(c5.case_index == 5);
    CHECK(c5.kind1 == ExponentKind::infinite);
    CHECK(c5.kind2 == ExponentKind::infinite);
    CHECK_THROWS_AS(exponent_table(1.1, 2.0, 3.0, 2.5), validation_error);
    // N = 2 sentinel: every finite exponent is admissible.
    auto flat = exponent_table(2.0, 2.0, 2.0, 1.26);
    CHECK(flat.case_index == 0);
    CHECK(flat.kind1 == ExponentKind::any_in_range);
}

TEST_CASE("exponent table is monotone within each case branch") {
    // Case 1 region for N = 3, d = 2.5.
    double prev1 = 0.0, prev2 = 0.0;
    for (double p : {1.21, 1.3, 1.4}) {
        auto e = exponent_table(p, 1.45, 3.0, 2.5);
        REQUIRE(e.case_index == 1);
        CHECK(e.m1 >= prev1);
        CHECK(e.m2 >= prev2);
        prev1 = e.m1;
        prev2 = e.m2;
    }
    prev1 = prev2 = 0.0;
    for (double q : {1.4, 1.5, 1.6}) {
        auto e = exponent_table(2.0, q, 3.0, 2.5);
        REQUIRE(e.case_index == 3);
        CHECK(e.m1 >= prev1);
        CHECK(e.m2 >= prev2);
        prev1 = e.m1;
        prev2 = e.m2;
    }
}

TEST_CASE("estimate rows: zero data, linearity invariance, and finite batch ratios") {
    auto in = robin_square(0.25);
    auto zero = estimate_report(in.spec, solve_elliptic(in.spec));
    CHECK(zero.ratio == 0.0);

    in.spec.f = parse_expr("sin(x) + 1");
    auto u = solve_elliptic(in.spec);
    auto row1 = estimate_report(in.spec, u);
    in.spec.f = parse_expr("2*(sin(x) + 1)");
    auto u2 = solve_elliptic(in.spec);
    auto row2 = estimate_report(in.spec, u2);
    CHECK(row1.ratio == doctest::Approx(row2.ratio).epsilon(1e-9));

    double max_ratio = 0.0;
    const char* fields[] = {"exp(x)", "x*y + 1", "cos(3*y)", "1 + x^2"};
    std::vector<EstimateRow> rows;
    for (const char* fx : fields) {
        in.spec.f = parse_expr(fx);
        rows.push_back(estimate_report(in.spec, solve_elliptic(in.spec)));
        max_ratio = std::max(max_ratio, rows.back().ratio);
    }
    CHECK(std::isfinite(max_ratio));
    CHECK(max_ratio > 0.0);
    std::ostringstream os;
    export_estimate_rows(rows, os);
    CHECK(os.str().rfind("case,p,q,m1,m2,", 0) == 0);
}

TEST_CASE("non-coercive unshifted requests are refused with certificate details") {
    auto in = robin_square(0.25);
    in.spec.coeffs.beta = nullptr;      // pure Neumann, not coercive
    in.spec.regime = Regime::robin;     // not eligible for mean pinning
    in.spec.f = parse_expr("x");
    CHECK_THROWS_AS(solve_elliptic(in.spec), check_failure);
}

#pragma once
// Batch driver: builds geometry, measure, and problem objects from a
// RunConfig, executes the requested stage (gen / run / verify), evaluates
// the configured checks, and emits deterministic reports.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "degiorgi.hpp"
#include "elliptic.hpp"
#include "parabolic.hpp"

namespace ibvp {

enum class RunMode { gen, run, verify };

struct RunOptions {
    std::uint64_t seed = 20240501u;
    std::string out_dir = "out";
    int max_dofs = 20000;
};

struct RunArtifacts {
    PolygonalDomain domain;
    Mesh mesh;
    BoundaryMeasure mu;
    ProblemSpec spec;  // points into domain/mesh/mu above
    std::vector<std::pair<std::string, bool>> checks;
    std::string report;
};

namespace detail_run {

inline ExprPtr expr_of(const RunConfig& cfg, const std::string& key) {
    std::string v = cfg.str(key);
    return v.empty() ? nullptr : parse_expr(v);
}

inline void write_text(const std::string& dir, const std::string& name,
                       const std::string& content) {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir + "/" + name, std::ios::binary);
    if (!os) throw validation_error("runner: cannot write " + dir + "/" + name);
    os << content;
}

}  // namespace detail_run

inline void build_geometry(const RunConfig& cfg, const RunOptions& opt, RunArtifacts& art) {
    std::string family = cfg.str("domain.family", "square");
    int level = cfg.integer("domain.level", 0);
    if (family == "square")
        art.domain = unit_square();
    else if (family == "snowflake")
        art.domain = koch_snowflake(level);
    else if (family == "ramified_f")
        art.domain = ramified_domain(RamifiedFamily::F, 0.5, level);
    else if (family == "ramified_g")
        art.domain = ramified_domain(RamifiedFamily::G, cfg.num("domain.tau", 0.5), level);
    else if (family == "ngon")
        art.domain = regular_ngon(cfg.integer("domain.sides", 16), cfg.num("domain.radius", 1.0));
    art.mesh = triangulate(art.domain, cfg.num("domain.mesh_h", 0.25));
    if (art.mesh.n_nodes() > opt.max_dofs)
        throw validation_error("runner: mesh has " + std::to_string(art.mesh.n_nodes()) +
                               " nodes, above --max-dofs " + std::to_string(opt.max_dofs));

    if (cfg.str("measure.kind", "arc_length") == "self_similar") {
        auto domain_mu = self_similar_measure(art.domain, cfg.num("measure.ratio", 1.0 / 3.0));
        art.mu = measure_on_mesh(domain_mu, art.domain, art.mesh);
    } else {
        art.mu = arc_length_measure_for(art.mesh);
    }
}

inline void build_problem(const RunConfig& cfg, RunArtifacts& art) {
    ProblemSpec& spec = art.spec;
    spec.mesh = &art.mesh;
    spec.mu = &art.mu;
    spec.domain = &art.domain;

    Coefficients c = Coefficients::identity_laplace();
    using detail_run::expr_of;
    if (cfg.has("coefficients.alpha11")) c.alpha11 = expr_of(cfg, "coefficients.alpha11");
    if (cfg.has("coefficients.alpha12")) c.alpha12 = expr_of(cfg, "coefficients.alpha12");
    if (cfg.has("coefficients.alpha21")) c.alpha21 = expr_of(cfg, "coefficients.alpha21");
    if (cfg.has("coefficients.alpha22")) c.alpha22 = expr_of(cfg, "coefficients.alpha22");
    c.a_hat1 = expr_of(cfg, "coefficients.a_hat1");
    c.a_hat2 = expr_of(cfg, "coefficients.a_hat2");
    c.a_check1 = expr_of(cfg, "coefficients.a_check1");
    c.a_check2 = expr_of(cfg, "coefficients.a_check2");
    c.lambda = expr_of(cfg, "coefficients.lambda");
    c.beta = expr_of(cfg, "coefficients.beta");
    c.gamma = expr_of(cfg, "coefficients.gamma");
    c.kernel_a = expr_of(cfg, "coefficients.kernel_a");
    c.kernel_b = expr_of(cfg, "coefficients.kernel_b");
    c.r1 = cfg.num("coefficients.r1", c.r1);
    c.r2 = cfg.num("coefficients.r2", c.r2);
    c.r3 = cfg.num("coefficients.r3", c.r3);
    c.s = cfg.num("coefficients.s", c.s);

    std::string regime = cfg.str("regime.kind", "R");
    spec.regime = regime == "N"   ? Regime::neumann
                  : regime == "W" ? Regime::wentzell
                                  : Regime::robin;
    if (spec.regime == Regime::wentzell) {
        std::string wk = cfg.str("regime.wentzell_kind");
        if (wk == "koch") {
            c.wentzell.kind = WentzellKind::koch_graph;
            c.wentzell.rho = cfg.num("regime.rho", 4.0);
        } else {
            c.wentzell.kind = WentzellKind::riemannian;
            c.wentzell.omega = cfg.has("regime.omega") ? expr_of(cfg, "regime.omega")
                                                       : parse_expr("1");
            c.wentzell.b_hat = expr_of(cfg, "regime.b_hat");
            c.wentzell.b_check = expr_of(cfg, "regime.b_check");
        }
    }
    spec.coeffs = std::move(c);

    std::string nl = cfg.str("nonlocal.kind", "none");
    spec.nonlocal = nl == "besov" ? NonlocalChoice::besov
                    : nl == "dtn" ? NonlocalChoice::dtn
                                  : NonlocalChoice::none;
    if (spec.nonlocal == NonlocalChoice::besov) {
        spec.besov_s = cfg.num("nonlocal.s", spec.besov_s);
        spec.besov_d = cfg.num("nonlocal.d", spec.besov_d);
        if (!spec.coeffs.kernel_a && cfg.has("nonlocal.kernel_a"))
            spec.coeffs.kernel_a = detail_run::expr_of(cfg, "nonlocal.kernel_a");
        if (!spec.coeffs.kernel_b && cfg.has("nonlocal.kernel_b"))
            spec.coeffs.kernel_b = detail_run::expr_of(cfg, "nonlocal.kernel_b");
    }
    if (spec.nonlocal == NonlocalChoice::dtn && !spec.coeffs.gamma && cfg.has("nonlocal.gamma"))
        spec.coeffs.gamma = detail_run::expr_of(cfg, "nonlocal.gamma");

    spec.f = detail_run::expr_of(cfg, "problem.f");
    spec.g = detail_run::expr_of(cfg, "problem.g");
    spec.p = cfg.num("problem.p", 2.0);
    spec.q = cfg.num("problem.q", 2.0);
    spec.nonlocal_data = cfg.str("problem.nonlocal_data", "false") == "true";
    spec.dirichlet_truncation = cfg.str("problem.mixed", "false") == "true";
    std::string shift = cfg.str("problem.shift", "auto");
    if (shift == "auto")
        spec.shift_mode = ShiftMode::auto_delta_star;
    else if (shift == "coercive")
        spec.shift_mode = ShiftMode::coercive;
    else if (shift == "none")
        spec.shift_mode = ShiftMode::none;
    else
        throw validation_error("config: problem.shift must be auto, coercive, or none");
    spec.shift_value = cfg.num("problem.shift_value", 0.0);
}

inline std::vector<std::string> requested_checks(const RunConfig& cfg) {
    std::vector<std::string> out;
    std::istringstream is(cfg.str("verify.checks", ""));
    std::string item;
    while (std::getline(is, item, ',')) {
        item = detail_cfg::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// Executes the full pipeline.  Throws validation_error (exit 2),
/// check_failure (exit 1), or numeric_error (exit 3); returns the artifacts
/// on success, with all requested checks recorded as passed.
inline RunArtifacts execute(const RunConfig& cfg, RunMode mode, const RunOptions& opt) {
    cfg.validate();
    RunArtifacts art;
    build_geometry(cfg, opt, art);

    std::ostringstream report;
    report << "# irregularbvp report\n";
    report << "config_hash = " << cfg.hash() << "\n";
    report << "seed = " << opt.seed << "\n";
    report << "mesh.nodes = " << art.mesh.n_nodes() << "\n";
    report << "mesh.triangles = " << art.mesh.triangles.size() << "\n";
    report << "mesh.max_edge = " << fmt17(art.mesh.max_edge_length()) << "\n";
    report << "measure.mass = " << fmt17(art.mu.total_mass) << "\n";

    if (mode == RunMode::gen) {
        std::ostringstream mesh_os, mu_os;
        export_mesh(art.mesh, mesh_os);
        export_measure(art.mu, mu_os);
        detail_run::write_text(opt.out_dir, "mesh.txt", mesh_os.str());
        detail_run::write_text(opt.out_dir, "measure.txt", mu_os.str());
        art.report = report.str();
        detail_run::write_text(opt.out_dir, "report.txt", art.report);
        return art;
    }

    build_problem(cfg, art);
    auto ap = assemble_problem(art.spec);
    report << "constants.c0 = " << fmt17(ap.c0) << "\n";
    report << "constants.delta_star = " << fmt17(ap.shift.delta_star) << "\n";
    report << "constants.shift_used = " << fmt17(ap.bundle.shift) << "\n";
    report << "constants.kappa = " << fmt17(ap.certificate.kappa) << "\n";
    if (ap.shift.c0_star) report << "constants.c0_star = " << fmt17(*ap.shift.c0_star) << "\n";
    if (ap.gamma0 > 0.0) report << "constants.gamma0 = " << fmt17(ap.gamma0) << "\n";

    auto checks = requested_checks(cfg);
    auto record = [&](const std::string& name, bool ok, const std::string& detail) {
        art.checks.emplace_back(name, ok);
        report << "check." << name << " = " << (ok ? "pass" : "fail");
        if (!detail.empty()) report << " (" << detail << ")";
        report << "\n";
    };

    std::string pk = cfg.str("problem.kind", "elliptic");
    std::optional<SolutionField> field;
    std::optional<Trajectory> traj;
    ParabolicData pdata;
    if (pk == "elliptic") {
        field = solve_elliptic(ap);
        report << "solution.residual = " << fmt17(field->residual_norm) << "\n";
        auto row = estimate_report(art.spec, *field);
        if (mode == RunMode::run) {
            std::ostringstream est;
            export_estimate_rows({row}, est);
            detail_run::write_text(opt.out_dir, "estimate.csv", est.str());
        }
        report << "estimate.ratio = " << fmt17(row.ratio) << "\n";
    } else {
        pdata.u0 = detail_run::expr_of(cfg, "problem.u0");
        pdata.f = art.spec.f;
        pdata.g = art.spec.g;
        pdata.p = art.spec.p;
        pdata.q = art.spec.q;
        pdata.kappa1 = cfg.num("problem.kappa1", 2.0);
        pdata.kappa2 = cfg.num("problem.kappa2", 2.0);
        pdata.d = art.mu.dimension_d;
        traj = step_parabolic(art.spec, ap, pdata, cfg.num("problem.T", 1.0),
                              cfg.num("problem.dt", 0.1), cfg.num("problem.theta", 1.0));
        if (mode == RunMode::run) {
            std::ostringstream tr;
            export_trajectory(*traj, tr);
            detail_run::write_text(opt.out_dir, "trajectory.csv", tr.str());
        }
    }

    for (const auto& name : checks) {
        if (name == "coercivity") {
            record(name, ap.certificate.passed, "kappa = " + fmt17(ap.certificate.kappa));
        } else if (name == "positivity") {
            auto rep = verify_inverse_positivity(art.spec);
            record(name, rep.passed, "min_u = " + fmt17(rep.min_u));
        } else if (name == "estimate") {
            bool ok = field.has_value();
            if (ok) {
                auto row = estimate_report(art.spec, *field);
                ok = std::isfinite(row.ratio);
            }
            record(name, ok, "");
        } else if (name == "degiorgi") {
            if (!field) throw validation_error("runner: degiorgi check needs an elliptic solve");
            SequenceConfig scfg;
            scfg.interior.push_back({4.0, 4.0, 1.0});
            scfg.boundary.push_back({4.0, 4.0, 1.0});
            double k_hat = lemma_k_hat(art.mesh, art.mu, field->values, 0.0,
                                       std::max(1.0, ap.gamma0), scfg);
            auto seq = degiorgi_sequence(art.mesh, art.mu, field->values, k_hat, scfg);
            if (mode == RunMode::run) {
                std::ostringstream sq;
                export_sequence(seq, sq);
                detail_run::write_text(opt.out_dir, "sequence.csv", sq.str());
            }
            record(name, seq.converged, "z_last = " + fmt17(seq.z.back()));
        } else if (name == "energy") {
            if (!traj) throw validation_error("runner: energy check needs a parabolic run");
            auto est = energy_estimate_check(*traj);
            bool ok = std::isfinite(est.c_measured) && est.lhs <= est.c_measured * est.rhs + 1e-12;
            record(name, ok, "c = " + fmt17(est.c_measured));
        } else if (name == "linf") {
            if (!traj) throw validation_error("runner: linf check needs a parabolic run");
            auto rep = linf_estimate_check(*traj, LinfWindow::half_tail);
            bool ok = std::isfinite(rep.ratio) && (!rep.assertion_mode || rep.ratio >= 0.0);
            record(name, ok,
                   std::string("ratio = ") + fmt17(rep.ratio) +
                       (rep.assertion_mode ? "" : ", report-only"));
        } else if (name == "mild") {
            if (!traj) throw validation_error("runner: mild check needs a parabolic run");
            double r = mild_solution_residual(*traj);
            bool ok = traj->theta == 1.0 ? r <= 1e-9 : std::isfinite(r);
            record(name, ok, "residual = " + fmt17(r));
        } else if (name == "b_conditions") {
            if (art.spec.coeffs.wentzell.kind == WentzellKind::none)
                throw validation_error("runner: b_conditions check needs a Wentzell form");
            WentzellForm form =
                art.spec.coeffs.wentzell.kind == WentzellKind::koch_graph
                    ? assemble_koch_energy(art.domain, art.mesh, art.spec.coeffs.wentzell.rho)
                    : assemble_riemannian(art.mesh, art.mu, art.spec.coeffs.wentzell.omega,
                                          art.spec.coeffs.wentzell.b_hat,
                                          art.spec.coeffs.wentzell.b_check);
            auto rep = check_B_conditions(form, 200, static_cast<unsigned>(opt.seed));
            record(name, rep.passed(1e-10),
                   "b3 = " + fmt17(rep.max_b3_violation) + ", b4 = " + fmt17(rep.max_b4_violation));
        } else if (name == "a_conditions") {
            if (art.spec.nonlocal == NonlocalChoice::none)
                throw validation_error("runner: a_conditions check needs a nonlocal operator");
            bool ok = true;
            double eta0 = 0.0;
            if (art.spec.nonlocal == NonlocalChoice::dtn) {
                auto op = assemble_dtn(art.mesh, art.spec.coeffs.gamma);
                auto rep = check_A_conditions(op, NonlocalMode::dtn, 200, nullptr, opt.seed);
                ok = rep.passed(1e-9);
                eta0 = rep.eta0;
            } else {
                auto op = assemble_besov_interior(art.mesh, art.spec.besov_s,
                                                  art.spec.coeffs.kernel_a, art.spec.p_tilde);
                auto rep = check_A_conditions(op, NonlocalMode::besov, 200, nullptr, opt.seed);
                ok = rep.passed(1e-9);
                eta0 = rep.eta0;
            }
            report << "constants.eta0 = " << fmt17(eta0) << "\n";
            record(name, ok, "eta0 = " + fmt17(eta0));
        } else {
            throw validation_error("runner: unknown verify check " + name);
        }
    }

    art.report = report.str();
    detail_run::write_text(opt.out_dir, "report.txt", art.report);
    for (const auto& [name, ok] : art.checks)
        if (!ok) throw check_failure("runner: check " + name + " failed; see report.txt");
    return art;
}

}  // namespace ibvp

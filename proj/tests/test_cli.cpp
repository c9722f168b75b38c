#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ibvp/runner.hpp"

using namespace ibvp;

namespace {

RunConfig from_text(const std::string& text) {
    std::istringstream is(text);
    return RunConfig::parse(is);
}

const char* kRobinSquare = R"(# comment line
domain.family = square
domain.mesh_h = 0.25
regime.kind = R
coefficients.beta = "1"
coefficients.s = 2
problem.kind = elliptic
problem.f = "1 + x"   # trailing comment
problem.shift = none
verify.checks = coercivity, positivity, estimate
)";

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("config parser: values, quotes, comments, and failure modes") {
    auto cfg = from_text(kRobinSquare);
    CHECK(cfg.str("domain.family") == "square");
    CHECK(cfg.num("domain.mesh_h", 0.0) == 0.25);
    CHECK(cfg.str("problem.f") == "1 + x");  // quotes stripped, comment cut
    CHECK(cfg.str("missing.key", "fallback") == "fallback");
    CHECK(cfg.integer("coefficients.s", 0) == 2);

    CHECK_THROWS_AS(from_text("no_equals_sign\n"), validation_error);
    CHECK_THROWS_AS(from_text("flatkey = 1\n"), validation_error);
    CHECK_THROWS_AS(from_text("a.b = 1\na.b = 2\n"), validation_error);
    CHECK_THROWS_AS(from_text("a.b = abc\n").num("a.b", 0.0), validation_error);
    CHECK_THROWS_AS(from_text("a.b = 1.5\n").integer("a.b", 0), validation_error);
    CHECK_NOTHROW(from_text("a.b = 1\n").num("a.c", 0.0));
}

TEST_CASE("config hash is deterministic and content-sensitive") {
    auto a = from_text(kRobinSquare);
    auto b = from_text(kRobinSquare);
    CHECK(a.hash() == b.hash());
    auto c = from_text(std::string(kRobinSquare) + "problem.p = 4\n");
    CHECK(a.hash() != c.hash());
}

TEST_CASE("cross-field validation rejects inconsistent configurations") {
    CHECK_THROWS_AS(from_text("domain.family = torus\n").validate(), validation_error);
    CHECK_THROWS_AS(from_text("regime.kind = D\n").validate(), validation_error);
    CHECK_THROWS_AS(from_text("regime.kind = W\n").validate(), validation_error);
    CHECK_THROWS_AS(
        from_text("domain.family = square\nregime.kind = W\nregime.wentzell_kind = koch\n")
            .validate(),
        validation_error);
    CHECK_THROWS_AS(from_text("domain.family = square\nmeasure.kind = self_similar\n").validate(),
                    validation_error);
    CHECK_NOTHROW(from_text(kRobinSquare).validate());
}

TEST_CASE("gen mode emits geometry and measure artifacts only") {
    auto cfg = from_text("domain.family = snowflake\ndomain.level = 1\ndomain.mesh_h = 0.34\n");
    RunOptions opt;
    opt.out_dir = "cli_out_gen";
    auto art = execute(cfg, RunMode::gen, opt);
    CHECK(art.mesh.n_nodes() > 0);
    CHECK(std::filesystem::exists("cli_out_gen/mesh.txt"));
    CHECK(std::filesystem::exists("cli_out_gen/measure.txt"));
    CHECK(std::filesystem::exists("cli_out_gen/report.txt"));
    CHECK_FALSE(std::filesystem::exists("cli_out_gen/estimate.csv"));
    CHECK(art.report.find("config_hash = ") != std::string::npos);
    CHECK(art.report.find("mesh.nodes = ") != std::string::npos);
    std::filesystem::remove_all("cli_out_gen");
}

TEST_CASE("run mode passes on the bundled Robin config and reruns byte-identically") {
    auto cfg = from_text(kRobinSquare);
    RunOptions opt;
    opt.out_dir = "cli_out_a";
    auto art = execute(cfg, RunMode::run, opt);
    for (const auto& [name, ok] : art.checks) {
        INFO(name);
        CHECK(ok);
    }
    CHECK(std::filesystem::exists("cli_out_a/estimate.csv"));
    CHECK(art.report.find("constants.kappa = ") != std::string::npos);

    RunOptions opt2 = opt;
    opt2.out_dir = "cli_out_b";
    execute(cfg, RunMode::run, opt2);
    CHECK(slurp("cli_out_a/estimate.csv") == slurp("cli_out_b/estimate.csv"));
    CHECK(slurp("cli_out_a/report.txt") == slurp("cli_out_b/report.txt"));
    std::filesystem::remove_all("cli_out_a");
    std::filesystem::remove_all("cli_out_b");
}

TEST_CASE("verify mode evaluates checks without emitting CSV artifacts") {
    auto cfg = from_text(kRobinSquare);
    RunOptions opt;
    opt.out_dir = "cli_out_v";
    auto art = execute(cfg, RunMode::verify, opt);
    CHECK(art.checks.size() == 3);
    CHECK_FALSE(std::filesystem::exists("cli_out_v/estimate.csv"));
    CHECK(std::filesystem::exists("cli_out_v/report.txt"));
    std::filesystem::remove_all("cli_out_v");
}

TEST_CASE("parabolic configs drive the theta scheme and its checks") {
    auto cfg = from_text(R"(domain.family = square
domain.mesh_h = 0.25
regime.kind = R
coefficients.beta = "1"
coefficients.s = 2
problem.kind = parabolic
problem.u0 = "x*y"
problem.f = "1"
problem.T = 0.5
problem.dt = 0.1
problem.theta = 1.0
problem.p = 4
problem.q = 4
problem.kappa1 = 4
problem.kappa2 = 8
problem.shift = none
verify.checks = energy, linf, mild
)");
    RunOptions opt;
    opt.out_dir = "cli_out_p";
    auto art = execute(cfg, RunMode::run, opt);
    for (const auto& [name, ok] : art.checks) {
        INFO(name);
        CHECK(ok);
    }
    CHECK(std::filesystem::exists("cli_out_p/trajectory.csv"));
    std::istringstream is(slurp("cli_out_p/trajectory.csv"));
    std::string header;
    REQUIRE(std::getline(is, header));
    CHECK(header == "t,norm2,normInf_interior,normInf_boundary");
    std::filesystem::remove_all("cli_out_p");
}

TEST_CASE("out-of-range tau is a validation failure citing the bound") {
    auto cfg = from_text("domain.family = ramified_g\ndomain.tau = 0.7\ndomain.mesh_h = 0.4\n");
    RunOptions opt;
    opt.out_dir = "cli_out_tau";
    try {
        execute(cfg, RunMode::gen, opt);
        FAIL("expected a validation error");
    } catch (const validation_error& e) {
        CHECK(std::string(e.what()).find("0.593465") != std::string::npos);
    }
    std::filesystem::remove_all("cli_out_tau");
}

TEST_CASE("non-coercive unshifted requests surface as check failures") {
    auto cfg = from_text(R"(domain.family = square
domain.mesh_h = 0.25
regime.kind = N
problem.kind = elliptic
problem.f = "1"
problem.shift = none
)");
    RunOptions opt;
    opt.out_dir = "cli_out_nc";
    CHECK_THROWS_AS(execute(cfg, RunMode::run, opt), check_failure);
    std::filesystem::remove_all("cli_out_nc");
}

TEST_CASE("oversized meshes are refused by the DOF cap") {
    auto cfg = from_text("domain.family = square\ndomain.mesh_h = 0.05\n");
    RunOptions opt;
    opt.out_dir = "cli_out_cap";
    opt.max_dofs = 10;
    CHECK_THROWS_AS(execute(cfg, RunMode::gen, opt), validation_error);
    std::filesystem::remove_all("cli_out_cap");
}

TEST_CASE("unknown verify checks are rejected") {
    auto cfg = from_text(std::string(kRobinSquare) + "extra.unused = 1\n");
    cfg.entries["verify.checks"] = "coercivity, frobnicate";
    RunOptions opt;
    opt.out_dir = "cli_out_u";
    CHECK_THROWS_AS(execute(cfg, RunMode::run, opt), validation_error);
    std::filesystem::remove_all("cli_out_u");
}

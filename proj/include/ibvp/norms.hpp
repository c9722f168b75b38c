#pragma once
// Discrete norms and seminorms: Lebesgue norms on the domain and on the
// measured boundary, pair norms, and fractional (Besov-type) seminorms by
// double quadrature with hierarchical refinement near the singular diagonal.

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"
#include "measure.hpp"

namespace ibvp {

constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail_norms {

/// 7-point degree-5 triangle rule in barycentric coordinates (b1, b2, w),
/// weights summing to 1 (multiply by triangle area).
struct TriPoint {
    double b1, b2, w;
};
inline const std::vector<TriPoint>& tri7() {
    static const std::vector<TriPoint> rule = [] {
        const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
        const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
        std::vector<TriPoint> r;
        r.push_back({1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0});
        r.push_back({a1, b1, w1});
        r.push_back({b1, a1, w1});
        r.push_back({b1, b1, w1});
        r.push_back({a2, b2, w2});
        r.push_back({b2, a2, w2});
        r.push_back({b2, b2, w2});
        return r;
    }();
    return rule;
}

/// 3-point Gauss rule on [0,1]: (t, w) with weights summing to 1.
struct LinePoint {
    double t, w;
};
inline const std::vector<LinePoint>& gauss3() {
    static const std::vector<LinePoint> rule = [] {
        double s = std::sqrt(3.0 / 5.0);
        return std::vector<LinePoint>{
            {0.5 * (1.0 - s), 5.0 / 18.0}, {0.5, 8.0 / 18.0}, {0.5 * (1.0 + s), 5.0 / 18.0}};
    }();
    return rule;
}

}  // namespace detail_norms

/// L^p norm of a piecewise-linear nodal field over the mesh; p = infinity
/// gives the max nodal absolute value.
inline double lp_norm_interior(const Mesh& mesh, const std::vector<double>& u, double p) {
    if (p < 1.0) throw validation_error("lp_norm_interior: p must be >= 1");
    if (u.size() != mesh.n_nodes()) throw validation_error("lp_norm_interior: size mismatch");
    if (p == kInf) {
        double m = 0.0;
        for (double v : u) m = std::max(m, std::fabs(v));
        return m;
    }
    double acc = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tr = mesh.triangles[t];
        double area = mesh.triangle_area(t);
        for (const auto& q : detail_norms::tri7()) {
            double b3 = 1.0 - q.b1 - q.b2;
            double val = q.b1 * u[tr[0]] + q.b2 * u[tr[1]] + b3 * u[tr[2]];
            acc += area * q.w * std::pow(std::fabs(val), p);
        }
    }
    return std::pow(acc, 1.0 / p);
}

/// L^q norm of the boundary trace of a nodal field with respect to the given
/// boundary measure (uniform within each edge at the current resolution).
inline double lq_norm_boundary(const Mesh& mesh, const std::vector<double>& u,
                               const BoundaryMeasure& mu, double q) {
    if (q < 1.0) throw validation_error("lq_norm_boundary: q must be >= 1");
    if (u.size() != mesh.n_nodes()) throw validation_error("lq_norm_boundary: size mismatch");
    if (mu.edge_weights.size() != mesh.boundary_edges.size())
        throw validation_error("lq_norm_boundary: measure does not match mesh boundary");
    if (q == kInf) {
        double m = 0.0;
        for (int i : mesh.boundary_loop) m = std::max(m, std::fabs(u[i]));
        return m;
    }
    double acc = 0.0;
    for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
        const auto& be = mesh.boundary_edges[e];
        for (const auto& g : detail_norms::gauss3()) {
            double val = (1.0 - g.t) * u[be.a] + g.t * u[be.b];
            acc += mu.edge_weights[e] * g.w * std::pow(std::fabs(val), q);
        }
    }
    return std::pow(acc, 1.0 / q);
}

enum class PairMode { finite, sup };

/// Combined data norm: sum of components for finite exponents, max for the
/// sup-norm pair.
inline double pair_norm(double f_norm, double g_norm, PairMode mode) {
    if (f_norm < 0.0 || g_norm < 0.0) throw validation_error("pair_norm: negative input");
    return mode == PairMode::finite ? f_norm + g_norm : std::max(f_norm, g_norm);
}

namespace detail_norms {

struct SubTri {
    Vec2 a, b, c;     // physical corners
    double ua, ub, uc;  // field values at corners
    double area() const { return 0.5 * (b - a).cross(c - a); }
    Vec2 centroid() const { return (a + b + c) * (1.0 / 3.0); }
    double ucenter() const { return (ua + ub + uc) / 3.0; }
    double diam() const {
        return std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
    }
};

/// Contribution of one ordered pair of (sub)triangles to the double integral
/// of |u(x)-u(y)|^p / |x-y|^expo.  Near/singular pairs are refined by
/// uniform 4-way subdivision; the exactly coincident deepest pairs are
/// dropped (the numerator vanishes quadratically there).
inline double pair_integral(const SubTri& s, const SubTri& t, double p, double expo, int depth) {
    Vec2 cs = s.centroid(), ct = t.centroid();
    double dist = (cs - ct).norm();
    double sep = s.diam() + t.diam();
    if (dist > sep || depth == 0) {
        if (dist <= 1e-14) return 0.0;  // coincident pair at the finest level
        double diff = std::fabs(s.ucenter() - t.ucenter());
        return std::pow(diff, p) / std::pow(dist, expo) * s.area() * t.area();
    }
    auto split = [](const SubTri& q) {
        Vec2 mab = 0.5 * (q.a + q.b), mbc = 0.5 * (q.b + q.c), mca = 0.5 * (q.c + q.a);
        double uab = 0.5 * (q.ua + q.ub), ubc = 0.5 * (q.ub + q.uc), uca = 0.5 * (q.uc + q.ua);
        return std::array<SubTri, 4>{SubTri{q.a, mab, mca, q.ua, uab, uca},
                                     SubTri{mab, q.b, mbc, uab, q.ub, ubc},
                                     SubTri{mca, mbc, q.c, uca, ubc, q.uc},
                                     SubTri{mab, mbc, mca, uab, ubc, uca}};
    };
    auto ss = split(s);
    auto tt = split(t);
    double acc = 0.0;
    for (const auto& a : ss)
        for (const auto& b : tt) acc += pair_integral(a, b, p, expo, depth - 1);
    return acc;
}

struct SubEdge {
    Vec2 a, b;
    double ua, ub;
    double weight;  // measure mass carried by this piece
    Vec2 mid() const { return 0.5 * (a + b); }
    double umid() const { return 0.5 * (ua + ub); }
    double len() const { return (b - a).norm(); }
};

inline double edge_pair_integral(const SubEdge& s, const SubEdge& t, double p, double expo,
                                 int depth) {
    Vec2 cs = s.mid(), ct = t.mid();
    double dist = (cs - ct).norm();
    double sep = s.len() + t.len();
    if (dist > sep || depth == 0) {
        if (dist <= 1e-14) return 0.0;
        double diff = std::fabs(s.umid() - t.umid());
        return std::pow(diff, p) / std::pow(dist, expo) * s.weight * t.weight;
    }
    auto split = [](const SubEdge& q) {
        Vec2 m = q.mid();
        double um = q.umid();
        return std::array<SubEdge, 2>{SubEdge{q.a, m, q.ua, um, 0.5 * q.weight},
                                      SubEdge{m, q.b, um, q.ub, 0.5 * q.weight}};
    };
    auto ss = split(s);
    auto tt = split(t);
    double acc = 0.0;
    for (const auto& a : ss)
        for (const auto& b : tt) acc += edge_pair_integral(a, b, p, expo, depth - 1);
    return acc;
}

}  // namespace detail_norms

/// Interior Besov-type seminorm: (double integral of
/// |u(x)-u(y)|^p / |x-y|^{sp+N})^{1/p} with N = 2.
inline double besov_seminorm_interior(const Mesh& mesh, const std::vector<double>& u, double s,
                                      double p) {
    if (!(s > 0.0 && s < 1.0))
        throw validation_error("besov_seminorm_interior: fractional order must be in (0,1)");
    if (p < 1.0) throw validation_error("besov_seminorm_interior: p must be >= 1");
    if (u.size() != mesh.n_nodes())
        throw validation_error("besov_seminorm_interior: size mismatch");
    const double expo = s * p + 2.0;
    const std::size_t nt = mesh.triangles.size();
    std::vector<detail_norms::SubTri> tris(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        const auto& tr = mesh.triangles[t];
        tris[t] = {mesh.nodes[tr[0]], mesh.nodes[tr[1]], mesh.nodes[tr[2]],
                   u[tr[0]],          u[tr[1]],          u[tr[2]]};
    }
    std::vector<double> row_acc(nt, 0.0);
    parallel_blocks(nt, [&](std::size_t i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < nt; ++j)
            acc += detail_norms::pair_integral(tris[i], tris[j], p, expo, 4);
        row_acc[i] = acc;
    });
    double total = 0.0;
    for (double v : row_acc) total += v;
    return std::pow(total, 1.0 / p);
}

/// Boundary Besov-type seminorm against a boundary measure: (double integral
/// of |u(x)-u(y)|^p / |x-y|^{p+2d-N} dmu dmu)^{1/p} with N = 2.
inline double besov_seminorm_boundary(const Mesh& mesh, const std::vector<double>& u,
                                      const BoundaryMeasure& mu, double d, double p) {
    if (p < 1.0) throw validation_error("besov_seminorm_boundary: p must be >= 1");
    if (u.size() != mesh.n_nodes())
        throw validation_error("besov_seminorm_boundary: size mismatch");
    if (mu.edge_weights.size() != mesh.boundary_edges.size())
        throw validation_error("besov_seminorm_boundary: measure does not match mesh boundary");
    const double expo = p + 2.0 * d - 2.0;
    const std::size_t ne = mesh.boundary_edges.size();
    std::vector<detail_norms::SubEdge> edges(ne);
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& be = mesh.boundary_edges[e];
        edges[e] = {mesh.nodes[be.a], mesh.nodes[be.b], u[be.a], u[be.b], mu.edge_weights[e]};
    }
    std::vector<double> row_acc(ne, 0.0);
    parallel_blocks(ne, [&](std::size_t i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < ne; ++j)
            acc += detail_norms::edge_pair_integral(edges[i], edges[j], p, expo, 6);
        row_acc[i] = acc;
    });
    double total = 0.0;
    for (double v : row_acc) total += v;
    return std::pow(total, 1.0 / p);
}

/// Flat report of the norms of one field; serialized as `name,exponent,value`.
struct NormReport {
    std::map<double, double> lp_interior;
    std::map<double, double> lq_boundary;
    double linf_interior = 0.0;
    double linf_boundary = 0.0;
    std::optional<std::pair<double, double>> besov_interior;  // (order, value)
    std::optional<std::pair<double, double>> besov_boundary;
};

inline NormReport norm_report(const Mesh& mesh, const std::vector<double>& u,
                              const BoundaryMeasure& mu, const std::vector<double>& interior_ps,
                              const std::vector<double>& boundary_qs) {
    NormReport r;
    for (double p : interior_ps) r.lp_interior[p] = lp_norm_interior(mesh, u, p);
    for (double q : boundary_qs) r.lq_boundary[q] = lq_norm_boundary(mesh, u, mu, q);
    r.linf_interior = lp_norm_interior(mesh, u, kInf);
    r.linf_boundary = lq_norm_boundary(mesh, u, mu, kInf);
    return r;
}

inline void export_norm_report_csv(const NormReport& r, std::ostream& os) {
    os << "name,exponent,value\n";
    for (const auto& [p, v] : r.lp_interior)
        os << "lp_interior," << fmt17(p) << "," << fmt17(v) << "\n";
    for (const auto& [q, v] : r.lq_boundary)
        os << "lq_boundary," << fmt17(q) << "," << fmt17(v) << "\n";
    os << "linf_interior,inf," << fmt17(r.linf_interior) << "\n";
    os << "linf_boundary,inf," << fmt17(r.linf_boundary) << "\n";
    if (r.besov_interior)
        os << "besov_interior," << fmt17(r.besov_interior->first) << ","
           << fmt17(r.besov_interior->second) << "\n";
    if (r.besov_boundary)
        os << "besov_boundary," << fmt17(r.besov_boundary->first) << ","
           << fmt17(r.besov_boundary->second) << "\n";
}

}  // namespace ibvp

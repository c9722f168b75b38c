#pragma once
// Prefractal boundary generation (iterated function systems), polygonal
// domains (Koch snowflake, ramified trees, simple polygons) and a
// deterministic constrained Delaunay mesher.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "core.hpp"

namespace ibvp {

constexpr double kSnapTol = 1e-12;

// ---------------------------------------------------------------------------
// Similitudes and prefractal curves
// ---------------------------------------------------------------------------

/// Contracting scaled isometry x -> A x + b with A = ratio * (rotation or
/// reflection).
struct Similitude {
    double a11 = 1, a12 = 0, a21 = 0, a22 = 1;
    double tx = 0, ty = 0;

    Vec2 apply(const Vec2& p) const {
        return {a11 * p.x + a12 * p.y + tx, a21 * p.x + a22 * p.y + ty};
    }

    /// Operator norm of the linear part; for a valid similitude both singular
    /// values coincide with this value.
    double ratio() const {
        double c1 = a11 * a11 + a21 * a21;
        double c2 = a12 * a12 + a22 * a22;
        return std::sqrt(std::max(c1, c2));
    }

    /// True when the linear part is (numerically) a scalar multiple of an
    /// orthogonal matrix with ratio in (0,1).
    bool is_contracting_similitude(double tol = 1e-10) const {
        double c1 = a11 * a11 + a21 * a21;
        double c2 = a12 * a12 + a22 * a22;
        double dot = a11 * a12 + a21 * a22;
        double r = std::sqrt(0.5 * (c1 + c2));
        return std::fabs(c1 - c2) <= tol && std::fabs(dot) <= tol && r > 0.0 && r < 1.0;
    }

    static Similitude scale_rotate(double scale, double angle, double tx, double ty) {
        Similitude s;
        s.a11 = scale * std::cos(angle);
        s.a12 = -scale * std::sin(angle);
        s.a21 = scale * std::sin(angle);
        s.a22 = scale * std::cos(angle);
        s.tx = tx;
        s.ty = ty;
        return s;
    }

    Similitude compose(const Similitude& o) const {  // this ∘ o
        Similitude r;
        r.a11 = a11 * o.a11 + a12 * o.a21;
        r.a12 = a11 * o.a12 + a12 * o.a22;
        r.a21 = a21 * o.a11 + a22 * o.a21;
        r.a22 = a21 * o.a12 + a22 * o.a22;
        Vec2 t = apply({o.tx, o.ty});
        r.tx = t.x;
        r.ty = t.y;
        return r;
    }
};

/// Finite-level approximation of a self-similar curve: an ordered polyline
/// whose vertices are the level-h IFS points.
struct PrefractalCurve {
    int level = 0;
    std::vector<Vec2> vertices;       // ordered chain; edge i = (v[i], v[i+1])
    std::vector<Similitude> generator;

    std::size_t edge_count() const { return vertices.empty() ? 0 : vertices.size() - 1; }
    double edge_length(std::size_t i) const { return (vertices[i + 1] - vertices[i]).norm(); }
};

constexpr int kMaxKochLevel = 8;
constexpr int kMaxRamifiedLevel = 6;
constexpr double kTauStar = 0.593465;

/// The four ratio-1/3 contractions of the Koch curve on the unit segment
/// (0,0)-(1,0), bump towards positive y.
inline std::vector<Similitude> koch_generator() {
    const double s = 1.0 / 3.0;
    const double c60 = 0.5, s60 = std::sqrt(3.0) / 2.0;
    std::vector<Similitude> g(4);
    g[0] = Similitude::scale_rotate(s, 0.0, 0.0, 0.0);
    g[1] = Similitude::scale_rotate(s, 0.0, 1.0 / 3.0, 0.0);
    g[1].a11 = s * c60;
    g[1].a12 = -s * s60;
    g[1].a21 = s * s60;
    g[1].a22 = s * c60;
    g[2] = Similitude::scale_rotate(s, 0.0, 0.5, std::sqrt(3.0) / 6.0);
    g[2].a11 = s * c60;
    g[2].a12 = s * s60;
    g[2].a21 = -s * s60;
    g[2].a22 = s * c60;
    g[3] = Similitude::scale_rotate(s, 0.0, 2.0 / 3.0, 0.0);
    return g;
}

/// Chain refinement: image of the whole level-h chain under each generator
/// map, concatenated in map order with junction points deduplicated.
inline std::vector<Vec2> refine_chain(const std::vector<Vec2>& chain,
                                      const std::vector<Similitude>& gen) {
    std::vector<Vec2> out;
    out.reserve((chain.size() - 1) * gen.size() + 1);
    for (const auto& m : gen) {
        for (const auto& v : chain) {
            Vec2 p = m.apply(v);
            if (!out.empty() && (out.back() - p).norm() <= kSnapTol) continue;
            out.push_back(p);
        }
    }
    return out;
}

/// Level-h Koch curve between (0,0) and (1,0): 4^h equal edges of length 3^-h.
inline PrefractalCurve koch_curve(int level) {
    if (level < 0) throw validation_error("koch_curve: level must be nonnegative");
    if (level > kMaxKochLevel)
        throw validation_error("koch_curve: level " + std::to_string(level) +
                               " exceeds maximum " + std::to_string(kMaxKochLevel));
    PrefractalCurve c;
    c.level = level;
    c.generator = koch_generator();
    c.vertices = {{0.0, 0.0}, {1.0, 0.0}};
    for (int h = 0; h < level; ++h) c.vertices = refine_chain(c.vertices, c.generator);
    return c;
}

// ---------------------------------------------------------------------------
// Polygonal domains
// ---------------------------------------------------------------------------

enum class EdgeTag : int { fractal = 0, truncation = 1 };

/// Simple closed polygon with per-edge tags; edge i joins vertex i and
/// vertex (i+1) mod n, oriented counterclockwise (interior on the left).
struct PolygonalDomain {
    std::vector<Vec2> vertices;
    std::vector<EdgeTag> tags;  // one per edge
    int level = 0;
    /// Number of generator maps per boundary cell (4 for Koch pieces, 0 when
    /// the boundary is not self-similar); used by the self-similar measure.
    int ifs_maps = 0;

    std::size_t edge_count() const { return vertices.size(); }
    Vec2 edge_a(std::size_t i) const { return vertices[i]; }
    Vec2 edge_b(std::size_t i) const { return vertices[(i + 1) % vertices.size()]; }
    double edge_length(std::size_t i) const { return (edge_b(i) - edge_a(i)).norm(); }

    double signed_area() const {
        double a = 0.0;
        for (std::size_t i = 0; i < vertices.size(); ++i) a += edge_a(i).cross(edge_b(i));
        return 0.5 * a;
    }

    double perimeter() const {
        double s = 0.0;
        for (std::size_t i = 0; i < edge_count(); ++i) s += edge_length(i);
        return s;
    }

    double diameter() const {
        double d = 0.0;
        for (std::size_t i = 0; i < vertices.size(); ++i)
            for (std::size_t j = i + 1; j < vertices.size(); ++j)
                d = std::max(d, (vertices[i] - vertices[j]).norm());
        return d;
    }

    /// Crossing-number point-in-polygon test (points on the boundary are
    /// resolved arbitrarily; callers query strictly interior points).
    bool contains(const Vec2& p) const {
        bool in = false;
        const std::size_t n = vertices.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Vec2& a = vertices[i];
            const Vec2& b = vertices[j];
            if ((a.y > p.y) != (b.y > p.y)) {
                double xc = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if (p.x < xc) in = !in;
            }
        }
        return in;
    }

    /// Segment-intersection sweep: true iff no two non-adjacent edges cross.
    bool is_simple() const;
};

namespace detail_geo {

inline int orient_sign(const Vec2& a, const Vec2& b, const Vec2& c) {
    long double v = (static_cast<long double>(b.x) - a.x) * (static_cast<long double>(c.y) - a.y) -
                    (static_cast<long double>(b.y) - a.y) * (static_cast<long double>(c.x) - a.x);
    const long double tol = 1e-18L;
    if (v > tol) return 1;
    if (v < -tol) return -1;
    return 0;
}

/// Proper (interior) crossing of open segments ab and cd.
inline bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    int o1 = orient_sign(a, b, c);
    int o2 = orient_sign(a, b, d);
    int o3 = orient_sign(c, d, a);
    int o4 = orient_sign(c, d, b);
    return o1 * o2 < 0 && o3 * o4 < 0;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    Vec2 ab = b - a;
    double len2 = ab.dot(ab);
    double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    Vec2 q = a + t * ab;
    return (p - q).norm();
}

}  // namespace detail_geo

inline bool PolygonalDomain::is_simple() const {
    const std::size_t n = vertices.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            // Skip adjacent edges (sharing a vertex).
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (detail_geo::segments_cross(edge_a(i), edge_b(i), edge_a(j), edge_b(j)))
                return false;
        }
    }
    return true;
}

/// Maps the reference Koch chain on (0,0)-(1,0) onto the segment p->q, with
/// the bump towards the right of the travel direction (outward for a
/// counterclockwise polygon).
inline void append_mapped_chain(std::vector<Vec2>& out, const std::vector<Vec2>& chain,
                                const Vec2& p, const Vec2& q) {
    Vec2 t = q - p;
    Vec2 nr{t.y, -t.x};  // right normal
    for (const auto& v : chain) {
        Vec2 w = p + v.x * t + v.y * nr;
        if (!out.empty() && (out.back() - w).norm() <= kSnapTol) continue;
        out.push_back(w);
    }
}

/// Koch snowflake at prefractal level h: three Koch curves erected outward on
/// the sides of the unit equilateral triangle A1 A3 A5, counterclockwise.
inline PolygonalDomain koch_snowflake(int level) {
    if (level < 0) throw validation_error("koch_snowflake: level must be nonnegative");
    if (level > kMaxKochLevel)
        throw validation_error("koch_snowflake: level exceeds maximum " +
                               std::to_string(kMaxKochLevel));
    const Vec2 A1{0.0, 0.0}, A3{1.0, 0.0}, A5{0.5, std::sqrt(3.0) / 2.0};
    const std::vector<Vec2> chain = koch_curve(level).vertices;
    PolygonalDomain d;
    d.level = level;
    d.ifs_maps = 4;
    append_mapped_chain(d.vertices, chain, A1, A3);
    d.vertices.pop_back();  // corner A3 re-added by next side
    append_mapped_chain(d.vertices, chain, A3, A5);
    d.vertices.pop_back();
    append_mapped_chain(d.vertices, chain, A5, A1);
    d.vertices.pop_back();  // closing corner A1 equals vertex 0
    d.tags.assign(d.vertices.size(), EdgeTag::fractal);
    return d;
}

/// Axis-aligned unit square [0,1]^2, counterclockwise.
inline PolygonalDomain unit_square() {
    PolygonalDomain d;
    d.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    d.tags.assign(4, EdgeTag::fractal);
    return d;
}

/// Regular n-gon inscribed in the circle of given radius, counterclockwise,
/// first vertex at angle 0.
inline PolygonalDomain regular_ngon(int n, double radius = 1.0) {
    if (n < 3) throw validation_error("regular_ngon: need n >= 3");
    PolygonalDomain d;
    d.vertices.reserve(n);
    for (int k = 0; k < n; ++k) {
        double a = 2.0 * kPi * k / n;
        d.vertices.push_back({radius * std::cos(a), radius * std::sin(a)});
    }
    d.tags.assign(static_cast<std::size_t>(n), EdgeTag::fractal);
    return d;
}

enum class RamifiedFamily { F, G };

namespace detail_geo {

inline Similitude ramified_F(int i) {  // i in {1,2}
    Similitude s;
    s.a11 = 0.5;
    s.a12 = 0.0;
    s.a21 = 0.0;
    s.a22 = 0.5;
    s.tx = (i == 1 ? -1.5 : 1.5);
    s.ty = 3.0;
    return s;
}

inline Similitude ramified_G(int i, double tau) {  // i in {1,2}
    const double a = tau / std::sqrt(2.0);
    Similitude s;
    if (i == 1) {
        s.a11 = a;
        s.a12 = -a;
        s.a21 = a;
        s.a22 = a;
        s.tx = -(1.0 - a);
    } else {
        s.a11 = a;
        s.a12 = a;
        s.a21 = -a;
        s.a22 = a;
        s.tx = (1.0 - a);
    }
    s.ty = 1.0 + a;
    return s;
}

struct RamifiedBuilder {
    std::vector<Vec2> verts;
    std::vector<EdgeTag> tags;

    void add_vertex(const Vec2& p) {
        if (!verts.empty() && (verts.back() - p).norm() <= kSnapTol) return;
        verts.push_back(p);
    }
    void add_edge_to(const Vec2& p, EdgeTag tag) {
        add_vertex(p);
        tags.push_back(tag);
    }

    // Walks the boundary of one F-cell counterclockwise from its bottom-right
    // corner T(1,0) to its bottom-left corner T(-1,0); children attach on the
    // two outer quarters of the top edge.
    void walk_F(const Similitude& T, int depth) {
        add_edge_to(T.apply({1, 2}), EdgeTag::fractal);
        add_edge_to(T.apply({2, 2}), EdgeTag::fractal);
        add_edge_to(T.apply({2, 3}), EdgeTag::fractal);
        if (depth == 0) {
            add_edge_to(T.apply({1, 3}), EdgeTag::truncation);
        } else {
            walk_F(T.compose(ramified_F(2)), depth - 1);
        }
        add_edge_to(T.apply({-1, 3}), EdgeTag::fractal);
        if (depth == 0) {
            add_edge_to(T.apply({-2, 3}), EdgeTag::truncation);
        } else {
            walk_F(T.compose(ramified_F(1)), depth - 1);
        }
        add_edge_to(T.apply({-2, 2}), EdgeTag::fractal);
        add_edge_to(T.apply({-1, 2}), EdgeTag::fractal);
        add_edge_to(T.apply({-1, 0}), EdgeTag::fractal);
    }

    // Same traversal for a G-cell (convex hull of P1..P6); children attach on
    // the hull edges P4->P6 and P5->P3.
    void walk_G(const Similitude& T, int depth, double tau) {
        const double a = tau / std::sqrt(2.0);
        const Vec2 P1{-1, 0}, P3{-1, 1}, P4{1, 1};
        const Vec2 P5{-1 + 2 * a, 1 + 2 * a}, P6{1 - 2 * a, 1 + 2 * a};
        add_edge_to(T.apply(P4), EdgeTag::fractal);
        if (depth == 0) {
            add_edge_to(T.apply(P6), EdgeTag::truncation);
        } else {
            walk_G(T.compose(ramified_G(2, tau)), depth - 1, tau);
        }
        add_edge_to(T.apply(P5), EdgeTag::fractal);
        if (depth == 0) {
            add_edge_to(T.apply(P3), EdgeTag::truncation);
        } else {
            walk_G(T.compose(ramified_G(1, tau)), depth - 1, tau);
        }
        add_edge_to(T.apply(P1), EdgeTag::fractal);
    }
};

}  // namespace detail_geo

/// Level-n truncation of the ramified tree domain generated by the F or G
/// similitude pair.  Truncation edges (where the next generation of cells
/// would attach) are tagged for the homogeneous-Dirichlet mask of the mixed
/// problems.
inline PolygonalDomain ramified_domain(RamifiedFamily family, double tau, int level) {
    if (level < 0) throw validation_error("ramified_domain: level must be nonnegative");
    if (level > kMaxRamifiedLevel)
        throw validation_error("ramified_domain: level exceeds maximum " +
                               std::to_string(kMaxRamifiedLevel));
    if (family == RamifiedFamily::G && (tau < 0.5 || tau >= kTauStar))
        throw validation_error("ramified_domain: tau=" + fmt17(tau) +
                               " outside the admissible range 1/2 <= tau < tau* = 0.593465");
    detail_geo::RamifiedBuilder b;
    Similitude id;
    if (family == RamifiedFamily::F) {
        b.add_vertex({-1, 0});
        b.add_edge_to({1, 0}, EdgeTag::fractal);
        b.walk_F(id, level);
    } else {
        b.add_vertex({-1, 0});
        b.add_edge_to({1, 0}, EdgeTag::fractal);
        b.walk_G(id, level, tau);
    }
    // The walk closes at the starting vertex; drop the duplicate and tie the
    // final edge back to vertex 0.
    if ((b.verts.back() - b.verts.front()).norm() <= kSnapTol) {
        b.verts.pop_back();
    }
    PolygonalDomain d;
    d.vertices = std::move(b.verts);
    d.tags = std::move(b.tags);
    if (d.tags.size() != d.vertices.size())
        throw numeric_error("ramified_domain: inconsistent boundary walk");
    d.level = level;
    d.ifs_maps = 2;
    return d;
}

// ---------------------------------------------------------------------------
// Mesh
// ---------------------------------------------------------------------------

struct BoundaryEdge {
    int a = -1;                 // node indices (consecutive on the loop)
    int b = -1;
    EdgeTag tag = EdgeTag::fractal;
    int parent_edge = -1;       // index of the domain polygon edge it refines
};

struct Mesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;   // CCW
    std::vector<BoundaryEdge> boundary_edges;    // ordered along the loop
    std::vector<int> boundary_loop;              // ordered boundary node ids
    std::vector<char> is_boundary;               // per node

    std::size_t n_nodes() const { return nodes.size(); }

    double triangle_area(std::size_t t) const {
        const Vec2& a = nodes[triangles[t][0]];
        const Vec2& b = nodes[triangles[t][1]];
        const Vec2& c = nodes[triangles[t][2]];
        return 0.5 * (b - a).cross(c - a);
    }

    double max_edge_length() const {
        double m = 0.0;
        for (const auto& t : triangles)
            for (int e = 0; e < 3; ++e)
                m = std::max(m, (nodes[t[e]] - nodes[t[(e + 1) % 3]]).norm());
        return m;
    }

    std::vector<int> interior_nodes() const {
        std::vector<int> v;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (!is_boundary[i]) v.push_back(static_cast<int>(i));
        return v;
    }
};

namespace detail_geo {

/// Strict incircle test: > 0 iff p lies inside the circumcircle of CCW
/// triangle (a, b, c); evaluated in extended precision.
inline long double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
    long double ax = a.x - p.x, ay = a.y - p.y;
    long double bx = b.x - p.x, by = b.y - p.y;
    long double cx = c.x - p.x, cy = c.y - p.y;
    long double a2 = ax * ax + ay * ay;
    long double b2 = bx * bx + by * by;
    long double c2 = cx * cx + cy * cy;
    return ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx);
}

struct DelaunayMesher {
    std::vector<Vec2> pts;
    std::vector<std::array<int, 3>> tris;  // CCW, lazily deleted via alive
    std::vector<char> alive;

    void bowyer_watson(const std::vector<int>& order) {
        // Super-triangle enclosing everything by a wide margin.
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        for (const auto& p : pts) {
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
        double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
        double r = std::max({xmax - xmin, ymax - ymin, 1.0}) * 64.0;
        int s0 = static_cast<int>(pts.size());
        pts.push_back({cx - 2.0 * r, cy - r});
        pts.push_back({cx + 2.0 * r, cy - r});
        pts.push_back({cx, cy + 2.0 * r});
        tris.push_back({s0, s0 + 1, s0 + 2});
        alive.push_back(1);

        for (int pi : order) {
            const Vec2& p = pts[pi];
            // Cavity: all alive triangles whose circumcircle strictly
            // contains p.
            std::vector<int> cavity;
            for (std::size_t t = 0; t < tris.size(); ++t) {
                if (!alive[t]) continue;
                if (incircle(pts[tris[t][0]], pts[tris[t][1]], pts[tris[t][2]], p) > 0.0L)
                    cavity.push_back(static_cast<int>(t));
            }
            // Boundary of the cavity: edges appearing exactly once.
            std::vector<std::array<int, 2>> bedges;
            for (int t : cavity) {
                for (int e = 0; e < 3; ++e) {
                    int u = tris[t][e], v = tris[t][(e + 1) % 3];
                    bool shared = false;
                    for (int t2 : cavity) {
                        if (t2 == t) continue;
                        for (int e2 = 0; e2 < 3; ++e2) {
                            if (tris[t2][e2] == v && tris[t2][(e2 + 1) % 3] == u) {
                                shared = true;
                                break;
                            }
                        }
                        if (shared) break;
                    }
                    if (!shared) bedges.push_back({u, v});
                }
            }
            for (int t : cavity) alive[t] = 0;
            for (const auto& be : bedges) {
                tris.push_back({be[0], be[1], pi});
                alive.push_back(1);
            }
        }
    }

    bool has_edge(int a, int b) const {
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!alive[t]) continue;
            for (int e = 0; e < 3; ++e) {
                int u = tris[t][e], v = tris[t][(e + 1) % 3];
                if ((u == a && v == b) || (u == b && v == a)) return true;
            }
        }
        return false;
    }

    /// Finds the pair of triangles sharing edge (u, v); returns false if the
    /// edge is on the hull.
    bool find_pair(int u, int v, int& t1, int& t2) const {
        t1 = t2 = -1;
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!alive[t]) continue;
            for (int e = 0; e < 3; ++e) {
                int a = tris[t][e], b = tris[t][(e + 1) % 3];
                if (a == u && b == v) t1 = static_cast<int>(t);
                if (a == v && b == u) t2 = static_cast<int>(t);
            }
        }
        return t1 >= 0 && t2 >= 0;
    }

    int third_vertex(int t, int u, int v) const {
        for (int e = 0; e < 3; ++e)
            if (tris[t][e] != u && tris[t][e] != v) return tris[t][e];
        return -1;
    }

    /// Restores constraint segment (a, b) by flipping crossing diagonals.
    void ensure_edge(int a, int b) {
        for (int guard = 0; guard < 4096; ++guard) {
            if (has_edge(a, b)) return;
            // Collect edges properly crossing segment a-b.
            bool flipped = false;
            for (std::size_t t = 0; t < tris.size() && !flipped; ++t) {
                if (!alive[t]) continue;
                for (int e = 0; e < 3 && !flipped; ++e) {
                    int u = tris[t][e], v = tris[t][(e + 1) % 3];
                    if (u > v) continue;
                    if (u == a || u == b || v == a || v == b) continue;
                    if (!segments_cross(pts[a], pts[b], pts[u], pts[v])) continue;
                    int t1, t2;
                    if (!find_pair(u, v, t1, t2)) continue;
                    int p = third_vertex(t1, u, v);
                    int q = third_vertex(t2, u, v);
                    // Flip only when the quad is strictly convex.
                    if (!segments_cross(pts[p], pts[q], pts[u], pts[v])) continue;
                    alive[t1] = 0;
                    alive[t2] = 0;
                    tris.push_back({u, q, p});
                    alive.push_back(1);
                    tris.push_back({v, p, q});
                    alive.push_back(1);
                    flipped = true;
                }
            }
            if (!flipped && !has_edge(a, b))
                throw numeric_error("triangulate: constraint edge recovery stalled");
        }
        if (!has_edge(a, b)) throw numeric_error("triangulate: constraint edge not recovered");
    }
};

}  // namespace detail_geo

/// Conforming triangulation of a simple polygon: every polygon edge appears
/// as a union of mesh boundary edges; deterministic for fixed inputs.
inline Mesh triangulate(const PolygonalDomain& domain, double target_h) {
    if (target_h <= 0.0) throw validation_error("triangulate: target_h must be positive");
    if (domain.vertices.size() < 3 || std::fabs(domain.signed_area()) < 1e-14)
        throw validation_error("triangulate: degenerate polygon");
    if (domain.signed_area() < 0.0)
        throw validation_error("triangulate: polygon must be counterclockwise");
    if (!domain.is_simple()) throw validation_error("triangulate: polygon is not simple");

    Mesh mesh;
    // 1. Refined boundary loop (split each polygon edge into equal parts of
    //    length <= target_h).
    std::vector<int> sub_parent;
    std::vector<EdgeTag> sub_tag;
    for (std::size_t e = 0; e < domain.edge_count(); ++e) {
        Vec2 a = domain.edge_a(e), b = domain.edge_b(e);
        int parts = std::max(1, static_cast<int>(std::ceil((b - a).norm() / target_h - 1e-12)));
        for (int k = 0; k < parts; ++k) {
            Vec2 p = a + (static_cast<double>(k) / parts) * (b - a);
            mesh.nodes.push_back(p);
            sub_parent.push_back(static_cast<int>(e));
            sub_tag.push_back(domain.tags[e]);
        }
    }
    const int n_bnd = static_cast<int>(mesh.nodes.size());

    // 2. Interior grid points (aligned grid, kept away from the boundary).
    const double g = 0.58 * target_h;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& p : domain.vertices) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    std::vector<Vec2> interior;
    for (double yy = ymin + g; yy < ymax - 0.5 * g; yy += g) {
        for (double xx = xmin + g; xx < xmax - 0.5 * g; xx += g) {
            Vec2 p{xx, yy};
            if (!domain.contains(p)) continue;
            double dmin = 1e300;
            for (int be = 0; be < n_bnd; ++be) {
                const Vec2& a = mesh.nodes[be];
                const Vec2& b = mesh.nodes[(be + 1) % n_bnd];
                dmin = std::min(dmin, detail_geo::point_segment_distance(p, a, b));
                if (dmin < 0.55 * g) break;
            }
            if (dmin >= 0.55 * g) interior.push_back(p);
        }
    }
    auto lex_less = [](const Vec2& a, const Vec2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    };
    std::sort(interior.begin(), interior.end(), lex_less);

    // 3-5. Delaunay triangulation (lexicographic insertion), boundary
    // constraint recovery and inside-filter; overlong edges are split at
    // their midpoints and the triangulation is rebuilt until the max-edge
    // bound holds.
    for (int pass = 0;; ++pass) {
        mesh.nodes.resize(n_bnd);
        for (const auto& p : interior) mesh.nodes.push_back(p);
        mesh.triangles.clear();

        detail_geo::DelaunayMesher dm;
        dm.pts = mesh.nodes;
        std::vector<int> order(mesh.nodes.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return lex_less(mesh.nodes[a], mesh.nodes[b]);
        });
        dm.bowyer_watson(order);
        for (int be = 0; be < n_bnd; ++be) dm.ensure_edge(be, (be + 1) % n_bnd);

        // Keep interior triangles only (drop super-triangle vertices and
        // triangles whose centroid is outside the polygon).
        for (std::size_t t = 0; t < dm.tris.size(); ++t) {
            if (!dm.alive[t]) continue;
            const auto& tr = dm.tris[t];
            if (tr[0] >= static_cast<int>(mesh.nodes.size()) ||
                tr[1] >= static_cast<int>(mesh.nodes.size()) ||
                tr[2] >= static_cast<int>(mesh.nodes.size()))
                continue;
            Vec2 c = (mesh.nodes[tr[0]] + mesh.nodes[tr[1]] + mesh.nodes[tr[2]]) * (1.0 / 3.0);
            if (!domain.contains(c)) continue;
            std::array<int, 3> out = tr;
            Vec2 ab = mesh.nodes[out[1]] - mesh.nodes[out[0]];
            Vec2 ac = mesh.nodes[out[2]] - mesh.nodes[out[0]];
            if (ab.cross(ac) < 0.0) std::swap(out[1], out[2]);
            mesh.triangles.push_back(out);
        }

        // Split any edge still longer than target_h at its midpoint.
        std::vector<Vec2> added;
        for (const auto& t : mesh.triangles) {
            for (int e = 0; e < 3; ++e) {
                int u = t[e], v = t[(e + 1) % 3];
                if (u > v) continue;
                if ((mesh.nodes[u] - mesh.nodes[v]).norm() <= target_h * (1.0 + 1e-12)) continue;
                Vec2 mid = 0.5 * (mesh.nodes[u] + mesh.nodes[v]);
                bool dup = false;
                for (const auto& q : added)
                    if ((q - mid).norm() <= kSnapTol) {
                        dup = true;
                        break;
                    }
                if (!dup) added.push_back(mid);
            }
        }
        if (added.empty()) break;
        if (pass >= 12) throw numeric_error("triangulate: max-edge refinement did not converge");
        interior.insert(interior.end(), added.begin(), added.end());
        std::sort(interior.begin(), interior.end(), lex_less);
    }
    if (mesh.triangles.empty()) throw numeric_error("triangulate: produced no triangles");
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
        if (mesh.triangle_area(t) <= 0.0)
            throw numeric_error("triangulate: nonpositive triangle area");

    // 6. Boundary bookkeeping.
    mesh.is_boundary.assign(mesh.nodes.size(), 0);
    for (int be = 0; be < n_bnd; ++be) {
        mesh.is_boundary[be] = 1;
        mesh.boundary_loop.push_back(be);
        BoundaryEdge edge;
        edge.a = be;
        edge.b = (be + 1) % n_bnd;
        edge.tag = sub_tag[be];
        edge.parent_edge = sub_parent[be];
        mesh.boundary_edges.push_back(edge);
    }
    return mesh;
}

/// Plain-text mesh export: NODES / TRIANGLES / BOUNDARY sections.
inline void export_mesh(const Mesh& mesh, std::ostream& os) {
    os << "NODES " << mesh.nodes.size() << "\n";
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
        os << i << " " << fmt17(mesh.nodes[i].x) << " " << fmt17(mesh.nodes[i].y) << "\n";
    os << "TRIANGLES " << mesh.triangles.size() << "\n";
    for (const auto& t : mesh.triangles) os << t[0] << " " << t[1] << " " << t[2] << "\n";
    os << "BOUNDARY " << mesh.boundary_edges.size() << "\n";
    for (const auto& e : mesh.boundary_edges)
        os << e.a << " " << e.b << " "
           << (e.tag == EdgeTag::truncation ? "truncation" : "fractal") << "\n";
}

inline void export_mesh_file(const Mesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw validation_error("export_mesh_file: cannot open " + path);
    export_mesh(mesh, os);
}

}  // namespace ibvp

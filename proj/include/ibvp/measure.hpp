#pragma once
// Boundary measures: self-similar (equal weight per prefractal cell) and
// arc-length, plus the upper-Ahlfors diagnostic and closed-form fractal
// dimensions.

#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"

namespace ibvp {

/// Measure on the boundary of a domain (or on a standalone curve), stored as
/// one positive weight per boundary edge at the current resolution.
struct BoundaryMeasure {
    std::vector<double> edge_weights;
    double dimension_d = 1.0;
    double total_mass = 0.0;

    void recompute_mass() {
        total_mass = 0.0;
        for (double w : edge_weights) total_mass += w;
    }
    void validate() const {
        double s = 0.0;
        for (double w : edge_weights) {
            if (!(w > 0.0)) throw validation_error("BoundaryMeasure: nonpositive edge weight");
            s += w;
        }
        if (std::fabs(s - total_mass) > 1e-12 * std::max(1.0, std::fabs(total_mass)))
            throw validation_error("BoundaryMeasure: total_mass inconsistent with edge weights");
    }
};

struct AhlforsReport {
    std::vector<double> radii;
    std::vector<double> sup_ratio;
    double M0_estimate = 0.0;
};

/// Equal-weight self-similar measure on a level-h curve: each of the m^h
/// cells carries mass m^{-h}; the whole curve is a probability measure.
inline BoundaryMeasure self_similar_measure(const PrefractalCurve& curve, int level) {
    if (curve.level != level)
        throw validation_error("self_similar_measure: curve level " +
                               std::to_string(curve.level) + " does not match requested level " +
                               std::to_string(level));
    const std::size_t m = curve.generator.size();
    if (m < 2) throw validation_error("self_similar_measure: curve has no generator");
    BoundaryMeasure mu;
    double w = std::pow(static_cast<double>(m), -static_cast<double>(level));
    mu.edge_weights.assign(curve.edge_count(), w);
    mu.dimension_d =
        std::log(static_cast<double>(m)) / std::log(1.0 / curve.generator[0].ratio());
    mu.recompute_mass();
    return mu;
}

/// Self-similar measure on the boundary of a prefractal polygon: each edge is
/// a level-h cell of an m-map IFS with the given contraction ratio, so it
/// carries weight m^{-h}.  For the snowflake (three probability curves) the
/// total mass is 3.
inline BoundaryMeasure self_similar_measure(const PolygonalDomain& domain,
                                            double contraction_ratio) {
    if (domain.ifs_maps < 2)
        throw validation_error("self_similar_measure: domain boundary is not self-similar");
    if (!(contraction_ratio > 0.0 && contraction_ratio < 1.0))
        throw validation_error("self_similar_measure: contraction ratio must be in (0,1)");
    BoundaryMeasure mu;
    double w = std::pow(static_cast<double>(domain.ifs_maps), -static_cast<double>(domain.level));
    mu.edge_weights.assign(domain.edge_count(), w);
    mu.dimension_d = std::log(static_cast<double>(domain.ifs_maps)) / std::log(1.0 / contraction_ratio);
    mu.recompute_mass();
    return mu;
}

/// One-dimensional Hausdorff (arc-length) measure on the polygon boundary.
inline BoundaryMeasure arc_length_measure(const PolygonalDomain& domain) {
    BoundaryMeasure mu;
    mu.edge_weights.resize(domain.edge_count());
    for (std::size_t e = 0; e < domain.edge_count(); ++e) mu.edge_weights[e] = domain.edge_length(e);
    mu.dimension_d = 1.0;
    mu.recompute_mass();
    return mu;
}

/// Arc-length measure on a standalone curve.
inline BoundaryMeasure arc_length_measure(const PrefractalCurve& curve) {
    BoundaryMeasure mu;
    mu.edge_weights.resize(curve.edge_count());
    for (std::size_t e = 0; e < curve.edge_count(); ++e) mu.edge_weights[e] = curve.edge_length(e);
    mu.dimension_d = 1.0;
    mu.recompute_mass();
    return mu;
}

/// Arc-length measure on the boundary edges of a mesh.
inline BoundaryMeasure arc_length_measure_for(const Mesh& mesh) {
    BoundaryMeasure mu;
    mu.edge_weights.resize(mesh.boundary_edges.size());
    for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e)
        mu.edge_weights[e] =
            (mesh.nodes[mesh.boundary_edges[e].b] - mesh.nodes[mesh.boundary_edges[e].a]).norm();
    mu.dimension_d = 1.0;
    mu.recompute_mass();
    return mu;
}

/// Transfers a per-polygon-edge measure onto the (possibly finer) mesh
/// boundary: each sub-edge takes its parent's weight prorated by arc-length
/// fraction (the measure is uniform within one cell at this resolution).
inline BoundaryMeasure measure_on_mesh(const BoundaryMeasure& domain_mu,
                                       const PolygonalDomain& domain, const Mesh& mesh) {
    if (domain_mu.edge_weights.size() != domain.edge_count())
        throw validation_error("measure_on_mesh: measure does not match domain");
    BoundaryMeasure mu;
    mu.dimension_d = domain_mu.dimension_d;
    mu.edge_weights.resize(mesh.boundary_edges.size());
    for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
        const auto& be = mesh.boundary_edges[e];
        double sub = (mesh.nodes[be.b] - mesh.nodes[be.a]).norm();
        double parent = domain.edge_length(be.parent_edge);
        mu.edge_weights[e] = domain_mu.edge_weights[be.parent_edge] * (sub / parent);
    }
    mu.recompute_mass();
    return mu;
}

namespace detail_measure {

/// Fraction (in arc length) of segment a-b inside the closed ball B(x, r).
inline double segment_ball_fraction(const Vec2& a, const Vec2& b, const Vec2& x, double r) {
    Vec2 d = b - a;
    double len2 = d.dot(d);
    if (len2 <= 0.0) return ((a - x).norm() <= r) ? 1.0 : 0.0;
    Vec2 f = a - x;
    // |f + t d|^2 <= r^2  <=>  len2 t^2 + 2 f.d t + (|f|^2 - r^2) <= 0
    double bq = f.dot(d);
    double cq = f.dot(f) - r * r;
    double disc = bq * bq - len2 * cq;
    if (disc <= 0.0) return 0.0;
    double sq = std::sqrt(disc);
    double t0 = std::max(0.0, (-bq - sq) / len2);
    double t1 = std::min(1.0, (-bq + sq) / len2);
    return std::max(0.0, t1 - t0);
}

}  // namespace detail_measure

/// Evaluates sup over boundary vertices x of mu(B(x,r) ∩ Γ) / r^d for each
/// radius, prorating partially covered edges by intersected arc fraction.
inline AhlforsReport ahlfors_diagnostic(const BoundaryMeasure& mu,
                                        const std::vector<Vec2>& edge_a,
                                        const std::vector<Vec2>& edge_b, double d,
                                        const std::vector<double>& radii) {
    if (radii.empty()) throw validation_error("ahlfors_diagnostic: empty radius list");
    if (edge_a.size() != mu.edge_weights.size() || edge_b.size() != mu.edge_weights.size())
        throw validation_error("ahlfors_diagnostic: geometry/measure size mismatch");
    for (double r : radii)
        if (!(r > 0.0)) throw validation_error("ahlfors_diagnostic: radii must be positive");

    // Candidate centers: all edge endpoints.
    std::vector<Vec2> centers = edge_a;

    AhlforsReport rep;
    rep.radii = radii;
    rep.sup_ratio.assign(radii.size(), 0.0);
    std::vector<double> block_max(centers.size() * radii.size(), 0.0);
    parallel_blocks(centers.size(), [&](std::size_t c) {
        for (std::size_t ri = 0; ri < radii.size(); ++ri) {
            double mass = 0.0;
            for (std::size_t e = 0; e < mu.edge_weights.size(); ++e)
                mass += mu.edge_weights[e] *
                        detail_measure::segment_ball_fraction(edge_a[e], edge_b[e], centers[c],
                                                              radii[ri]);
            block_max[c * radii.size() + ri] = mass / std::pow(radii[ri], d);
        }
    });
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (std::size_t ri = 0; ri < radii.size(); ++ri)
            rep.sup_ratio[ri] = std::max(rep.sup_ratio[ri], block_max[c * radii.size() + ri]);
    rep.M0_estimate = 0.0;
    for (double v : rep.sup_ratio) rep.M0_estimate = std::max(rep.M0_estimate, v);
    return rep;
}

inline AhlforsReport ahlfors_diagnostic(const BoundaryMeasure& mu, const PolygonalDomain& domain,
                                        double d, const std::vector<double>& radii) {
    std::vector<Vec2> a, b;
    for (std::size_t e = 0; e < domain.edge_count(); ++e) {
        a.push_back(domain.edge_a(e));
        b.push_back(domain.edge_b(e));
    }
    return ahlfors_diagnostic(mu, a, b, d, radii);
}

inline AhlforsReport ahlfors_diagnostic(const BoundaryMeasure& mu, const PrefractalCurve& curve,
                                        double d, const std::vector<double>& radii) {
    std::vector<Vec2> a, b;
    for (std::size_t e = 0; e < curve.edge_count(); ++e) {
        a.push_back(curve.vertices[e]);
        b.push_back(curve.vertices[e + 1]);
    }
    return ahlfors_diagnostic(mu, a, b, d, radii);
}

enum class FractalFamily { koch, ramified_G };

/// Closed-form boundary dimension: log4/log3 for the Koch curve, -log2/log(tau)
/// for the second ramified family.
inline double hausdorff_dimension(FractalFamily family, double tau = 0.0) {
    if (family == FractalFamily::koch) return std::log(4.0) / std::log(3.0);
    if (tau < 0.5 || tau >= kTauStar)
        throw validation_error("hausdorff_dimension: tau=" + fmt17(tau) +
                               " outside the admissible range 1/2 <= tau < tau*");
    return -std::log(2.0) / std::log(tau);
}

inline void export_measure(const BoundaryMeasure& mu, std::ostream& os) {
    for (std::size_t e = 0; e < mu.edge_weights.size(); ++e)
        os << e << " " << fmt17(mu.edge_weights[e]) << "\n";
}

inline void export_ahlfors_csv(const AhlforsReport& rep, std::ostream& os) {
    os << "r,sup_ratio\n";
    for (std::size_t i = 0; i < rep.radii.size(); ++i)
        os << fmt17(rep.radii[i]) << "," << fmt17(rep.sup_ratio[i]) << "\n";
}

}  // namespace ibvp

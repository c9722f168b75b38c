#pragma once
// Truncation diagnostics: Moser-type test functions, level-set measures, the
// (y_n, z_n) De Giorgi sequences, the iteration-lemma recursion bound, and
// the level recipe that drives the sequences below threshold.

#include <cmath>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "measure.hpp"
#include "moser.hpp"
#include "norms.hpp"

namespace ibvp {

/// A Sobolev interpolation pair (r, s) with 1/r + N/(2s) = N/4, plus the
/// positive exponent theta attached to it by the coercivity estimate.
struct SobolevPair {
    double r = 0.0;
    double s = 0.0;
    double theta = 1.0;
};

struct SequenceConfig {
    std::vector<SobolevPair> interior;   // pairs (r_1, s_1)
    std::vector<SobolevPair> boundary;   // pairs (r_2, s_2)
    double delta = 1.0;                  // 2/N exponent of the recursion (N = 2)
    double b = 8.0;
    double n_dim = 2.0;                  // ambient dimension N
    int n_max = 12;
    double threshold = 1e-8;

    void validate() const {
        if (interior.empty() && boundary.empty())
            throw validation_error("SequenceConfig: need at least one Sobolev pair");
        auto check = [&](const SobolevPair& p) {
            if (!(p.r > 0.0) || !(p.s > 0.0) || !(p.theta > 0.0))
                throw validation_error("SequenceConfig: pair entries must be positive");
            double lhs = 1.0 / p.r + n_dim / (2.0 * p.s);
            if (std::fabs(lhs - n_dim / 4.0) > 1e-10)
                throw validation_error("SequenceConfig: pair (" + fmt17(p.r) + ", " + fmt17(p.s) +
                                       ") violates 1/r + N/(2s) = N/4");
        };
        for (const auto& p : interior) check(p);
        for (const auto& p : boundary) check(p);
        if (!(delta > 0.0) || !(b >= 1.0)) throw validation_error("SequenceConfig: need delta > 0, b >= 1");
    }

    /// The common exponent: minimum over all configured pair exponents.
    double theta() const {
        double t = kInf;
        for (const auto& p : interior) t = std::min(t, p.theta);
        for (const auto& p : boundary) t = std::min(t, p.theta);
        return t;
    }
};

/// Nodal Moser test functions w_m = psi_{k/2,m}(u), v_m = psi_{k-1,m}(u).
/// The pair satisfies w_m^2 = u v_m both on {0 <= u <= m} and on {u >= m};
/// that identity is verified nodally before returning.
inline std::pair<std::vector<double>, std::vector<double>> moser_test_functions(
    const std::vector<double>& u, double k, double m) {
    if (!(k >= 2.0)) throw validation_error("moser_test_functions: need k >= 2");
    if (!(m >= 1.0)) throw validation_error("moser_test_functions: need m >= 1");
    std::vector<double> w(u.size()), v(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        w[i] = moser_psi(u[i], k / 2.0, m);
        v[i] = moser_psi(u[i], k - 1.0, m);
        double lhs = w[i] * w[i], rhs = u[i] * v[i];
        if (u[i] > 0.0 && std::fabs(lhs - rhs) > 1e-12 * std::max(1.0, std::fabs(rhs)))
            throw numeric_error("moser_test_functions: identity w^2 = u v failed at a node");
    }
    return {std::move(w), std::move(v)};
}

struct LevelSet {
    std::vector<double> uk;     // nodal (u - k)^+
    double omega_measure = 0.0;  // |{u > k}| by quadrature-point fractions
    double gamma_measure = 0.0;  // mu({u > k} on the boundary), same surrogate
};

/// Level-set field and measures.  The measures count the fraction of
/// quadrature points whose interpolated value exceeds k; monotone in k by
/// construction, and exact in the limit of refinement.
inline LevelSet level_sets(const Mesh& mesh, const BoundaryMeasure& mu,
                           const std::vector<double>& u, double k) {
    if (u.size() != static_cast<std::size_t>(mesh.n_nodes()))
        throw validation_error("level_sets: field size mismatch");
    LevelSet ls;
    ls.uk.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) ls.uk[i] = std::max(u[i] - k, 0.0);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tr = mesh.triangles[t];
        double area = mesh.triangle_area(t);
        int above = 0, total = 0;
        for (const auto& q : detail_norms::tri7()) {
            double b3 = 1.0 - q.b1 - q.b2;
            double val = q.b1 * u[tr[0]] + q.b2 * u[tr[1]] + b3 * u[tr[2]];
            ++total;
            if (val > k) ++above;
        }
        ls.omega_measure += area * static_cast<double>(above) / total;
    }
    for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
        const auto& be = mesh.boundary_edges[e];
        int above = 0, total = 0;
        for (const auto& g : detail_norms::gauss3()) {
            double val = (1.0 - g.t) * u[be.a] + g.t * u[be.b];
            ++total;
            if (val > k) ++above;
        }
        ls.gamma_measure += mu.edge_weights[e] * static_cast<double>(above) / total;
    }
    return ls;
}

struct TruncationSequence {
    double k_hat = 0.0;
    std::vector<double> levels;  // k_n = (2 - 2^{-n}) k_hat
    std::vector<double> y;       // k_hat^{-2} ||u_{k_n}||_2^2
    std::vector<double> z;       // sum of level-set measures raised to 2/s
    double theta = 0.0;
    bool converged = false;
};

/// The De Giorgi diagnostic sequences for a solved nodal field.
inline TruncationSequence degiorgi_sequence(const Mesh& mesh, const BoundaryMeasure& mu,
                                            const std::vector<double>& u, double k_hat,
                                            const SequenceConfig& cfg) {
    cfg.validate();
    if (!(k_hat > 0.0)) throw validation_error("degiorgi_sequence: need k_hat > 0");
    TruncationSequence seq;
    seq.k_hat = k_hat;
    seq.theta = cfg.theta();
    for (int n = 0; n <= cfg.n_max; ++n) {
        double kn = (2.0 - std::pow(2.0, -n)) * k_hat;
        auto ls = level_sets(mesh, mu, u, kn);
        double l2 = lp_norm_interior(mesh, ls.uk, 2.0);
        double zn = 0.0;
        for (const auto& p : cfg.interior) zn += std::pow(ls.omega_measure, 2.0 / p.s);
        for (const auto& p : cfg.boundary) zn += std::pow(ls.gamma_measure, 2.0 / p.s);
        seq.levels.push_back(kn);
        seq.y.push_back(l2 * l2 / (k_hat * k_hat));
        seq.z.push_back(zn);
    }
    seq.converged = seq.z.back() < cfg.threshold;
    return seq;
}

/// The level recipe: eta and d from the iteration-lemma constants, c'' from
/// the global measures, and k_hat as the maximum of the two competing terms.
inline double lemma_k_hat(const Mesh& mesh, const BoundaryMeasure& mu,
                          const std::vector<double>& u, double k_hat0, double gamma0,
                          const SequenceConfig& cfg, double c = 1.0) {
    cfg.validate();
    if (!(gamma0 > 0.0) || !(c > 0.0) || k_hat0 < 0.0)
        throw validation_error("lemma_k_hat: need gamma0, c > 0 and k_hat0 >= 0");
    double theta = cfg.theta();
    double d = std::min(cfg.delta, theta / (1.0 + theta));
    double eta = std::min(std::pow(2.0 * c, -1.0 / cfg.delta) * std::pow(cfg.b, -1.0 / (cfg.delta * d)),
                          std::pow(2.0 * c, -(1.0 + theta) / theta) * std::pow(cfg.b, -1.0 / (theta * d)));
    double omega_total = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) omega_total += mesh.triangle_area(t);
    double gamma_total = 0.0;
    for (double w : mu.edge_weights) gamma_total += w;
    double sum = 0.0;
    for (const auto& p : cfg.interior) sum += std::pow(omega_total, 2.0 * (1.0 + theta) / p.s);
    for (const auto& p : cfg.boundary) sum += std::pow(gamma_total, 2.0 * (1.0 + theta) / p.s);
    double c2 = c * gamma0 * std::max(1.0, sum);
    double l2 = lp_norm_interior(mesh, u, 2.0);
    double head = l2 / std::sqrt(eta);
    double tail = std::sqrt(c2) * std::pow(eta, -1.0 / (2.0 * (1.0 + theta))) *
                      std::sqrt(l2 * l2 + k_hat0 * k_hat0) +
                  k_hat0;
    return std::max(head, tail);
}

struct Lemma2Result {
    std::vector<double> y, z, bound;  // bound_n = eta b^{-n/b}
    double d = 0.0;
    double eta = 0.0;
    bool applicable = false;  // y0 <= eta and z0 <= eta^{1/(1+eps)}
    bool verified = false;    // applicable and y_n within bound for all n
};

/// Equality dynamics of the two-sequence iteration lemma:
///   y_{n+1} = c b^n (y^{1+delta} + z^{1+eps} y^delta),
///   z_{n+1} = c b^n (y + z^{1+eps}),
/// checked against the decay bound whenever the smallness hypothesis on
/// (y0, z0) holds.  When it does not, the recursion is still iterated and
/// the result reports the lemma as inapplicable.
inline Lemma2Result lemma2_recursion(double y0, double z0, double c, double b, double eps,
                                     double delta, int n_max = 50) {
    if (!(c > 0.0) || !(b >= 1.0) || !(eps > 0.0) || !(delta > 0.0))
        throw validation_error("lemma2_recursion: need c, eps, delta > 0 and b >= 1");
    if (y0 < 0.0 || z0 < 0.0)
        throw validation_error("lemma2_recursion: sequences must start nonnegative");
    Lemma2Result res;
    res.d = std::min(delta, eps / (1.0 + eps));
    res.eta = std::min(std::pow(2.0 * c, -1.0 / delta) * std::pow(b, -1.0 / (delta * res.d)),
                       std::pow(2.0 * c, -(1.0 + eps) / eps) * std::pow(b, -1.0 / (eps * res.d)));
    res.applicable = y0 <= res.eta && z0 <= std::pow(res.eta, 1.0 / (1.0 + eps));
    double y = y0, z = z0;
    res.verified = true;
    for (int n = 0; n <= n_max; ++n) {
        double bn = res.eta * std::pow(b, -static_cast<double>(n) / b);
        res.y.push_back(y);
        res.z.push_back(z);
        res.bound.push_back(bn);
        if (y > bn * (1.0 + 1e-12) || z > std::pow(bn, 1.0 / (1.0 + eps)) * (1.0 + 1e-12))
            res.verified = false;
        double gain = c * std::pow(b, n);
        double y_next = gain * (std::pow(y, 1.0 + delta) + std::pow(z, 1.0 + eps) * std::pow(y, delta));
        double z_next = gain * (y + std::pow(z, 1.0 + eps));
        y = y_next;
        z = z_next;
    }
    res.verified = res.verified && res.applicable;
    return res;
}

/// CSV export: `n,k_n,y_n,z_n`.
inline void export_sequence(const TruncationSequence& seq, std::ostream& os) {
    os << "n,k_n,y_n,z_n\n";
    for (std::size_t n = 0; n < seq.levels.size(); ++n)
        os << n << ',' << fmt17(seq.levels[n]) << ',' << fmt17(seq.y[n]) << ',' << fmt17(seq.z[n])
           << '\n';
}

}  // namespace ibvp

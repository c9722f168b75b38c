#pragma once
// Sparse/dense operator containers shared by all assembly code, with
// MatrixMarket coordinate export and Eigen conversion.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "core.hpp"

namespace ibvp {

/// Coordinate-format sparse operator.  Entries are kept sorted by (row, col)
/// with duplicates pre-summed after compress().
struct SparseOperator {
    struct Entry {
        int row;
        int col;
        double value;
    };
    int dimension = 0;
    std::vector<Entry> entries;
    bool symmetric_flag = false;

    void add(int r, int c, double v) {
        if (r < 0 || r >= dimension || c < 0 || c >= dimension)
            throw validation_error("SparseOperator: index out of range");
        if (v != 0.0) entries.push_back({r, c, v});
    }

    void compress() {
        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            return a.row < b.row || (a.row == b.row && a.col < b.col);
        });
        std::vector<Entry> out;
        out.reserve(entries.size());
        for (const auto& e : entries) {
            if (!out.empty() && out.back().row == e.row && out.back().col == e.col)
                out.back().value += e.value;
            else
                out.push_back(e);
        }
        entries = std::move(out);
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        if (static_cast<int>(x.size()) != dimension)
            throw validation_error("SparseOperator: size mismatch in apply");
        std::vector<double> y(dimension, 0.0);
        for (const auto& e : entries) y[e.row] += e.value * x[e.col];
        return y;
    }

    /// Bilinear form u^T A v.
    double form(const std::vector<double>& u, const std::vector<double>& v) const {
        auto av = apply(v);
        double s = 0.0;
        for (int i = 0; i < dimension; ++i) s += u[i] * av[i];
        return s;
    }

    std::vector<double> row_sums() const {
        std::vector<double> s(dimension, 0.0);
        for (const auto& e : entries) s[e.row] += e.value;
        return s;
    }

    double sum_entries() const {
        double s = 0.0;
        for (const auto& e : entries) s += e.value;
        return s;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, std::fabs(e.value));
        return m;
    }

    SparseOperator transpose() const {
        SparseOperator t;
        t.dimension = dimension;
        t.symmetric_flag = symmetric_flag;
        t.entries.reserve(entries.size());
        for (const auto& e : entries) t.entries.push_back({e.col, e.row, e.value});
        t.compress();
        return t;
    }

    /// In-place axpy: this += c * other (dimensions must match).
    void axpy(double c, const SparseOperator& other) {
        if (other.dimension != dimension)
            throw validation_error("SparseOperator: dimension mismatch in axpy");
        for (const auto& e : other.entries) entries.push_back({e.row, e.col, c * e.value});
        compress();
    }

    Eigen::SparseMatrix<double> to_eigen() const {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(entries.size());
        for (const auto& e : entries) trip.emplace_back(e.row, e.col, e.value);
        Eigen::SparseMatrix<double> m(dimension, dimension);
        m.setFromTriplets(trip.begin(), trip.end());
        return m;
    }

    Eigen::MatrixXd to_dense_eigen() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dimension, dimension);
        for (const auto& e : entries) m(e.row, e.col) += e.value;
        return m;
    }

    static SparseOperator identity(int n) {
        SparseOperator s;
        s.dimension = n;
        s.symmetric_flag = true;
        for (int i = 0; i < n; ++i) s.entries.push_back({i, i, 1.0});
        return s;
    }
};

/// Dense operator (nonlocal matrices), row-major.
struct DenseOperator {
    int dimension = 0;
    std::vector<double> values;  // dimension * dimension, row-major

    void resize(int n) {
        dimension = n;
        values.assign(static_cast<std::size_t>(n) * n, 0.0);
    }
    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * dimension + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * dimension + c]; }

    std::vector<double> apply(const std::vector<double>& x) const {
        if (static_cast<int>(x.size()) != dimension)
            throw validation_error("DenseOperator: size mismatch in apply");
        std::vector<double> y(dimension, 0.0);
        for (int r = 0; r < dimension; ++r) {
            double s = 0.0;
            const double* row = &values[static_cast<std::size_t>(r) * dimension];
            for (int c = 0; c < dimension; ++c) s += row[c] * x[c];
            y[r] = s;
        }
        return y;
    }

    double form(const std::vector<double>& u, const std::vector<double>& v) const {
        auto av = apply(v);
        double s = 0.0;
        for (int i = 0; i < dimension; ++i) s += u[i] * av[i];
        return s;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::fabs(v));
        return m;
    }

    double max_abs_row_sum() const {
        double m = 0.0;
        for (int r = 0; r < dimension; ++r) {
            double s = 0.0;
            for (int c = 0; c < dimension; ++c) s += at(r, c);
            m = std::max(m, std::fabs(s));
        }
        return m;
    }

    double asymmetry() const {  // max |A - A^T|
        double m = 0.0;
        for (int r = 0; r < dimension; ++r)
            for (int c = r + 1; c < dimension; ++c)
                m = std::max(m, std::fabs(at(r, c) - at(c, r)));
        return m;
    }

    Eigen::MatrixXd to_eigen() const {
        Eigen::MatrixXd m(dimension, dimension);
        for (int r = 0; r < dimension; ++r)
            for (int c = 0; c < dimension; ++c) m(r, c) = at(r, c);
        return m;
    }
};

/// MatrixMarket coordinate export (1-based indices, 17 significant digits).
inline void export_matrix_market(const SparseOperator& op, std::ostream& os) {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << op.dimension << " " << op.dimension << " " << op.entries.size() << "\n";
    for (const auto& e : op.entries)
        os << e.row + 1 << " " << e.col + 1 << " " << fmt17(e.value) << "\n";
}

inline void export_matrix_market(const DenseOperator& op, std::ostream& os) {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << op.dimension << " " << op.dimension << " "
       << static_cast<std::size_t>(op.dimension) * op.dimension << "\n";
    for (int r = 0; r < op.dimension; ++r)
        for (int c = 0; c < op.dimension; ++c)
            os << r + 1 << " " << c + 1 << " " << fmt17(op.at(r, c)) << "\n";
}

template <typename Op>
inline void export_matrix_market_file(const Op& op, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw validation_error("export_matrix_market_file: cannot open " + path);
    export_matrix_market(op, os);
}

/// Solves the sparse SPD (or general) system A x = b with a direct
/// factorization; throws numeric_error on failure.
inline std::vector<double> sparse_solve(const SparseOperator& a, const std::vector<double>& b) {
    Eigen::SparseMatrix<double> m = a.to_eigen();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(m);
    if (lu.info() != Eigen::Success) throw numeric_error("sparse_solve: factorization failed");
    Eigen::VectorXd rhs(a.dimension);
    for (int i = 0; i < a.dimension; ++i) rhs[i] = b[i];
    Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw numeric_error("sparse_solve: solve failed");
    std::vector<double> out(a.dimension);
    for (int i = 0; i < a.dimension; ++i) out[i] = x[i];
    return out;
}

/// Smallest eigenvalue of the symmetric generalized problem A v = lambda B v
/// with B symmetric positive definite; dense (desk-scale) solve.
inline double smallest_generalized_eigenvalue(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                              Eigen::VectorXd* vec = nullptr) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()),
                                                                 0.5 * (b + b.transpose()));
    if (es.info() != Eigen::Success)
        throw numeric_error("smallest_generalized_eigenvalue: eigen-solver failed");
    if (vec) *vec = es.eigenvectors().col(0);
    return es.eigenvalues()(0);
}

}  // namespace ibvp

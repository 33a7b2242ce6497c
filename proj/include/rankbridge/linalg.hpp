#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "rankbridge/tensor.hpp"

namespace rankbridge {

/// Row-echelon state over a field. Rows are stored reduced (each pivot column
/// is eliminated from every other stored row), so rank queries and membership
/// tests are incremental: push rows one at a time and watch the rank.
///
/// Pivot choice uses the field's pivot_weight: exact fields take the first
/// nonzero entry, the real field takes the entry of largest magnitude, which
/// keeps elimination stable enough for the tolerant comparisons downstream.
template <FieldType F>
class RowEchelon {
public:
    using Value = typename F::Value;

    /// Rows are `width` long; pivots are only ever chosen among the first
    /// `pivot_limit` columns (defaults to all). Augmented systems set the
    /// limit to the coefficient width so a constants column never hosts a
    /// pivot, which magnitude-based pivoting over the reals would otherwise
    /// happily do.
    RowEchelon(F field, std::size_t width, std::size_t pivot_limit)
        : field_(std::move(field)), width_(width), pivot_limit_(pivot_limit) {}
    RowEchelon(F field, std::size_t width) : RowEchelon(std::move(field), width, width) {}

    std::size_t width() const { return width_; }
    std::size_t rank() const { return rows_.size(); }
    const std::vector<std::size_t>& pivot_columns() const { return pivots_; }

    /// Reduces `row` against the stored rows in place.
    void reduce(std::vector<Value>& row) const {
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const Value& c = row[pivots_[r]];
            if (field_.is_zero(c)) continue;
            Value factor = c; // pivot entries are normalized to one
            for (std::size_t j = 0; j < width_; ++j)
                row[j] = field_.sub(row[j], field_.mul(factor, rows_[r][j]));
        }
    }

    /// True when `row` lies in the span of the rows pushed so far.
    bool contains(std::vector<Value> row) const {
        reduce(row);
        for (const Value& v : row)
            if (!field_.is_zero(v)) return false;
        return true;
    }

    /// Pushes a row; returns true when it enlarged the span.
    bool push(std::vector<Value> row) {
        if (row.size() != width_)
            throw ShapeMismatch("row of length " + std::to_string(row.size()) +
                                " pushed into echelon of width " + std::to_string(width_));
        reduce(row);
        std::size_t pivot = width_;
        double best = 0.0;
        for (std::size_t j = 0; j < pivot_limit_; ++j) {
            double w = field_.pivot_weight(row[j]);
            if (w > best) {
                best = w;
                pivot = j;
            }
        }
        if (pivot == width_) return false;

        Value inv = field_.inv(row[pivot]);
        for (std::size_t j = 0; j < width_; ++j)
            row[j] = field_.mul(inv, row[j]);
        row[pivot] = field_.one(); // exact one even under roundoff
        // eliminate the new pivot column from the stored rows
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const Value c = rows_[r][pivot];
            if (field_.is_zero(c)) continue;
            for (std::size_t j = 0; j < width_; ++j)
                rows_[r][j] = field_.sub(rows_[r][j], field_.mul(c, row[j]));
        }
        rows_.push_back(std::move(row));
        pivots_.push_back(pivot);
        return true;
    }

    const std::vector<std::vector<Value>>& rows() const { return rows_; }

private:
    F field_;
    std::size_t width_;
    std::size_t pivot_limit_;
    std::vector<std::vector<Value>> rows_;
    std::vector<std::size_t> pivots_;
};

/// Rank of a list of vectors (each of length `width`).
template <FieldType F>
std::size_t span_rank(const F& field, std::size_t width,
                      const std::vector<std::vector<typename F::Value>>& vectors) {
    RowEchelon<F> ech(field, width);
    for (const auto& v : vectors) ech.push(v);
    return ech.rank();
}

namespace detail {

inline std::size_t real_matrix_rank(const Reals& field, std::size_t rows, std::size_t cols,
                                    const std::vector<double>& entries) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                entries[i * cols + j];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double cutoff = field.tolerance() * sv(0);
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++r;
    return r;
}

} // namespace detail

/// Rank of an order-2 tensor. Exact fields use Gaussian elimination; the real
/// field counts singular values above tolerance * sigma_max.
template <FieldType F>
std::size_t matrix_rank(const DenseTensor<F>& m) {
    if (m.order() != 2)
        throw ShapeMismatch("matrix_rank needs an order-2 tensor, got order " +
                            std::to_string(m.order()));
    const std::size_t rows = m.shape()[0], cols = m.shape()[1];
    if constexpr (std::is_same_v<F, Reals>) {
        return detail::real_matrix_rank(m.field(), rows, cols, m.entries());
    } else {
        RowEchelon<F> ech(m.field(), cols);
        for (std::size_t i = 0; i < rows; ++i) {
            std::vector<typename F::Value> row(m.entries().begin() + i * cols,
                                               m.entries().begin() + (i + 1) * cols);
            ech.push(std::move(row));
            if (ech.rank() == std::min(rows, cols)) break;
        }
        return ech.rank();
    }
}

/// Solves M x = b for one solution, where M is rows x cols given row-major.
/// Returns nullopt when the system is inconsistent. Free variables are set to
/// zero, so the answer is deterministic.
template <FieldType F>
std::optional<std::vector<typename F::Value>> solve_linear(
    const F& field, std::size_t rows, std::size_t cols,
    const std::vector<typename F::Value>& m, const std::vector<typename F::Value>& b) {
    using Value = typename F::Value;
    if (m.size() != rows * cols || b.size() != rows)
        throw ShapeMismatch("solve_linear: dimension mismatch");
    // Eliminate on the augmented matrix [M | b], pivoting only on the
    // coefficient columns. A row whose coefficients vanish but whose constant
    // does not marks the system inconsistent.
    RowEchelon<F> ech(field, cols + 1, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<Value> row;
        row.reserve(cols + 1);
        for (std::size_t j = 0; j < cols; ++j) row.push_back(m[i * cols + j]);
        row.push_back(b[i]);
        ech.reduce(row);
        bool coeffs_zero = true;
        for (std::size_t j = 0; j < cols && coeffs_zero; ++j)
            if (!field.is_zero(row[j])) coeffs_zero = false;
        if (coeffs_zero) {
            if (!field.is_zero(row[cols])) return std::nullopt;
            continue;
        }
        ech.push(std::move(row));
    }
    std::vector<Value> x(cols, field.zero());
    for (std::size_t r = 0; r < ech.rank(); ++r) {
        const std::size_t p = ech.pivot_columns()[r];
        x[p] = ech.rows()[r][cols];
    }
    return x;
}

/// Dual functionals for an independent list of vectors: functionals h_1..h_r
/// on F^width with h_i(v_j) = delta_ij. Throws DependentGenerators when the
/// vectors are not independent. Each h_i is supported on the pivot columns of
/// the echelon form, so the answer is deterministic.
template <FieldType F>
std::vector<LinearFunctional<F>> dual_functionals(
    const F& field, std::size_t width,
    const std::vector<std::vector<typename F::Value>>& vectors) {
    using Value = typename F::Value;
    const std::size_t r = vectors.size();
    RowEchelon<F> ech(field, width);
    for (const auto& v : vectors) {
        if (v.size() != width)
            throw ShapeMismatch("dual_functionals: vector of length " + std::to_string(v.size()) +
                                " in space of dimension " + std::to_string(width));
        if (!ech.push(v))
            throw DependentGenerators("dual_functionals: input vectors are linearly dependent");
    }
    const auto& piv = ech.pivot_columns();
    // Restrict each vector to the pivot coordinates: P is r x r invertible.
    // h_i = row i of P^{-1}, placed on the pivot coordinates, satisfies
    // h_i(v_j) = delta_ij because v_j restricted to pivots is column j of P.
    std::vector<Value> p(r * r, field.zero());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j)
            p[i * r + j] = vectors[j][piv[i]];
    // Invert P by solving P X = I column by column.
    std::vector<LinearFunctional<F>> out;
    out.reserve(r);
    std::vector<std::vector<Value>> inv_rows(r, std::vector<Value>(r, field.zero()));
    for (std::size_t col = 0; col < r; ++col) {
        std::vector<Value> e(r, field.zero());
        e[col] = field.one();
        auto x = solve_linear(field, r, r, p, e);
        // P is invertible by construction, so a solution always exists.
        for (std::size_t i = 0; i < r; ++i) inv_rows[i][col] = (*x)[i];
    }
    for (std::size_t i = 0; i < r; ++i) {
        std::vector<Value> coeffs(width, field.zero());
        for (std::size_t k = 0; k < r; ++k) coeffs[piv[k]] = inv_rows[i][k];
        out.emplace_back(std::vector<std::size_t>{width}, std::move(coeffs));
    }
    return out;
}

/// Writes an order-2 tensor as a sum of rank(M) outer products a_j (x) b_j by
/// repeated rank-one peeling: pick a nonzero pivot entry (i,j), subtract
/// column_j * row_i / M[i][j], recurse. Exact fields only; over the reals the
/// iterative methods in the numeric solver are the right tool.
template <FieldType F>
    requires(F::is_exact)
CPDecomposition<F> matrix_cp(const DenseTensor<F>& m) {
    using Value = typename F::Value;
    if (m.order() != 2)
        throw ShapeMismatch("matrix_cp needs an order-2 tensor, got order " +
                            std::to_string(m.order()));
    const F& field = m.field();
    const std::size_t rows = m.shape()[0], cols = m.shape()[1];
    std::vector<Value> work = m.entries();
    CPDecomposition<F> dec(field, m.shape());
    for (;;) {
        std::size_t pi = rows, pj = cols;
        for (std::size_t i = 0; i < rows && pi == rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                if (!field.is_zero(work[i * cols + j])) {
                    pi = i;
                    pj = j;
                    break;
                }
        if (pi == rows) break; // residual is zero
        const Value pivot = work[pi * cols + pj];
        const Value inv = field.inv(pivot);
        std::vector<Value> a(rows), b(cols);
        for (std::size_t i = 0; i < rows; ++i) a[i] = field.mul(work[i * cols + pj], inv);
        for (std::size_t j = 0; j < cols; ++j) b[j] = work[pi * cols + j];
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                work[i * cols + j] = field.sub(work[i * cols + j], field.mul(a[i], b[j]));
        dec.push_term(PureTensor<F>{{std::move(a), std::move(b)}});
    }
    return dec;
}

} // namespace rankbridge

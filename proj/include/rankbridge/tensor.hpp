#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rankbridge/fields.hpp"

namespace rankbridge {

namespace detail {

inline std::size_t shape_size(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

inline std::string shape_string(std::span<const std::size_t> shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

} // namespace detail

/// Dense order-d array over a field, entries in row-major order (last index
/// fastest). Indices are 0-based internally; only API surfaces that mirror
/// file formats or math notation (basis_vector, flatten's mode, positions in
/// problem files) are 1-based.
template <FieldType F>
class DenseTensor {
public:
    using Value = typename F::Value;

    DenseTensor(F field, std::vector<std::size_t> shape)
        : field_(std::move(field)), shape_(std::move(shape)),
          entries_(checked_size(shape_), field_.zero()) {}

    DenseTensor(F field, std::vector<std::size_t> shape, std::vector<Value> entries)
        : field_(std::move(field)), shape_(std::move(shape)), entries_(std::move(entries)) {
        if (entries_.size() != checked_size(shape_))
            throw ShapeMismatch("entry count " + std::to_string(entries_.size()) +
                                " does not fill shape " + detail::shape_string(shape_));
    }

    const F& field() const { return field_; }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t order() const { return shape_.size(); }
    std::size_t size() const { return entries_.size(); }
    const std::vector<Value>& entries() const { return entries_; }

    const Value& operator[](std::size_t flat) const { return entries_[flat]; }
    Value& operator[](std::size_t flat) { return entries_[flat]; }

    std::size_t offset(std::span<const std::size_t> idx) const {
        std::size_t off = 0;
        for (std::size_t k = 0; k < shape_.size(); ++k)
            off = off * shape_[k] + idx[k];
        return off;
    }

    const Value& at(std::span<const std::size_t> idx) const { return entries_[offset(idx)]; }
    Value& at(std::span<const std::size_t> idx) { return entries_[offset(idx)]; }

    bool is_zero() const {
        for (const Value& v : entries_)
            if (!field_.is_zero(v)) return false;
        return true;
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        if (shape.empty()) throw ShapeMismatch("tensor order must be at least 1");
        for (std::size_t d : shape)
            if (d == 0) throw ShapeMismatch("zero dimension in shape " + detail::shape_string(shape));
        return detail::shape_size(shape);
    }

    F field_;
    std::vector<std::size_t> shape_;
    std::vector<Value> entries_;
};

/// Outer product of one vector per mode; the rank-one building block.
template <FieldType F>
struct PureTensor {
    std::vector<std::vector<typename F::Value>> factors;

    std::size_t order() const { return factors.size(); }
};

/// Checks a pure tensor against an ambient shape.
template <FieldType F>
void check_pure_shape(const PureTensor<F>& t, std::span<const std::size_t> shape) {
    if (t.factors.size() != shape.size())
        throw ShapeMismatch("pure tensor has " + std::to_string(t.factors.size()) +
                            " factors, ambient order is " + std::to_string(shape.size()));
    for (std::size_t k = 0; k < shape.size(); ++k)
        if (t.factors[k].size() != shape[k])
            throw ShapeMismatch("factor " + std::to_string(k + 1) + " has length " +
                                std::to_string(t.factors[k].size()) + ", mode dimension is " +
                                std::to_string(shape[k]));
}

/// Ordered list of pure tensors sharing one ambient shape. The length is the
/// claimed number of summands; it may exceed the true rank of the sum.
template <FieldType F>
class CPDecomposition {
public:
    CPDecomposition(F field, std::vector<std::size_t> shape, std::vector<PureTensor<F>> terms = {})
        : field_(std::move(field)), shape_(std::move(shape)), terms_(std::move(terms)) {
        for (const auto& t : terms_) check_pure_shape(t, shape_);
    }

    const F& field() const { return field_; }
    const std::vector<std::size_t>& shape() const { return shape_; }
    const std::vector<PureTensor<F>>& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }

    void push_term(PureTensor<F> t) {
        check_pure_shape(t, shape_);
        terms_.push_back(std::move(t));
    }

private:
    F field_;
    std::vector<std::size_t> shape_;
    std::vector<PureTensor<F>> terms_;
};

/// A linear functional on the tensor space of a given shape, represented by
/// one coefficient per entry of that space (row-major).
template <FieldType F>
struct LinearFunctional {
    std::vector<std::size_t> space_shape;
    std::vector<typename F::Value> coefficients;

    LinearFunctional(std::vector<std::size_t> shape, std::vector<typename F::Value> coeffs)
        : space_shape(std::move(shape)), coefficients(std::move(coeffs)) {
        if (coefficients.size() != detail::shape_size(space_shape))
            throw ShapeMismatch("functional has " + std::to_string(coefficients.size()) +
                                " coefficients for space " + detail::shape_string(space_shape));
    }

    typename F::Value apply(const F& field, std::span<const typename F::Value> vec) const {
        if (vec.size() != coefficients.size())
            throw ShapeMismatch("functional applied to vector of wrong length");
        typename F::Value acc = field.zero();
        for (std::size_t i = 0; i < vec.size(); ++i)
            acc = field.add(acc, field.mul(coefficients[i], vec[i]));
        return acc;
    }
};

/// The i-th standard basis vector of F^dim. `index` is 1-based.
template <FieldType F>
std::vector<typename F::Value> basis_vector(const F& field, std::size_t dim, std::size_t index) {
    if (index < 1 || index > dim)
        throw BadIndex("basis index " + std::to_string(index) + " out of range [1, " +
                       std::to_string(dim) + "]");
    std::vector<typename F::Value> v(dim, field.zero());
    v[index - 1] = field.one();
    return v;
}

/// Row-major entries of the outer product of `factors` over `shape`.
template <FieldType F>
std::vector<typename F::Value> expand_pure(const F& field, std::span<const std::size_t> shape,
                                           const PureTensor<F>& t) {
    check_pure_shape(t, shape);
    std::vector<typename F::Value> out;
    out.reserve(detail::shape_size(shape));
    std::vector<std::size_t> idx(shape.size(), 0);
    const std::size_t total = detail::shape_size(shape);
    for (std::size_t flat = 0; flat < total; ++flat) {
        typename F::Value v = field.one();
        for (std::size_t k = 0; k < shape.size(); ++k)
            v = field.mul(v, t.factors[k][idx[k]]);
        out.push_back(std::move(v));
        for (std::size_t k = shape.size(); k-- > 0;) {
            if (++idx[k] < shape[k]) break;
            idx[k] = 0;
        }
    }
    return out;
}

/// Entrywise sum of the outer products of all terms. The empty decomposition
/// expands to the zero tensor of its shape.
template <FieldType F>
DenseTensor<F> expand(const CPDecomposition<F>& dec) {
    const F& field = dec.field();
    DenseTensor<F> out(field, dec.shape());
    for (const auto& term : dec.terms()) {
        auto vals = expand_pure(field, dec.shape(), term);
        for (std::size_t i = 0; i < vals.size(); ++i)
            out[i] = field.add(out[i], vals[i]);
    }
    return out;
}

template <FieldType F>
DenseTensor<F> tensor_add(const DenseTensor<F>& a, const DenseTensor<F>& b) {
    if (a.shape() != b.shape())
        throw ShapeMismatch("adding tensors of shapes " + detail::shape_string(a.shape()) +
                            " and " + detail::shape_string(b.shape()));
    std::vector<typename F::Value> vals;
    vals.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        vals.push_back(a.field().add(a[i], b[i]));
    return DenseTensor<F>(a.field(), a.shape(), std::move(vals));
}

template <FieldType F>
DenseTensor<F> tensor_sub(const DenseTensor<F>& a, const DenseTensor<F>& b) {
    if (a.shape() != b.shape())
        throw ShapeMismatch("subtracting tensors of shapes " + detail::shape_string(a.shape()) +
                            " and " + detail::shape_string(b.shape()));
    std::vector<typename F::Value> vals;
    vals.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        vals.push_back(a.field().sub(a[i], b[i]));
    return DenseTensor<F>(a.field(), a.shape(), std::move(vals));
}

template <FieldType F>
DenseTensor<F> tensor_scale(const DenseTensor<F>& a, const typename F::Value& c) {
    std::vector<typename F::Value> vals;
    vals.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        vals.push_back(a.field().mul(c, a[i]));
    return DenseTensor<F>(a.field(), a.shape(), std::move(vals));
}

/// Entrywise equality under the field's notion of eq (exact or tolerant).
template <FieldType F>
bool tensor_eq(const DenseTensor<F>& a, const DenseTensor<F>& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!a.field().eq(a[i], b[i])) return false;
    return true;
}

/// Mode-k unfolding: rows indexed by the mode-k index, columns by the
/// remaining indices in row-major order. `mode` is 1-based.
template <FieldType F>
DenseTensor<F> flatten(const DenseTensor<F>& t, std::size_t mode) {
    const std::size_t d = t.order();
    if (mode < 1 || mode > d)
        throw BadIndex("flatten mode " + std::to_string(mode) + " out of range [1, " +
                       std::to_string(d) + "]");
    const std::size_t k = mode - 1;
    const std::size_t rows = t.shape()[k];
    const std::size_t cols = t.size() / rows;
    std::vector<typename F::Value> vals(t.size(), t.field().zero());
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
        std::size_t col = 0;
        for (std::size_t m = 0; m < d; ++m)
            if (m != k) col = col * t.shape()[m] + idx[m];
        vals[idx[k] * cols + col] = t[flat];
        for (std::size_t m = d; m-- > 0;) {
            if (++idx[m] < t.shape()[m]) break;
            idx[m] = 0;
        }
    }
    return DenseTensor<F>(t.field(), {rows, cols}, std::move(vals));
}

/// Contracts one mode against a linear functional on that mode's space,
/// yielding a tensor of order d-1 (or a 1-entry tensor when d = 1 would
/// result; order-1 input contracts to a single scalar wrapped in shape {1}).
/// `mode` is 1-based.
template <FieldType F>
DenseTensor<F> contract_mode(const DenseTensor<F>& t, std::size_t mode,
                             const LinearFunctional<F>& phi) {
    const std::size_t d = t.order();
    if (mode < 1 || mode > d)
        throw BadIndex("contract mode " + std::to_string(mode) + " out of range [1, " +
                       std::to_string(d) + "]");
    const std::size_t k = mode - 1;
    if (phi.space_shape != std::vector<std::size_t>{t.shape()[k]})
        throw ShapeMismatch("functional consumes space " + detail::shape_string(phi.space_shape) +
                            ", mode dimension is " + std::to_string(t.shape()[k]));
    std::vector<std::size_t> out_shape;
    for (std::size_t m = 0; m < d; ++m)
        if (m != k) out_shape.push_back(t.shape()[m]);
    if (out_shape.empty()) out_shape.push_back(1);

    const F& field = t.field();
    DenseTensor<F> out(field, out_shape);
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
        std::size_t off = 0;
        if (d == 1) {
            off = 0;
        } else {
            for (std::size_t m = 0; m < d; ++m)
                if (m != k) off = off * t.shape()[m] + idx[m];
        }
        out[off] = field.add(out[off], field.mul(phi.coefficients[idx[k]], t[flat]));
        for (std::size_t m = d; m-- > 0;) {
            if (++idx[m] < t.shape()[m]) break;
            idx[m] = 0;
        }
    }
    return out;
}

} // namespace rankbridge

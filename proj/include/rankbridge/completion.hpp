#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "rankbridge/linalg.hpp"
#include "rankbridge/tensor.hpp"

namespace rankbridge {

/// A matrix position. 1-based in both coordinates, mirroring the file formats
/// and the usual mathematical convention for matrix entries.
using Position = std::pair<std::size_t, std::size_t>;

/// A partially observed n x m matrix: some entries carry known values, some
/// are declared unknown, and everything else is absent entirely. A known
/// entry may be explicitly zero — known-zero and unknown are distinct states.
/// Unknown positions carry a fixed caller-given order; that order defines the
/// index k of the matching generator and lifted-tensor slot downstream.
template <FieldType F>
struct PartialMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::map<Position, typename F::Value> known;
    std::vector<Position> unknowns;

    void validate() const {
        if (rows == 0 || cols == 0)
            throw ValidationError("partial matrix must have positive dimensions");
        auto in_range = [&](const Position& p) {
            return p.first >= 1 && p.first <= rows && p.second >= 1 && p.second <= cols;
        };
        for (const auto& [pos, value] : known) {
            (void)value;
            if (!in_range(pos))
                throw ValidationError("known position (" + std::to_string(pos.first) + "," +
                                      std::to_string(pos.second) + ") out of range");
        }
        std::map<Position, std::size_t> seen;
        for (std::size_t k = 0; k < unknowns.size(); ++k) {
            const Position& p = unknowns[k];
            if (!in_range(p))
                throw ValidationError("unknown position (" + std::to_string(p.first) + "," +
                                      std::to_string(p.second) + ") out of range");
            if (!seen.emplace(p, k).second)
                throw ValidationError("unknown position (" + std::to_string(p.first) + "," +
                                      std::to_string(p.second) + ") listed twice");
            if (known.count(p))
                throw ValidationError("position (" + std::to_string(p.first) + "," +
                                      std::to_string(p.second) + ") is both known and unknown");
        }
    }
};

/// The affine space base + span(generators) inside a tensor space. The
/// generators are pure tensors and are expected to be linearly independent;
/// call validate_generators to enforce that expectation.
template <FieldType F>
class AffineTensorSpace {
public:
    AffineTensorSpace(DenseTensor<F> base, std::vector<PureTensor<F>> generators)
        : base_(std::move(base)), generators_(std::move(generators)) {
        for (const auto& g : generators_) check_pure_shape(g, base_.shape());
    }

    const F& field() const { return base_.field(); }
    const DenseTensor<F>& base() const { return base_; }
    const std::vector<PureTensor<F>>& generators() const { return generators_; }
    std::size_t s() const { return generators_.size(); }

private:
    DenseTensor<F> base_;
    std::vector<PureTensor<F>> generators_;
};

/// One point of the affine space: the coefficients, the resulting tensor, and
/// the rank it achieves.
template <FieldType F>
struct Completion {
    std::vector<typename F::Value> lambdas;
    DenseTensor<F> tensor;
    std::size_t achieved_rank = 0;
};

/// Converts a partial matrix to its affine-space form: the base keeps known
/// values and carries zero at unknown slots, and unknown k contributes the
/// generator e_{i_k} (x) e_{j_k}.
template <FieldType F>
AffineTensorSpace<F> to_affine_space(const F& field, const PartialMatrix<F>& p) {
    p.validate();
    DenseTensor<F> base(field, {p.rows, p.cols});
    for (const auto& [pos, value] : p.known)
        base[(pos.first - 1) * p.cols + (pos.second - 1)] = value;
    std::vector<PureTensor<F>> gens;
    gens.reserve(p.unknowns.size());
    for (const Position& pos : p.unknowns)
        gens.push_back(PureTensor<F>{{basis_vector(field, p.rows, pos.first),
                                      basis_vector(field, p.cols, pos.second)}});
    return AffineTensorSpace<F>(std::move(base), std::move(gens));
}

/// Confirms the vectorized generators have rank s; otherwise the space
/// violates the independence hypothesis every downstream result relies on.
template <FieldType F>
void validate_generators(const AffineTensorSpace<F>& space) {
    const F& field = space.field();
    RowEchelon<F> ech(field, space.base().size());
    for (std::size_t k = 0; k < space.s(); ++k) {
        if (!ech.push(expand_pure(field, space.base().shape(), space.generators()[k])))
            throw DependentGenerators("generator " + std::to_string(k + 1) +
                                      " lies in the span of the earlier generators");
    }
}

/// base + sum of lambdas_k * generator_k.
template <FieldType F>
DenseTensor<F> apply_completion(const AffineTensorSpace<F>& space,
                                const std::vector<typename F::Value>& lambdas) {
    if (lambdas.size() != space.s())
        throw ShapeMismatch("expected " + std::to_string(space.s()) + " coefficients, got " +
                            std::to_string(lambdas.size()));
    const F& field = space.field();
    DenseTensor<F> out = space.base();
    for (std::size_t k = 0; k < space.s(); ++k) {
        auto g = expand_pure(field, out.shape(), space.generators()[k]);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = field.add(out[i], field.mul(lambdas[k], g[i]));
    }
    return out;
}

/// Solves B - base = sum lambda_k * generator_k. Returns the coefficient
/// vector (unique when the generators are independent) or nullopt when B is
/// not in the space.
template <FieldType F>
std::optional<std::vector<typename F::Value>> membership(const AffineTensorSpace<F>& space,
                                                         const DenseTensor<F>& b) {
    if (b.shape() != space.base().shape())
        throw ShapeMismatch("membership: tensor shape differs from the space's shape");
    const F& field = space.field();
    const std::size_t n = space.base().size();
    const std::size_t s = space.s();
    std::vector<typename F::Value> rhs;
    rhs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) rhs.push_back(field.sub(b[i], space.base()[i]));
    if (s == 0) {
        for (const auto& v : rhs)
            if (!field.is_zero(v)) return std::nullopt;
        return std::vector<typename F::Value>{};
    }
    std::vector<typename F::Value> m(n * s, field.zero());
    for (std::size_t k = 0; k < s; ++k) {
        auto g = expand_pure(field, space.base().shape(), space.generators()[k]);
        for (std::size_t i = 0; i < n; ++i) m[i * s + k] = g[i];
    }
    auto x = solve_linear(field, n, s, m, rhs);
    if (!x) return std::nullopt;
    // solve_linear guarantees consistency only up to echelon bookkeeping for
    // exact fields; over the reals, confirm the residual within tolerance.
    if constexpr (!F::is_exact) {
        auto built = apply_completion(space, *x);
        if (!tensor_eq(built, b)) return std::nullopt;
    }
    return x;
}

} // namespace rankbridge

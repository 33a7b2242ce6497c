#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "rankbridge/completion.hpp"
#include "rankbridge/linalg.hpp"
#include "rankbridge/tensor.hpp"

namespace rankbridge {

/// The order-(d+1) lift of an affine space: last-mode slice k (1 <= k <= s)
/// holds generator k, slice s+1 holds the base. Rank of this tensor equals
/// s plus the minimum rank over the affine space.
template <FieldType F>
struct HatTensor {
    DenseTensor<F> tensor;
    AffineTensorSpace<F> source;

    std::size_t s() const { return source.s(); }
};

/// The alternative lift into (base shape) x 2^s: the trailing index pattern
/// with a single 2 in position k holds generator k, the all-1 pattern holds
/// the base, and every other trailing pattern is zero. Same rank offset s.
template <FieldType F>
struct TildeTensor {
    DenseTensor<F> tensor;
    AffineTensorSpace<F> source;

    std::size_t s() const { return source.s(); }
};

/// Tuning knobs for extract_completion. Exact fields ignore both: equality is
/// exact and any basis of the trailing-factor space is as good as any other.
struct ExtractOptions {
    /// Real field: accepted max-norm residual of expand(dec) against the
    /// lifted tensor, relative to max(1, max-norm of the lift). Defaults to
    /// the field tolerance.
    std::optional<double> expand_tolerance;
    /// Real field: reject a candidate trailing-factor basis whose condition
    /// estimate exceeds this, and retry with the next choice in greedy order.
    double condition_limit = 1e12;
};

template <FieldType F>
HatTensor<F> build_hat(const AffineTensorSpace<F>& space) {
    validate_generators(space);
    const F& field = space.field();
    const DenseTensor<F>& base = space.base();
    const std::size_t s = space.s();
    std::vector<std::size_t> shape = base.shape();
    shape.push_back(s + 1);
    DenseTensor<F> out(field, shape);
    // Row-major layout makes the appended mode the fastest-varying one:
    // entry (idx, k) sits at idx_flat * (s + 1) + k.
    for (std::size_t k = 0; k < s; ++k) {
        auto g = expand_pure(field, base.shape(), space.generators()[k]);
        for (std::size_t i = 0; i < g.size(); ++i) out[i * (s + 1) + k] = std::move(g[i]);
    }
    for (std::size_t i = 0; i < base.size(); ++i) out[i * (s + 1) + s] = base[i];
    return HatTensor<F>{std::move(out), space};
}

template <FieldType F>
TildeTensor<F> build_tilde(const AffineTensorSpace<F>& space) {
    validate_generators(space);
    const F& field = space.field();
    const DenseTensor<F>& base = space.base();
    const std::size_t s = space.s();
    if (s == 0) return TildeTensor<F>{base, space};
    std::vector<std::size_t> shape = base.shape();
    shape.insert(shape.end(), s, 2);
    DenseTensor<F> out(field, shape);
    const std::size_t trail = std::size_t{1} << s;
    // trailing pattern of generator k: index 1 in trailing mode k, 0 elsewhere
    for (std::size_t k = 0; k < s; ++k) {
        auto g = expand_pure(field, base.shape(), space.generators()[k]);
        const std::size_t off = std::size_t{1} << (s - 1 - k);
        for (std::size_t i = 0; i < g.size(); ++i) out[i * trail + off] = std::move(g[i]);
    }
    for (std::size_t i = 0; i < base.size(); ++i) out[i * trail] = base[i];
    return TildeTensor<F>{std::move(out), space};
}

namespace detail {

template <FieldType F>
double max_abs_diff(const DenseTensor<F>& a, const DenseTensor<F>& b)
    requires(std::is_same_v<F, Reals>)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Checks expand(dec) against `target`; exact fields compare entrywise, the
/// real field compares in max-norm relative to max(1, max-norm of target).
template <FieldType F>
void require_expands_to(const CPDecomposition<F>& dec, const DenseTensor<F>& target,
                        double tolerance, const char* what) {
    auto built = expand(dec);
    if constexpr (F::is_exact) {
        (void)tolerance;
        if (!tensor_eq(built, target))
            throw InconsistentDecomposition(std::string(what) +
                                            ": decomposition does not expand to the target");
    } else {
        double scale = 1.0;
        for (std::size_t i = 0; i < target.size(); ++i)
            scale = std::max(scale, std::abs(target[i]));
        const double diff = max_abs_diff(built, target);
        if (diff > tolerance * scale)
            throw InconsistentDecomposition(
                std::string(what) + ": expand residual " + detail::format_double(diff) +
                " exceeds tolerance " + detail::format_double(tolerance * scale));
    }
}

} // namespace detail

/// Lifts a CP decomposition of a completed tensor B to a decomposition of the
/// hat tensor: each term of dec_b gains trailing factor e_{s+1}, and each
/// generator k contributes one extra term with trailing factor
/// e_k - lambda_k e_{s+1}. Result has dec_b.size() + s terms and expands to
/// build_hat(space).tensor exactly.
template <FieldType F>
CPDecomposition<F> embed_completion(const AffineTensorSpace<F>& space,
                                    const Completion<F>& completion,
                                    const CPDecomposition<F>& dec_b) {
    const F& field = space.field();
    const std::size_t s = space.s();
    if (completion.lambdas.size() != s)
        throw ShapeMismatch("completion carries " + std::to_string(completion.lambdas.size()) +
                            " coefficients for a space with " + std::to_string(s) +
                            " generators");
    if (dec_b.shape() != space.base().shape())
        throw ShapeMismatch("decomposition shape differs from the space's shape");
    if (!tensor_eq(apply_completion(space, completion.lambdas), completion.tensor))
        throw InconsistentDecomposition(
            "embed: completion tensor does not match its coefficients");
    detail::require_expands_to(dec_b, completion.tensor, field.spec().tolerance, "embed");

    std::vector<std::size_t> hat_shape = space.base().shape();
    hat_shape.push_back(s + 1);
    CPDecomposition<F> out(field, hat_shape);
    for (const auto& term : dec_b.terms()) {
        PureTensor<F> lifted = term;
        lifted.factors.push_back(basis_vector(field, s + 1, s + 1));
        out.push_term(std::move(lifted));
    }
    for (std::size_t k = 0; k < s; ++k) {
        PureTensor<F> lifted = space.generators()[k];
        std::vector<typename F::Value> c(s + 1, field.zero());
        c[k] = field.one();
        c[s] = field.neg(completion.lambdas[k]);
        lifted.factors.push_back(std::move(c));
        out.push_term(std::move(lifted));
    }
    return out;
}

/// Same direction for the tilde lift: terms of dec_b gain s trailing factors
/// e_1, and generator k gains e_1 everywhere except position k, which carries
/// e_2 - lambda_k e_1. Expands to build_tilde(space).tensor exactly.
template <FieldType F>
CPDecomposition<F> embed_completion_tilde(const AffineTensorSpace<F>& space,
                                          const Completion<F>& completion,
                                          const CPDecomposition<F>& dec_b) {
    const F& field = space.field();
    const std::size_t s = space.s();
    if (completion.lambdas.size() != s)
        throw ShapeMismatch("completion carries " + std::to_string(completion.lambdas.size()) +
                            " coefficients for a space with " + std::to_string(s) +
                            " generators");
    if (dec_b.shape() != space.base().shape())
        throw ShapeMismatch("decomposition shape differs from the space's shape");
    if (!tensor_eq(apply_completion(space, completion.lambdas), completion.tensor))
        throw InconsistentDecomposition(
            "embed: completion tensor does not match its coefficients");
    detail::require_expands_to(dec_b, completion.tensor, field.spec().tolerance, "embed");

    std::vector<std::size_t> tilde_shape = space.base().shape();
    tilde_shape.insert(tilde_shape.end(), s, 2);
    CPDecomposition<F> out(field, tilde_shape);
    const std::vector<typename F::Value> e1{field.one(), field.zero()};
    for (const auto& term : dec_b.terms()) {
        PureTensor<F> lifted = term;
        for (std::size_t k = 0; k < s; ++k) lifted.factors.push_back(e1);
        out.push_term(std::move(lifted));
    }
    for (std::size_t k = 0; k < s; ++k) {
        PureTensor<F> lifted = space.generators()[k];
        for (std::size_t t = 0; t < s; ++t) {
            if (t == k)
                lifted.factors.push_back({field.neg(completion.lambdas[k]), field.one()});
            else
                lifted.factors.push_back(e1);
        }
        out.push_term(std::move(lifted));
    }
    return out;
}

namespace detail {

/// Condition estimate (sigma_max / sigma_min) of a small square matrix.
inline double condition_estimate(std::size_t n, const std::vector<double>& rows_flat) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows_flat[i * n + j];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return sv(0) / smin;
}

/// Picks s indices j_1 < ... < j_s such that c_{j_1},...,c_{j_s},e_{s+1} is a
/// basis of F^{s+1}, greedily lowest-index-first. Over the reals a candidate
/// basis whose condition estimate exceeds the limit is rejected and the
/// search backtracks to the next choice in greedy order.
template <FieldType F>
std::vector<std::size_t> select_trailing_basis(const F& field,
                                               const std::vector<std::vector<typename F::Value>>& c,
                                               std::size_t s, double condition_limit) {
    std::vector<std::size_t> chosen;
    std::vector<RowEchelon<F>> stack;
    RowEchelon<F> root(field, s + 1);
    root.push(basis_vector(field, s + 1, s + 1));
    stack.push_back(root);
    std::size_t next = 0;
    for (;;) {
        if (chosen.size() == s) {
            bool ok = true;
            if constexpr (!F::is_exact) {
                std::vector<double> rows;
                rows.reserve((s + 1) * (s + 1));
                for (std::size_t j : chosen)
                    rows.insert(rows.end(), c[j].begin(), c[j].end());
                auto last = basis_vector(field, s + 1, s + 1);
                rows.insert(rows.end(), last.begin(), last.end());
                ok = condition_estimate(s + 1, rows) <= condition_limit;
            }
            if (ok) return chosen;
            // reject this basis, resume from the last pick
            next = chosen.back() + 1;
            chosen.pop_back();
            stack.pop_back();
        }
        if (next >= c.size()) {
            if (chosen.empty())
                throw SpanningFailure(
                    "trailing factors do not admit a basis within the conditioning limit");
            next = chosen.back() + 1;
            chosen.pop_back();
            stack.pop_back();
            continue;
        }
        RowEchelon<F> trial = stack.back();
        if (trial.push(c[next])) {
            chosen.push_back(next);
            stack.push_back(std::move(trial));
        }
        ++next;
    }
}

} // namespace detail

/// The converse direction of the reduction: from any decomposition of the hat
/// tensor with l terms, recover a member of the affine space with rank at
/// most l - s.
///
/// Steps: dual functionals h_i against the vectorized generators; verify the
/// trailing factors c_j span enough of F^{s+1} (each e_i must appear as
/// sum_j h_i(term_j) c_j - h_i(base) e_{s+1}); pick a trailing basis
/// c_{j_1},...,c_{j_s}, e_{s+1}; solve the functional f vanishing on the
/// picked c's with f(e_{s+1}) = 1; then B = sum_j f(c_j) * (leading part of
/// term j) and lambda_k = f(e_k).
template <FieldType F>
Completion<F> extract_completion(const AffineTensorSpace<F>& space,
                                 const CPDecomposition<F>& dec,
                                 const ExtractOptions& opts = {}) {
    const F& field = space.field();
    const std::size_t s = space.s();
    const std::size_t d = space.base().order();
    auto hat = build_hat(space);
    if (dec.shape() != hat.tensor.shape())
        throw ShapeMismatch("decomposition shape differs from the lifted tensor's shape");
    const double eff_tol =
        F::is_exact ? 0.0 : opts.expand_tolerance.value_or(field.spec().tolerance);
    detail::require_expands_to(dec, hat.tensor, eff_tol, "extract");

    // Comparisons after the expand gate accumulate error across l terms, so
    // the real field checks them against a widened tolerance.
    auto make_checker = [&]() {
        if constexpr (F::is_exact) return field;
        else return Reals(std::min(1e-3, eff_tol * 100));
    };
    auto checker = make_checker();

    const std::size_t l = dec.size();
    // leading part of each term: the order-d pure tensor, vectorized
    std::vector<std::vector<typename F::Value>> leading(l);
    std::vector<std::vector<typename F::Value>> c(l);
    for (std::size_t j = 0; j < l; ++j) {
        PureTensor<F> head;
        head.factors.assign(dec.terms()[j].factors.begin(),
                            dec.terms()[j].factors.begin() + d);
        leading[j] = expand_pure(field, space.base().shape(), head);
        c[j] = dec.terms()[j].factors[d];
    }

    if (s > 0) {
        std::vector<std::vector<typename F::Value>> gen_vecs;
        gen_vecs.reserve(s);
        for (const auto& g : space.generators())
            gen_vecs.push_back(expand_pure(field, space.base().shape(), g));
        auto hs = dual_functionals(field, space.base().size(), gen_vecs);

        // spanning identity: sum_j h_i(term_j) c_j = e_i + h_i(base) e_{s+1}
        for (std::size_t i = 0; i < s; ++i) {
            std::vector<typename F::Value> got(s + 1, field.zero());
            for (std::size_t j = 0; j < l; ++j) {
                auto w = hs[i].apply(field, leading[j]);
                for (std::size_t t = 0; t <= s; ++t)
                    got[t] = field.add(got[t], field.mul(w, c[j][t]));
            }
            std::vector<typename F::Value> want(s + 1, field.zero());
            want[i] = field.one();
            want[s] = hs[i].apply(field, space.base().entries());
            for (std::size_t t = 0; t <= s; ++t)
                if (!checker.eq(got[t], want[t]))
                    throw SpanningFailure("basis vector " + std::to_string(i + 1) +
                                          " is not reproduced by the trailing factors; the "
                                          "decomposition is corrupted");
        }
    }

    auto chosen = detail::select_trailing_basis(checker, c, s, opts.condition_limit);

    // f(c_{j_t}) = 0, f(e_{s+1}) = 1
    std::vector<typename F::Value> m((s + 1) * (s + 1), field.zero());
    std::vector<typename F::Value> rhs(s + 1, field.zero());
    for (std::size_t t = 0; t < s; ++t)
        for (std::size_t col = 0; col <= s; ++col) m[t * (s + 1) + col] = c[chosen[t]][col];
    m[s * (s + 1) + s] = field.one();
    rhs[s] = field.one();
    auto f = solve_linear(field, s + 1, s + 1, m, rhs);
    if (!f) throw SpanningFailure("the trailing-basis system for f is singular");

    auto f_of = [&](const std::vector<typename F::Value>& v) {
        typename F::Value acc = field.zero();
        for (std::size_t t = 0; t <= s; ++t) acc = field.add(acc, field.mul((*f)[t], v[t]));
        return acc;
    };

    DenseTensor<F> b(field, space.base().shape());
    std::size_t used_terms = 0;
    for (std::size_t j = 0; j < l; ++j) {
        auto w = f_of(c[j]);
        if (checker.is_zero(w)) continue;
        ++used_terms;
        for (std::size_t i = 0; i < b.size(); ++i)
            b[i] = field.add(b[i], field.mul(w, leading[j][i]));
    }

    std::vector<typename F::Value> lambdas((*f).begin(), (*f).begin() + s);

    // The extracted tensor must land in the affine space; over exact fields
    // this is the theorem's identity, over the reals a final sanity gate.
    auto reapplied = apply_completion(space, lambdas);
    for (std::size_t i = 0; i < b.size(); ++i)
        if (!checker.eq(b[i], reapplied[i]))
            throw InconsistentDecomposition(
                "extracted tensor drifts outside the affine space");

    std::size_t achieved = 0;
    if (d == 2) {
        achieved = matrix_rank(b);
    } else {
        achieved = used_terms;
    }
    return Completion<F>{std::move(lambdas), std::move(b), achieved};
}

} // namespace rankbridge

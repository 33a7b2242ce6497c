#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "rankbridge/completion.hpp"
#include "rankbridge/linalg.hpp"
#include "rankbridge/reduction.hpp"
#include "rankbridge/tensor.hpp"

namespace rankbridge {

/// Hard resource ceilings for the exact searches. Exceeding one raises
/// BudgetExceeded; results are never silently truncated.
struct SearchBudget {
    std::uint64_t max_nodes = 100'000'000;
    std::uint64_t max_assignments = std::uint64_t{1} << 20;
    std::size_t max_rank_slack = 2;
};

struct SearchStats {
    std::uint64_t nodes = 0;
    std::uint64_t prunes = 0;

    void absorb(const SearchStats& other) {
        nodes += other.nodes;
        prunes += other.prunes;
    }
};

/// An exact rank answer: a decomposition of the stated length together with
/// the exhaustion guarantee that no shorter one exists.
template <FieldType F>
struct RankCertificate {
    std::size_t rank;
    CPDecomposition<F> decomposition;
    SearchStats stats;
};

/// Result of tensor_rank: either a certificate, or proof-of-work stats for a
/// search that established rank > max_rank.
template <FieldType F>
struct RankSearchOutcome {
    std::optional<RankCertificate<F>> certificate;
    SearchStats stats;

    bool exceeds_max() const { return !certificate.has_value(); }
};

/// max over modes of the mode-k unfolding rank; a lower bound for tensor rank.
template <FieldType F>
std::size_t flatten_lower_bound(const DenseTensor<F>& t) {
    std::size_t lb = 0;
    for (std::size_t mode = 1; mode <= t.order(); ++mode)
        lb = std::max(lb, matrix_rank(flatten(t, mode)));
    return lb;
}

/// min over modes of the product of the other dimensions; rank never exceeds
/// this (group all other modes and count ambient dimension).
template <FieldType F>
std::size_t rank_upper_cap(const DenseTensor<F>& t) {
    std::size_t cap = t.size();
    for (std::size_t d : t.shape()) cap = std::min(cap, t.size() / d);
    return cap;
}

namespace detail {

/// All vectors of F^m with first nonzero coordinate 1, in lexicographic
/// order with field elements ordered 0 < 1 < ... < p-1. One representative
/// per projective point.
inline std::vector<std::vector<Gf::Value>> projective_vectors(const Gf& field, std::size_t m) {
    const std::uint64_t q = field.modulus();
    std::vector<std::vector<Gf::Value>> out;
    std::vector<Gf::Value> v(m, 0);
    for (;;) {
        // advance odometer, last coordinate fastest (= lexicographic order)
        std::size_t k = m;
        while (k-- > 0) {
            if (++v[k] < q) break;
            v[k] = 0;
            if (k == 0) return out;
        }
        auto first_nonzero = std::find_if(v.begin(), v.end(), [](Gf::Value x) { return x != 0; });
        if (first_nonzero != v.end() && *first_nonzero == 1) out.push_back(v);
    }
}

/// One candidate for the slice-cover search: a pure tensor over the
/// non-sliced modes, kept with its vectorization.
struct CoverCandidate {
    std::vector<std::vector<Gf::Value>> factors;
    std::vector<Gf::Value> vec;
};

struct CoverSearch {
    const std::vector<CoverCandidate>& candidates;
    const SearchBudget& budget;
    SearchStats& stats;
    std::size_t target = 0;

    bool dfs(std::size_t start, const RowEchelon<Gf>& chosen_span,
             const RowEchelon<Gf>& all_span, std::vector<std::size_t>& chosen) {
        if (all_span.rank() == chosen.size()) return true; // slices covered
        if (chosen.size() == target) return false;
        for (std::size_t i = start; i < candidates.size(); ++i) {
            if (++stats.nodes > budget.max_nodes)
                throw BudgetExceeded("rank search exceeded the node budget of " +
                                     std::to_string(budget.max_nodes) + " nodes");
            const auto& v = candidates[i].vec;
            if (chosen_span.contains(v)) {
                ++stats.prunes;
                continue;
            }
            const bool grows = !all_span.contains(v);
            if (grows && all_span.rank() + 1 > target) {
                ++stats.prunes;
                continue;
            }
            RowEchelon<Gf> next_chosen = chosen_span;
            next_chosen.push(v);
            RowEchelon<Gf> next_all = all_span;
            next_all.push(v);
            chosen.push_back(i);
            if (dfs(i + 1, next_chosen, next_all, chosen)) return true;
            chosen.pop_back();
        }
        return false;
    }
};

} // namespace detail

/// Certified tensor rank over a prime field by iterative deepening.
///
/// For each candidate rank r (starting at the flattening lower bound) the
/// search looks for r pure tensors over the non-sliced modes whose span
/// contains every slice of the longest mode; such a cover is exactly an
/// r-term decomposition (slice coefficients become the sliced-mode factors),
/// so exhausting depth r-1 certifies rank r. Candidates come from the
/// canonical projective enumeration (first nonzero coordinate 1, lexicographic
/// order), chosen with strictly increasing indices; a branch is pruned when
/// the span of chosen candidates plus slices can no longer fit inside r
/// dimensions.
inline RankSearchOutcome<Gf> tensor_rank(const DenseTensor<Gf>& t, std::size_t max_rank,
                                         const SearchBudget& budget = {}) {
    const Gf& field = t.field();
    SearchStats stats;
    if (t.is_zero()) {
        CPDecomposition<Gf> empty(field, t.shape());
        return {RankCertificate<Gf>{0, std::move(empty), stats}, stats};
    }
    if (t.order() == 1) {
        if (max_rank < 1) return {std::nullopt, stats};
        CPDecomposition<Gf> dec(field, t.shape());
        dec.push_term(PureTensor<Gf>{{t.entries()}});
        return {RankCertificate<Gf>{1, std::move(dec), stats}, stats};
    }

    // slice along the longest mode: fewest candidates, strongest pruning
    const std::size_t slice_mode =
        1 + std::size_t(std::max_element(t.shape().begin(), t.shape().end()) -
                        t.shape().begin());
    const auto flat = flatten(t, slice_mode);
    const std::size_t n_slices = flat.shape()[0];
    const std::size_t width = flat.shape()[1];

    std::vector<std::size_t> rest_shape;
    for (std::size_t m = 0; m < t.order(); ++m)
        if (m + 1 != slice_mode) rest_shape.push_back(t.shape()[m]);

    // canonical candidates: products of projective vectors, one per mode,
    // earlier modes most significant in the enumeration order
    std::vector<std::vector<std::vector<Gf::Value>>> per_mode;
    std::uint64_t count = 1;
    for (std::size_t dim : rest_shape) {
        // guard before enumerating: generating F^dim costs q^dim steps
        std::uint64_t points = 1;
        for (std::size_t i = 0; i < dim; ++i) {
            if (points > budget.max_nodes / field.modulus())
                throw BudgetExceeded("candidate enumeration over GF(" +
                                     std::to_string(field.modulus()) + ")^" +
                                     std::to_string(dim) + " exceeds the node budget");
            points *= field.modulus();
        }
        per_mode.push_back(detail::projective_vectors(field, dim));
        count *= per_mode.back().size();
        if (count > budget.max_nodes)
            throw BudgetExceeded("canonical candidate set needs " + std::to_string(count) +
                                 "+ entries, node budget is " +
                                 std::to_string(budget.max_nodes));
    }
    std::vector<detail::CoverCandidate> candidates;
    candidates.reserve(count);
    std::vector<std::size_t> pick(per_mode.size(), 0);
    for (std::uint64_t c = 0; c < count; ++c) {
        detail::CoverCandidate cand;
        for (std::size_t m = 0; m < per_mode.size(); ++m)
            cand.factors.push_back(per_mode[m][pick[m]]);
        cand.vec = expand_pure(field, rest_shape, PureTensor<Gf>{cand.factors});
        candidates.push_back(std::move(cand));
        for (std::size_t m = per_mode.size(); m-- > 0;) {
            if (++pick[m] < per_mode[m].size()) break;
            pick[m] = 0;
        }
    }

    RowEchelon<Gf> slice_span(field, width);
    std::vector<std::vector<Gf::Value>> slices;
    for (std::size_t i = 0; i < n_slices; ++i) {
        std::vector<Gf::Value> row(flat.entries().begin() + i * width,
                                   flat.entries().begin() + (i + 1) * width);
        slice_span.push(row);
        slices.push_back(std::move(row));
    }

    const std::size_t lb = flatten_lower_bound(t);
    for (std::size_t r = std::max<std::size_t>(lb, 1); r <= max_rank; ++r) {
        detail::CoverSearch search{candidates, budget, stats, r};
        RowEchelon<Gf> chosen_span(field, width);
        std::vector<std::size_t> chosen;
        if (!search.dfs(0, chosen_span, slice_span, chosen)) continue;

        // chosen candidates span all slices: solve the per-slice coefficients
        const std::size_t c = chosen.size();
        std::vector<Gf::Value> m(width * c, 0);
        for (std::size_t j = 0; j < c; ++j)
            for (std::size_t w = 0; w < width; ++w)
                m[w * c + j] = candidates[chosen[j]].vec[w];
        std::vector<std::vector<Gf::Value>> sliced_factors(c,
                                                           std::vector<Gf::Value>(n_slices, 0));
        for (std::size_t i = 0; i < n_slices; ++i) {
            auto gamma = solve_linear(field, width, c, m, slices[i]);
            if (!gamma) throw Error("internal: cover candidates fail to span a slice");
            for (std::size_t j = 0; j < c; ++j) sliced_factors[j][i] = (*gamma)[j];
        }
        CPDecomposition<Gf> dec(field, t.shape());
        for (std::size_t j = 0; j < c; ++j) {
            PureTensor<Gf> term;
            std::size_t rest_at = 0;
            for (std::size_t mode = 1; mode <= t.order(); ++mode) {
                if (mode == slice_mode) term.factors.push_back(sliced_factors[j]);
                else term.factors.push_back(candidates[chosen[j]].factors[rest_at++]);
            }
            dec.push_term(std::move(term));
        }
        if (!tensor_eq(expand(dec), t))
            throw Error("internal: certified decomposition does not expand to the input");
        return {RankCertificate<Gf>{c, std::move(dec), stats}, stats};
    }
    return {std::nullopt, stats};
}

/// rank <= 1 test for an order-2 tensor over an exact field: true exactly
/// when all 2x2 minors vanish; on success returns the 0- or 1-term
/// decomposition.
template <FieldType F>
    requires(F::is_exact)
std::optional<CPDecomposition<F>> rank_le_one(const DenseTensor<F>& m) {
    if (m.order() != 2)
        throw ShapeMismatch("rank_le_one needs an order-2 tensor, got order " +
                            std::to_string(m.order()));
    const F& field = m.field();
    const std::size_t rows = m.shape()[0], cols = m.shape()[1];
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t i2 = i + 1; i2 < rows; ++i2)
            for (std::size_t j = 0; j < cols; ++j)
                for (std::size_t j2 = j + 1; j2 < cols; ++j2) {
                    auto det = field.sub(field.mul(m[i * cols + j], m[i2 * cols + j2]),
                                         field.mul(m[i * cols + j2], m[i2 * cols + j]));
                    if (!field.is_zero(det)) return std::nullopt;
                }
    return matrix_cp(m);
}

/// Direct rank <= 1 completion of a partial matrix over an exact field.
/// Positions listed in neither `known` nor `unknowns` are pinned to zero.
///
/// A rank-one matrix is an outer product x (x) y, so known nonzero entries
/// propagate scales along the bipartite graph of rows and columns, and a
/// known zero is feasible only where a row or column scale may vanish.
/// Returns nullopt when no rank <= 1 completion exists.
template <FieldType F>
std::optional<Completion<F>> rank_one_completion(const F& field, const PartialMatrix<F>& p) {
    using Value = typename F::Value;
    p.validate();
    const std::size_t n = p.rows, m = p.cols;
    // effective constraints: absent positions are known zeros
    std::vector<std::vector<std::optional<Value>>> want(n,
                                                        std::vector<std::optional<Value>>(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) want[i][j] = field.zero();
    for (const auto& [pos, value] : p.known) want[pos.first - 1][pos.second - 1] = value;
    for (const Position& pos : p.unknowns) want[pos.first - 1][pos.second - 1] = std::nullopt;

    std::vector<bool> row_has_nonzero(n, false), col_has_nonzero(m, false);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (want[i][j] && !field.is_zero(*want[i][j]))
                row_has_nonzero[i] = col_has_nonzero[j] = true;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (want[i][j] && field.is_zero(*want[i][j]) && row_has_nonzero[i] &&
                col_has_nonzero[j])
                return std::nullopt; // x_i != 0 and y_j != 0 forced, product 0 impossible

    std::vector<std::optional<Value>> x(n), y(m);
    for (std::size_t i = 0; i < n; ++i)
        if (!row_has_nonzero[i]) x[i] = field.zero();
    for (std::size_t j = 0; j < m; ++j)
        if (!col_has_nonzero[j]) y[j] = field.zero();

    // propagate scales across connected components of the nonzero knowns,
    // anchoring each component's lowest row at 1
    for (std::size_t anchor = 0; anchor < n; ++anchor) {
        if (x[anchor]) continue;
        x[anchor] = field.one();
        std::vector<std::size_t> queue_rows{anchor}, queue_cols;
        while (!queue_rows.empty() || !queue_cols.empty()) {
            if (!queue_rows.empty()) {
                std::size_t i = queue_rows.back();
                queue_rows.pop_back();
                for (std::size_t j = 0; j < m; ++j) {
                    if (!want[i][j] || field.is_zero(*want[i][j])) continue;
                    Value yj = field.mul(*want[i][j], field.inv(*x[i]));
                    if (!y[j]) {
                        y[j] = yj;
                        queue_cols.push_back(j);
                    } else if (!field.eq(*y[j], yj)) {
                        return std::nullopt;
                    }
                }
            } else {
                std::size_t j = queue_cols.back();
                queue_cols.pop_back();
                for (std::size_t i = 0; i < n; ++i) {
                    if (!want[i][j] || field.is_zero(*want[i][j])) continue;
                    Value xi = field.mul(*want[i][j], field.inv(*y[j]));
                    if (!x[i]) {
                        x[i] = xi;
                        queue_rows.push_back(i);
                    } else if (!field.eq(*x[i], xi)) {
                        return std::nullopt;
                    }
                }
            }
        }
    }
    for (std::size_t j = 0; j < m; ++j)
        if (!y[j]) y[j] = field.zero(); // column never touched by a nonzero known

    DenseTensor<F> b(field, {n, m});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) b[i * m + j] = field.mul(*x[i], *y[j]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (want[i][j] && !field.eq(b[i * m + j], *want[i][j])) return std::nullopt;

    auto space = to_affine_space(field, p);
    auto lambdas = membership(space, b);
    if (!lambdas) return std::nullopt; // unreachable: b matches every pinned entry
    const std::size_t achieved = matrix_rank(b);
    return Completion<F>{std::move(*lambdas), std::move(b), achieved};
}

template <FieldType F>
struct MinRankResult {
    std::size_t rank;
    Completion<F> best;
    SearchStats stats;
};

/// Ground truth by enumeration: tries every coefficient vector lambda in
/// F^s in lexicographic order and keeps the first one achieving the minimum
/// rank. Order-2 bases use Gaussian elimination per point; higher orders call
/// the certified tensor-rank search.
inline MinRankResult<Gf> brute_force_min_rank(const AffineTensorSpace<Gf>& space,
                                              const SearchBudget& budget = {}) {
    const Gf& field = space.field();
    const std::size_t s = space.s();
    const std::uint64_t q = field.modulus();
    std::uint64_t total = 1;
    for (std::size_t k = 0; k < s; ++k) {
        if (total > budget.max_assignments / q)
            throw BudgetExceeded("brute force needs q^s = " + std::to_string(q) + "^" +
                                 std::to_string(s) + " assignments, budget is " +
                                 std::to_string(budget.max_assignments));
        total *= q;
    }

    SearchStats stats;
    auto rank_of = [&](const DenseTensor<Gf>& b) -> std::size_t {
        if (b.order() == 2) return matrix_rank(b);
        auto outcome = tensor_rank(b, flatten_lower_bound(b) + budget.max_rank_slack, budget);
        if (!outcome.certificate) {
            stats.absorb(outcome.stats);
            outcome = tensor_rank(b, rank_upper_cap(b), budget);
        }
        stats.absorb(outcome.stats);
        if (!outcome.certificate)
            throw Error("internal: rank search failed below the trivial cap");
        return outcome.certificate->rank;
    };

    std::vector<Gf::Value> lambdas(s, 0);
    std::optional<MinRankResult<Gf>> best;
    for (std::uint64_t step = 0; step < total; ++step) {
        auto b = apply_completion(space, lambdas);
        const std::size_t r = rank_of(b);
        if (!best || r < best->rank)
            best = MinRankResult<Gf>{r, Completion<Gf>{lambdas, std::move(b), r}, {}};
        if (best->rank == 0) break;
        for (std::size_t k = s; k-- > 0;) {
            if (++lambdas[k] < q) break;
            lambdas[k] = 0;
        }
    }
    best->stats = stats;
    return std::move(*best);
}

/// One full check of the rank identity on a single affine space: r from
/// brute force, l from the certified search on the lifted tensor, and a
/// round-trip extraction from the certified decomposition.
template <FieldType F>
struct TheoremReport {
    std::size_t r = 0;
    std::size_t s = 0;
    std::optional<std::size_t> l; // nullopt: no decomposition found within r+s
    bool equal = false;
    bool extraction_ok = false;
    std::optional<Completion<F>> brute_best;
    std::optional<RankCertificate<F>> hat_certificate;
    std::optional<Completion<F>> extracted;
    SearchStats stats;
};

inline TheoremReport<Gf> verify_theorem(const AffineTensorSpace<Gf>& space,
                                        const SearchBudget& budget = {}) {
    TheoremReport<Gf> report;
    report.s = space.s();
    auto brute = brute_force_min_rank(space, budget);
    report.r = brute.rank;
    report.stats.absorb(brute.stats);
    report.brute_best = std::move(brute.best);

    auto hat = build_hat(space);
    auto outcome = tensor_rank(hat.tensor, report.r + report.s, budget);
    report.stats.absorb(outcome.stats);
    if (outcome.certificate) {
        report.l = outcome.certificate->rank;
        report.equal = (*report.l == report.r + report.s);
        report.extracted = extract_completion(space, outcome.certificate->decomposition);
        report.extraction_ok = (report.extracted->achieved_rank == report.r) &&
                               membership(space, report.extracted->tensor).has_value();
        report.hat_certificate = std::move(outcome.certificate);
    }
    return report;
}

} // namespace rankbridge

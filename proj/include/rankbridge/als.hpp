#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rankbridge/completion.hpp"
#include "rankbridge/errors.hpp"
#include "rankbridge/exact_search.hpp"
#include "rankbridge/reduction.hpp"
#include "rankbridge/tensor.hpp"

namespace rankbridge {

/// Knobs for the alternating-least-squares decomposition heuristic.
struct AlsConfig {
    int max_iters = 500;        ///< sweeps per restart
    double fit_tol = 1e-8;      ///< relative residual counted as a fit
    double stall_tol = 1e-10;   ///< stop when the residual improves less than this
    int restarts = 8;           ///< independent random initializations
    unsigned int seed = 0;      ///< base seed; restart k derives its own stream

    void validate() const {
        if (max_iters <= 0) throw ValidationError("als: max_iters must be positive");
        if (restarts <= 0) throw ValidationError("als: restarts must be positive");
        if (!(fit_tol > 0.0) || fit_tol < std::numeric_limits<double>::epsilon())
            throw ValidationError("als: fit_tol must be positive and above machine epsilon");
        if (!(stall_tol > 0.0)) throw ValidationError("als: stall_tol must be positive");
    }
};

/// One finished ALS attempt: the decomposition, its relative Frobenius
/// residual, and the per-sweep residual trace of the winning restart.
struct AlsRun {
    CPDecomposition<Reals> decomposition;
    double residual = 1.0;
    int iters = 0;
    std::vector<double> residual_history;
    int restart_index = 0;
};

namespace detail {

inline double frobenius_norm(const DenseTensor<Reals>& t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) sum += t[i] * t[i];
    return std::sqrt(sum);
}

inline CPDecomposition<Reals> factors_to_decomposition(const Reals& field,
                                                       const std::vector<std::size_t>& shape,
                                                       const std::vector<Eigen::MatrixXd>& factors,
                                                       std::size_t r) {
    CPDecomposition<Reals> dec(field, shape);
    for (std::size_t j = 0; j < r; ++j) {
        PureTensor<Reals> p;
        for (const Eigen::MatrixXd& u : factors) {
            std::vector<double> col(std::size_t(u.rows()));
            for (Eigen::Index i = 0; i < u.rows(); ++i) col[std::size_t(i)] = u(i, Eigen::Index(j));
            p.factors.push_back(std::move(col));
        }
        dec.push_term(std::move(p));
    }
    return dec;
}

/// Mode-k unfolding as an Eigen matrix; columns enumerate the remaining
/// indices in row-major order, matching flatten().
inline Eigen::MatrixXd unfold_eigen(const DenseTensor<Reals>& t, std::size_t mode) {
    DenseTensor<Reals> flat = flatten(t, mode);
    const std::size_t rows = flat.shape()[0], cols = flat.shape()[1];
    Eigen::MatrixXd m{static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * cols + j];
    return m;
}

/// Row-wise Khatri-Rao product of every factor except the skipped mode, with
/// earlier modes most significant — the column ordering of unfold_eigen.
inline Eigen::MatrixXd khatri_rao_skip(const std::vector<Eigen::MatrixXd>& factors,
                                       std::size_t skip, std::size_t r) {
    Eigen::MatrixXd kr = Eigen::MatrixXd::Ones(1, Eigen::Index(r));
    for (std::size_t j = 0; j < factors.size(); ++j) {
        if (j == skip) continue;
        const Eigen::MatrixXd& u = factors[j];
        Eigen::MatrixXd next(kr.rows() * u.rows(), Eigen::Index(r));
        for (Eigen::Index a = 0; a < kr.rows(); ++a)
            for (Eigen::Index b = 0; b < u.rows(); ++b)
                next.row(a * u.rows() + b) = kr.row(a).cwiseProduct(u.row(b));
        kr = std::move(next);
    }
    return kr;
}

inline AlsRun als_single_run(const DenseTensor<Reals>& t, std::size_t r, const AlsConfig& cfg,
                             int restart, double t_norm,
                             const std::vector<Eigen::MatrixXd>& unfoldings) {
    const Reals& field = t.field();
    const std::size_t d = t.order();

    std::seed_seq seq{cfg.seed, static_cast<unsigned int>(restart)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Eigen::MatrixXd> factors(d);
    for (std::size_t k = 0; k < d; ++k) {
        factors[k].resize(Eigen::Index(t.shape()[k]), Eigen::Index(r));
        for (Eigen::Index i = 0; i < factors[k].rows(); ++i)
            for (Eigen::Index j = 0; j < factors[k].cols(); ++j) factors[k](i, j) = gauss(rng);
    }

    AlsRun run{CPDecomposition<Reals>(field, t.shape())};
    run.restart_index = restart;
    double prev = std::numeric_limits<double>::infinity();

    for (int it = 0; it < cfg.max_iters; ++it) {
        for (std::size_t k = 0; k < d; ++k) {
            Eigen::MatrixXd gram = Eigen::MatrixXd::Ones(Eigen::Index(r), Eigen::Index(r));
            for (std::size_t j = 0; j < d; ++j)
                if (j != k) gram = gram.cwiseProduct(factors[j].transpose() * factors[j]);
            Eigen::MatrixXd kr = khatri_rao_skip(factors, k, r);
            Eigen::MatrixXd rhs = unfoldings[k] * kr; // n_k x r
            // normal equations gram * X^T = rhs^T; rank-revealing solve tolerates
            // the collinear factors that overparameterized runs produce
            factors[k] =
                gram.completeOrthogonalDecomposition().solve(rhs.transpose()).transpose();
        }
        // rebalance: unit columns everywhere except the last mode
        for (std::size_t k = 0; k + 1 < d; ++k)
            for (Eigen::Index c = 0; c < Eigen::Index(r); ++c) {
                const double nrm = factors[k].col(c).norm();
                if (nrm > 0.0) {
                    factors[k].col(c) /= nrm;
                    factors[d - 1].col(c) *= nrm;
                }
            }

        auto dec = factors_to_decomposition(field, t.shape(), factors, r);
        const double res = frobenius_norm(tensor_sub(t, expand(dec))) / t_norm;
        if (res > prev + 1e-8)
            throw Error("als: residual increased within a run");
        run.residual_history.push_back(res);
        run.iters = it + 1;
        run.decomposition = std::move(dec);
        run.residual = res;
        const bool stalled = std::isfinite(prev) && prev - res <= cfg.stall_tol;
        prev = res;
        if (res <= 1e-15 || stalled) break;
    }
    return run;
}

} // namespace detail

/// Best-of-restarts CP decomposition with r terms by alternating least
/// squares. Each mode update solves the normal equations against the
/// Khatri-Rao structure of the remaining modes. The reported residual is
/// ||T - expand(dec)||_F / ||T||_F; non-convergence shows up as a large
/// residual rather than an error.
inline AlsRun cp_als(const DenseTensor<Reals>& t, std::size_t r, const AlsConfig& cfg = {}) {
    cfg.validate();
    if (t.order() < 2) throw ShapeMismatch("cp_als needs an order-2 or higher tensor");
    const Reals& field = t.field();
    const double t_norm = detail::frobenius_norm(t);

    if (t_norm == 0.0) {
        AlsRun run{CPDecomposition<Reals>(field, t.shape())};
        run.residual = 0.0;
        return run;
    }
    if (r == 0) {
        AlsRun run{CPDecomposition<Reals>(field, t.shape())};
        run.residual = 1.0;
        return run;
    }

    std::vector<Eigen::MatrixXd> unfoldings;
    for (std::size_t mode = 1; mode <= t.order(); ++mode)
        unfoldings.push_back(detail::unfold_eigen(t, mode));

    std::optional<AlsRun> best;
    for (int restart = 0; restart < cfg.restarts; ++restart) {
        AlsRun run = detail::als_single_run(t, r, cfg, restart, t_norm, unfoldings);
        if (!best || run.residual < best->residual) best = std::move(run);
    }
    return std::move(*best);
}

/// Result of scanning target ranks upward until the fit tolerance is met.
struct RankSweepResult {
    std::size_t r_est;
    AlsRun run;
};

/// Increase the target rank from the flattening lower bound until cp_als
/// reaches cfg.fit_tol; the scan is capped at the product of the two
/// smallest mode dimensions. Throws NoFitFound (carrying the best residual
/// seen) when the cap is exhausted.
inline RankSweepResult rank_sweep(const DenseTensor<Reals>& t, const AlsConfig& cfg = {}) {
    cfg.validate();
    if (t.order() < 2) throw ShapeMismatch("rank_sweep needs an order-2 or higher tensor");

    if (t.is_zero()) {
        AlsRun run{CPDecomposition<Reals>(t.field(), t.shape())};
        run.residual = 0.0;
        return RankSweepResult{0, std::move(run)};
    }

    std::vector<std::size_t> dims(t.shape().begin(), t.shape().end());
    std::sort(dims.begin(), dims.end());
    const std::size_t cap = dims.size() >= 2 ? dims[0] * dims[1] : dims[0];
    const std::size_t lb = std::max<std::size_t>(flatten_lower_bound(t), 1);

    double best_residual = std::numeric_limits<double>::infinity();
    for (std::size_t r = lb; r <= cap; ++r) {
        AlsRun run = cp_als(t, r, cfg);
        if (run.residual <= cfg.fit_tol) return RankSweepResult{r, std::move(run)};
        best_residual = std::min(best_residual, run.residual);
    }
    throw NoFitFound("rank sweep exhausted the rank cap without reaching fit_tol",
                     best_residual);
}

/// Full numeric pipeline: lift the partial matrix, fit the lifted tensor by
/// rank sweep, and read a completion back out of the decomposition. The
/// returned tensor lies exactly in the affine space (known entries are kept
/// verbatim; only the recovered coefficients carry solver noise), and
/// achieved_rank is its singular-value count at the field tolerance.
inline Completion<Reals> complete_via_tensor(const Reals& field, const PartialMatrix<Reals>& p,
                                             const AlsConfig& cfg = {}) {
    cfg.validate();
    p.validate();
    auto space = to_affine_space(field, p);

    if (space.generators().empty()) {
        DenseTensor<Reals> b = space.base();
        const std::size_t rank = matrix_rank(b);
        return Completion<Reals>{{}, std::move(b), rank};
    }

    auto hat = build_hat(space);
    auto sweep = rank_sweep(hat.tensor, cfg);

    // The expand gate below must tolerate the ALS misfit: a relative Frobenius
    // residual of rho allows entrywise error up to rho * ||T||_F, and
    // ||T||_F <= sqrt(size) * max-entry.
    ExtractOptions opts;
    const double spread = std::sqrt(double(hat.tensor.size()));
    opts.expand_tolerance =
        std::max(field.tolerance(), 10.0 * sweep.run.residual * spread);

    auto extracted = extract_completion(space, sweep.run.decomposition, opts);
    DenseTensor<Reals> snapped = apply_completion(space, extracted.lambdas);
    const std::size_t rank = matrix_rank(snapped);
    return Completion<Reals>{std::move(extracted.lambdas), std::move(snapped), rank};
}

} // namespace rankbridge

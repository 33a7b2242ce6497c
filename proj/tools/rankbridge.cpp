// Command-line front end: ingest problem/tensor files, run the lifting
// reduction and the exact/heuristic completion solvers, emit canonical
// JSON reports.
//
// Exit codes: 0 success, 2 usage, 3 validation, 4 budget, 5 internal.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rankbridge/als.hpp"
#include "rankbridge/completion.hpp"
#include "rankbridge/errors.hpp"
#include "rankbridge/exact_search.hpp"
#include "rankbridge/fields.hpp"
#include "rankbridge/io.hpp"
#include "rankbridge/reduction.hpp"
#include "rankbridge/tensor.hpp"

namespace {

using nlohmann::json;
using namespace rankbridge;

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    std::int64_t ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start)
            .count();
    }
};

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::fwrite(content.data(), 1, content.size(), stdout);
    } else {
        atomic_write(out_path, content);
    }
}

json report_skeleton(const std::string& command, const std::string& digest) {
    json r;
    r["version"] = "1";
    r["command"] = command;
    r["input_digest"] = digest;
    r["results"] = json::object();
    return r;
}

void finish_report(json& report, const Clock& clock, const std::string& out_path) {
    report["timing_ms"] = clock.ms();
    emit(out_path, canonical_dump(report));
}

json budget_json(const SearchBudget& budget, const SearchStats& stats) {
    json b;
    b["max_assignments"] = budget.max_assignments;
    b["max_nodes"] = budget.max_nodes;
    b["nodes"] = stats.nodes;
    b["prunes"] = stats.prunes;
    return b;
}

template <rankbridge::FieldType F>
json vector_json(const F& field, const std::vector<typename F::Value>& v) {
    json out = json::array();
    for (const auto& x : v) out.push_back(field.to_string(x));
    return out;
}

template <rankbridge::FieldType F>
json tensor_json(const F& field, const DenseTensor<F>& t) {
    json out;
    out["shape"] = t.shape();
    json values = json::array();
    for (std::size_t i = 0; i < t.size(); ++i) values.push_back(field.to_string(t[i]));
    out["values"] = std::move(values);
    return out;
}

template <rankbridge::FieldType F>
json decomposition_json(const F& field, const CPDecomposition<F>& dec) {
    json terms = json::array();
    for (const auto& term : dec.terms()) {
        json factors = json::array();
        for (const auto& f : term.factors) factors.push_back(vector_json(field, f));
        terms.push_back(std::move(factors));
    }
    json out;
    out["shape"] = dec.shape();
    out["terms"] = std::move(terms);
    return out;
}

/// Budget resolution: flag > RANKBRIDGE_BUDGET_NODES > library default.
SearchBudget resolve_budget(const std::optional<std::uint64_t>& flag_nodes) {
    SearchBudget budget;
    if (const char* env = std::getenv("RANKBRIDGE_BUDGET_NODES")) {
        try {
            std::size_t pos = 0;
            const std::string text(env);
            const unsigned long long v = std::stoull(text, &pos);
            if (pos != text.size() || v == 0) throw std::invalid_argument("trailing junk");
            budget.max_nodes = v;
        } catch (const std::exception&) {
            throw UsageError("RANKBRIDGE_BUDGET_NODES must be a positive integer, got \"" +
                             std::string(env) + "\"");
        }
    }
    if (flag_nodes) budget.max_nodes = *flag_nodes;
    return budget;
}

FieldSpec effective_field(const FieldSpec& declared, const std::string& field_flag) {
    return field_flag.empty() ? declared : FieldSpec::parse(field_flag);
}

void require_prime_field(const FieldSpec& spec, const std::string& what) {
    if (spec.kind != FieldKind::prime)
        throw UsageError(what + " requires a finite prime field (gf:<p>), got \"" +
                         spec.designator() + "\"");
}

// ---------------------------------------------------------------------------
// reduce: problem file -> serialized lifted tensor
// ---------------------------------------------------------------------------

int cmd_reduce(const std::string& in_path, const std::string& variant,
               const std::string& field_flag, const std::string& out_path) {
    const std::string text = read_file(in_path);
    ProblemFile problem = parse_problem(text);
    const FieldSpec spec = effective_field(problem.field, field_flag);

    with_field(spec, [&](const auto& field) {
        auto space = to_space(field, problem);
        LiftInfo lift;
        lift.s = space.s();
        lift.base_shape = space.base().shape();
        if (variant == "hat") {
            lift.variant = "hat";
            auto hat = build_hat(space);
            emit(out_path, serialize_tensor_file(from_tensor(field, hat.tensor, lift)));
        } else {
            lift.variant = "tilde";
            auto tilde = build_tilde(space);
            emit(out_path, serialize_tensor_file(from_tensor(field, tilde.tensor, lift)));
        }
    });
    return 0;
}

// ---------------------------------------------------------------------------
// complete: problem file -> report with minimal/heuristic completion
// ---------------------------------------------------------------------------

/// Re-verifies a completion against its space before it is reported.
template <rankbridge::FieldType F>
void check_membership(const F& field, const AffineTensorSpace<F>& space,
                      const Completion<F>& completion) {
    (void)field;
    if (!membership(space, completion.tensor))
        throw Error("internal: reported completion fails membership against the input");
}

template <rankbridge::FieldType F>
void fill_completion_results(const F& field, json& results, const Completion<F>& completion) {
    results["achieved_rank"] = completion.achieved_rank;
    results["lambdas"] = vector_json(field, completion.lambdas);
    results["completion"] = tensor_json(field, completion.tensor);
}

int cmd_complete(const std::string& in_path, const std::string& method,
                 const std::string& field_flag, const std::optional<std::uint64_t>& flag_nodes,
                 std::size_t max_rank, const AlsConfig& als_cfg, const std::string& out_path) {
    Clock clock;
    const std::string text = read_file(in_path);
    ProblemFile problem = parse_problem(text);
    const FieldSpec spec = effective_field(problem.field, field_flag);
    SearchBudget budget = resolve_budget(flag_nodes);

    json report = report_skeleton("complete", input_digest(text));
    json& results = report["results"];
    results["method"] = method;

    if (method == "brute" || method == "exact-tensor") {
        require_prime_field(spec, "--method " + method);
        Gf field(spec);
        auto space = to_space(field, problem);
        SearchStats stats;

        if (method == "brute") {
            auto out = brute_force_min_rank(space, budget);
            stats = out.stats;
            check_membership(field, space, out.best);
            fill_completion_results(field, results, out.best);
            if (out.best.tensor.order() == 2) {
                results["certificate"] = decomposition_json(field, matrix_cp(out.best.tensor));
            } else {
                auto cert = tensor_rank(out.best.tensor, out.rank, budget);
                stats.absorb(cert.stats);
                if (cert.certificate)
                    results["certificate"] =
                        decomposition_json(field, cert.certificate->decomposition);
            }
        } else {
            auto hat = build_hat(space);
            const std::size_t cap =
                max_rank > 0 ? max_rank : rank_upper_cap(hat.tensor);
            auto outcome = tensor_rank(hat.tensor, cap, budget);
            stats = outcome.stats;
            if (!outcome.certificate) {
                results["exceeds_max"] = true;
                results["max_rank"] = cap;
            } else {
                results["exceeds_max"] = false;
                results["lifted_rank"] = outcome.certificate->rank;
                results["certificate"] =
                    decomposition_json(field, outcome.certificate->decomposition);
                auto completion =
                    extract_completion(space, outcome.certificate->decomposition);
                check_membership(field, space, completion);
                fill_completion_results(field, results, completion);
            }
        }
        report["budget"] = budget_json(budget, stats);
    } else if (method == "rank1") {
        if (spec.kind == FieldKind::real)
            throw UsageError("--method rank1 requires an exact field; use --method als");
        with_field(spec, [&](const auto& field) {
            using F = std::decay_t<decltype(field)>;
            if constexpr (F::is_exact) {
                auto pm = to_partial_matrix(field, problem);
                auto completion = rank_one_completion(field, pm);
                if (!completion) {
                    results["rank_one"] = false;
                } else {
                    results["rank_one"] = true;
                    check_membership(field, to_affine_space(field, pm), *completion);
                    fill_completion_results(field, results, *completion);
                }
            }
        });
    } else if (method == "als") {
        if (spec.kind != FieldKind::real)
            throw UsageError("--method als requires the real field, got \"" +
                             spec.designator() + "\"");
        Reals field(spec);
        auto space = to_space(field, problem);

        if (space.s() == 0) {
            Completion<Reals> completion{{}, space.base(), matrix_rank(space.base())};
            fill_completion_results(field, results, completion);
        } else {
            auto hat = build_hat(space);
            auto sweep = rank_sweep(hat.tensor, als_cfg);
            ExtractOptions opts;
            const double spread = std::sqrt(double(hat.tensor.size()));
            opts.expand_tolerance =
                std::max(field.tolerance(), 10.0 * sweep.run.residual * spread);
            auto extracted = extract_completion(space, sweep.run.decomposition, opts);
            DenseTensor<Reals> snapped = apply_completion(space, extracted.lambdas);
            const std::size_t rank = matrix_rank(snapped);
            Completion<Reals> completion{std::move(extracted.lambdas), std::move(snapped), rank};
            check_membership(field, space, completion);
            fill_completion_results(field, results, completion);
            results["r_est"] = sweep.r_est;
            results["residual"] = detail::format_double(sweep.run.residual);
            results["restart_index"] = sweep.run.restart_index;
        }
    } else {
        throw UsageError("unknown --method \"" + method +
                         "\" (expected brute|exact-tensor|als|rank1)");
    }

    finish_report(report, clock, out_path);
    return 0;
}

// ---------------------------------------------------------------------------
// verify: theorem check, single instance or exhaustive family
// ---------------------------------------------------------------------------

json theorem_json(const Gf& field, const TheoremReport<Gf>& r) {
    json out;
    out["r"] = r.r;
    out["s"] = r.s;
    if (r.l) out["l"] = *r.l;
    out["equal"] = r.equal;
    out["extraction_ok"] = r.extraction_ok;
    if (r.brute_best) out["lambdas"] = vector_json(field, r.brute_best->lambdas);
    return out;
}

int cmd_verify_single(const std::string& in_path, const std::string& field_flag,
                      const std::optional<std::uint64_t>& flag_nodes,
                      const std::string& out_path) {
    Clock clock;
    const std::string text = read_file(in_path);
    ProblemFile problem = parse_problem(text);
    const FieldSpec spec = effective_field(problem.field, field_flag);
    require_prime_field(spec, "verify");
    SearchBudget budget = resolve_budget(flag_nodes);

    Gf field(spec);
    auto space = to_space(field, problem);
    auto report_data = verify_theorem(space, budget);

    json report = report_skeleton("verify", input_digest(text));
    report["results"] = theorem_json(field, report_data);
    report["budget"] = budget_json(budget, report_data.stats);
    finish_report(report, clock, out_path);
    return report_data.equal ? 0 : 5;
}

int cmd_verify_exhaustive(const std::vector<std::uint64_t>& params,
                          const std::optional<std::uint64_t>& flag_nodes,
                          const std::string& out_path) {
    Clock clock;
    const std::size_t n = params[0], m = params[1], smax = params[2];
    const std::uint64_t q = params[3];
    if (n == 0 || m == 0 || q < 2)
        throw UsageError("--exhaustive needs n >= 1, m >= 1, q >= 2");
    SearchBudget budget = resolve_budget(flag_nodes);
    Gf field(static_cast<std::uint32_t>(q));

    const std::size_t cells = n * m;
    // per-cell state: q means "unknown", 0..q-1 are known values
    std::vector<std::uint64_t> state(cells, 0);
    std::uint64_t instances = 0, passed = 0, failed = 0, budget_failures = 0;
    SearchStats totals;

    bool done = false;
    while (!done) {
        std::size_t s = 0;
        for (std::uint64_t v : state) s += (v == q);
        if (s <= smax) {
            PartialMatrix<Gf> p;
            p.rows = n;
            p.cols = m;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    const std::uint64_t v = state[i * m + j];
                    if (v == q) p.unknowns.push_back({i + 1, j + 1});
                    else p.known[{i + 1, j + 1}] = static_cast<std::uint32_t>(v);
                }
            ++instances;
            try {
                auto rep = verify_theorem(to_affine_space(field, p), budget);
                totals.absorb(rep.stats);
                if (rep.equal && rep.extraction_ok) ++passed;
                else ++failed;
            } catch (const BudgetExceeded&) {
                ++budget_failures;
            }
        }
        // odometer over (q+1)^cells, last cell fastest
        std::size_t k = cells;
        done = true;
        while (k-- > 0) {
            if (++state[k] <= q) {
                done = false;
                break;
            }
            state[k] = 0;
        }
    }

    json report = report_skeleton("verify", "exhaustive");
    json& results = report["results"];
    results["params"] = {{"n", n}, {"m", m}, {"smax", smax}, {"q", q}};
    results["instances"] = instances;
    results["passed"] = passed;
    results["failed"] = failed;
    results["budget_failures"] = budget_failures;
    report["budget"] = budget_json(budget, totals);
    finish_report(report, clock, out_path);

    if (budget_failures > 0) return 4;
    return failed == 0 ? 0 : 5;
}

// ---------------------------------------------------------------------------
// rank: tensor file -> certified rank report
// ---------------------------------------------------------------------------

int cmd_rank(const std::string& in_path, const std::string& field_flag, std::size_t max_rank,
             const std::optional<std::uint64_t>& flag_nodes, const std::string& out_path) {
    Clock clock;
    const std::string text = read_file(in_path);
    TensorFile tf = parse_tensor_file(text);
    const FieldSpec spec = effective_field(tf.field, field_flag);
    require_prime_field(spec, "rank");
    SearchBudget budget = resolve_budget(flag_nodes);

    Gf field(spec);
    auto t = to_tensor(field, tf);
    const std::size_t cap = max_rank > 0 ? max_rank : rank_upper_cap(t);
    auto outcome = tensor_rank(t, cap, budget);

    json report = report_skeleton("rank", input_digest(text));
    json& results = report["results"];
    results["max_rank"] = cap;
    if (outcome.certificate) {
        results["exceeds_max"] = false;
        results["rank"] = outcome.certificate->rank;
        results["certificate"] = decomposition_json(field, outcome.certificate->decomposition);
    } else {
        results["exceeds_max"] = true;
    }
    report["budget"] = budget_json(budget, outcome.stats);
    finish_report(report, clock, out_path);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"lifted-tensor completion toolkit"};
    app.require_subcommand(1);

    std::string in_path, out_path, field_flag, variant = "hat", method;
    std::optional<std::uint64_t> budget_nodes;
    std::size_t max_rank = 0;
    std::vector<std::uint64_t> exhaustive;
    AlsConfig als_cfg;

    auto* reduce = app.add_subcommand("reduce", "serialize the lifted tensor of a problem");
    reduce->add_option("input", in_path, "problem file")->required();
    reduce->add_option("--variant", variant, "hat|tilde")
        ->check(CLI::IsMember({"hat", "tilde"}));
    reduce->add_option("--field", field_flag, "override the declared field");
    reduce->add_option("--out", out_path, "output path (default stdout)");

    auto* complete = app.add_subcommand("complete", "find a minimal-rank completion");
    complete->add_option("input", in_path, "problem file")->required();
    complete->add_option("--method", method, "brute|exact-tensor|als|rank1")->required();
    complete->add_option("--field", field_flag, "override the declared field");
    complete->add_option("--max-rank", max_rank, "search cap for exact-tensor");
    complete->add_option("--budget-nodes", budget_nodes, "search node budget");
    complete->add_option("--als-iters", als_cfg.max_iters, "ALS sweeps per restart");
    complete->add_option("--als-restarts", als_cfg.restarts, "ALS restarts");
    complete->add_option("--als-fit-tol", als_cfg.fit_tol, "accept a fit at this residual");
    complete->add_option("--als-stall-tol", als_cfg.stall_tol,
                         "abandon a restart when progress per sweep drops below this");
    complete->add_option("--seed", als_cfg.seed, "ALS base seed");
    complete->add_option("--out", out_path, "output path (default stdout)");

    auto* verify = app.add_subcommand("verify", "check the lifted-rank identity");
    verify->add_option("input", in_path, "problem file");
    verify->add_option("--field", field_flag, "override the declared field");
    verify->add_option("--exhaustive", exhaustive,
                       "n m smax q: run every pattern/assignment family")
        ->expected(4);
    verify->add_option("--budget-nodes", budget_nodes, "search node budget");
    verify->add_option("--out", out_path, "output path (default stdout)");

    auto* rank = app.add_subcommand("rank", "certified tensor rank of a tensor file");
    rank->add_option("input", in_path, "tensor file")->required();
    rank->add_option("--field", field_flag, "override the declared field");
    rank->add_option("--max-rank", max_rank, "search cap");
    rank->add_option("--budget-nodes", budget_nodes, "search node budget");
    rank->add_option("--out", out_path, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (reduce->parsed()) return cmd_reduce(in_path, variant, field_flag, out_path);
        if (complete->parsed()) {
            als_cfg.validate();
            return cmd_complete(in_path, method, field_flag, budget_nodes, max_rank, als_cfg,
                                out_path);
        }
        if (verify->parsed()) {
            if (!exhaustive.empty())
                return cmd_verify_exhaustive(exhaustive, budget_nodes, out_path);
            if (in_path.empty())
                throw UsageError("verify needs a problem file or --exhaustive n m smax q");
            return cmd_verify_single(in_path, field_flag, budget_nodes, out_path);
        }
        if (rank->parsed())
            return cmd_rank(in_path, field_flag, max_rank, budget_nodes, out_path);
        throw UsageError("no subcommand selected");
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 3;
    } catch (const BudgetExceeded& e) {
        std::fprintf(stderr, "budget exceeded: %s\n", e.what());
        return 4;
    } catch (const NoFitFound& e) {
        std::fprintf(stderr, "no fit found: %s (best residual %g)\n", e.what(),
                     e.best_residual);
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 5;
    }
}

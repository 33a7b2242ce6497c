#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rankbridge/completion.hpp"
#include "test_util.hpp"

using namespace rankbridge;
using rbtest::make_pure;
using rbtest::make_tensor;
using rbtest::make_vec;

namespace {

/// The running 3x3 example: knowns 2,2,3,6,2 and four unknown slots.
template <FieldType F>
PartialMatrix<F> running_example(const F& field) {
    PartialMatrix<F> p;
    p.rows = 3;
    p.cols = 3;
    p.known[{1, 1}] = field.from_int(2);
    p.known[{2, 1}] = field.from_int(2);
    p.known[{2, 2}] = field.from_int(3);
    p.known[{3, 2}] = field.from_int(6);
    p.known[{3, 3}] = field.from_int(2);
    p.unknowns = {{1, 2}, {1, 3}, {2, 3}, {3, 1}};
    return p;
}

} // namespace

TEST_CASE("partial matrix validation", "[completion]") {
    Rationals q;
    PartialMatrix<Rationals> p;
    p.rows = 2;
    p.cols = 2;
    p.known[{1, 1}] = q.one();
    p.unknowns = {{2, 2}};
    CHECK_NOTHROW(p.validate());

    SECTION("position out of range") {
        p.known[{3, 1}] = q.one();
        CHECK_THROWS_AS(p.validate(), ValidationError);
    }
    SECTION("unknown out of range") {
        p.unknowns.push_back({0, 1});
        CHECK_THROWS_AS(p.validate(), ValidationError);
    }
    SECTION("duplicate unknown") {
        p.unknowns.push_back({2, 2});
        CHECK_THROWS_AS(p.validate(), ValidationError);
    }
    SECTION("known and unknown overlap") {
        p.unknowns.push_back({1, 1});
        CHECK_THROWS_AS(p.validate(), ValidationError);
    }
    SECTION("zero dimension") {
        p.rows = 0;
        CHECK_THROWS_AS(p.validate(), ValidationError);
    }
}

TEST_CASE("to_affine_space builds base and basis generators", "[completion]") {
    Rationals q;

    SECTION("fully known matrix gives s = 0") {
        PartialMatrix<Rationals> p;
        p.rows = 2;
        p.cols = 2;
        p.known[{1, 1}] = q.from_int(1);
        p.known[{1, 2}] = q.from_int(2);
        p.known[{2, 1}] = q.from_int(3);
        p.known[{2, 2}] = q.from_int(4);
        auto space = to_affine_space(q, p);
        CHECK(space.s() == 0);
        CHECK(tensor_eq(space.base(), make_tensor(q, {2, 2}, {1, 2, 3, 4})));
    }

    SECTION("running example") {
        auto space = to_affine_space(q, running_example(q));
        CHECK(space.s() == 4);
        CHECK(tensor_eq(space.base(), make_tensor(q, {3, 3}, {2, 0, 0, 2, 3, 0, 0, 6, 2})));
        // generator k is the basis tensor at unknown k
        const std::vector<Position> expected{{1, 2}, {1, 3}, {2, 3}, {3, 1}};
        for (std::size_t k = 0; k < 4; ++k) {
            auto vec = expand_pure(q, space.base().shape(), space.generators()[k]);
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j) {
                    bool hit = (i + 1 == expected[k].first && j + 1 == expected[k].second);
                    CHECK(q.eq(vec[i * 3 + j], hit ? q.one() : q.zero()));
                }
        }
    }

    SECTION("1x1 matrix with one unknown") {
        PartialMatrix<Rationals> p;
        p.rows = 1;
        p.cols = 1;
        p.unknowns = {{1, 1}};
        auto space = to_affine_space(q, p);
        CHECK(space.s() == 1);
        CHECK(space.base().is_zero());
        CHECK(expand_pure(q, space.base().shape(), space.generators()[0]) == make_vec(q, {1}));
    }
}

TEST_CASE("validate_generators checks vectorized rank", "[completion]") {
    Gf f2(2);
    DenseTensor<Gf> base(f2, {2, 2});

    SECTION("distinct positions pass") {
        auto space = to_affine_space(f2, [&] {
            PartialMatrix<Gf> p;
            p.rows = 2;
            p.cols = 2;
            p.unknowns = {{1, 1}, {2, 2}};
            return p;
        }());
        CHECK_NOTHROW(validate_generators(space));
    }

    SECTION("duplicated generator fails") {
        std::vector<PureTensor<Gf>> gens{make_pure(f2, {{1, 0}, {1, 0}}),
                                         make_pure(f2, {{1, 0}, {1, 0}})};
        AffineTensorSpace<Gf> space(base, gens);
        CHECK_THROWS_AS(validate_generators(space), DependentGenerators);
    }

    SECTION("rank of vectorized generators decides") {
        // Over GF(2): vectorizations are (1,0,0,0), (0,0,0,1), (1,1,1,1) —
        // the 3x4 matrix has rank 3, so the triple is independent.
        std::vector<PureTensor<Gf>> gens{make_pure(f2, {{1, 0}, {1, 0}}),
                                         make_pure(f2, {{0, 1}, {0, 1}}),
                                         make_pure(f2, {{1, 1}, {1, 1}})};
        std::vector<std::vector<uint32_t>> vecs;
        for (const auto& g : gens) vecs.push_back(expand_pure(f2, base.shape(), g));
        REQUIRE(span_rank(f2, 4, vecs) == 3);
        AffineTensorSpace<Gf> space(base, gens);
        CHECK_NOTHROW(validate_generators(space));
    }

    SECTION("a genuinely dependent pure triple fails") {
        // (1,0)x(1,1) = (1,0)x(1,0) + (1,0)x(0,1)
        std::vector<PureTensor<Gf>> gens{make_pure(f2, {{1, 0}, {1, 0}}),
                                         make_pure(f2, {{1, 0}, {0, 1}}),
                                         make_pure(f2, {{1, 0}, {1, 1}})};
        AffineTensorSpace<Gf> space(base, gens);
        CHECK_THROWS_AS(validate_generators(space), DependentGenerators);
    }
}

TEST_CASE("apply_completion fills the unknown slots", "[completion]") {
    Rationals q;
    auto space = to_affine_space(q, running_example(q));

    SECTION("zero coefficients give the base") {
        auto b = apply_completion(space, make_vec(q, {0, 0, 0, 0}));
        CHECK(tensor_eq(b, space.base()));
    }

    SECTION("the published completion") {
        auto b = apply_completion(space, make_vec(q, {3, 1, 1, 4}));
        CHECK(tensor_eq(b, make_tensor(q, {3, 3}, {2, 3, 1, 2, 3, 1, 4, 6, 2})));
        CHECK(matrix_rank(b) == 1);
    }

    SECTION("GF(2) single unknown flips one entry") {
        Gf f2(2);
        PartialMatrix<Gf> p;
        p.rows = 2;
        p.cols = 2;
        p.known[{1, 1}] = 1;
        p.unknowns = {{2, 1}};
        auto sp = to_affine_space(f2, p);
        auto b = apply_completion(sp, {1});
        CHECK(tensor_eq(b, make_tensor(f2, {2, 2}, {1, 0, 1, 0})));
    }

    SECTION("wrong coefficient count") {
        CHECK_THROWS_AS(apply_completion(space, make_vec(q, {1, 2})), ShapeMismatch);
    }

    SECTION("known positions never move") {
        std::mt19937_64 rng(23);
        auto p = running_example(q);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<Rationals::Value> lambdas;
            for (int k = 0; k < 4; ++k)
                lambdas.push_back(q.make(int64_t(rng() % 13) - 6, 1 + int64_t(rng() % 4)));
            auto b = apply_completion(space, lambdas);
            for (const auto& [pos, value] : p.known)
                CHECK(q.eq(b[(pos.first - 1) * 3 + (pos.second - 1)], value));
        }
    }
}

TEST_CASE("membership inverts apply_completion", "[completion]") {
    Rationals q;
    auto space = to_affine_space(q, running_example(q));

    SECTION("base is a member with zero coefficients") {
        auto lam = membership(space, space.base());
        REQUIRE(lam.has_value());
        CHECK(*lam == make_vec(q, {0, 0, 0, 0}));
    }

    SECTION("published completion recovers its coefficients") {
        auto lam = membership(space, make_tensor(q, {3, 3}, {2, 3, 1, 2, 3, 1, 4, 6, 2}));
        REQUIRE(lam.has_value());
        CHECK(*lam == make_vec(q, {3, 1, 1, 4}));
    }

    SECTION("perturbing a known position breaks membership") {
        auto b = space.base();
        b[0] = q.add(b[0], q.one()); // (1,1) is a known slot
        CHECK_FALSE(membership(space, b).has_value());
    }

    SECTION("round-trip on random coefficients") {
        std::mt19937_64 rng(29);
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<Rationals::Value> lambdas;
            for (int k = 0; k < 4; ++k)
                lambdas.push_back(q.make(int64_t(rng() % 21) - 10, 1 + int64_t(rng() % 5)));
            auto lam = membership(space, apply_completion(space, lambdas));
            REQUIRE(lam.has_value());
            CHECK(*lam == lambdas);
        }
    }

    SECTION("s = 0 membership is equality") {
        PartialMatrix<Rationals> p;
        p.rows = 1;
        p.cols = 2;
        p.known[{1, 1}] = q.one();
        p.known[{1, 2}] = q.from_int(2);
        auto sp = to_affine_space(q, p);
        CHECK(membership(sp, make_tensor(q, {1, 2}, {1, 2})).has_value());
        CHECK_FALSE(membership(sp, make_tensor(q, {1, 2}, {1, 3})).has_value());
    }

    SECTION("general pure generators, not just basis tensors") {
        // Remark-style space: U spanned by (1,1)x(1,0) and (1,0)x(0,1)
        Gf f5(5);
        DenseTensor<Gf> base = make_tensor(f5, {2, 2}, {1, 0, 0, 1});
        std::vector<PureTensor<Gf>> gens{make_pure(f5, {{1, 1}, {1, 0}}),
                                         make_pure(f5, {{1, 0}, {0, 1}})};
        AffineTensorSpace<Gf> sp(base, gens);
        validate_generators(sp);
        auto b = apply_completion(sp, {2, 3});
        auto lam = membership(sp, b);
        REQUIRE(lam.has_value());
        CHECK(*lam == std::vector<uint32_t>{2, 3});
        // and a non-member
        auto outside = make_tensor(f5, {2, 2}, {0, 1, 1, 0});
        CHECK_FALSE(membership(sp, outside).has_value());
    }
}

TEST_CASE("to_affine_space output always has independent generators", "[completion][property]") {
    Gf f3(3);
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        PartialMatrix<Gf> p;
        p.rows = 2 + rng() % 3;
        p.cols = 2 + rng() % 3;
        std::vector<Position> all;
        for (std::size_t i = 1; i <= p.rows; ++i)
            for (std::size_t j = 1; j <= p.cols; ++j) all.push_back({i, j});
        std::shuffle(all.begin(), all.end(), rng);
        const std::size_t s = rng() % (all.size() + 1);
        for (std::size_t k = 0; k < all.size(); ++k) {
            if (k < s) p.unknowns.push_back(all[k]);
            else if (rng() % 2) p.known[all[k]] = uint32_t(rng() % 3);
        }
        auto space = to_affine_space(f3, p);
        CHECK_NOTHROW(validate_generators(space));
    }
}

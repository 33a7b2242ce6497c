#pragma once

#include <charconv>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include <gmpxx.h>

#include "rankbridge/errors.hpp"

namespace rankbridge {

enum class FieldKind { prime, rational, real };

namespace detail {

inline bool is_prime_u32(std::uint64_t n) {
    if (n < 2) return false;
    if (n % 2 == 0) return n == 2;
    for (std::uint64_t d = 3; d * d <= n; d += 2)
        if (n % d == 0) return false;
    return true;
}

inline std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) throw Error("double formatting failed");
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
    double x = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError("cannot parse real value '" + std::string(s) + "'");
    return x;
}

} // namespace detail

/// Runtime selection of the scalar domain all arithmetic runs in.
/// Designator strings: "gf:<p>" (prime field), "rational" (exact, arbitrary
/// precision), "real:<tol>" (doubles with a hybrid comparison tolerance).
struct FieldSpec {
    FieldKind kind = FieldKind::rational;
    std::uint32_t p = 0;       // prime kind
    double tolerance = 1e-9;   // real kind

    static FieldSpec gf(std::uint64_t p) {
        if (p > 2147483647ull + 1ull)
            throw ValidationError("prime modulus " + std::to_string(p) + " exceeds 2^31");
        if (!detail::is_prime_u32(p))
            throw ValidationError(std::to_string(p) + " is not prime");
        FieldSpec s;
        s.kind = FieldKind::prime;
        s.p = static_cast<std::uint32_t>(p);
        return s;
    }

    static FieldSpec rational() {
        FieldSpec s;
        s.kind = FieldKind::rational;
        return s;
    }

    static FieldSpec real(double tolerance = 1e-9) {
        if (!(tolerance > 0.0) || !(tolerance < 1.0))
            throw ValidationError("real tolerance must lie in (0, 1), got " +
                                  detail::format_double(tolerance));
        FieldSpec s;
        s.kind = FieldKind::real;
        s.tolerance = tolerance;
        return s;
    }

    static FieldSpec parse(std::string_view designator) {
        if (designator == "rational") return rational();
        if (designator.rfind("gf:", 0) == 0) {
            std::string_view body = designator.substr(3);
            std::uint64_t p = 0;
            auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), p);
            if (ec != std::errc{} || ptr != body.data() + body.size())
                throw ValidationError("bad prime in field designator '" + std::string(designator) + "'");
            return gf(p);
        }
        if (designator.rfind("real:", 0) == 0)
            return real(detail::parse_double(designator.substr(5)));
        if (designator == "real") return real();
        throw ValidationError("unknown field designator '" + std::string(designator) + "'");
    }

    std::string designator() const {
        switch (kind) {
            case FieldKind::prime: return "gf:" + std::to_string(p);
            case FieldKind::rational: return "rational";
            case FieldKind::real: return "real:" + detail::format_double(tolerance);
        }
        throw Error("corrupt FieldSpec");
    }

    bool operator==(const FieldSpec&) const = default;
};

/// Prime field GF(p) for a word-sized prime. Values are canonical
/// representatives in [0, p).
class Gf {
public:
    using Value = std::uint32_t;
    static constexpr bool is_exact = true;

    explicit Gf(std::uint32_t p) : Gf(FieldSpec::gf(p)) {}
    explicit Gf(const FieldSpec& spec) : p_(spec.p) {
        if (spec.kind != FieldKind::prime) throw ValidationError("Gf requires a prime FieldSpec");
    }

    FieldSpec spec() const { return FieldSpec::gf(p_); }
    std::uint32_t modulus() const { return p_; }

    Value zero() const { return 0; }
    Value one() const { return 1; }

    Value add(Value a, Value b) const {
        std::uint64_t s = std::uint64_t(a) + b;
        return s >= p_ ? Value(s - p_) : Value(s);
    }
    Value neg(Value a) const { return a == 0 ? 0 : p_ - a; }
    Value sub(Value a, Value b) const { return add(a, neg(b)); }
    Value mul(Value a, Value b) const { return Value((std::uint64_t(a) * b) % p_); }

    Value inv(Value a) const {
        if (a == 0) throw DivisionByZero();
        // extended Euclid on (a, p)
        std::int64_t t = 0, new_t = 1, r = p_, new_r = a;
        while (new_r != 0) {
            std::int64_t q = r / new_r;
            t = std::exchange(new_t, t - q * new_t);
            r = std::exchange(new_r, r - q * new_r);
        }
        if (t < 0) t += p_;
        return Value(t);
    }
    Value div(Value a, Value b) const { return mul(a, inv(b)); }

    bool eq(Value a, Value b) const { return a == b; }
    bool is_zero(Value a) const { return a == 0; }
    bool is_one(Value a) const { return eq(a, one()); }

    /// Canonical representative of any signed integer.
    Value from_int(long long n) const {
        long long r = n % static_cast<long long>(p_);
        if (r < 0) r += p_;
        return Value(r);
    }

    Value parse(std::string_view s) const {
        long long n = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw ValidationError("cannot parse GF(" + std::to_string(p_) + ") value '" + std::string(s) + "'");
        return from_int(n);
    }
    std::string to_string(Value a) const { return std::to_string(a); }

    /// Pivot preference during elimination; exact fields only distinguish zero.
    double pivot_weight(Value a) const { return a == 0 ? 0.0 : 1.0; }

private:
    std::uint32_t p_;
};

/// Exact rational arithmetic on GMP mpq values, kept in lowest terms with
/// positive denominator (GMP's canonical form).
class Rationals {
public:
    using Value = mpq_class;
    static constexpr bool is_exact = true;

    Rationals() = default;
    explicit Rationals(const FieldSpec& spec) {
        if (spec.kind != FieldKind::rational)
            throw ValidationError("Rationals requires a rational FieldSpec");
    }

    FieldSpec spec() const { return FieldSpec::rational(); }

    Value zero() const { return Value(0); }
    Value one() const { return Value(1); }

    Value add(const Value& a, const Value& b) const { return a + b; }
    Value neg(const Value& a) const { return -a; }
    Value sub(const Value& a, const Value& b) const { return a - b; }
    Value mul(const Value& a, const Value& b) const { return a * b; }
    Value inv(const Value& a) const {
        if (a == 0) throw DivisionByZero();
        return 1 / a;
    }
    Value div(const Value& a, const Value& b) const { return mul(a, inv(b)); }

    bool eq(const Value& a, const Value& b) const { return a == b; }
    bool is_zero(const Value& a) const { return a == 0; }
    bool is_one(const Value& a) const { return a == 1; }

    Value from_int(long long n) const {
        Value v;
        v = static_cast<long>(n);
        return v;
    }

    Value make(long long num, long long den) const {
        if (den == 0) throw DivisionByZero();
        Value v(static_cast<long>(num), static_cast<long>(den));
        v.canonicalize();
        return v;
    }

    Value parse(std::string_view s) const {
        try {
            Value v(std::string(s), 10);
            if (v.get_den() == 0) throw std::invalid_argument("zero denominator");
            v.canonicalize();
            return v;
        } catch (const std::invalid_argument&) {
            throw ValidationError("cannot parse rational value '" + std::string(s) + "'");
        }
    }
    std::string to_string(const Value& a) const { return a.get_str(); }

    double pivot_weight(const Value& a) const { return a == 0 ? 0.0 : 1.0; }
};

/// Doubles with a relative-absolute hybrid tolerance:
/// eq(x, y) iff |x - y| <= tol * max(1, |x|, |y|).
class Reals {
public:
    using Value = double;
    static constexpr bool is_exact = false;

    explicit Reals(double tolerance = 1e-9) : Reals(FieldSpec::real(tolerance)) {}
    explicit Reals(const FieldSpec& spec) : tol_(spec.tolerance) {
        if (spec.kind != FieldKind::real) throw ValidationError("Reals requires a real FieldSpec");
    }

    FieldSpec spec() const { return FieldSpec::real(tol_); }
    double tolerance() const { return tol_; }

    Value zero() const { return 0.0; }
    Value one() const { return 1.0; }

    Value add(Value a, Value b) const { return a + b; }
    Value neg(Value a) const { return -a; }
    Value sub(Value a, Value b) const { return a - b; }
    Value mul(Value a, Value b) const { return a * b; }
    Value inv(Value a) const {
        if (is_zero(a)) throw DivisionByZero();
        return 1.0 / a;
    }
    Value div(Value a, Value b) const { return mul(a, inv(b)); }

    bool eq(Value a, Value b) const {
        return std::abs(a - b) <= tol_ * std::max({1.0, std::abs(a), std::abs(b)});
    }
    bool is_zero(Value a) const { return eq(a, 0.0); }
    bool is_one(Value a) const { return eq(a, 1.0); }

    Value from_int(long long n) const { return static_cast<double>(n); }
    Value parse(std::string_view s) const { return detail::parse_double(s); }
    std::string to_string(Value a) const { return detail::format_double(a); }

    double pivot_weight(Value a) const { return is_zero(a) ? 0.0 : std::abs(a); }

private:
    double tol_;
};

template <class F>
concept FieldType = requires(const F f, const typename F::Value a, const typename F::Value b) {
    typename F::Value;
    { F::is_exact } -> std::convertible_to<bool>;
    { f.zero() } -> std::same_as<typename F::Value>;
    { f.one() } -> std::same_as<typename F::Value>;
    { f.add(a, b) } -> std::same_as<typename F::Value>;
    { f.sub(a, b) } -> std::same_as<typename F::Value>;
    { f.neg(a) } -> std::same_as<typename F::Value>;
    { f.mul(a, b) } -> std::same_as<typename F::Value>;
    { f.inv(a) } -> std::same_as<typename F::Value>;
    { f.eq(a, b) } -> std::same_as<bool>;
    { f.is_zero(a) } -> std::same_as<bool>;
    { f.from_int(1ll) } -> std::same_as<typename F::Value>;
    { f.spec() } -> std::same_as<FieldSpec>;
    { f.pivot_weight(a) } -> std::same_as<double>;
};

/// Instantiates the field selected by `spec` and invokes `fn` with it.
template <class Fn>
decltype(auto) with_field(const FieldSpec& spec, Fn&& fn) {
    switch (spec.kind) {
        case FieldKind::prime: return std::forward<Fn>(fn)(Gf(spec));
        case FieldKind::rational: return std::forward<Fn>(fn)(Rationals(spec));
        case FieldKind::real: return std::forward<Fn>(fn)(Reals(spec));
    }
    throw Error("corrupt FieldSpec");
}

} // namespace rankbridge

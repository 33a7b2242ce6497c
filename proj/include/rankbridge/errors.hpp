#pragma once

#include <stdexcept>
#include <string>

namespace rankbridge {

/// Base class of every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Multiplicative inversion of the zero element.
struct DivisionByZero : Error {
    DivisionByZero() : Error("division by zero") {}
};

/// An index (position, mode, basis slot) outside its valid range.
struct BadIndex : Error {
    using Error::Error;
};

/// Operands whose shapes or lengths do not line up.
struct ShapeMismatch : Error {
    using Error::Error;
};

/// Generator set of an affine space is linearly dependent.
struct DependentGenerators : Error {
    using Error::Error;
};

/// A decomposition does not expand to the tensor it claims to represent.
struct InconsistentDecomposition : Error {
    using Error::Error;
};

/// The slot-space vectors of a decomposition fail to span, so no completion
/// can be extracted. Only possible on corrupted or far-off-tolerance input.
struct SpanningFailure : Error {
    using Error::Error;
};

/// A configured search or enumeration budget would be exceeded.
struct BudgetExceeded : Error {
    using Error::Error;
};

/// Rank sweep hit its cap without reaching the fit tolerance.
struct NoFitFound : Error {
    NoFitFound(const std::string& msg, double best) : Error(msg), best_residual(best) {}
    double best_residual;
};

/// Malformed or semantically invalid input file.
struct ValidationError : Error {
    using Error::Error;
};

/// Incompatible command-line flag combination.
struct UsageError : Error {
    using Error::Error;
};

} // namespace rankbridge

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace specgap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An input violates a documented precondition (hypothesis not met, bad
/// parameter range, dimension mismatch).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed to reach its tolerance.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double achieved = 0.0)
        : Error(what), achieved_(achieved) {}

    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// The rank of the path projection changed along the homotopy A + sV.
class RankChangeError : public NumericalError {
public:
    RankChangeError(const std::string& what, double s)
        : NumericalError(what, s), s_(s) {}

    double s() const noexcept { return s_; }

private:
    double s_;
};

/// A contour node sits too close to the spectrum of A + sV.
class ContourError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// An applicable a-priori bound was exceeded by a measured value.
class BoundViolation : public Error {
public:
    BoundViolation(const std::string& what, std::uint64_t seed)
        : Error(what), seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
};

/// Malformed exchange document. `field` names the offending JSON path.
class ParseError : public Error {
public:
    ParseError(const std::string& field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace specgap

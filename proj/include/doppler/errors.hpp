#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace doppler {

enum class ErrorKind {
    Config,
    Frame,
    Dimension,
    Degeneracy,
    NonNormalizable,
    DefectiveMatrix,
    SingularPropagator,
    PoleOnAxis,
    NumericFailure,
};

const char* to_string(ErrorKind kind);

/// Base of every error raised by the library. The message can be annotated
/// as the error travels outwards (for instance with the sweep time point).
class Error : public std::exception {
public:
    Error(ErrorKind kind, std::string message) : kind_(kind), message_(std::move(message)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const char* what() const noexcept override { return message_.c_str(); }

    void add_context(const std::string& context) { message_ = context + ": " + message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::string message) : Error(ErrorKind::Config, std::move(message)) {}
};

/// The coupling graph does not admit a consistent rotating frame.
class FrameError : public Error {
public:
    explicit FrameError(std::string message) : Error(ErrorKind::Frame, std::move(message)) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(std::string message) : Error(ErrorKind::Dimension, std::move(message)) {}
};

/// Steady state is not unique: the generator has `zero_modes` near-zero eigenvalues.
class DegeneracyError : public Error {
public:
    DegeneracyError(std::size_t zero_modes, std::string message)
        : Error(ErrorKind::Degeneracy, std::move(message)), zero_modes_(zero_modes) {}

    std::size_t zero_modes() const noexcept { return zero_modes_; }

private:
    std::size_t zero_modes_;
};

class NonNormalizableError : public Error {
public:
    explicit NonNormalizableError(std::string message)
        : Error(ErrorKind::NonNormalizable, std::move(message)) {}
};

class DefectiveMatrixError : public Error {
public:
    DefectiveMatrixError(double residual, std::string message)
        : Error(ErrorKind::DefectiveMatrix, std::move(message)), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class SingularPropagatorError : public Error {
public:
    SingularPropagatorError(double velocity, std::string message)
        : Error(ErrorKind::SingularPropagator, std::move(message)), velocity_(velocity) {}

    double velocity() const noexcept { return velocity_; }

private:
    double velocity_;
};

/// A real, nonzero eigenvalue puts a pole of 1/(1 + lambda u) on the integration path.
class PoleOnAxisError : public Error {
public:
    PoleOnAxisError(std::complex<double> lambda, std::string message)
        : Error(ErrorKind::PoleOnAxis, std::move(message)), lambda_(lambda) {}

    std::complex<double> lambda() const noexcept { return lambda_; }

private:
    std::complex<double> lambda_;
};

class NumericFailureError : public Error {
public:
    explicit NumericFailureError(std::string message)
        : Error(ErrorKind::NumericFailure, std::move(message)) {}
};

}  // namespace doppler

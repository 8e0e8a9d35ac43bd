#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

namespace vscstab {

/// Base class for every error raised by the library. `kind()` is a short
/// machine-readable tag used by the command-line front end.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& what) : Error("parameter", what) {}
};

class ArithmeticError : public Error {
public:
    explicit ArithmeticError(const std::string& what) : Error("arithmetic", what) {}
};

/// Evaluation of a rational function at one of its poles.
class PoleError : public Error {
public:
    PoleError(std::complex<double> s, const std::string& what)
        : Error("pole", what), s_(s) {}

    [[nodiscard]] std::complex<double> where() const noexcept { return s_; }

private:
    std::complex<double> s_;
};

class InfeasibleOperatingPoint : public Error {
public:
    explicit InfeasibleOperatingPoint(const std::string& what)
        : Error("infeasible-operating-point", what) {}
};

class ModelError : public Error {
public:
    explicit ModelError(const std::string& what) : Error("model", what) {}
};

class EvaluationError : public Error {
public:
    explicit EvaluationError(const std::string& what) : Error("evaluation", what) {}
};

class DegenerateSystemError : public Error {
public:
    explicit DegenerateSystemError(const std::string& what) : Error("degenerate-system", what) {}
};

class UnreliableWinding : public Error {
public:
    explicit UnreliableWinding(const std::string& what) : Error("unreliable-winding", what) {}
};

class AmbiguousBoundary : public Error {
public:
    explicit AmbiguousBoundary(const std::string& what) : Error("ambiguous-boundary", what) {}
};

class WindowQualityError : public Error {
public:
    explicit WindowQualityError(const std::string& what) : Error("window-quality", what) {}
};

class SimulationError : public Error {
public:
    explicit SimulationError(const std::string& what) : Error("simulation", what) {}
};

/// Configuration problems. `line` is 0 when the error is not tied to a line
/// (e.g. a missing key).
class ConfigError : public Error {
public:
    ConfigError(std::string key, int line, const std::string& what)
        : Error("config", what), key_(std::move(key)), line_(line) {}

    [[nodiscard]] const std::string& key() const noexcept { return key_; }
    [[nodiscard]] int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_;
};

}  // namespace vscstab

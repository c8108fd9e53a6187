#pragma once

#include <stdexcept>
#include <string>

namespace zerolocus {

/// Broad failure classes. The CLI maps each one to a fixed exit status.
enum class ErrorKind {
    contract,      // precondition / dimension mismatch
    usage,         // bad command-line or config input
    numerical,     // construction, corrector or divergence failure
    io,            // file system / parse failure
    schema,        // a file parsed but does not have the expected layout
};

const char* error_kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& what)
        : std::runtime_error(what), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Short machine-readable identifier, e.g. "singular_system".
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& what)
        : Error(ErrorKind::contract, "contract_violation", what) {}
};

class SingularSystemError : public Error {
public:
    explicit SingularSystemError(const std::string& what)
        : Error(ErrorKind::numerical, "singular_system", what) {}
};

class NumericalError : public Error {
public:
    NumericalError(std::string code, const std::string& what)
        : Error(ErrorKind::numerical, std::move(code), what) {}
};

/// Throws ContractViolation with `message` unless `condition` holds.
inline void require(bool condition, const std::string& message) {
    if (!condition) throw ContractViolation(message);
}

}  // namespace zerolocus

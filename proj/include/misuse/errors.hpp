#pragma once

#include <stdexcept>
#include <string>

namespace misuse {

// Root of every error the engine raises on bad input or misuse. Internal
// invariant breaks use InternalError and indicate a bug.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input failed a type invariant. `kind` is a short machine tag such as
// "times", "monotone" or "range"; `field` names the offending field when known.
class ValidationError : public Error {
public:
    ValidationError(std::string kind, const std::string& message, std::string field = {})
        : Error(message), kind_(std::move(kind)), field_(std::move(field)) {}

    const std::string& kind() const noexcept { return kind_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::string kind_;
    std::string field_;
};

// Evaluation outside a function's domain (e.g. negative time).
class DomainError : public Error {
public:
    using Error::Error;
};

// A curve inversion target lies above the curve maximum.
class UnreachableError : public Error {
public:
    using Error::Error;
};

// Well-formed inputs combined in a way the operation does not accept.
class UsageError : public Error {
public:
    using Error::Error;
};

class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace misuse

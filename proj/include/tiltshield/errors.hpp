#pragma once

#include <stdexcept>
#include <string>

namespace tiltshield {

// Error taxonomy shared by the library and the CLI. The CLI maps each kind
// to a process exit code: config -> 2, contract/domain/numeric -> 3,
// format/io -> 4.
enum class ErrorKind {
    config,
    contract,
    domain,
    format,
    numeric,
    io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    int exit_code() const {
        switch (kind_) {
        case ErrorKind::config: return 2;
        case ErrorKind::format:
        case ErrorKind::io: return 4;
        default: return 3;
        }
    }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ErrorKind::config, msg) {}
};

struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(ErrorKind::contract, msg) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(ErrorKind::domain, msg) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(ErrorKind::format, msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorKind::io, msg) {}
};

}  // namespace tiltshield

#pragma once

#include <stdexcept>
#include <string>

namespace aerogym {

/// Base error. `code()` is a stable snake_case reason string that the CLI
/// prints verbatim, so scripts can match on it.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// dynamics
struct ModelDomainError : Error {
    explicit ModelDomainError(const std::string& m) : Error("model_domain", m) {}
};
struct StallError : Error {
    explicit StallError(const std::string& m) : Error("stall", m) {}
};
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& m) : Error("divergence", m) {}
};
struct InfeasibleTrimError : Error {
    explicit InfeasibleTrimError(const std::string& m) : Error("infeasible_trim", m) {}
};
struct PresetError : Error {
    explicit PresetError(const std::string& m) : Error("invalid_preset", m) {}
};

// team configuration; the code names the violated rule
struct ConfigError : Error {
    using Error::Error;
};

struct TaskDefinitionError : Error {
    explicit TaskDefinitionError(const std::string& m) : Error("task_definition", m) {}
};

struct ControllerDomainError : Error {
    explicit ControllerDomainError(const std::string& m) : Error("controller_domain", m) {}
};

// environment / online
struct EnvironmentError : Error {
    using Error::Error;
};
struct ProtocolError : Error {
    using Error::Error;
};
struct TransportError : Error {
    using Error::Error;
};

// trajectory files
struct TrajectoryError : Error {
    using Error::Error;
};

}  // namespace aerogym

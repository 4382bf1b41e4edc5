#pragma once

#include <stdexcept>
#include <string>

namespace mfg {

// Error categories map 1:1 onto the CLI exit codes.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SimulationError : std::runtime_error {
    explicit SimulationError(const std::string& msg) : std::runtime_error(msg) {}
};

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitConfig = 2,
    kExitValidation = 3,
    kExitSolver = 4,
    kExitSimulation = 5,
};

} // namespace mfg

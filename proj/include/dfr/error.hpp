#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dfr {

/// Malformed or invariant-violating input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared in the reservoir state or a gradient.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t step, std::size_t node)
        : std::runtime_error("reservoir diverged at step " + std::to_string(step) + ", node "
                             + std::to_string(node))
        , step_(step)
        , node_(node)
    {
    }
    explicit DivergenceError(const std::string& what)
        : std::runtime_error(what)
    {
    }

    /// 1-based step and node of the first non-finite state (0 when not applicable).
    std::size_t step() const noexcept { return step_; }
    std::size_t node() const noexcept { return node_; }

private:
    std::size_t step_ = 0;
    std::size_t node_ = 0;
};

/// Linear solve failure in the readout fit.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace dfr

#pragma once

// Input masking and the modular DFR recurrence
//
//   x(k)_n = A g(j(k)_n + x(k-1)_n) + B pred(k, n),   j(k) = M u(k),
//
// where pred(k, n) = x(k)_{n-1} for n > 1 and pred(k, 1) = x(k-1)_{N_x}:
// the delay line is a ring that continues across input steps.

#include "dfr/dataset.hpp"
#include "dfr/error.hpp"
#include "dfr/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dfr {

/// Bipolar N_x by N_u mask; a pure function of (seed, N_x, N_u).
struct Mask {
    Eigen::MatrixXd entries;
    std::uint64_t seed = 0;

    std::size_t nodes() const noexcept { return static_cast<std::size_t>(entries.rows()); }
    std::size_t inputs() const noexcept { return static_cast<std::size_t>(entries.cols()); }

    bool operator==(const Mask& o) const
    {
        return seed == o.seed && entries.rows() == o.entries.rows() && entries.cols() == o.entries.cols()
            && entries == o.entries;
    }
};

/// Entry (n, u) is +1 when bit 0 of SplitMix64 output number n*N_u + u is set, else -1.
inline Mask generate_mask(std::uint64_t seed, std::size_t nodes, std::size_t inputs)
{
    if (nodes < 1 || inputs < 1) {
        throw ConfigError("mask dimensions must be at least 1");
    }
    Mask m;
    m.seed = seed;
    m.entries.resize(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(inputs));
    SplitMix64 rng(seed);
    for (Eigen::Index n = 0; n < m.entries.rows(); ++n) {
        for (Eigen::Index u = 0; u < m.entries.cols(); ++u) {
            m.entries(n, u) = (rng.next() & 1U) != 0 ? 1.0 : -1.0;
        }
    }
    return m;
}

inline Eigen::VectorXd mask_input(const Mask& mask, const Eigen::Ref<const Eigen::VectorXd>& u)
{
    if (static_cast<std::size_t>(u.size()) != mask.inputs()) {
        throw ConfigError("mask_input: expected " + std::to_string(mask.inputs()) + " inputs, got "
                          + std::to_string(u.size()));
    }
    return mask.entries * u;
}

struct Nonlinearity {
    enum class Kind { linear, mackey_glass };
    Kind kind = Kind::linear;
    int p = 2; ///< Mackey-Glass exponent; positive and even.

    static Nonlinearity linear() noexcept { return {}; }
    static Nonlinearity mackey_glass(int p)
    {
        if (p < 2 || p % 2 != 0) {
            throw ConfigError("Mackey-Glass exponent must be an even integer >= 2");
        }
        return {Kind::mackey_glass, p};
    }

    bool operator==(const Nonlinearity&) const = default;

    std::string name() const { return kind == Kind::linear ? "linear" : "mackey-glass"; }
};

/// f_A(z) = A g(z) with its derivatives in z and in A.
struct NonlinearityValue {
    double value;
    double d_dz;
    double d_dA;
};

/// g(z) alone (the A-derivative of f_A).
inline double shape(const Nonlinearity& f, double z) noexcept
{
    if (f.kind == Nonlinearity::Kind::linear) {
        return z;
    }
    return z / (1.0 + std::pow(z, f.p));
}

/// g'(z); for Mackey-Glass (1 + (1 - p) z^p) / (1 + z^p)^2.
inline double shape_slope(const Nonlinearity& f, double z) noexcept
{
    if (f.kind == Nonlinearity::Kind::linear) {
        return 1.0;
    }
    const double zp = std::pow(z, f.p);
    const double den = 1.0 + zp;
    return (1.0 + (1.0 - f.p) * zp) / (den * den);
}

inline NonlinearityValue nonlinearity(const Nonlinearity& f, double A, double z) noexcept
{
    const double g = shape(f, z);
    return {A * g, A * shape_slope(f, z), g};
}

struct ReservoirParams {
    double A = 0.01;
    double B = 0.01;
    Nonlinearity f;
    Mask mask;

    std::size_t nodes() const noexcept { return mask.nodes(); }

    bool operator==(const ReservoirParams&) const = default;
};

enum class TraceMode { full, truncated };

/// Forward record. Full mode holds x(0) ... x(T); truncated mode holds x(T-1), x(T).
struct ReservoirTrace {
    TraceMode mode = TraceMode::full;
    std::size_t steps = 0;
    std::vector<Eigen::VectorXd> states;

    std::size_t stored_state_vectors() const noexcept { return states.size(); }

    /// x(k) in full mode.
    const Eigen::VectorXd& at(std::size_t k) const { return states.at(k); }
    const Eigen::VectorXd& last() const { return states.back(); }
    const Eigen::VectorXd& before_last() const { return states[states.size() - 2]; }
};

namespace detail {

inline void check_params(const ReservoirParams& params, const Sample& sample)
{
    if (params.nodes() < 1) {
        throw ConfigError("reservoir needs at least one node");
    }
    if (!std::isfinite(params.A) || !std::isfinite(params.B)) {
        throw ConfigError("reservoir parameters A, B must be finite");
    }
    if (sample.features() != params.mask.inputs()) {
        throw ConfigError("sample has " + std::to_string(sample.features()) + " features but mask expects "
                          + std::to_string(params.mask.inputs()));
    }
    if (sample.steps() < 1) {
        throw ConfigError("sample has no steps");
    }
}

/// One input step: writes x(k) into `cur` given x(k-1) in `prev` and j(k).
inline void reservoir_step(const ReservoirParams& params, const Eigen::VectorXd& j, const Eigen::VectorXd& prev,
                           Eigen::VectorXd& cur, std::size_t k)
{
    const auto nx = static_cast<Eigen::Index>(params.nodes());
    double pred = prev(nx - 1);
    for (Eigen::Index n = 0; n < nx; ++n) {
        const double x = params.A * shape(params.f, j(n) + prev(n)) + params.B * pred;
        if (!std::isfinite(x)) {
            throw DivergenceError(k, static_cast<std::size_t>(n) + 1);
        }
        cur(n) = x;
        pred = x;
    }
}

} // namespace detail

/// Runs the recurrence over the sample, calling `on_step(prev, cur)` with
/// x(k-1), x(k) for k = 1..T. Throws DivergenceError on a non-finite state.
template <class OnStep>
ReservoirTrace run_reservoir(const ReservoirParams& params, const Sample& sample, TraceMode mode, OnStep&& on_step)
{
    detail::check_params(params, sample);
    const auto nx = static_cast<Eigen::Index>(params.nodes());
    const std::size_t T = sample.steps();

    ReservoirTrace trace;
    trace.mode = mode;
    trace.steps = T;

    if (mode == TraceMode::full) {
        trace.states.reserve(T + 1);
        trace.states.emplace_back(Eigen::VectorXd::Zero(nx));
        for (std::size_t k = 1; k <= T; ++k) {
            const Eigen::VectorXd j = params.mask.entries * sample.series.row(static_cast<Eigen::Index>(k - 1)).transpose();
            Eigen::VectorXd cur(nx);
            detail::reservoir_step(params, j, trace.states.back(), cur, k);
            on_step(trace.states.back(), cur);
            trace.states.push_back(std::move(cur));
        }
        return trace;
    }

    trace.states.reserve(2);
    trace.states.emplace_back(Eigen::VectorXd::Zero(nx));
    trace.states.emplace_back(Eigen::VectorXd::Zero(nx));
    Eigen::VectorXd* prev = &trace.states[0];
    Eigen::VectorXd* cur = &trace.states[1];
    for (std::size_t k = 1; k <= T; ++k) {
        const Eigen::VectorXd j = params.mask.entries * sample.series.row(static_cast<Eigen::Index>(k - 1)).transpose();
        detail::reservoir_step(params, j, *prev, *cur, k);
        on_step(*prev, *cur);
        std::swap(prev, cur);
    }
    // After the final swap `prev` holds x(T).
    if (prev != &trace.states[1]) {
        std::swap(trace.states[0], trace.states[1]);
    }
    return trace;
}

inline ReservoirTrace run_reservoir(const ReservoirParams& params, const Sample& sample, TraceMode mode)
{
    return run_reservoir(params, sample, mode, [](const Eigen::VectorXd&, const Eigen::VectorXd&) {});
}

/// j(k) for 1-based step k.
inline Eigen::VectorXd masked_input_at(const ReservoirParams& params, const Sample& sample, std::size_t k)
{
    return params.mask.entries * sample.series.row(static_cast<Eigen::Index>(k - 1)).transpose();
}

} // namespace dfr

#pragma once

// Gradients of the loss with respect to the reservoir scalars A and B.
//
// The adjoint a(k, n) = dL/dx(k)_n collects three paths:
//   - the DPRR value injected at x(k)_n (lagged products and node sums),
//   - the along-ring B path into the successor node (k, n+1), or (k+1, 1)
//     for the last node,
//   - the through-time path f_A'(z(k+1)_n) into x(k+1)_n.
// The full variant sweeps k = T..1 and n = N_x..1; the truncated variant
// keeps only the last step and the along-ring path within it.

#include "dfr/dprr.hpp"
#include "dfr/error.hpp"
#include "dfr/head.hpp"
#include "dfr/reservoir.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace dfr {

struct ReservoirGrads {
    double dA = 0.0;
    double dB = 0.0;

    bool operator==(const ReservoirGrads&) const = default;
};

/// Arithmetic operations performed by a backward sweep (adds and multiplies,
/// including nonlinearity evaluations counted as one op each).
struct OpCounter {
    std::uint64_t ops = 0;
};

namespace detail {

inline void count(OpCounter* c, std::uint64_t n) noexcept
{
    if (c != nullptr) {
        c->ops += n;
    }
}

/// sum_j x(k-1)_j dr[(n-1) N_x + j] with 0-based node n.
inline double lagged_term(const Eigen::VectorXd& prev, const Eigen::VectorXd& dr, Eigen::Index n, Eigen::Index nx)
{
    double s = 0.0;
    const Eigen::Index base = n * nx;
    for (Eigen::Index j = 0; j < nx; ++j) {
        s += prev(j) * dr(base + j);
    }
    return s;
}

/// sum_i x(k+1)_i dr[(i-1) N_x + n] with 0-based node n.
inline double leading_term(const Eigen::VectorXd& next, const Eigen::VectorXd& dr, Eigen::Index n, Eigen::Index nx)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < nx; ++i) {
        s += next(i) * dr(i * nx + n);
    }
    return s;
}

inline void check_dr(const ReservoirParams& params, const Eigen::VectorXd& dr)
{
    if (static_cast<std::size_t>(dr.size()) != dprr_size(params.nodes())) {
        throw ConfigError("feature gradient has length " + std::to_string(dr.size()) + ", expected "
                          + std::to_string(dprr_size(params.nodes())));
    }
}

inline ReservoirGrads checked(ReservoirGrads g)
{
    if (!std::isfinite(g.dA) || !std::isfinite(g.dB)) {
        throw DivergenceError("non-finite reservoir gradient");
    }
    return g;
}

} // namespace detail

/// DPRR contribution to dL/dx(k)_n for 1-based k and n on a full trace.
inline double dprr_bp_value(std::size_t k, std::size_t n, const ReservoirTrace& trace, const Eigen::VectorXd& dr)
{
    if (trace.mode != TraceMode::full) {
        throw ConfigError("dprr_bp_value needs a full trace");
    }
    const auto nx = static_cast<Eigen::Index>(trace.states.front().size());
    if (k < 1 || k > trace.steps || n < 1 || n > static_cast<std::size_t>(nx)) {
        throw ConfigError("dprr_bp_value: (k, n) out of range");
    }
    if (dr.size() != nx * (nx + 1)) {
        throw ConfigError("dprr_bp_value: feature gradient length mismatch");
    }
    const auto ni = static_cast<Eigen::Index>(n - 1);
    double v = detail::lagged_term(trace.at(k - 1), dr, ni, nx);
    if (k < trace.steps) {
        v += detail::leading_term(trace.at(k + 1), dr, ni, nx);
    }
    v += dr(nx * nx + ni);
    return v;
}

/// Backpropagation through every step of a full trace.
inline ReservoirGrads full_bptt(const ReservoirParams& params, const Sample& sample, const ReservoirTrace& trace,
                                const Eigen::VectorXd& dr, OpCounter* counter = nullptr)
{
    if (trace.mode != TraceMode::full || trace.steps != sample.steps() || trace.states.size() != trace.steps + 1
        || static_cast<std::size_t>(trace.states.front().size()) != params.nodes()) {
        throw ConfigError("full_bptt: trace does not match parameters and sample");
    }
    detail::check_dr(params, dr);
    const auto nx = static_cast<Eigen::Index>(params.nodes());
    const std::size_t T = trace.steps;
    const double A = params.A;
    const double B = params.B;

    Eigen::VectorXd adj = Eigen::VectorXd::Zero(nx);      // a(k, .)
    Eigen::VectorXd adj_next = Eigen::VectorXd::Zero(nx); // a(k+1, .)
    Eigen::VectorXd z_next = Eigen::VectorXd::Zero(nx);   // z(k+1, .)
    ReservoirGrads g;

    for (std::size_t k = T; k >= 1; --k) {
        const Eigen::VectorXd& prev = trace.at(k - 1);
        const Eigen::VectorXd& cur = trace.at(k);
        const Eigen::VectorXd z = masked_input_at(params, sample, k) + prev;
        detail::count(counter, static_cast<std::uint64_t>(nx * (nx + 1)));
        const bool has_next = k < T;

        for (Eigen::Index n = nx - 1; n >= 0; --n) {
            double bpv = detail::lagged_term(prev, dr, n, nx);
            detail::count(counter, static_cast<std::uint64_t>(2 * nx));
            if (has_next) {
                bpv += detail::leading_term(trace.at(k + 1), dr, n, nx);
                detail::count(counter, static_cast<std::uint64_t>(2 * nx + 1));
            }
            bpv += dr(nx * nx + n);
            double a = bpv;
            if (n + 1 < nx) {
                a += B * adj(n + 1);
                detail::count(counter, 3);
            } else if (has_next) {
                a += B * adj_next(0);
                detail::count(counter, 3);
            }
            if (has_next) {
                a += A * shape_slope(params.f, z_next(n)) * adj_next(n);
                detail::count(counter, 4);
            }
            adj(n) = a;
        }

        double dA = 0.0;
        double dB = 0.0;
        for (Eigen::Index n = 0; n < nx; ++n) {
            const double pred = n == 0 ? prev(nx - 1) : cur(n - 1);
            dA += shape(params.f, z(n)) * adj(n);
            dB += pred * adj(n);
        }
        detail::count(counter, static_cast<std::uint64_t>(5 * nx + 2));
        g.dA += dA;
        g.dB += dB;

        std::swap(adj, adj_next);
        z_next = z;
    }
    return detail::checked(g);
}

/// Last-step approximation: only x(T-1), x(T) and u(T) are needed, so cost
/// and storage do not depend on T.
inline ReservoirGrads truncated_bp(const ReservoirParams& params, const ReservoirTrace& trace, const Sample& sample,
                                   const Eigen::VectorXd& dr, OpCounter* counter = nullptr)
{
    if (trace.states.size() < 2 || trace.steps != sample.steps()
        || static_cast<std::size_t>(trace.states.front().size()) != params.nodes()) {
        throw ConfigError("truncated_bp: trace does not match parameters and sample");
    }
    detail::check_dr(params, dr);
    const auto nx = static_cast<Eigen::Index>(params.nodes());
    const Eigen::VectorXd& prev = trace.before_last();
    const Eigen::VectorXd& cur = trace.last();
    const double B = params.B;

    const Eigen::VectorXd z = masked_input_at(params, sample, trace.steps) + prev;
    detail::count(counter, static_cast<std::uint64_t>(nx * (nx + 1)));

    Eigen::VectorXd adj(nx);
    for (Eigen::Index n = nx - 1; n >= 0; --n) {
        double bpv = detail::lagged_term(prev, dr, n, nx);
        detail::count(counter, static_cast<std::uint64_t>(2 * nx));
        bpv += dr(nx * nx + n);
        double a = bpv;
        if (n + 1 < nx) {
            a += B * adj(n + 1);
            detail::count(counter, 3);
        }
        adj(n) = a;
    }

    double dA = 0.0;
    double dB = 0.0;
    for (Eigen::Index n = 0; n < nx; ++n) {
        const double pred = n == 0 ? prev(nx - 1) : cur(n - 1);
        dA += shape(params.f, z(n)) * adj(n);
        dB += pred * adj(n);
    }
    detail::count(counter, static_cast<std::uint64_t>(5 * nx + 2));

    ReservoirGrads g;
    g.dA += dA;
    g.dB += dB;
    return detail::checked(g);
}

/// End-to-end loss of one sample for fixed head.
inline double pipeline_loss(const ReservoirParams& params, const Sample& sample, const OutputHead& head)
{
    return loss(forward_head(head, compute_dprr(params, sample)), sample.label);
}

/// Central differences of pipeline_loss in A and B.
inline ReservoirGrads finite_diff_grads(const ReservoirParams& params, const Sample& sample, const OutputHead& head,
                                        double h)
{
    if (!(h > 0.0)) {
        throw ConfigError("finite_diff_grads: step must be positive");
    }
    ReservoirParams p = params;
    ReservoirGrads g;
    p.A = params.A + h;
    const double a_plus = pipeline_loss(p, sample, head);
    p.A = params.A - h;
    const double a_minus = pipeline_loss(p, sample, head);
    p.A = params.A;
    p.B = params.B + h;
    const double b_plus = pipeline_loss(p, sample, head);
    p.B = params.B - h;
    const double b_minus = pipeline_loss(p, sample, head);
    g.dA = (a_plus - a_minus) / (2.0 * h);
    g.dB = (b_plus - b_minus) / (2.0 * h);
    return detail::checked(g);
}

} // namespace dfr

#pragma once

// Dot-product reservoir representation. For N_x nodes the feature vector
// has N_x (N_x + 1) entries: the lagged products sum_k x(k)_i x(k-1)_j at
// (i-1) N_x + j - 1, followed by the node sums sum_k x(k)_i at N_x^2 + i - 1.

#include "dfr/error.hpp"
#include "dfr/reservoir.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>

namespace dfr {

constexpr std::size_t dprr_size(std::size_t nodes) noexcept { return nodes * (nodes + 1); }

/// 0-based slot of the product feature for 1-based nodes (i, j).
inline std::size_t dprr_index(std::size_t i, std::size_t j, std::size_t nodes)
{
    if (i < 1 || i > nodes || j < 1 || j > nodes) {
        throw ConfigError("dprr_index: node pair (" + std::to_string(i) + ", " + std::to_string(j)
                          + ") out of range for " + std::to_string(nodes) + " nodes");
    }
    return (i - 1) * nodes + j - 1;
}

/// 0-based slot of the sum feature for 1-based node i.
inline std::size_t dprr_sum_index(std::size_t i, std::size_t nodes)
{
    if (i < 1 || i > nodes) {
        throw ConfigError("dprr_sum_index: node " + std::to_string(i) + " out of range for "
                          + std::to_string(nodes) + " nodes");
    }
    return nodes * nodes + i - 1;
}

/// Streaming accumulator fed one (x(k-1), x(k)) pair per step.
class DprrAccumulator {
public:
    explicit DprrAccumulator(std::size_t nodes)
        : nodes_(static_cast<Eigen::Index>(nodes))
        , r_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dprr_size(nodes))))
    {
    }

    void push(const Eigen::VectorXd& prev, const Eigen::VectorXd& cur)
    {
        // Row-major view: products(i, j) lands at i * N_x + j.
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> products(
            r_.data(), nodes_, nodes_);
        products.noalias() += cur * prev.transpose();
        r_.tail(nodes_) += cur;
    }

    const Eigen::VectorXd& features() const noexcept { return r_; }
    Eigen::VectorXd take() && { return std::move(r_); }

private:
    Eigen::Index nodes_;
    Eigen::VectorXd r_;
};

/// DPRR from a full-mode trace.
inline Eigen::VectorXd accumulate_dprr(const ReservoirTrace& trace)
{
    if (trace.mode != TraceMode::full) {
        throw ConfigError("accumulate_dprr needs a full trace; truncated passes accumulate while streaming");
    }
    DprrAccumulator acc(static_cast<std::size_t>(trace.states.front().size()));
    for (std::size_t k = 1; k <= trace.steps; ++k) {
        acc.push(trace.at(k - 1), trace.at(k));
    }
    return std::move(acc).take();
}

struct ForwardPass {
    ReservoirTrace trace;
    Eigen::VectorXd dprr;
};

/// Reservoir run with the DPRR accumulated on the fly, so the truncated
/// mode never holds more than two state vectors.
inline ForwardPass run_forward(const ReservoirParams& params, const Sample& sample, TraceMode mode)
{
    DprrAccumulator acc(params.nodes());
    auto trace = run_reservoir(params, sample, mode,
                               [&acc](const Eigen::VectorXd& prev, const Eigen::VectorXd& cur) { acc.push(prev, cur); });
    return {std::move(trace), std::move(acc).take()};
}

/// Features only; the inference path.
inline Eigen::VectorXd compute_dprr(const ReservoirParams& params, const Sample& sample)
{
    return run_forward(params, sample, TraceMode::truncated).dprr;
}

} // namespace dfr

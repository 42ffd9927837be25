#pragma once

// Shared generators and independent oracles for the test suites. Nothing
// here calls into the code paths it is used to check.

#include "dfr/dfr.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace dfr::oracle {

inline Eigen::VectorXd brute_force_dprr(const std::vector<Eigen::VectorXd>& states);
inline std::vector<Eigen::VectorXd> reference_states(const ReservoirParams& p, const Sample& s);

struct Instance {
    ReservoirParams params;
    Sample sample;
    OutputHead head;
};

/// Random small problem: T <= max_steps, N_x <= max_nodes, N_u <= 3, N_y <= 4.
/// Readout rows are scaled to the instance's feature norm so logits stay
/// O(1); far into the clamped-loss region a finite difference reads zero.
inline Instance random_instance(SplitMix64& rng, Nonlinearity f, std::size_t max_steps = 10,
                                std::size_t max_nodes = 5)
{
    const std::size_t T = 1 + rng.below(max_steps);
    const std::size_t nx = 1 + rng.below(max_nodes);
    const std::size_t nu = 1 + rng.below(3);
    const std::size_t ny = 2 + rng.below(3);
    Instance in;
    in.sample.label = rng.below(ny);
    in.sample.series.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(nu));
    for (Eigen::Index i = 0; i < in.sample.series.size(); ++i) {
        in.sample.series.data()[i] = rng.normal();
    }
    in.params.A = 0.05 + 0.8 * rng.uniform();
    in.params.B = 0.05 + 0.8 * rng.uniform();
    in.params.f = f;
    in.params.mask = generate_mask(rng.next(), nx, nu);
    in.head = OutputHead::zeros(ny, dprr_size(nx));
    for (Eigen::Index i = 0; i < in.head.W.size(); ++i) {
        in.head.W.data()[i] = rng.normal();
    }
    for (Eigen::Index i = 0; i < in.head.b.size(); ++i) {
        in.head.b.data()[i] = rng.normal();
    }
    const double norm = brute_force_dprr(reference_states(in.params, in.sample)).norm();
    if (norm > 0.0) {
        in.head.W *= 2.0 / norm;
    }
    return in;
}

/// Full trace with arbitrary (not recurrence-generated) states and x(0) = 0.
inline ReservoirTrace random_trace(SplitMix64& rng, std::size_t steps, std::size_t nodes)
{
    ReservoirTrace t;
    t.mode = TraceMode::full;
    t.steps = steps;
    t.states.emplace_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nodes)));
    for (std::size_t k = 1; k <= steps; ++k) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(nodes));
        for (Eigen::Index n = 0; n < x.size(); ++n) {
            x(n) = rng.normal();
        }
        t.states.push_back(std::move(x));
    }
    return t;
}

/// Direct double loop over the lagged-product and node-sum definitions.
inline Eigen::VectorXd brute_force_dprr(const std::vector<Eigen::VectorXd>& states)
{
    const std::size_t nx = static_cast<std::size_t>(states.front().size());
    const std::size_t T = states.size() - 1;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nx * (nx + 1)));
    for (std::size_t i = 1; i <= nx; ++i) {
        for (std::size_t j = 1; j <= nx; ++j) {
            double s = 0.0;
            for (std::size_t k = 1; k <= T; ++k) {
                s += states[k](static_cast<Eigen::Index>(i - 1)) * states[k - 1](static_cast<Eigen::Index>(j - 1));
            }
            r(static_cast<Eigen::Index>((i - 1) * nx + j - 1)) = s;
        }
        double s = 0.0;
        for (std::size_t k = 1; k <= T; ++k) {
            s += states[k](static_cast<Eigen::Index>(i - 1));
        }
        r(static_cast<Eigen::Index>(nx * nx + i - 1)) = s;
    }
    return r;
}

/// Scalar recurrence written out independently of run_reservoir.
inline std::vector<Eigen::VectorXd> reference_states(const ReservoirParams& p, const Sample& s)
{
    const auto nx = static_cast<Eigen::Index>(p.nodes());
    std::vector<Eigen::VectorXd> xs{Eigen::VectorXd::Zero(nx)};
    for (Eigen::Index k = 0; k < s.series.rows(); ++k) {
        Eigen::VectorXd x(nx);
        for (Eigen::Index n = 0; n < nx; ++n) {
            double j = 0.0;
            for (Eigen::Index u = 0; u < s.series.cols(); ++u) {
                j += p.mask.entries(n, u) * s.series(k, u);
            }
            const double z = j + xs.back()(n);
            const double g = p.f.kind == Nonlinearity::Kind::linear ? z : z / (1.0 + std::pow(z, p.f.p));
            const double pred = n == 0 ? xs.back()(nx - 1) : x(n - 1);
            x(n) = p.A * g + p.B * pred;
        }
        xs.push_back(std::move(x));
    }
    return xs;
}

/// Dense Gaussian elimination with partial pivoting; solves M X = Y.
inline Eigen::MatrixXd gauss_solve(Eigen::MatrixXd M, Eigen::MatrixXd Y)
{
    const Eigen::Index n = M.rows();
    for (Eigen::Index c = 0; c < n; ++c) {
        Eigen::Index piv = c;
        for (Eigen::Index r = c + 1; r < n; ++r) {
            if (std::abs(M(r, c)) > std::abs(M(piv, c))) {
                piv = r;
            }
        }
        M.row(c).swap(M.row(piv));
        Y.row(c).swap(Y.row(piv));
        for (Eigen::Index r = c + 1; r < n; ++r) {
            const double f = M(r, c) / M(c, c);
            for (Eigen::Index k = c; k < n; ++k) {
                M(r, k) -= f * M(c, k);
            }
            for (Eigen::Index k = 0; k < Y.cols(); ++k) {
                Y(r, k) -= f * Y(c, k);
            }
        }
    }
    Eigen::MatrixXd X(n, Y.cols());
    for (Eigen::Index r = n - 1; r >= 0; --r) {
        for (Eigen::Index k = 0; k < Y.cols(); ++k) {
            double s = Y(r, k);
            for (Eigen::Index c = r + 1; c < n; ++c) {
                s -= M(r, c) * X(c, k);
            }
            X(r, k) = s / M(r, r);
        }
    }
    return X;
}

/// Relative error with an absolute floor for near-zero references.
inline bool grad_close(double got, double ref, double rel = 1e-5, double abs_floor = 1e-8, double small = 1e-6)
{
    if (std::abs(ref) < small) {
        return std::abs(got - ref) <= abs_floor;
    }
    return std::abs(got - ref) <= rel * std::abs(ref);
}

/// Norm-wise version for array-valued gradients: ||got - ref|| against ||ref||.
template <class Got, class Ref>
bool array_close(const Got& got, const Ref& ref, double rel = 1e-5, double abs_floor = 1e-8, double small = 1e-6)
{
    const double err = (got - ref).norm();
    const double mag = ref.norm();
    return mag < small ? err <= abs_floor : err <= rel * mag;
}

inline double relative_error(double got, double ref)
{
    const double scale = std::max(std::abs(ref), 1e-300);
    return std::abs(got - ref) / scale;
}

/// Nearest class centroid on raw flattened series (equal-length samples).
inline double nearest_centroid_accuracy(const Dataset& d)
{
    std::vector<Eigen::MatrixXd> sums(d.n_classes);
    std::vector<double> counts(d.n_classes, 0.0);
    for (const auto& s : d.train) {
        if (counts[s.label] == 0.0) {
            sums[s.label] = Eigen::MatrixXd::Zero(s.series.rows(), s.series.cols());
        }
        sums[s.label] += s.series;
        counts[s.label] += 1.0;
    }
    std::size_t correct = 0;
    for (const auto& s : d.test) {
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t c = 0; c < d.n_classes; ++c) {
            if (counts[c] == 0.0) {
                continue;
            }
            const double dist = (s.series - sums[c] / counts[c]).squaredNorm();
            if (dist < best_d) {
                best_d = dist;
                best = c;
            }
        }
        correct += best == s.label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(d.test.size());
}

/// Small seeded frequency-pair dataset.
inline Dataset tiny_dataset(std::size_t steps = 6, std::size_t per_class = 4)
{
    SynthSpec spec;
    spec.per_class = per_class;
    spec.steps = std::max<std::size_t>(steps, 8);
    spec.noise = 0.05;
    spec.seed = 11;
    return generate_synthetic(spec);
}

} // namespace dfr::oracle

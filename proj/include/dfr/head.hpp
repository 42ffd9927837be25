#pragma once

// Output layer over DPRR features: logits = W r + b, softmax probabilities,
// cross-entropy loss and its gradients, closed-form ridge readout and the
// regularization sweep.

#include "dfr/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dfr {

struct OutputHead {
    Eigen::MatrixXd W; ///< N_y x N_r
    Eigen::VectorXd b; ///< N_y

    static OutputHead zeros(std::size_t classes, std::size_t features)
    {
        return {Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(features)),
                Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes))};
    }

    std::size_t classes() const noexcept { return static_cast<std::size_t>(W.rows()); }
    std::size_t features() const noexcept { return static_cast<std::size_t>(W.cols()); }

    bool operator==(const OutputHead& o) const
    {
        return W.rows() == o.W.rows() && W.cols() == o.W.cols() && W == o.W && b == o.b;
    }
};

struct Prediction {
    Eigen::VectorXd logits;
    Eigen::VectorXd probs;

    /// Arg-max class, lowest index on ties.
    std::size_t predicted() const noexcept
    {
        std::size_t best = 0;
        for (Eigen::Index c = 1; c < probs.size(); ++c) {
            if (probs(c) > probs(static_cast<Eigen::Index>(best))) {
                best = static_cast<std::size_t>(c);
            }
        }
        return best;
    }
};

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits)
{
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp().matrix();
    return e / e.sum();
}

inline Prediction forward_head(const OutputHead& head, const Eigen::VectorXd& r)
{
    if (r.size() != head.W.cols()) {
        throw ConfigError("forward_head: feature length " + std::to_string(r.size()) + " but head expects "
                          + std::to_string(head.W.cols()));
    }
    Prediction p;
    p.logits = head.W * r + head.b;
    p.probs = softmax(p.logits);
    return p;
}

/// Upper clamp on the loss: -log of the smallest positive double.
inline const double max_loss = -std::log(std::numeric_limits<double>::denorm_min());

/// Cross-entropy against a one-hot target, -log probs[label], evaluated
/// from the logits as log-sum-exp minus the label logit. The log1p form keeps
/// relative precision when one class dominates.
inline double loss(const Prediction& pred, std::size_t label)
{
    if (label >= static_cast<std::size_t>(pred.logits.size())) {
        throw ConfigError("loss: label out of range");
    }
    Eigen::Index top = 0;
    const double m = pred.logits.maxCoeff(&top);
    double rest = 0.0;
    for (Eigen::Index c = 0; c < pred.logits.size(); ++c) {
        if (c != top) {
            rest += std::exp(pred.logits(c) - m);
        }
    }
    const double l = (m - pred.logits(static_cast<Eigen::Index>(label))) + std::log1p(rest);
    return std::min(std::max(l, 0.0), max_loss);
}

struct HeadGradients {
    Eigen::MatrixXd dW;
    Eigen::VectorXd db;
    Eigen::VectorXd dr;
};

/// With delta = probs - onehot(label): db = delta, dW = delta r^T, dr = W^T delta.
inline HeadGradients head_gradients(const Prediction& pred, std::size_t label, const Eigen::VectorXd& r,
                                    const OutputHead& head)
{
    if (label >= static_cast<std::size_t>(pred.probs.size())) {
        throw ConfigError("head_gradients: label out of range");
    }
    Eigen::VectorXd delta = pred.probs;
    delta(static_cast<Eigen::Index>(label)) -= 1.0;
    HeadGradients g;
    g.dW = delta * r.transpose();
    g.dr = head.W.transpose() * delta;
    g.db = std::move(delta);
    return g;
}

struct RidgeFit {
    OutputHead head;
    /// ||(R~^T R~ + beta I) Theta - R~^T D||_inf
    double residual = 0.0;
    /// ||R~^T D||_inf
    double rhs_norm = 0.0;
};

namespace detail {

inline Eigen::MatrixXd augment(const Eigen::MatrixXd& R)
{
    Eigen::MatrixXd Ra(R.rows(), R.cols() + 1);
    Ra.leftCols(R.cols()) = R;
    Ra.col(R.cols()).setOnes();
    return Ra;
}

inline Eigen::MatrixXd one_hot(std::span<const std::size_t> labels, std::size_t classes)
{
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()),
                                              static_cast<Eigen::Index>(classes));
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (labels[s] >= classes) {
            throw ConfigError("ridge_fit: label out of range");
        }
        D(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(labels[s])) = 1.0;
    }
    return D;
}

} // namespace detail

/// Ridge readout against one-hot targets with a constant-1 column for the
/// bias. The penalty beta I covers the bias row as well. Solves the
/// (N_r+1)-dimensional normal equations by Cholesky, or their S-dimensional
/// dual (R~ R~^T + beta I) alpha = D, Theta = R~^T alpha, when there are
/// fewer samples than features. Both satisfy the same normal equations.
inline RidgeFit ridge_fit(const Eigen::MatrixXd& R, std::span<const std::size_t> labels, std::size_t classes,
                          double beta)
{
    if (R.rows() < 1) {
        throw ConfigError("ridge_fit needs at least one sample");
    }
    if (static_cast<std::size_t>(R.rows()) != labels.size()) {
        throw ConfigError("ridge_fit: row count and label count differ");
    }
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw ConfigError("ridge_fit: beta must be positive and finite");
    }
    if (!R.allFinite()) {
        throw SolverError("ridge_fit: non-finite feature matrix");
    }
    const Eigen::MatrixXd Ra = detail::augment(R);
    const Eigen::MatrixXd D = detail::one_hot(labels, classes);
    const Eigen::MatrixXd rhs = Ra.transpose() * D;
    const Eigen::Index S = Ra.rows();
    const Eigen::Index N = Ra.cols();

    Eigen::MatrixXd theta;
    if (S >= N) {
        Eigen::MatrixXd M = Ra.transpose() * Ra;
        M.diagonal().array() += beta;
        Eigen::LLT<Eigen::MatrixXd> llt(M);
        if (llt.info() != Eigen::Success) {
            throw SolverError("ridge_fit: Cholesky factorization failed");
        }
        theta = llt.solve(rhs);
        theta += llt.solve(rhs - Ra.transpose() * (Ra * theta) - beta * theta);
    } else {
        Eigen::MatrixXd G = Ra * Ra.transpose();
        G.diagonal().array() += beta;
        Eigen::LLT<Eigen::MatrixXd> llt(G);
        if (llt.info() != Eigen::Success) {
            throw SolverError("ridge_fit: Cholesky factorization failed");
        }
        Eigen::MatrixXd alpha = llt.solve(D);
        alpha += llt.solve(D - Ra * (Ra.transpose() * alpha) - beta * alpha);
        theta = Ra.transpose() * alpha;
    }
    if (!theta.allFinite()) {
        throw SolverError("ridge_fit: non-finite solution");
    }

    RidgeFit fit;
    fit.head.W = theta.topRows(N - 1).transpose();
    fit.head.b = theta.row(N - 1).transpose();
    fit.residual = (Ra.transpose() * (Ra * theta) + beta * theta - rhs).cwiseAbs().maxCoeff();
    fit.rhs_norm = rhs.cwiseAbs().maxCoeff();
    return fit;
}

/// Mean cross-entropy of the softmax of the head's outputs over the rows of R.
inline double mean_loss(const OutputHead& head, const Eigen::MatrixXd& R, std::span<const std::size_t> labels)
{
    double total = 0.0;
    for (Eigen::Index s = 0; s < R.rows(); ++s) {
        total += loss(forward_head(head, R.row(s).transpose()), labels[static_cast<std::size_t>(s)]);
    }
    return total / static_cast<double>(R.rows());
}

inline const std::vector<double> default_betas = {1e-6, 1e-4, 1e-2, 1.0};

struct BetaSelection {
    double beta = 0.0;
    OutputHead head;
    double loss = 0.0;
    /// Loss of every candidate in input order.
    std::vector<double> candidate_losses;
};

/// Fits each beta on (R_fit, labels_fit) and scores it on (R_eval, labels_eval).
/// Lowest loss wins; ties go to the larger beta.
inline BetaSelection select_beta(const Eigen::MatrixXd& R_fit, std::span<const std::size_t> labels_fit,
                                 const Eigen::MatrixXd& R_eval, std::span<const std::size_t> labels_eval,
                                 std::size_t classes, std::span<const double> betas)
{
    if (betas.empty()) {
        throw ConfigError("select_beta needs at least one candidate");
    }
    BetaSelection best;
    bool have = false;
    for (double beta : betas) {
        RidgeFit fit = ridge_fit(R_fit, labels_fit, classes, beta);
        const double l = mean_loss(fit.head, R_eval, labels_eval);
        best.candidate_losses.push_back(l);
        if (!have || l < best.loss || (l == best.loss && beta > best.beta)) {
            best.beta = beta;
            best.loss = l;
            best.head = std::move(fit.head);
            have = true;
        }
    }
    return best;
}

/// Scores on the same rows the readout was fit to.
inline BetaSelection select_beta(const Eigen::MatrixXd& R, std::span<const std::size_t> labels, std::size_t classes,
                                 std::span<const double> betas)
{
    return select_beta(R, labels, R, labels, classes, betas);
}

} // namespace dfr

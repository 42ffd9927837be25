#pragma once

// Per-sample SGD over (A, B, W, b) with staged learning-rate drops,
// followed by a ridge refit of the readout on the final reservoir.

#include "dfr/backprop.hpp"
#include "dfr/dataset.hpp"
#include "dfr/dprr.hpp"
#include "dfr/error.hpp"
#include "dfr/head.hpp"
#include "dfr/reservoir.hpp"
#include "dfr/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dfr {

/// Fixed (non-trained) reservoir structure.
struct ReservoirConfig {
    std::size_t nodes = 30;
    std::uint64_t mask_seed = 0;
    Nonlinearity f = Nonlinearity::linear();
};

enum class BpMode { truncated, full };

struct TrainConfig {
    std::size_t epochs = 25;
    double init_A = 0.01;
    double init_B = 0.01;
    double lr_reservoir = 1.0;
    double lr_output = 1.0;
    std::vector<std::size_t> reservoir_drops = {5, 10, 15, 20};
    std::vector<std::size_t> output_drops = {10, 15, 20};
    double drop_factor = 0.1;
    std::vector<double> betas = default_betas;
    BpMode bp = BpMode::truncated;
    std::uint64_t shuffle_seed = 0;
    double clamp_lo = 1e-6;
    double clamp_hi = 0.99;
    bool normalize = true;
    /// Fraction of the train split held out to score beta candidates; 0 scores on the fitting rows.
    double beta_holdout = 0.0;
    /// Replace the SGD readout with the ridge fit after the last epoch.
    bool ridge_refit = true;
};

struct EpochRecord {
    double mean_loss = 0.0;
    double accuracy = 0.0;
    double lr_reservoir = 0.0;
    double lr_output = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

struct TrainDiagnostics {
    std::size_t clamp_events = 0;
    std::size_t diverged_samples = 0;
    /// Reservoir state vectors held per training sample, min and max over all updates.
    std::size_t min_state_vectors = 0;
    std::size_t max_state_vectors = 0;

    bool operator==(const TrainDiagnostics&) const = default;
};

struct TrainedModel {
    ReservoirParams reservoir;
    OutputHead head;
    double beta = 0.0;
    double beta_loss = 0.0;
    std::vector<EpochRecord> history;
    TrainDiagnostics diagnostics;
    std::optional<NormStats> norm;

    bool operator==(const TrainedModel&) const = default;
};

struct LearningRates {
    double reservoir;
    double output;
};

/// Rates for 1-based `epoch`; each drop epoch m <= epoch multiplies by the drop factor.
inline LearningRates lr_schedule(const TrainConfig& cfg, std::size_t epoch)
{
    if (epoch < 1 || epoch > cfg.epochs) {
        throw ConfigError("lr_schedule: epoch out of range");
    }
    auto rate = [&](double base, const std::vector<std::size_t>& drops) {
        double r = base;
        for (std::size_t m : drops) {
            if (m <= epoch) {
                r *= cfg.drop_factor;
            }
        }
        return r;
    };
    return {rate(cfg.lr_reservoir, cfg.reservoir_drops), rate(cfg.lr_output, cfg.output_drops)};
}

inline void validate(const TrainConfig& cfg)
{
    if (cfg.epochs < 1) {
        throw ConfigError("epochs must be at least 1");
    }
    for (double lr : {cfg.lr_reservoir, cfg.lr_output}) {
        if (!(lr >= 0.0) || !std::isfinite(lr)) {
            throw ConfigError("learning rates must be finite and non-negative");
        }
    }
    if (!(cfg.clamp_lo < cfg.clamp_hi)) {
        throw ConfigError("parameter clamp bounds must satisfy lo < hi");
    }
    if (cfg.betas.empty()) {
        throw ConfigError("at least one beta is required");
    }
    if (!(cfg.beta_holdout >= 0.0 && cfg.beta_holdout < 1.0)) {
        throw ConfigError("beta holdout fraction must be in [0, 1)");
    }
}

/// DPRR rows for every sample of a split; propagates DivergenceError.
inline Eigen::MatrixXd feature_matrix(const ReservoirParams& params, std::span<const Sample> split)
{
    Eigen::MatrixXd R(static_cast<Eigen::Index>(split.size()), static_cast<Eigen::Index>(dprr_size(params.nodes())));
    for (std::size_t s = 0; s < split.size(); ++s) {
        R.row(static_cast<Eigen::Index>(s)) = compute_dprr(params, split[s]).transpose();
    }
    return R;
}

inline std::vector<std::size_t> labels_of(std::span<const Sample> split)
{
    std::vector<std::size_t> y;
    y.reserve(split.size());
    for (const auto& s : split) {
        y.push_back(s.label);
    }
    return y;
}

/// Ridge readout with beta chosen per the config's holdout rule.
inline BetaSelection fit_readout(const Eigen::MatrixXd& R, std::span<const std::size_t> labels, std::size_t classes,
                                 std::span<const double> betas, double holdout)
{
    const auto S = static_cast<std::size_t>(R.rows());
    const auto n_eval = static_cast<std::size_t>(std::ceil(holdout * static_cast<double>(S)));
    if (holdout <= 0.0 || n_eval == 0 || n_eval >= S) {
        return select_beta(R, labels, classes, betas);
    }
    const std::size_t n_fit = S - n_eval;
    const Eigen::MatrixXd R_fit = R.topRows(static_cast<Eigen::Index>(n_fit));
    const Eigen::MatrixXd R_eval = R.bottomRows(static_cast<Eigen::Index>(n_eval));
    BetaSelection sel = select_beta(R_fit, labels.first(n_fit), R_eval, labels.subspan(n_fit), classes, betas);
    sel.head = ridge_fit(R, labels, classes, sel.beta).head;
    return sel;
}

inline TrainedModel train(const Dataset& raw, const ReservoirConfig& rcfg, const TrainConfig& cfg)
{
    validate(raw);
    validate(cfg);
    if (rcfg.nodes < 1) {
        throw ConfigError("reservoir needs at least one node");
    }

    TrainedModel model;
    const Dataset* data = &raw;
    Dataset normalized;
    if (cfg.normalize) {
        auto [d, st] = normalize(raw);
        normalized = std::move(d);
        model.norm = std::move(st);
        data = &normalized;
    }

    model.reservoir.A = cfg.init_A;
    model.reservoir.B = cfg.init_B;
    model.reservoir.f = rcfg.f;
    model.reservoir.mask = generate_mask(rcfg.mask_seed, rcfg.nodes, data->n_features);
    model.head = OutputHead::zeros(data->n_classes, dprr_size(rcfg.nodes));

    auto& params = model.reservoir;
    auto& head = model.head;
    auto& diag = model.diagnostics;
    diag.min_state_vectors = SIZE_MAX;
    const TraceMode mode = cfg.bp == BpMode::truncated ? TraceMode::truncated : TraceMode::full;
    auto clamp = [&](double v) {
        const double c = std::clamp(v, cfg.clamp_lo, cfg.clamp_hi);
        if (c != v) {
            ++diag.clamp_events;
        }
        return c;
    };

    SplitMix64 rng(cfg.shuffle_seed);
    const std::size_t S = data->train.size();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto [lr_res, lr_out] = lr_schedule(cfg, epoch);
        EpochRecord rec{0.0, 0.0, lr_res, lr_out};
        std::size_t ok = 0;
        std::size_t correct = 0;
        for (std::size_t idx : shuffled_indices(S, rng)) {
            const Sample& s = data->train[idx];
            try {
                ForwardPass fwd = run_forward(params, s, mode);
                diag.min_state_vectors = std::min(diag.min_state_vectors, fwd.trace.stored_state_vectors());
                diag.max_state_vectors = std::max(diag.max_state_vectors, fwd.trace.stored_state_vectors());
                const Prediction pred = forward_head(head, fwd.dprr);
                const double l = loss(pred, s.label);
                HeadGradients hg = head_gradients(pred, s.label, fwd.dprr, head);
                if (!hg.dW.allFinite() || !hg.dr.allFinite()) {
                    throw DivergenceError("non-finite readout gradient");
                }
                const ReservoirGrads rg = mode == TraceMode::truncated
                    ? truncated_bp(params, fwd.trace, s, hg.dr)
                    : full_bptt(params, s, fwd.trace, hg.dr);
                head.W -= lr_out * hg.dW;
                head.b -= lr_out * hg.db;
                params.A = clamp(params.A - lr_res * rg.dA);
                params.B = clamp(params.B - lr_res * rg.dB);
                rec.mean_loss += l;
                correct += pred.predicted() == s.label ? 1 : 0;
                ++ok;
            } catch (const DivergenceError&) {
                ++diag.diverged_samples;
                lr_res *= 0.5;
            }
        }
        if (ok == 0) {
            throw DivergenceError("every training sample diverged in epoch " + std::to_string(epoch));
        }
        rec.mean_loss /= static_cast<double>(ok);
        rec.accuracy = static_cast<double>(correct) / static_cast<double>(S);
        model.history.push_back(rec);
    }
    if (diag.min_state_vectors == SIZE_MAX) {
        diag.min_state_vectors = 0;
    }

    if (!cfg.ridge_refit) {
        return model;
    }
    const Eigen::MatrixXd R = feature_matrix(params, data->train);
    const auto y = labels_of(data->train);
    BetaSelection sel = fit_readout(R, y, data->n_classes, cfg.betas, cfg.beta_holdout);
    model.head = std::move(sel.head);
    model.beta = sel.beta;
    model.beta_loss = sel.loss;
    return model;
}

struct Evaluation {
    double accuracy = 0.0;
    double mean_loss = 0.0;
};

/// Applies the model's normalization to raw samples, then scores them.
/// A sample whose reservoir diverges counts as wrong with the maximal loss.
inline Evaluation evaluate(const TrainedModel& model, std::span<const Sample> split)
{
    if (split.empty()) {
        throw ConfigError("evaluate needs a non-empty split");
    }
    Evaluation ev;
    std::size_t correct = 0;
    for (const auto& raw : split) {
        const Sample s = model.norm ? apply_norm(raw, *model.norm) : raw;
        try {
            const Prediction p = forward_head(model.head, compute_dprr(model.reservoir, s));
            correct += p.predicted() == s.label ? 1 : 0;
            ev.mean_loss += loss(p, s.label);
        } catch (const DivergenceError&) {
            ev.mean_loss += max_loss;
        }
    }
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(split.size());
    ev.mean_loss /= static_cast<double>(split.size());
    return ev;
}

} // namespace dfr

#pragma once

// Grid-search baseline over (A, B) with a beta sweep per cell, and the
// escalation loop that raises the divisions per axis until a target test
// accuracy is met.

#include "dfr/dataset.hpp"
#include "dfr/error.hpp"
#include "dfr/head.hpp"
#include "dfr/reservoir.hpp"
#include "dfr/trainer.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace dfr {

struct GridConfig {
    double a_lo = std::pow(10.0, -3.75);
    double a_hi = std::pow(10.0, -0.25);
    double b_lo = std::pow(10.0, -2.75);
    double b_hi = std::pow(10.0, -0.25);
    std::size_t divisions = 1;
    std::vector<double> betas = default_betas;
    ReservoirConfig reservoir;
    bool normalize = true;
};

struct GridCell {
    std::size_t a_index = 0;
    std::size_t b_index = 0;
    double A = 0.0;
    double B = 0.0;
    double beta = 0.0;
    double train_loss = 0.0;
    double test_accuracy = 0.0;
    bool diverged = false;

    bool operator==(const GridCell&) const = default;
};

struct GridResult {
    std::size_t divisions = 0;
    /// Row-major over (a_index, b_index).
    std::vector<GridCell> cells;
    std::size_t best = 0;
    std::size_t readout_fits = 0;
    double seconds = 0.0;

    const GridCell& best_cell() const { return cells.at(best); }
};

/// Midpoints of D equal sections of [lo, hi] in log10 space.
inline std::vector<double> grid_points(double lo, double hi, std::size_t divisions)
{
    if (divisions < 1) {
        throw ConfigError("grid needs at least one division");
    }
    if (!(lo > 0.0 && lo < hi)) {
        throw ConfigError("grid range must be positive with lo < hi");
    }
    const double llo = std::log10(lo);
    const double width = (std::log10(hi) - llo) / static_cast<double>(divisions);
    std::vector<double> pts;
    pts.reserve(divisions);
    for (std::size_t m = 0; m < divisions; ++m) {
        pts.push_back(std::pow(10.0, llo + (static_cast<double>(m) + 0.5) * width));
    }
    return pts;
}

/// Train/test splits prepared once and reused for every cell.
struct PreparedData {
    Dataset data;
    std::vector<std::size_t> train_labels;
    Mask mask;
};

inline PreparedData prepare_grid_data(const Dataset& raw, const GridConfig& cfg)
{
    validate(raw);
    PreparedData p;
    p.data = cfg.normalize ? normalize(raw).first : raw;
    p.train_labels = labels_of(p.data.train);
    p.mask = generate_mask(cfg.reservoir.mask_seed, cfg.reservoir.nodes, p.data.n_features);
    return p;
}

/// One (A, B) cell: features on both splits, beta sweep on train, test accuracy.
inline GridCell evaluate_cell(const PreparedData& prep, const GridConfig& cfg, double A, double B)
{
    GridCell cell;
    cell.A = A;
    cell.B = B;
    ReservoirParams params{A, B, cfg.reservoir.f, prep.mask};
    try {
        const Eigen::MatrixXd R_train = feature_matrix(params, prep.data.train);
        BetaSelection sel = select_beta(R_train, prep.train_labels, prep.data.n_classes, cfg.betas);
        cell.beta = sel.beta;
        cell.train_loss = sel.loss;
        std::size_t correct = 0;
        for (const auto& s : prep.data.test) {
            correct += forward_head(sel.head, compute_dprr(params, s)).predicted() == s.label ? 1 : 0;
        }
        cell.test_accuracy = static_cast<double>(correct) / static_cast<double>(prep.data.test.size());
    } catch (const DivergenceError&) {
        cell.diverged = true;
        cell.test_accuracy = 0.0;
    } catch (const SolverError&) {
        cell.diverged = true;
        cell.test_accuracy = 0.0;
    }
    return cell;
}

/// Best cell: highest test accuracy, first in (a_index, b_index) order on ties.
inline std::size_t best_cell_index(const std::vector<GridCell>& cells)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < cells.size(); ++i) {
        if (cells[i].test_accuracy > cells[best].test_accuracy) {
            best = i;
        }
    }
    return best;
}

inline GridResult grid_search(const PreparedData& prep, const GridConfig& cfg)
{
    const auto start = std::chrono::steady_clock::now();
    const auto as = grid_points(cfg.a_lo, cfg.a_hi, cfg.divisions);
    const auto bs = grid_points(cfg.b_lo, cfg.b_hi, cfg.divisions);
    GridResult res;
    res.divisions = cfg.divisions;
    res.cells.reserve(cfg.divisions * cfg.divisions);
    for (std::size_t ia = 0; ia < as.size(); ++ia) {
        for (std::size_t ib = 0; ib < bs.size(); ++ib) {
            GridCell c = evaluate_cell(prep, cfg, as[ia], bs[ib]);
            c.a_index = ia;
            c.b_index = ib;
            if (!c.diverged) {
                res.readout_fits += cfg.betas.size();
            }
            res.cells.push_back(c);
        }
    }
    res.best = best_cell_index(res.cells);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

inline GridResult grid_search(const Dataset& raw, const GridConfig& cfg)
{
    if (cfg.divisions < 1) {
        throw ConfigError("grid needs at least one division");
    }
    return grid_search(prepare_grid_data(raw, cfg), cfg);
}

struct Escalation {
    bool reached = false;
    /// First sufficient D, or the D of the best level seen when not reached.
    std::size_t divisions = 0;
    GridResult result;
    std::size_t levels_evaluated = 0;
    std::size_t cells_evaluated = 0;
    double seconds = 0.0;
};

/// Runs grid_search for D = 1, 2, ... max_D, each level from scratch,
/// stopping at the first whose best test accuracy reaches the target.
inline Escalation escalate(const Dataset& raw, double target_accuracy, std::size_t max_divisions, GridConfig cfg)
{
    if (max_divisions < 1) {
        throw ConfigError("escalation needs max divisions >= 1");
    }
    const auto start = std::chrono::steady_clock::now();
    const PreparedData prep = prepare_grid_data(raw, cfg);
    Escalation esc;
    std::optional<GridResult> best_seen;
    for (std::size_t d = 1; d <= max_divisions; ++d) {
        cfg.divisions = d;
        GridResult r = grid_search(prep, cfg);
        ++esc.levels_evaluated;
        esc.cells_evaluated += r.cells.size();
        const double acc = r.best_cell().test_accuracy;
        if (acc >= target_accuracy) {
            esc.reached = true;
            esc.divisions = d;
            esc.result = std::move(r);
            break;
        }
        if (!best_seen || acc > best_seen->best_cell().test_accuracy) {
            best_seen = std::move(r);
        }
    }
    if (!esc.reached) {
        esc.divisions = best_seen->divisions;
        esc.result = std::move(*best_seen);
    }
    esc.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return esc;
}

} // namespace dfr

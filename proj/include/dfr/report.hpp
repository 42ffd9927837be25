#pragma once

// Storage accounting for full versus truncated backpropagation, and the
// timed comparison of gradient training against grid-search escalation.

#include "dfr/dataset.hpp"
#include "dfr/dprr.hpp"
#include "dfr/error.hpp"
#include "dfr/gridsearch.hpp"
#include "dfr/trainer.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <thread>

namespace dfr {

/// Stored values: reservoir states + DPRR + readout weights (with bias).
struct MemoryReport {
    std::size_t steps = 0;
    std::size_t nodes = 0;
    std::size_t classes = 0;
    std::uint64_t naive = 0;
    std::uint64_t simplified = 0;
    double reduction = 0.0;

    /// Reduction in whole percent, rounded half away from zero.
    long reduction_percent() const { return std::lround(reduction * 100.0); }

    bool operator==(const MemoryReport&) const = default;
};

/// naive = T N_x + N_r + N_y (N_r + 1), simplified = 2 N_x + N_r + N_y (N_r + 1).
/// The naive count keeps T state vectors, not T + 1.
inline MemoryReport memory_counts(std::size_t steps, std::size_t nodes, std::size_t classes)
{
    if (steps < 1 || nodes < 1 || classes < 1) {
        throw ConfigError("memory_counts: all inputs must be at least 1");
    }
    MemoryReport m{steps, nodes, classes, 0, 0, 0.0};
    const std::uint64_t nr = dprr_size(nodes);
    const std::uint64_t weights = classes * (nr + 1);
    m.naive = steps * nodes + nr + weights;
    m.simplified = 2 * nodes + nr + weights;
    m.reduction = m.naive > m.simplified
        ? static_cast<double>(m.naive - m.simplified) / static_cast<double>(m.naive)
        : 0.0;
    return m;
}

inline nlohmann::ordered_json memory_to_json(const MemoryReport& m)
{
    return {{"T", m.steps},
            {"nx", m.nodes},
            {"ny", m.classes},
            {"naive", m.naive},
            {"simplified", m.simplified},
            {"reduction", m.reduction},
            {"reduction_percent", m.reduction_percent()}};
}

struct ExperimentConfig {
    ReservoirConfig reservoir;
    TrainConfig train;
    std::vector<double> grid_betas = default_betas;
    std::size_t max_divisions = 16;
};

struct ExperimentReport {
    std::string dataset;
    double bp_accuracy = 0.0;
    double bp_seconds = 0.0;
    double bp_A = 0.0;
    double bp_B = 0.0;
    double bp_beta = 0.0;
    bool grid_reached = false;
    std::size_t grid_divisions = 0;
    std::size_t grid_cells = 0;
    double grid_accuracy = 0.0;
    double grid_seconds = 0.0;
    double speedup = 0.0;
    MemoryReport memory;
    std::string host;
};

inline std::string host_description()
{
    std::string s = "threads=" + std::to_string(std::thread::hardware_concurrency());
#ifdef __VERSION__
    s += " compiler=" __VERSION__;
#endif
    return s;
}

/// Times training, then escalates the grid until it matches the trained
/// model's test accuracy.
inline ExperimentReport run_experiment(const Dataset& data, const ExperimentConfig& cfg)
{
    validate(data);
    ExperimentReport rep;
    rep.dataset = data.name;
    rep.host = host_description();

    const auto t0 = std::chrono::steady_clock::now();
    const TrainedModel model = train(data, cfg.reservoir, cfg.train);
    const Evaluation ev = evaluate(model, data.test);
    rep.bp_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.bp_accuracy = ev.accuracy;
    rep.bp_A = model.reservoir.A;
    rep.bp_B = model.reservoir.B;
    rep.bp_beta = model.beta;

    GridConfig g;
    g.betas = cfg.grid_betas;
    g.reservoir = cfg.reservoir;
    g.normalize = cfg.train.normalize;
    const Escalation esc = escalate(data, rep.bp_accuracy, cfg.max_divisions, g);
    rep.grid_reached = esc.reached;
    rep.grid_divisions = esc.divisions;
    rep.grid_cells = esc.cells_evaluated;
    rep.grid_accuracy = esc.result.best_cell().test_accuracy;
    rep.grid_seconds = esc.seconds;
    rep.speedup = rep.bp_seconds > 0.0 ? rep.grid_seconds / rep.bp_seconds : 0.0;
    rep.memory = memory_counts(data.max_steps(), cfg.reservoir.nodes, data.n_classes);
    return rep;
}

/// Wall-clock and host fields are omitted when `with_timing` is false.
inline nlohmann::ordered_json report_to_json(const ExperimentReport& r, bool with_timing = true)
{
    nlohmann::ordered_json js;
    js["dataset"] = r.dataset;
    js["bp"] = {{"accuracy", r.bp_accuracy}, {"A", r.bp_A}, {"B", r.bp_B}, {"beta", r.bp_beta}};
    js["grid"] = {{"reached", r.grid_reached},
                  {"divisions", r.grid_divisions},
                  {"cells", r.grid_cells},
                  {"accuracy", r.grid_accuracy}};
    js["memory"] = memory_to_json(r.memory);
    if (with_timing) {
        js["bp"]["seconds"] = r.bp_seconds;
        js["grid"]["seconds"] = r.grid_seconds;
        js["speedup"] = r.speedup;
        js["host"] = r.host;
    }
    return js;
}

inline ExperimentReport report_from_json(const nlohmann::json& js)
{
    try {
        ExperimentReport r;
        r.dataset = js.at("dataset").get<std::string>();
        const auto& bp = js.at("bp");
        r.bp_accuracy = bp.at("accuracy").get<double>();
        r.bp_A = bp.at("A").get<double>();
        r.bp_B = bp.at("B").get<double>();
        r.bp_beta = bp.at("beta").get<double>();
        r.bp_seconds = bp.value("seconds", 0.0);
        const auto& g = js.at("grid");
        r.grid_reached = g.at("reached").get<bool>();
        r.grid_divisions = g.at("divisions").get<std::size_t>();
        r.grid_cells = g.at("cells").get<std::size_t>();
        r.grid_accuracy = g.at("accuracy").get<double>();
        r.grid_seconds = g.value("seconds", 0.0);
        r.speedup = js.value("speedup", 0.0);
        r.host = js.value("host", std::string{});
        const auto& m = js.at("memory");
        r.memory = memory_counts(m.at("T").get<std::size_t>(), m.at("nx").get<std::size_t>(),
                                 m.at("ny").get<std::size_t>());
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed report: ") + e.what());
    }
}

} // namespace dfr

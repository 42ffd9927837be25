#pragma once

// JSON forms of trained models. The mask is stored as (seed, N_x, N_u) and
// regenerated on load.

#include "dfr/dataset.hpp"
#include "dfr/error.hpp"
#include "dfr/reservoir.hpp"
#include "dfr/trainer.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace dfr {

namespace detail {

inline nlohmann::ordered_json vector_json(const Eigen::VectorXd& v)
{
    return nlohmann::ordered_json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd json_vector(const nlohmann::json& js)
{
    const auto v = js.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace detail

inline nlohmann::ordered_json model_to_json(const TrainedModel& m)
{
    nlohmann::ordered_json js;
    js["A"] = m.reservoir.A;
    js["B"] = m.reservoir.B;
    js["kind"] = m.reservoir.f.name();
    if (m.reservoir.f.kind == Nonlinearity::Kind::mackey_glass) {
        js["p"] = m.reservoir.f.p;
    }
    js["mask"] = {{"seed", m.reservoir.mask.seed},
                  {"nodes", m.reservoir.mask.nodes()},
                  {"inputs", m.reservoir.mask.inputs()}};
    auto W = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < m.head.W.rows(); ++c) {
        W.push_back(detail::vector_json(m.head.W.row(c).transpose()));
    }
    js["W"] = std::move(W);
    js["b"] = detail::vector_json(m.head.b);
    js["beta"] = m.beta;
    js["beta_loss"] = m.beta_loss;
    if (m.norm) {
        js["normalization"] = {{"mean", detail::vector_json(m.norm->mean)},
                               {"std", detail::vector_json(m.norm->stddev)}};
    } else {
        js["normalization"] = nullptr;
    }
    auto hist = nlohmann::ordered_json::array();
    for (const auto& e : m.history) {
        hist.push_back({{"mean_loss", e.mean_loss},
                        {"accuracy", e.accuracy},
                        {"lr_reservoir", e.lr_reservoir},
                        {"lr_output", e.lr_output}});
    }
    js["history"] = std::move(hist);
    js["diagnostics"] = {{"clamp_events", m.diagnostics.clamp_events},
                         {"diverged_samples", m.diagnostics.diverged_samples},
                         {"min_state_vectors", m.diagnostics.min_state_vectors},
                         {"max_state_vectors", m.diagnostics.max_state_vectors}};
    return js;
}

inline TrainedModel model_from_json(const nlohmann::json& js)
{
    try {
        TrainedModel m;
        m.reservoir.A = js.at("A").get<double>();
        m.reservoir.B = js.at("B").get<double>();
        const auto kind = js.at("kind").get<std::string>();
        if (kind == "linear") {
            m.reservoir.f = Nonlinearity::linear();
        } else if (kind == "mackey-glass") {
            m.reservoir.f = Nonlinearity::mackey_glass(js.at("p").get<int>());
        } else {
            throw DataError("unknown nonlinearity kind '" + kind + "'");
        }
        const auto& mk = js.at("mask");
        m.reservoir.mask = generate_mask(mk.at("seed").get<std::uint64_t>(), mk.at("nodes").get<std::size_t>(),
                                         mk.at("inputs").get<std::size_t>());
        const auto& W = js.at("W");
        const auto classes = static_cast<Eigen::Index>(W.size());
        const auto features = static_cast<Eigen::Index>(dprr_size(m.reservoir.nodes()));
        m.head.W.resize(classes, features);
        for (Eigen::Index c = 0; c < classes; ++c) {
            const Eigen::VectorXd row = detail::json_vector(W[static_cast<std::size_t>(c)]);
            if (row.size() != features) {
                throw DataError("model weight row has wrong length");
            }
            m.head.W.row(c) = row.transpose();
        }
        m.head.b = detail::json_vector(js.at("b"));
        if (m.head.b.size() != classes) {
            throw DataError("model bias has wrong length");
        }
        m.beta = js.at("beta").get<double>();
        m.beta_loss = js.value("beta_loss", 0.0);
        if (js.contains("normalization") && !js["normalization"].is_null()) {
            NormStats st{detail::json_vector(js["normalization"].at("mean")),
                         detail::json_vector(js["normalization"].at("std"))};
            m.norm = std::move(st);
        }
        if (js.contains("history")) {
            for (const auto& e : js["history"]) {
                m.history.push_back({e.at("mean_loss").get<double>(), e.at("accuracy").get<double>(),
                                     e.at("lr_reservoir").get<double>(), e.at("lr_output").get<double>()});
            }
        }
        if (js.contains("diagnostics")) {
            const auto& d = js["diagnostics"];
            m.diagnostics = {d.at("clamp_events").get<std::size_t>(), d.at("diverged_samples").get<std::size_t>(),
                             d.at("min_state_vectors").get<std::size_t>(),
                             d.at("max_state_vectors").get<std::size_t>()};
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

inline void write_model(const TrainedModel& m, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write model file " + path.string());
    }
    out << model_to_json(m).dump(2) << "\n";
}

inline TrainedModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open model file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return model_from_json(nlohmann::json::parse(buf.str()));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("model parse failure: ") + e.what());
    }
}

} // namespace dfr

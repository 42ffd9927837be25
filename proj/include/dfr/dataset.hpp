#pragma once

// Labeled multivariate time-series container, its JSON file format,
// seeded synthetic generators and train-split standardization.

#include "dfr/error.hpp"
#include "dfr/rng.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace dfr {

/// One labeled series; `series` is T rows by N_u columns.
struct Sample {
    std::size_t label = 0;
    Eigen::MatrixXd series;

    std::size_t steps() const noexcept { return static_cast<std::size_t>(series.rows()); }
    std::size_t features() const noexcept { return static_cast<std::size_t>(series.cols()); }

    bool operator==(const Sample& other) const
    {
        return label == other.label && series.rows() == other.series.rows()
            && series.cols() == other.series.cols() && series == other.series;
    }
};

struct Dataset {
    std::string name;
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
    std::vector<Sample> train;
    std::vector<Sample> test;

    bool operator==(const Dataset&) const = default;

    /// Longest series over both splits.
    std::size_t max_steps() const noexcept
    {
        std::size_t t = 0;
        for (const auto* split : {&train, &test}) {
            for (const auto& s : *split) {
                t = std::max(t, s.steps());
            }
        }
        return t;
    }
};

struct NormStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    bool operator==(const NormStats& o) const { return mean == o.mean && stddev == o.stddev; }
};

enum class SynthTask { frequency_pair, amplitude_pair };

struct SynthSpec {
    SynthTask task = SynthTask::frequency_pair;
    std::size_t per_class = 50;
    std::size_t steps = 64;
    std::size_t features = 1;
    double noise = 0.1;
    std::uint64_t seed = 0;
};

namespace detail {

inline void check_sample(const Sample& s, std::size_t n_features, std::size_t n_classes,
                         const std::string& where)
{
    if (s.series.rows() < 1) {
        throw DataError(where + ": series must have at least one step");
    }
    if (static_cast<std::size_t>(s.series.cols()) != n_features) {
        throw DataError(where + ": expected " + std::to_string(n_features) + " features per step, got "
                        + std::to_string(s.series.cols()));
    }
    if (s.label >= n_classes) {
        throw DataError(where + ": label out of range (" + std::to_string(s.label) + " >= "
                        + std::to_string(n_classes) + ")");
    }
    if (!s.series.allFinite()) {
        throw DataError(where + ": non-finite value in series");
    }
}

inline std::vector<Sample> parse_split(const nlohmann::json& arr, std::size_t n_features,
                                       const std::string& split)
{
    if (!arr.is_array()) {
        throw DataError("split '" + split + "' must be an array");
    }
    std::vector<Sample> out;
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string where = split + " sample " + std::to_string(i);
        const auto& js = arr[i];
        if (!js.is_object() || !js.contains("label") || !js.contains("series")) {
            throw DataError(where + ": expected object with 'label' and 'series'");
        }
        const auto& lab = js["label"];
        if (!lab.is_number_integer() || lab.get<std::int64_t>() < 0) {
            throw DataError(where + ": label must be a non-negative integer");
        }
        const auto& rows = js["series"];
        if (!rows.is_array()) {
            throw DataError(where + ": series must be an array of rows");
        }
        Sample s;
        s.label = lab.get<std::size_t>();
        s.series.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_features));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const auto& row = rows[k];
            if (!row.is_array() || row.size() != n_features) {
                throw DataError(where + ": ragged row at step " + std::to_string(k));
            }
            for (std::size_t u = 0; u < n_features; ++u) {
                if (!row[u].is_number()) {
                    throw DataError(where + ": non-numeric value at step " + std::to_string(k));
                }
                s.series(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(u)) = row[u].get<double>();
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline nlohmann::ordered_json split_to_json(const std::vector<Sample>& split)
{
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : split) {
        auto rows = nlohmann::ordered_json::array();
        for (Eigen::Index k = 0; k < s.series.rows(); ++k) {
            auto row = nlohmann::ordered_json::array();
            for (Eigen::Index u = 0; u < s.series.cols(); ++u) {
                row.push_back(s.series(k, u));
            }
            rows.push_back(std::move(row));
        }
        nlohmann::ordered_json js;
        js["label"] = s.label;
        js["series"] = std::move(rows);
        arr.push_back(std::move(js));
    }
    return arr;
}

} // namespace detail

/// Checks every container invariant; throws DataError naming the offending sample.
inline void validate(const Dataset& d)
{
    if (d.n_classes < 2) {
        throw DataError("n_classes must be at least 2");
    }
    if (d.n_features < 1) {
        throw DataError("n_features must be at least 1");
    }
    if (d.train.empty() || d.test.empty()) {
        throw DataError("both train and test splits must be non-empty");
    }
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        detail::check_sample(d.train[i], d.n_features, d.n_classes, "train sample " + std::to_string(i));
    }
    for (std::size_t i = 0; i < d.test.size(); ++i) {
        detail::check_sample(d.test[i], d.n_features, d.n_classes, "test sample " + std::to_string(i));
    }
}

inline Dataset dataset_from_json(const nlohmann::json& js)
{
    if (!js.is_object()) {
        throw DataError("dataset document must be a JSON object");
    }
    for (const char* key : {"name", "n_features", "n_classes", "splits"}) {
        if (!js.contains(key)) {
            throw DataError(std::string("missing key '") + key + "'");
        }
    }
    if (!js["name"].is_string() || !js["n_features"].is_number_integer() || !js["n_classes"].is_number_integer()
        || !js["splits"].is_object() || !js["splits"].contains("train") || !js["splits"].contains("test")) {
        throw DataError("malformed dataset header");
    }
    if (js["n_features"].get<std::int64_t>() < 1 || js["n_classes"].get<std::int64_t>() < 2) {
        throw DataError("n_features must be >= 1 and n_classes >= 2");
    }
    Dataset d;
    d.name = js["name"].get<std::string>();
    d.n_features = js["n_features"].get<std::size_t>();
    d.n_classes = js["n_classes"].get<std::size_t>();
    d.train = detail::parse_split(js["splits"]["train"], d.n_features, "train");
    d.test = detail::parse_split(js["splits"]["test"], d.n_features, "test");
    validate(d);
    return d;
}

inline nlohmann::ordered_json dataset_to_json(const Dataset& d)
{
    nlohmann::ordered_json js;
    js["name"] = d.name;
    js["n_features"] = d.n_features;
    js["n_classes"] = d.n_classes;
    js["splits"]["train"] = detail::split_to_json(d.train);
    js["splits"]["test"] = detail::split_to_json(d.test);
    return js;
}

/// Canonical serialization: compact JSON, shortest round-trip numbers, trailing newline.
inline std::string serialize_dataset(const Dataset& d) { return dataset_to_json(d).dump() + "\n"; }

inline Dataset parse_dataset(const std::string& text)
{
    nlohmann::json js;
    try {
        js = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("parse failure: ") + e.what());
    }
    return dataset_from_json(js);
}

inline Dataset load_dataset(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open dataset file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str());
}

inline void write_dataset(const Dataset& d, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write dataset file " + path.string());
    }
    out << serialize_dataset(d);
}

/// Class c of the frequency-pair task is sin(2 pi f_c k / T) with f = {2, 5};
/// the amplitude-pair task uses amplitudes {0.5, 1.0} at 2 cycles per series.
/// Samples alternate classes within each split; noise is i.i.d. Gaussian.
inline Dataset generate_synthetic(const SynthSpec& spec)
{
    if (spec.steps < 8) {
        throw ConfigError("synthetic series need at least 8 steps");
    }
    if (spec.per_class < 1 || spec.features < 1) {
        throw ConfigError("per_class and features must be at least 1");
    }
    if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) {
        throw ConfigError("noise must be a finite non-negative number");
    }
    constexpr double freqs[2] = {2.0, 5.0};
    constexpr double amps[2] = {0.5, 1.0};

    Dataset d;
    d.name = spec.task == SynthTask::frequency_pair ? "synth-frequency-pair" : "synth-amplitude-pair";
    d.n_features = spec.features;
    d.n_classes = 2;

    SplitMix64 rng(spec.seed);
    const auto T = static_cast<double>(spec.steps);
    auto make_split = [&](std::vector<Sample>& split) {
        for (std::size_t i = 0; i < 2 * spec.per_class; ++i) {
            Sample s;
            s.label = i % 2;
            const double f = spec.task == SynthTask::frequency_pair ? freqs[s.label] : 2.0;
            const double a = spec.task == SynthTask::frequency_pair ? 1.0 : amps[s.label];
            s.series.resize(static_cast<Eigen::Index>(spec.steps), static_cast<Eigen::Index>(spec.features));
            for (Eigen::Index k = 0; k < s.series.rows(); ++k) {
                const double clean = a * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(k) / T);
                for (Eigen::Index u = 0; u < s.series.cols(); ++u) {
                    s.series(k, u) = spec.noise > 0.0 ? clean + spec.noise * rng.normal() : clean;
                }
            }
            split.push_back(std::move(s));
        }
    };
    make_split(d.train);
    make_split(d.test);
    return d;
}

/// Per-feature mean and population standard deviation over every step of every train sample.
inline NormStats compute_norm_stats(const Dataset& d)
{
    if (d.train.empty()) {
        throw DataError("normalization needs a non-empty train split");
    }
    const auto nu = static_cast<Eigen::Index>(d.n_features);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(nu);
    double count = 0.0;
    for (const auto& s : d.train) {
        sum += s.series.colwise().sum().transpose();
        count += static_cast<double>(s.series.rows());
    }
    NormStats st;
    st.mean = sum / count;
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(nu);
    for (const auto& s : d.train) {
        sq += (s.series.rowwise() - st.mean.transpose()).array().square().matrix().colwise().sum().transpose();
    }
    st.stddev = (sq / count).array().sqrt().matrix();
    return st;
}

inline Sample apply_norm(const Sample& s, const NormStats& st)
{
    Sample out = s;
    for (Eigen::Index u = 0; u < out.series.cols(); ++u) {
        if (st.stddev(u) > 0.0) {
            out.series.col(u) = (out.series.col(u).array() - st.mean(u)) / st.stddev(u);
        }
    }
    return out;
}

inline std::vector<Sample> apply_norm(const std::vector<Sample>& split, const NormStats& st)
{
    std::vector<Sample> out;
    out.reserve(split.size());
    for (const auto& s : split) {
        out.push_back(apply_norm(s, st));
    }
    return out;
}

/// Standardizes both splits with train-split statistics; zero-variance features pass through.
inline std::pair<Dataset, NormStats> normalize(const Dataset& d)
{
    NormStats st = compute_norm_stats(d);
    Dataset out;
    out.name = d.name;
    out.n_features = d.n_features;
    out.n_classes = d.n_classes;
    out.train = apply_norm(d.train, st);
    out.test = apply_norm(d.test, st);
    return {std::move(out), std::move(st)};
}

} // namespace dfr

// Command-line front end. Exit codes: 0 ok, 1 usage, 2 data, 3 divergence.

#include "dfr/dfr.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace dfr;

enum Exit { ok = 0, usage = 1, data_error = 2, divergence = 3 };

struct ReservoirOpts {
    std::size_t nodes = 30;
    std::uint64_t mask_seed = 0;
    std::string kind = "linear";
    int p = 2;
    std::vector<double> betas = default_betas;
    bool no_normalize = false;

    void add(CLI::App* cmd)
    {
        cmd->add_option("--nx", nodes, "reservoir nodes")->check(CLI::PositiveNumber);
        cmd->add_option("--mask-seed", mask_seed, "mask seed");
        cmd->add_option("--kind", kind, "nonlinearity")->check(CLI::IsMember({"linear", "mackey-glass"}));
        cmd->add_option("--p", p, "Mackey-Glass exponent (even)");
        cmd->add_option("--betas", betas, "ridge candidates")->delimiter(',');
        cmd->add_flag("--no-normalize", no_normalize, "skip train-split standardization");
    }

    ReservoirConfig reservoir() const
    {
        ReservoirConfig r;
        r.nodes = nodes;
        r.mask_seed = mask_seed;
        r.f = kind == "linear" ? Nonlinearity::linear() : Nonlinearity::mackey_glass(p);
        return r;
    }
};

void write_json(const std::string& path, const nlohmann::ordered_json& js)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path);
    }
    out << js.dump(2) << "\n";
}

const char* yes_no(bool b) { return b ? "yes" : "no"; }

int cmd_synth(const std::string& task, const SynthSpec& base, const std::string& out)
{
    SynthSpec spec = base;
    spec.task = task == "amplitude" ? SynthTask::amplitude_pair : SynthTask::frequency_pair;
    const Dataset d = generate_synthetic(spec);
    write_dataset(d, out);
    std::printf("wrote %s: %zu train, %zu test, T=%zu, features=%zu\n", out.c_str(), d.train.size(), d.test.size(),
                spec.steps, spec.features);
    return ok;
}

void print_history(const TrainedModel& m)
{
    std::printf("%5s %12s %9s %10s %10s\n", "epoch", "mean_loss", "train_acc", "lr_res", "lr_out");
    for (std::size_t e = 0; e < m.history.size(); ++e) {
        const auto& h = m.history[e];
        std::printf("%5zu %12.6f %9.4f %10.3g %10.3g\n", e + 1, h.mean_loss, h.accuracy, h.lr_reservoir, h.lr_output);
    }
}

nlohmann::ordered_json eval_json(const Evaluation& ev)
{
    return {{"accuracy", ev.accuracy}, {"mean_loss", ev.mean_loss}};
}

int cmd_train(const std::string& data_path, const ReservoirOpts& ro, TrainConfig cfg, const std::string& bp,
              const std::string& out, const std::string& json)
{
    const Dataset d = load_dataset(data_path);
    cfg.bp = bp == "full" ? BpMode::full : BpMode::truncated;
    cfg.betas = ro.betas;
    cfg.normalize = !ro.no_normalize;
    const TrainedModel m = train(d, ro.reservoir(), cfg);
    print_history(m);
    const Evaluation tr = evaluate(m, d.train);
    const Evaluation te = evaluate(m, d.test);
    std::printf("A=%.6g B=%.6g beta=%g\n", m.reservoir.A, m.reservoir.B, m.beta);
    std::printf("train accuracy %.4f loss %.6f\n", tr.accuracy, tr.mean_loss);
    std::printf("test  accuracy %.4f loss %.6f\n", te.accuracy, te.mean_loss);
    std::printf("clamp events %zu, diverged samples %zu\n", m.diagnostics.clamp_events,
                m.diagnostics.diverged_samples);
    if (!out.empty()) {
        write_model(m, out);
    }
    if (!json.empty()) {
        write_json(json, {{"dataset", d.name}, {"train", eval_json(tr)}, {"test", eval_json(te)},
                          {"model", model_to_json(m)}});
    }
    return ok;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& split,
             const std::string& json)
{
    const TrainedModel m = load_model(model_path);
    const Dataset d = load_dataset(data_path);
    const Evaluation ev = evaluate(m, split == "train" ? d.train : d.test);
    std::printf("%s accuracy %.4f loss %.6f\n", split.c_str(), ev.accuracy, ev.mean_loss);
    if (!json.empty()) {
        write_json(json, {{"dataset", d.name}, {"split", split}, {split, eval_json(ev)}});
    }
    return ok;
}

void print_heatmap(const GridResult& r)
{
    std::printf("test accuracy by cell (rows A, columns B), D=%zu\n%10s", r.divisions, "A \\ B");
    for (std::size_t ib = 0; ib < r.divisions; ++ib) {
        std::printf(" %9.3g", r.cells[ib].B);
    }
    std::printf("\n");
    for (std::size_t ia = 0; ia < r.divisions; ++ia) {
        std::printf("%10.3g", r.cells[ia * r.divisions].A);
        for (std::size_t ib = 0; ib < r.divisions; ++ib) {
            const GridCell& c = r.cells[ia * r.divisions + ib];
            if (c.diverged) {
                std::printf(" %9s", "div");
            } else {
                std::printf(" %9.4f", c.test_accuracy);
            }
        }
        std::printf("\n");
    }
    const GridCell& b = r.best_cell();
    std::printf("best: A=%.6g B=%.6g beta=%g accuracy %.4f (%.3f s)\n", b.A, b.B, b.beta, b.test_accuracy, r.seconds);
}

void write_cells_csv(const std::string& path, const GridResult& r)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path);
    }
    out.precision(17);
    out << "a_index,b_index,A,B,beta,train_loss,test_accuracy,diverged\n";
    for (const auto& c : r.cells) {
        out << c.a_index << ',' << c.b_index << ',' << c.A << ',' << c.B << ',' << c.beta << ',' << c.train_loss << ','
            << c.test_accuracy << ',' << (c.diverged ? 1 : 0) << '\n';
    }
}

nlohmann::ordered_json grid_json(const GridResult& r)
{
    auto cells = nlohmann::ordered_json::array();
    for (const auto& c : r.cells) {
        cells.push_back({{"a_index", c.a_index}, {"b_index", c.b_index}, {"A", c.A}, {"B", c.B}, {"beta", c.beta},
                         {"train_loss", c.train_loss}, {"test_accuracy", c.test_accuracy}, {"diverged", c.diverged}});
    }
    return {{"divisions", r.divisions}, {"best", r.best}, {"readout_fits", r.readout_fits}, {"seconds", r.seconds},
            {"cells", std::move(cells)}};
}

int cmd_gridsearch(const std::string& data_path, const ReservoirOpts& ro, std::size_t divisions, bool esc_mode,
                   double target, std::size_t max_div, const std::string& csv, const std::string& json)
{
    const Dataset d = load_dataset(data_path);
    GridConfig g;
    g.divisions = divisions;
    g.betas = ro.betas;
    g.reservoir = ro.reservoir();
    g.normalize = !ro.no_normalize;
    GridResult r;
    nlohmann::ordered_json js;
    if (esc_mode) {
        const Escalation e = escalate(d, target, max_div, g);
        std::printf("escalation: target %.4f %s at D=%zu after %zu levels, %zu cells, %.3f s\n", target,
                    e.reached ? "reached" : "not reached; best level", e.divisions, e.levels_evaluated,
                    e.cells_evaluated, e.seconds);
        r = e.result;
        js = {{"target", target}, {"reached", e.reached}, {"divisions", e.divisions},
              {"levels", e.levels_evaluated}, {"cells_evaluated", e.cells_evaluated}, {"seconds", e.seconds},
              {"result", grid_json(r)}};
    } else {
        r = grid_search(d, g);
        js = grid_json(r);
    }
    print_heatmap(r);
    if (!csv.empty()) {
        write_cells_csv(csv, r);
    }
    if (!json.empty()) {
        write_json(json, js);
    }
    return ok;
}

int cmd_gradcheck(std::size_t trials, std::size_t T, std::size_t nx, std::size_t ny, const std::string& kind,
                  std::uint64_t seed, const std::string& json)
{
    SplitMix64 rng(seed);
    double worst = 0.0;
    std::size_t mismatches = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const bool mg = kind == "mackey-glass" || (kind == "both" && t % 2 == 1);
        ReservoirParams params;
        params.A = 0.05 + 0.8 * rng.uniform();
        params.B = 0.05 + 0.8 * rng.uniform();
        params.f = mg ? Nonlinearity::mackey_glass(2) : Nonlinearity::linear();
        params.mask = generate_mask(rng.next(), nx, 1);
        Sample s;
        s.label = rng.below(ny);
        s.series.resize(static_cast<Eigen::Index>(T), 1);
        for (Eigen::Index k = 0; k < s.series.rows(); ++k) {
            s.series(k, 0) = rng.normal();
        }
        OutputHead head = OutputHead::zeros(ny, dprr_size(nx));
        for (Eigen::Index i = 0; i < head.W.size(); ++i) {
            head.W.data()[i] = rng.normal();
        }
        for (Eigen::Index i = 0; i < head.b.size(); ++i) {
            head.b.data()[i] = rng.normal();
        }
        const ForwardPass fwd = run_forward(params, s, TraceMode::full);
        // Keep logits O(1); deep in the clamped-loss region a finite difference reads zero.
        if (fwd.dprr.norm() > 0.0) {
            head.W *= 2.0 / fwd.dprr.norm();
        }
        const Eigen::VectorXd dr = head_gradients(forward_head(head, fwd.dprr), s.label, fwd.dprr, head).dr;
        const ReservoirGrads g = full_bptt(params, s, fwd.trace, dr);
        const ReservoirGrads fd = finite_diff_grads(params, s, head, 1e-6);
        for (auto [got, ref] : {std::pair{g.dA, fd.dA}, std::pair{g.dB, fd.dB}}) {
            const double err = std::abs(got - ref);
            if (std::abs(ref) < 1e-6) {
                mismatches += err > 1e-8 ? 1 : 0;
            } else {
                const double rel = err / std::abs(ref);
                worst = std::max(worst, rel);
                mismatches += rel > 1e-5 ? 1 : 0;
            }
        }
    }
    std::printf("gradcheck: %zu trials, T=%zu nx=%zu ny=%zu kind=%s\n", trials, T, nx, ny, kind.c_str());
    std::printf("max relative error %.3e, mismatches %zu\n", worst, mismatches);
    if (!json.empty()) {
        write_json(json, {{"trials", trials}, {"T", T}, {"nx", nx}, {"ny", ny}, {"kind", kind},
                          {"max_relative_error", worst}, {"mismatches", mismatches}});
    }
    return mismatches == 0 ? ok : divergence;
}

int cmd_memreport(std::size_t T, std::size_t nx, std::size_t ny, const std::string& json)
{
    const MemoryReport m = memory_counts(T, nx, ny);
    std::printf("%8s %6s %6s %10s %12s %10s\n", "T", "N_x", "N_y", "naive", "simplified", "reduction");
    std::printf("%8zu %6zu %6zu %10llu %12llu %9.1f%%\n", T, nx, ny, static_cast<unsigned long long>(m.naive),
                static_cast<unsigned long long>(m.simplified), m.reduction * 100.0);
    if (!json.empty()) {
        write_json(json, memory_to_json(m));
    }
    return ok;
}

int cmd_experiment(const std::string& data_path, const ReservoirOpts& ro, TrainConfig cfg, const std::string& bp,
                   std::size_t max_div, const std::string& json)
{
    const Dataset d = load_dataset(data_path);
    ExperimentConfig ec;
    ec.reservoir = ro.reservoir();
    cfg.bp = bp == "full" ? BpMode::full : BpMode::truncated;
    cfg.betas = ro.betas;
    cfg.normalize = !ro.no_normalize;
    ec.train = cfg;
    ec.grid_betas = ro.betas;
    ec.max_divisions = max_div;
    const ExperimentReport r = run_experiment(d, ec);
    std::printf("dataset          %s\n", r.dataset.c_str());
    std::printf("bp accuracy      %.4f  (A=%.6g B=%.6g beta=%g)\n", r.bp_accuracy, r.bp_A, r.bp_B, r.bp_beta);
    std::printf("bp seconds       %.3f\n", r.bp_seconds);
    std::printf("grid reached     %s at D=%zu (%zu cells, accuracy %.4f)\n", yes_no(r.grid_reached),
                r.grid_divisions, r.grid_cells, r.grid_accuracy);
    std::printf("grid seconds     %.3f\n", r.grid_seconds);
    std::printf("grid/bp time     %.2f\n", r.speedup);
    std::printf("memory           naive %llu, simplified %llu, reduction %.1f%%\n",
                static_cast<unsigned long long>(r.memory.naive), static_cast<unsigned long long>(r.memory.simplified),
                r.memory.reduction * 100.0);
    std::printf("host             %s\n", r.host.c_str());
    if (!json.empty()) {
        write_json(json, report_to_json(r));
    }
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Delayed-feedback reservoir training by backpropagation"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic two-class dataset");
    SynthSpec spec;
    std::string task = "frequency";
    std::string synth_out;
    synth->add_option("--task", task, "frequency or amplitude")->check(CLI::IsMember({"frequency", "amplitude"}));
    synth->add_option("--per-class", spec.per_class, "samples per class per split")->check(CLI::PositiveNumber);
    synth->add_option("--steps", spec.steps, "series length");
    synth->add_option("--features", spec.features, "input channels")->check(CLI::PositiveNumber);
    synth->add_option("--noise", spec.noise, "Gaussian noise std");
    synth->add_option("--seed", spec.seed, "generator seed");
    synth->add_option("--out", synth_out, "dataset JSON path")->required();

    // train
    auto* tr = app.add_subcommand("train", "train by backpropagation and refit the readout");
    std::string data;
    ReservoirOpts ro;
    TrainConfig tc;
    std::string bp = "truncated";
    std::string out;
    std::string json;
    double lr = 1.0;
    tr->add_option("--data", data, "dataset JSON")->required();
    ro.add(tr);
    tr->add_option("--shuffle-seed", tc.shuffle_seed, "SGD shuffle seed");
    tr->add_option("--epochs", tc.epochs, "epochs");
    tr->add_option("--bp", bp, "truncated or full")->check(CLI::IsMember({"truncated", "full"}));
    tr->add_option("--lr", lr, "base learning rate (both groups)");
    tr->add_option("--beta-holdout", tc.beta_holdout, "train fraction held out to score beta");
    tr->add_option("--out", out, "model JSON path");
    tr->add_option("--json", json, "summary JSON path");

    // eval
    auto* ev = app.add_subcommand("eval", "score a saved model");
    std::string model;
    std::string split = "test";
    ev->add_option("--model", model, "model JSON")->required();
    ev->add_option("--data", data, "dataset JSON")->required();
    ev->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
    ev->add_option("--json", json, "summary JSON path");

    // gridsearch
    auto* gs = app.add_subcommand("gridsearch", "log-space (A, B) grid with ridge readout per cell");
    std::size_t divisions = 1;
    bool esc_mode = false;
    double target = 1.0;
    std::size_t max_div = 16;
    std::string csv;
    gs->add_option("--data", data, "dataset JSON")->required();
    ro.add(gs);
    auto* div_opt = gs->add_option("--divisions", divisions, "divisions per axis")->check(CLI::PositiveNumber);
    auto* esc_opt = gs->add_flag("--escalate", esc_mode, "increase D from 1 until the target is met");
    esc_opt->excludes(div_opt);
    gs->add_option("--target", target, "target test accuracy")->needs(esc_opt);
    gs->add_option("--max-div", max_div, "largest D tried")->needs(esc_opt)->check(CLI::PositiveNumber);
    gs->add_option("--csv", csv, "per-cell CSV path");
    gs->add_option("--json", json, "result JSON path");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "compare backpropagated gradients with finite differences");
    std::size_t trials = 100;
    std::size_t T = 10;
    std::size_t gnx = 5;
    std::size_t gny = 3;
    std::string gkind = "both";
    std::uint64_t gseed = 1;
    gc->add_option("--trials", trials, "random instances")->check(CLI::PositiveNumber);
    gc->add_option("--T", T, "steps")->check(CLI::PositiveNumber);
    gc->add_option("--nx", gnx, "nodes")->check(CLI::PositiveNumber);
    gc->add_option("--ny", gny, "classes")->check(CLI::Range(2, 1000));
    gc->add_option("--kind", gkind, "linear, mackey-glass or both")
        ->check(CLI::IsMember({"linear", "mackey-glass", "both"}));
    gc->add_option("--seed", gseed, "instance seed");
    gc->add_option("--json", json, "summary JSON path");

    // memreport
    auto* mr = app.add_subcommand("memreport", "stored-value counts for full versus truncated backpropagation");
    std::size_t mT = 0;
    std::size_t mnx = 30;
    std::size_t mny = 0;
    mr->add_option("--T", mT, "steps")->required();
    mr->add_option("--nx", mnx, "nodes");
    mr->add_option("--ny", mny, "classes")->required();
    mr->add_option("--json", json, "report JSON path");

    // experiment
    auto* ex = app.add_subcommand("experiment", "timed backpropagation training versus grid escalation");
    ex->add_option("--data", data, "dataset JSON")->required();
    ro.add(ex);
    ex->add_option("--shuffle-seed", tc.shuffle_seed, "SGD shuffle seed");
    ex->add_option("--epochs", tc.epochs, "epochs");
    ex->add_option("--bp", bp, "truncated or full")->check(CLI::IsMember({"truncated", "full"}));
    ex->add_option("--max-div", max_div, "largest D tried")->check(CLI::PositiveNumber);
    ex->add_option("--json", json, "report JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(task, spec, synth_out);
        }
        if (tr->parsed()) {
            tc.lr_reservoir = lr;
            tc.lr_output = lr;
            return cmd_train(data, ro, tc, bp, out, json);
        }
        if (ev->parsed()) {
            return cmd_eval(model, data, split, json);
        }
        if (gs->parsed()) {
            if (!esc_mode && div_opt->count() == 0) {
                std::fprintf(stderr, "gridsearch: give --divisions D or --escalate\n");
                return usage;
            }
            return cmd_gridsearch(data, ro, divisions, esc_mode, target, max_div, csv, json);
        }
        if (gc->parsed()) {
            return cmd_gradcheck(trials, T, gnx, gny, gkind, gseed, json);
        }
        if (mr->parsed()) {
            return cmd_memreport(mT, mnx, mny, json);
        }
        if (ex->parsed()) {
            return cmd_experiment(data, ro, tc, bp, max_div, json);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return usage;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return data_error;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "divergence: %s\n", e.what());
        return divergence;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return divergence;
    }
    return usage;
}

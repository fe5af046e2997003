// dlmac: trace generation, labelling, training, simulation and reporting.

#include "dlmac/config.hpp"
#include "dlmac/errors.hpp"
#include "dlmac/experiment.hpp"
#include "dlmac/mcs_ladder.hpp"
#include "dlmac/neuralkit.hpp"
#include "dlmac/simcore.hpp"
#include "dlmac/spectrum.hpp"
#include "dlmac/telemetry.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace dlmac;

namespace {

struct Options {
    std::string config_path;
    std::optional<long long> seed;
    std::string out;
    std::size_t jobs = 1;
    std::string task = "jcara";
    std::string from;
};

struct Context {
    Config cfg;
    fs::path out;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
};

std::string default_out() {
    if (const char* env = std::getenv("DLMAC_OUT"); env && *env) return env;
    return "dlmac-out";
}

Context make_context(const Options& o) {
    Context ctx;
    if (!o.config_path.empty()) {
        if (!fs::exists(o.config_path)) throw MissingInputError("config file " + o.config_path + " does not exist");
        ctx.cfg = Config::load(o.config_path);
    }
    if (o.seed) ctx.cfg.set("seed", std::to_string(*o.seed));
    validate_config(ctx.cfg);
    ctx.seed = static_cast<std::uint64_t>(ctx.cfg.get_int("seed", 1));
    ctx.out = o.out.empty() ? fs::path(default_out()) : fs::path(o.out);
    ctx.jobs = o.jobs == 0 ? 1 : o.jobs;
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw IoError("cannot create output directory " + ctx.out.string() + ": " + ec.message());
    return ctx;
}

fs::path input_path(const Context& ctx, std::string_view key, const std::string& fallback_name) {
    fs::path p = ctx.cfg.get_path(key);
    if (p.empty()) p = ctx.out / fallback_name;
    return p;
}

fs::path require(const fs::path& p, std::string_view what, std::string_view producer) {
    if (!fs::exists(p))
        throw MissingInputError(std::string(what) + " " + p.string() + " not found (run `" + std::string(producer) +
                                "` first)");
    return p;
}

TaskKind parse_task(const std::string& s) {
    try {
        return task_from_string(s);
    } catch (const Error&) {
        throw ConfigError("--task must be 'jcara' or 'switch'");
    }
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

ProcessedTrace load_processed(const Context& ctx) {
    const auto path = require(input_path(ctx, "trace.processed", "processed_trace.csv"), "processed trace", "preprocess");
    return load_processed_trace(path);
}

// ---------------------------------------------------------------------------

int cmd_gen_trace(const Context& ctx) {
    const auto scenario = scenario_from_config(ctx.cfg);
    const auto raw = synthesize_trace(scenario);
    const auto path = ctx.out / "raw_trace.csv";
    save_raw_trace(raw, path);
    std::printf("wrote %s (%zu samples x %zu sub-bands)\n", path.string().c_str(), raw.length(), raw.n_subbands());
    return 0;
}

int cmd_preprocess(const Context& ctx) {
    const auto in = require(input_path(ctx, "trace.raw", "raw_trace.csv"), "raw trace", "gen-trace");
    const auto result = preprocess(load_raw_trace(in), channel_map_options_from(ctx.cfg));
    const auto path = ctx.out / "processed_trace.csv";
    save_processed_trace(result.trace, path);
    std::printf("wrote %s (%zu slots x %d channels)\n", path.string().c_str(), result.trace.length(),
                result.trace.n_channels());
    for (int ch : result.partial_channels) std::printf("channel %d averaged over a partial sub-band span\n", ch);
    for (int ch : result.omitted_channels) std::printf("channel %d omitted: not enough sub-bands\n", ch);
    return 0;
}

int cmd_label(const Context& ctx, TaskKind task) {
    const auto full = load_processed(ctx);
    const auto train_slots = ctx.cfg.get_size("trace.train_slots", 0);
    const auto trace = trace_segment(full, 0, std::min<std::size_t>(train_slots, full.length()));
    const auto lc = label_config_from(ctx.cfg);
    Dataset data;
    if (task == TaskKind::jcara) {
        // label.channels pools several channels into one dataset
        const auto channels = ctx.cfg.has("label.channels")
                                  ? ctx.cfg.get_int_list("label.channels", {})
                                  : std::vector<int>{static_cast<int>(ctx.cfg.get_int("label.channel", 6))};
        for (int ch : channels)
            if (!trace.has_channel(ch))
                throw ConfigError("label channel " + std::to_string(ch) + " is not in the processed trace");
        data = make_dataset(label_jcara_pooled(trace, channels, lc), lc, channels);
    } else {
        const auto channels = ctx.cfg.get_int_list("switch.channels", SwitchConfig{}.channels);
        for (int ch : channels)
            if (!trace.has_channel(ch))
                throw ConfigError("switch channel " + std::to_string(ch) + " is not in the processed trace");
        data = make_dataset(label_switch(trace, channels, lc), lc, channels);
    }
    if (data.size() == 0) throw EmptyOutputError("labelling produced no samples");
    const auto path = ctx.out / ("dataset_" + std::string(to_string(task)) + ".csv");
    save_dataset(data, path);
    std::printf("wrote %s (%zu samples, %zu features)\n", path.string().c_str(), data.size(), data.feature_dim);
    return 0;
}

int cmd_train(const Context& ctx, TaskKind task) {
    const std::string name(to_string(task));
    const auto data = load_dataset(require(ctx.out / ("dataset_" + name + ".csv"), "dataset", "label --task " + name));
    if (data.task != task) throw SchemaError("dataset_" + name + ".csv holds a '" + std::string(to_string(data.task)) + "' dataset");
    const auto lc = label_config_from(ctx.cfg);
    const auto& dl = data.label_config;
    if (dl.txop_slots != lc.txop_slots || dl.k1 != lc.k1 || dl.k2 != lc.k2 || dl.k3 != lc.k3 ||
        dl.p_r_dbm != lc.p_r_dbm)
        throw ModelMismatchError("dataset_" + name + ".csv was labelled with different label.* settings; rerun `label`");
    const auto result = train(data, architecture_from(ctx.cfg, task), train_config_from(ctx.cfg));

    const auto model_path = ctx.out / ("model_" + name + ".bin");
    save_model(result.model, model_path);
    std::ofstream log(ctx.out / ("train_log_" + name + ".csv"), std::ios::binary);
    if (!log) throw IoError("cannot write training log");
    log << "epoch,train_loss,val_loss,train_accuracy,val_accuracy\n";
    char buf[160];
    for (const auto& e : result.log) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss,
                      e.train_accuracy, e.val_accuracy);
        log << buf;
    }
    const auto& best = result.log.at(result.best_epoch - 1);
    std::printf("wrote %s (%zu params, best epoch %zu, val_loss %.6f, val_acc %.4f)\n", model_path.string().c_str(),
                result.model.params().size(), result.best_epoch, best.val_loss, best.val_accuracy);
    std::printf("checksum %s\n", hex64(fnv1a64(serialize_model(result.model))).c_str());
    return 0;
}

struct LoadedModels {
    std::optional<NeuralModel> jcara, switching;
    Models view() const { return {jcara ? &*jcara : nullptr, switching ? &*switching : nullptr}; }
};

LoadedModels load_models_for(const Context& ctx, std::span<const RunSpec> specs) {
    bool need_jcara = false, need_switch = false;
    for (const auto& s : specs) {
        need_jcara |= needs_jcara_model(s.run.policy);
        need_switch |= s.run.switching.mode != SwitchMode::off || s.run.policy == PolicyKind::dlmac_instant;
    }
    LoadedModels m;
    if (need_jcara)
        m.jcara = load_model(require(input_path(ctx, "model.jcara", "model_jcara.bin"), "channel-access model",
                                     "train --task jcara"),
                             TaskKind::jcara);
    if (need_switch)
        m.switching = load_model(require(input_path(ctx, "model.switch", "model_switch.bin"), "switch model",
                                         "train --task switch"),
                                 TaskKind::switch_channel);
    return m;
}

int run_and_report(const Context& ctx, std::vector<RunSpec> specs, const fs::path& report_dir) {
    const auto full = load_processed(ctx);
    const auto begin = ctx.cfg.get_size("trace.test_begin", ctx.cfg.get_size("trace.train_slots", 0));
    const auto trace = trace_segment(full, begin, ctx.cfg.get_size("trace.test_slots", 0));
    const auto models = load_models_for(ctx, specs);
    const auto reports = run_many(trace, specs, models.view(), ctx.jobs);
    emit_report(reports, report_dir);
    std::fputs(summary_table(summarize(reports)).c_str(), stdout);
    std::printf("report written to %s\n", report_dir.string().c_str());
    return 0;
}

int cmd_simulate(const Context& ctx) {
    Config plain = ctx.cfg;
    Config stripped;
    for (const auto& [k, v] : plain.entries())
        if (!k.starts_with("sweep.")) stripped.set(k, v);
    stripped.set_base_dir(plain.base_dir());
    const auto seeds = seeds_from(stripped, ctx.seed);
    return run_and_report(ctx, expand_runs(stripped, seeds), ctx.out / "simulate");
}

int cmd_sweep(const Context& ctx) {
    if (sweep_axes(ctx.cfg).empty()) throw ConfigError("sweep needs at least one `sweep.<key> = values` entry");
    const auto seeds = seeds_from(ctx.cfg, ctx.seed);
    return run_and_report(ctx, expand_runs(ctx.cfg, seeds), ctx.out / "sweep");
}

int cmd_report(const Context& ctx, const std::string& from) {
    const fs::path dir = from.empty() ? ctx.out / "simulate" : fs::path(from);
    const auto reports = load_reports(dir / "runs");
    emit_summary(reports, dir);
    std::fputs(summary_table(summarize(reports)).c_str(), stdout);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DL-MAC trace-driven MAC simulator and learning pipeline"};
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "experiment config (key = value)");
        sub->add_option("--seed", o.seed, "base seed (overrides the `seed` key)");
        sub->add_option("--out", o.out, "output directory (default $DLMAC_OUT or ./dlmac-out)");
        sub->add_option("--jobs", o.jobs, "worker threads for independent runs")->check(CLI::PositiveNumber);
    };
    auto* gen = app.add_subcommand("gen-trace", "synthesise a raw sub-band trace");
    auto* pre = app.add_subcommand("preprocess", "raw trace -> channel/mini-slot trace");
    auto* lab = app.add_subcommand("label", "label training windows");
    auto* trn = app.add_subcommand("train", "train a classifier on a labelled dataset");
    auto* sim = app.add_subcommand("simulate", "run every policy for every seed");
    auto* swp = app.add_subcommand("sweep", "simulate over the cartesian product of sweep.* axes");
    auto* rep = app.add_subcommand("report", "re-summarise stored run files");
    for (auto* sub : {gen, pre, lab, trn, sim, swp, rep}) add_common(sub);
    for (auto* sub : {lab, trn})
        sub->add_option("--task", o.task, "jcara or switch")->check(CLI::IsMember({"jcara", "switch"}));
    rep->add_option("--from", o.from, "report directory holding runs/ (default <out>/simulate)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: kind=usage message=%s\n", e.what());
        return 2;
    }

    try {
        const Context ctx = make_context(o);
        if (*gen) return cmd_gen_trace(ctx);
        if (*pre) return cmd_preprocess(ctx);
        if (*lab) return cmd_label(ctx, parse_task(o.task));
        if (*trn) return cmd_train(ctx, parse_task(o.task));
        if (*sim) return cmd_simulate(ctx);
        if (*swp) return cmd_sweep(ctx);
        if (*rep) return cmd_report(ctx, o.from);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: kind=%s message=%s\n", to_string(e.kind()), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: kind=internal message=%s\n", e.what());
        return 3;
    }
    return 1;
}

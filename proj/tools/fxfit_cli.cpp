#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fxfit/analysis.hpp"
#include "fxfit/audio.hpp"
#include "fxfit/error.hpp"
#include "fxfit/fx.hpp"
#include "fxfit/fxnorm.hpp"
#include "fxfit/grad.hpp"
#include "fxfit/ito.hpp"
#include "fxfit/ops.hpp"
#include "fxfit/params.hpp"
#include "fxfit/sampler.hpp"

namespace fs = std::filesystem;
using namespace fxfit;

namespace {

enum Exit : int { ok = 0, usage = 1, io = 2, format = 3, numeric = 4 };

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::io: return io;
        case ErrorKind::format:
        case ErrorKind::empty_input:
        case ErrorKind::range:
        case ErrorKind::shape: return format;
        case ErrorKind::non_finite: return numeric;
        case ErrorKind::precondition: return usage;
    }
    return format;
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, path.string() + ": " + e.what());
    }
}

void write_json(const nlohmann::json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
}

// JSON content errors surface as nlohmann exceptions; report them as format.
template <class F>
auto parse_as_format(const fs::path& path, F&& f) {
    try {
        return f(read_json(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, path.string() + ": " + e.what());
    }
}

ChainParams load_params(const fs::path& path) {
    return parse_as_format(path, [](const nlohmann::json& j) { return chain_params_from_json(j); });
}

FxNormStats load_stats(const fs::path& path) {
    return parse_as_format(path, [](const nlohmann::json& j) { return fxnorm_stats_from_json(j); });
}

fs::path sidecar(const fs::path& p) {
    fs::path s = p;
    s.replace_extension(".json");
    return s;
}

ops::LossKind parse_loss(const std::string& s) { return s == "mss" ? ops::LossKind::mss : ops::LossKind::af; }

std::string fmt(double v) {
    if (!std::isfinite(v)) return v < 0 ? "-inf" : "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

StereoBuffer gradcheck_noise(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 10));
    StereoBuffer x(kSampleRate);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = std::sqrt(-2.0 * std::log(std::max(rng.uniform(), 1e-300)));
        const double phi = 2.0 * std::numbers::pi * rng.uniform();
        x.left[i] = 0.2 * a * std::cos(phi);
        x.right[i] = 0.1 * x.left[i] + 0.2 * a * std::sin(phi);
    }
    return x;
}

std::vector<double> random_unconstrained(std::uint64_t seed) {
    Rng rng(seed);
    for (;;) {
        std::vector<double> u(kNumParams);
        for (double& v : u) v = rng.uniform(-kStyleSpread, kStyleSpread);
        if (is_valid(unconstrained_to_params(u))) return u;
    }
}

struct Options {
    std::string input, reference, output, params, stats, corpus, trace, converter;
    std::string space = "theta";
    std::string loss = "mss";
    double lr = 2e-4;
    std::optional<std::size_t> max_steps;
    std::uint64_t seed = 0;
    std::size_t embedding_dim = kDefaultEmbeddingDim;
    bool json = false;
};

// Accepts bare chain parameters (all modules on) or a style sample written by `random`.
int cmd_process(const Options& o) {
    const StyleSample s = parse_as_format(o.params, [](const nlohmann::json& j) {
        if (j.is_object() && j.contains("mask")) return style_sample_from_json(j);
        return StyleSample{chain_params_from_json(j), ModuleMask::all_on(), 0};
    });
    const StereoBuffer x = load_audio(o.input);
    save_audio(apply_chain(x, s.params, s.mask), o.output);
    return ok;
}

int cmd_random(const Options& o) {
    const StereoBuffer x = load_audio(o.input);
    const StyleSample s = sample_style(o.seed);
    save_audio(apply_chain(x, s.params, s.mask), o.output);
    write_json(to_json(s), o.params.empty() ? sidecar(o.output) : fs::path(o.params));
    return ok;
}

int cmd_normalize_stats(const Options& o) {
    if (!fs::is_directory(o.corpus)) fail(ErrorKind::io, "not a directory: " + o.corpus);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(o.corpus)) {
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (e.is_regular_file() && ext == ".wav") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorKind::empty_input, "no .wav files in " + o.corpus);
    std::vector<StereoBuffer> corpus;
    for (const auto& f : files) corpus.push_back(load_audio(f));
    std::vector<std::string> warnings;
    const FxNormStats stats = compute_corpus_stats(corpus, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    write_json(to_json(stats), o.output);
    return ok;
}

int cmd_normalize_apply(const Options& o) {
    const FxNormStats stats = load_stats(o.stats);
    save_audio(normalize_track(load_audio(o.input), stats), o.output);
    return ok;
}

int cmd_ito(const Options& o) {
    ItoConfig cfg;
    cfg.space = o.space == "z" ? ItoSpace::z : ItoSpace::theta;
    cfg.loss = parse_loss(o.loss);
    cfg.learning_rate = o.lr;
    cfg.max_steps = o.max_steps;
    cfg.validate();

    const StereoBuffer x_in = load_audio(o.input);
    const StereoBuffer x_ref = load_audio(o.reference);

    std::optional<Converter> converter;
    ItoInit init;
    if (cfg.space == ItoSpace::z) {
        if (!o.params.empty()) fail(ErrorKind::precondition, "--params applies to --space theta only");
        if (!o.converter.empty())
            converter = parse_as_format(o.converter, [](const nlohmann::json& j) { return converter_from_json(j); });
        else
            converter = Converter::init(o.embedding_dim, kDefaultHiddenDim, o.seed);
        init = ItoInit::embedding_zero(converter->embedding_dim());
    } else {
        if (!o.converter.empty()) fail(ErrorKind::precondition, "--converter applies to --space z only");
        init = o.params.empty() ? ItoInit::theta_midpoint() : ItoInit::theta(load_params(o.params));
    }

    const ItoTrace trace = run_ito(x_in, x_ref, cfg, init, converter ? &*converter : nullptr);
    if (!o.trace.empty()) {
        write_trace_csv(trace, o.trace);
        nlohmann::json j = trace_summary_json(trace, cfg);
        j["seed"] = o.seed;
        if (converter) j["embedding_dim"] = converter->embedding_dim();
        write_json(j, sidecar(o.trace));
    }
    if (trace.stop_reason == "non_finite") {
        std::cerr << "error: non-finite loss after " << trace.rows.size() << " evaluations\n";
        return numeric;
    }
    save_audio(trace.output, o.output);
    return ok;
}

int cmd_metrics(const Options& o) {
    const StereoBuffer x = load_audio(o.input);
    std::optional<StereoBuffer> ref;
    if (!o.reference.empty()) ref = load_audio(o.reference);
    const MetricsReport r = compute_metrics(x, ref ? &*ref : nullptr);
    if (o.json) {
        std::cout << to_json(r).dump(2) << '\n';
        return ok;
    }
    std::cout << "drv " << fmt(r.drv) << '\n' << "integrated_loudness " << fmt(r.integrated_loudness) << '\n';
    const auto names = FeatureVector::names();
    const auto values = r.features.to_array();
    for (std::size_t i = 0; i < names.size(); ++i) std::cout << names[i] << ' ' << fmt(values[i]) << '\n';
    if (r.af_vs_reference) std::cout << "af " << fmt(*r.af_vs_reference) << '\n';
    return ok;
}

int cmd_gradcheck(const Options& o) {
    const StereoBuffer x = o.input.empty() ? gradcheck_noise(o.seed) : load_audio(o.input);
    const std::vector<double> u = o.params.empty() ? random_unconstrained(derive_seed(o.seed, 11))
                                                   : params_to_unconstrained(load_params(o.params));
    StereoBuffer ref;
    if (!o.reference.empty())
        ref = load_audio(o.reference);
    else
        ref = apply_chain(x, unconstrained_to_params(random_unconstrained(derive_seed(o.seed, 12))),
                          ModuleMask::all_on());
    const auto loss = ops::chain_loss(x, ref, parse_loss(o.loss));
    const auto names = ops::param_names();
    const grad::GradReport report = grad::gradient_check(loss, u, grad::kDefaultFdStep, names);
    std::cout << grad::to_json(report).dump(2) << '\n';
    return report.pass ? ok : numeric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentiable mastering chain and inference-time optimization"};
    app.require_subcommand(1);
    Options o;

    auto seed_flag = [&](CLI::App* c, const std::string& what) {
        c->add_option("--seed", o.seed, "Seed for " + what + " (default 0)");
    };

    auto* process = app.add_subcommand("process", "Apply a parameter file to audio");
    process->add_option("--input", o.input, "Input WAV")->required();
    process->add_option("--params", o.params, "Chain parameter JSON, or a style JSON from `random`")->required();
    process->add_option("--output,--out", o.output, "Output WAV")->required();

    auto* random = app.add_subcommand("random", "Sample a random style, apply it and emit its JSON");
    random->add_option("--input", o.input, "Input WAV")->required();
    random->add_option("--output,--out", o.output, "Output WAV")->required();
    random->add_option("--params", o.params, "Where to write the style JSON (default: output with .json)");
    seed_flag(random, "the sampled style");

    auto* normalize = app.add_subcommand("normalize", "Corpus statistics and Fx-normalization");
    normalize->require_subcommand(1);
    auto* nstats = normalize->add_subcommand("stats", "Compute corpus-mean targets");
    nstats->add_option("--corpus", o.corpus, "Directory of WAV files")->required();
    nstats->add_option("--output,--out", o.output, "Statistics JSON")->required();
    auto* napply = normalize->add_subcommand("apply", "Normalize one track");
    napply->add_option("--input", o.input, "Input WAV")->required();
    napply->add_option("--stats", o.stats, "Statistics JSON")->required();
    napply->add_option("--output,--out", o.output, "Output WAV")->required();

    auto* ito = app.add_subcommand("ito", "Inference-time optimization towards a reference");
    ito->add_option("--input", o.input, "Input WAV")->required();
    ito->add_option("--reference", o.reference, "Reference WAV")->required();
    ito->add_option("--output,--out", o.output, "Output WAV")->required();
    ito->add_option("--space", o.space, "theta or z (default theta)")->check(CLI::IsMember({"theta", "z"}));
    ito->add_option("--loss", o.loss, "af or mss (default mss)")->check(CLI::IsMember({"af", "mss"}));
    ito->add_option("--lr", o.lr, "Learning rate (default 2e-4)");
    ito->add_option("--max-steps", o.max_steps, "Step budget (default 100 for z, 2000 for theta)");
    ito->add_option("--trace", o.trace, "CSV trace; a JSON summary is written next to it");
    ito->add_option("--params", o.params, "Initial parameters for theta space (default: range midpoints)");
    ito->add_option("--converter", o.converter, "Converter weights JSON for z space");
    ito->add_option("--embedding-dim", o.embedding_dim, "Embedding size of a fresh converter (default 64)")
        ->check(CLI::Range(std::size_t{1}, kMaxEmbeddingDim));
    seed_flag(ito, "the converter initialization");

    auto* metrics = app.add_subcommand("metrics", "DRV, audio features and loudness");
    metrics->add_option("--input", o.input, "Input WAV")->required();
    metrics->add_option("--reference", o.reference, "Reference WAV; adds the AF distance");
    metrics->add_flag("--json", o.json, "Print JSON to stdout");

    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    gradcheck->add_option("--input", o.input, "Input WAV (default: 1 s of seeded noise)");
    gradcheck->add_option("--reference", o.reference, "Reference WAV (default: input through a random chain)");
    gradcheck->add_option("--params", o.params, "Evaluation point (default: random)");
    gradcheck->add_option("--loss", o.loss, "af or mss (default mss)")->check(CLI::IsMember({"af", "mss"}));
    seed_flag(gradcheck, "the default input, point and reference");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << '\n';
        return usage;
    }

    try {
        if (*process) return cmd_process(o);
        if (*random) return cmd_random(o);
        if (*nstats) return cmd_normalize_stats(o);
        if (*napply) return cmd_normalize_apply(o);
        if (*ito) return cmd_ito(o);
        if (*metrics) return cmd_metrics(o);
        if (*gradcheck) return cmd_gradcheck(o);
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return format;
    }
    return usage;
}

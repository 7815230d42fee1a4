#include "commands.hpp"

#include "manifest.hpp"
#include "plot.hpp"
#include "trace_io.hpp"

#include "fredformer/fredformer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <numeric>

namespace fredformer::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

const std::vector<Eigen::Index> kCase1Bins{30, 120, 400};
const std::vector<double> kCase1Amps{1.0, 0.6, 0.3};
const std::vector<double> kCase2Fractions{0.19, 0.23, 0.27, 0.31};  // of the series length, mid-spectrum
const std::vector<double> kCase2Amps{1.0, 1.0, 1.0, 1.0};

std::vector<Eigen::Index> default_bins(const Options& opts) {
    if (opts.mode == "case1") return kCase1Bins;
    std::vector<Eigen::Index> bins;
    for (const double f : kCase2Fractions) bins.push_back(static_cast<Eigen::Index>(f * static_cast<double>(opts.length)));
    return bins;
}

void usage_require(bool cond, const std::string& what) {
    if (!cond) throw UsageError(what);
}

void announce(const fs::path& path) { std::cout << "wrote " << path.string() << '\n'; }

void write_json(const fs::path& path, const ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    out << j.dump(2) << '\n';
    out.close();
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    announce(path);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    announce(path);
}

SplitScheme resolve_scheme(const Options& opts, const std::optional<std::string>& stored) {
    if (opts.split != "auto") return SplitScheme::parse(opts.split);
    if (stored) return SplitScheme::parse(*stored);
    std::string stem = fs::path(opts.data).stem().string();
    std::transform(stem.begin(), stem.end(), stem.begin(), [](unsigned char c) { return std::tolower(c); });
    if (stem.rfind("etth", 0) == 0) return SplitScheme::ett_months(24);
    if (stem.rfind("ettm", 0) == 0) return SplitScheme::ett_months(96);
    return SplitScheme::ratio();
}

std::optional<std::string> metadata(const Checkpoint& cp, const std::string& key) {
    const auto it = cp.metadata.find(key);
    if (it == cp.metadata.end()) return std::nullopt;
    return it->second;
}

ordered_json metrics_json(const Metrics& m, Eigen::Index horizon) {
    return {{"mse", m.mse}, {"mae", m.mae}, {"horizon", horizon}, {"per_horizon_mse", m.per_horizon_mse}};
}

/// Checkpoint and data must agree on channel count; explicit length flags
/// must agree with the checkpoint.
void check_compatible(const Checkpoint& cp, const MultivariateSeries& series, const Options& opts) {
    require(series.channels() == cp.config.channels, ErrorKind::ShapeMismatch,
            "channel count mismatch: checkpoint expects C=" + std::to_string(cp.config.channels) + ", " + opts.data +
                " has C=" + std::to_string(series.channels()));
    const auto check = [&](const char* flag, Eigen::Index given, Eigen::Index stored) {
        require(!opts.given.count(flag) || given == stored, ErrorKind::ShapeMismatch,
                std::string("--") + flag + " " + std::to_string(given) + " does not match the checkpoint (" +
                    std::to_string(stored) + ")");
    };
    check("lookback", opts.lookback, cp.config.lookback);
    check("horizon", opts.horizon, cp.config.horizon);
    check("patch-len", opts.patch_len, cp.config.patch_len);
}

/// Predictor on the raw scale: standardize inputs, forecast, invert.
Predictor raw_scale_predictor(Predictor inner, const Scaler& scaler) {
    return [inner = std::move(inner), scaler](const Matrix& inputs) {
        const Eigen::Index channels = scaler.mean.size();
        Matrix z = inputs;
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            const Eigen::Index c = r % channels;
            z.row(r) = (z.row(r).array() - scaler.mean[c]) / scaler.stddev[c];
        }
        Matrix out = inner(z);
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            const Eigen::Index c = r % channels;
            out.row(r) = out.row(r).array() * scaler.stddev[c] + scaler.mean[c];
        }
        return out;
    };
}

struct Loaded {
    Checkpoint checkpoint;
    MultivariateSeries series;
    SplitScheme scheme;
    PreparedData raw;  // raw-scale windows
    Scaler scaler;
};

Loaded load_for_inference(const Options& opts) {
    Loaded l{load_checkpoint(opts.checkpoint), load_csv(opts.data), {}, {}, {}};
    check_compatible(l.checkpoint, l.series, opts);
    l.scheme = resolve_scheme(opts, metadata(l.checkpoint, "split"));
    const auto& cfg = l.checkpoint.config;
    l.raw = prepare(l.series, l.scheme, cfg.lookback, cfg.horizon, 1, false);
    l.scaler = l.checkpoint.scaler ? *l.checkpoint.scaler : l.raw.scaler;
    return l;
}

}  // namespace

FredformerConfig model_config(const Options& opts, Eigen::Index channels) {
    FredformerConfig cfg;
    cfg.lookback = opts.lookback;
    cfg.horizon = opts.horizon;
    cfg.channels = channels;
    cfg.patch_len = opts.patch_len;
    cfg.embed_dim = opts.embed_dim;
    cfg.heads = opts.heads;
    cfg.head_dim = opts.head_dim;
    cfg.depth = opts.depth;
    cfg.mlp_dim = opts.mlp_dim;
    cfg.use_nystrom = opts.nystrom;
    cfg.landmarks = opts.landmarks;
    cfg.share_band_weights = opts.share_band_weights;
    cfg.instance_norm = !opts.no_instance_norm;
    cfg.channel_attention = !opts.no_channel_attention;
    cfg.frequency_refinement = !opts.no_frequency_refinement;
    cfg.seed = opts.seed;
    return cfg;
}

TrainConfig train_config(const Options& opts) {
    TrainConfig tc;
    tc.epochs = opts.epochs;
    tc.batch_size = opts.batch_size;
    tc.learning_rate = opts.lr;
    tc.patience = opts.patience;
    tc.seed = opts.seed;
    tc.bias = BiasProbeSpec{opts.bias_band_size, opts.bias_channel, opts.probe_windows};
    return tc;
}

void validate_usage(const std::string& command, const Options& opts) {
    usage_require(opts.jobs >= 1, "--jobs must be >= 1");
    usage_require(!opts.out_dir.empty(), "--out-dir must not be empty");
    const auto checked = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
    };
    if (opts.split != "auto") checked([&] { SplitScheme::parse(opts.split); });
    if (!opts.part.empty()) checked([&] { parse_split_tag(opts.part); });

    if (command == "generate") {
        usage_require(opts.mode == "case1" || opts.mode == "case2-plant" || opts.mode == "case2-rearrange",
                      "generate mode must be case1, case2-plant or case2-rearrange");
        if (opts.mode == "case2-rearrange") {
            usage_require(!opts.input.empty(), "case2-rearrange needs --input");
            return;
        }
        const auto bins = opts.bins.empty() ? default_bins(opts) : opts.bins;
        const auto& amps = opts.amps.empty() ? (opts.mode == "case1" ? kCase1Amps : kCase2Amps) : opts.amps;
        const std::size_t want = opts.mode == "case1" ? 3 : 4;
        usage_require(bins.size() == want && amps.size() == want,
                      opts.mode + " needs exactly " + std::to_string(want) + " --bins and --amps");
        checked([&] {
            PlantConfig pc;
            pc.length = opts.length;
            pc.bins = bins;
            pc.amplitudes = amps;
            pc.noise_std = opts.noise_std;
            pc.channels = opts.channels;
            pc.validate();
        });
        return;
    }
    if (command == "train") {
        usage_require(!opts.data.empty(), "train needs --data");
        // channel-dependent checks wait for the data
        checked([&] { model_config(opts, std::max<Eigen::Index>(opts.landmarks, 1)).validate(); });
        checked([&] { train_config(opts).validate(); });
        usage_require(opts.train_stride >= 1, "--train-stride must be >= 1");
        return;
    }
    if (command == "evaluate" || command == "forecast") {
        usage_require(!opts.data.empty(), command + " needs --data");
        usage_require(!opts.checkpoint.empty(), command + " needs --checkpoint");
        return;
    }
    if (command == "bias-report") {
        usage_require(!opts.trace.empty() || (!opts.checkpoint.empty() && !opts.data.empty()),
                      "bias-report needs --trace, or --checkpoint with --data");
        usage_require(opts.trace.empty() || opts.checkpoint.empty(), "--trace and --checkpoint are exclusive");
        usage_require(opts.bias_band_size >= 1 && opts.bias_channel >= 0 && opts.probe_windows >= 1,
                      "probe band size and window count must be >= 1, channel >= 0");
        return;
    }
    throw UsageError("unknown command " + command);
}

std::vector<std::pair<std::string, std::string>> command_inputs(const std::string& command, const Options& opts) {
    std::vector<std::pair<std::string, std::string>> inputs;
    if (command == "generate") {
        if (opts.mode == "case2-rearrange") inputs.emplace_back("input", opts.input);
        return inputs;
    }
    if (!opts.checkpoint.empty()) inputs.emplace_back("checkpoint", opts.checkpoint);
    if (!opts.trace.empty()) inputs.emplace_back("trace", opts.trace);
    if (!opts.data.empty()) inputs.emplace_back("data", opts.data);
    return inputs;
}

void run_generate(const Options& opts) {
    const fs::path out(opts.out_dir);
    MultivariateSeries series;
    ordered_json report;
    if (opts.mode == "case2-rearrange") {
        const auto result = rearrange_spectrum_mid(load_csv(opts.input));
        series = result.series;
        report = ordered_json::parse(result.report.to_json());
    } else {
        PlantConfig pc;
        pc.length = opts.length;
        pc.bins = opts.bins.empty() ? default_bins(opts) : opts.bins;
        pc.amplitudes = opts.amps.empty() ? (opts.mode == "case1" ? kCase1Amps : kCase2Amps) : opts.amps;
        pc.noise_std = opts.noise_std;
        pc.seed = opts.seed;
        pc.channels = opts.channels;
        const auto generated = opts.mode == "case1" ? gen_case1(pc) : gen_case2_like(pc);
        series = generated.series;
        ordered_json phases = ordered_json::array();
        for (Eigen::Index c = 0; c < generated.phases.rows(); ++c) {
            std::vector<double> row(generated.phases.cols());
            for (Eigen::Index j = 0; j < generated.phases.cols(); ++j) row[static_cast<std::size_t>(j)] = generated.phases(c, j);
            phases.push_back(row);
        }
        report = {{"mode", opts.mode},        {"length", pc.length},
                  {"bins", pc.bins},          {"amplitudes", pc.amplitudes},
                  {"noise_std", pc.resolved_noise_std()}, {"seed", pc.seed},
                  {"channels", pc.channels},  {"phases", phases}};
    }
    write_csv(out / "series.csv", series);
    announce(out / "series.csv");
    write_json(out / "report.json", report);

    if (opts.plot) {
        const Vector amps = spectrum_of(series).amplitudes(0);
        announce(write_image(out / "spectrum", render_lines(amps)));
    }
}

void run_train(const Options& opts) {
    const fs::path out(opts.out_dir);
    const auto series = load_csv(opts.data);
    const auto scheme = resolve_scheme(opts, std::nullopt);
    const auto data = prepare(series, scheme, opts.lookback, opts.horizon, opts.train_stride, true);

    const auto cfg = model_config(opts, series.channels());
    const Fredformer model(cfg);
    const auto tc = train_config(opts);
    std::cerr << "training on " << data.train.size() << " windows, validating on " << data.val.size()
              << " (C=" << cfg.channels << ", split " << scheme.to_string() << ")\n";
    const auto result = fit(model, model.init_params(), data.train, data.val, tc);

    Checkpoint cp{cfg, result.params, data.scaler, {}};
    cp.metadata["split"] = scheme.to_string();
    cp.metadata["data_sha256"] = sha256_file(opts.data);
    cp.metadata["best_epoch"] = std::to_string(result.best_epoch);
    cp.metadata["epochs_run"] = std::to_string(result.history.size());
    save_checkpoint(out / "checkpoint.json", cp);
    announce(out / "checkpoint.json");

    write_loss_csv(out / "loss.csv", result.history);
    announce(out / "loss.csv");
    write_trace_csv(out / "bias_trace.csv", result.trace);
    announce(out / "bias_trace.csv");

    ordered_json metrics;
    const auto val = evaluate(model, result.params, data.val, opts.jobs);
    if (!data.test.empty()) {
        metrics = metrics_json(evaluate(model, result.params, data.test, opts.jobs), cfg.horizon);
        metrics["split"] = "test";
    } else {
        metrics = metrics_json(val, cfg.horizon);
        metrics["split"] = "val";
    }
    metrics["val"] = metrics_json(val, cfg.horizon);
    metrics["best_epoch"] = result.best_epoch;
    metrics["epochs_run"] = result.history.size();
    metrics["stopped_early"] = result.stopped_early;
    write_json(out / "metrics.json", metrics);

    if (opts.plot && result.trace.components() > 0) {
        announce(write_image(out / "bias_heatmap", render_heatmap(result.trace.values())));
    }
}

void run_evaluate(const Options& opts) {
    const auto l = load_for_inference(opts);
    const Fredformer model(l.checkpoint.config);
    const auto tag = opts.part.empty() ? SplitTag::Test : parse_split_tag(opts.part);
    const auto& raw = l.raw.get(tag);
    require(!raw.empty(), ErrorKind::EmptyInput, "the " + to_string(tag) + " split of " + opts.data + " has no windows");

    const auto predict = predictor_of(model, l.checkpoint.params);
    const Metrics m = opts.raw_scale ? evaluate(raw_scale_predictor(predict, l.scaler), raw, 64, opts.jobs)
                                     : evaluate(predict, standardize(raw, l.scaler), 64, opts.jobs);
    auto j = metrics_json(m, l.checkpoint.config.horizon);
    j["split"] = to_string(tag);
    j["scale"] = opts.raw_scale ? "raw" : "standardized";
    j["windows"] = raw.size();
    write_json(fs::path(opts.out_dir) / "metrics.json", j);
    std::cout << "mse " << m.mse << " mae " << m.mae << '\n';
}

void run_bias_report(const Options& opts) {
    const fs::path out(opts.out_dir);
    if (!opts.trace.empty()) {
        const auto table = read_trace_csv(opts.trace);
        write_trace_csv(out / "bias_heatmap.csv", table.trace, table.epochs);
        announce(out / "bias_heatmap.csv");
        if (opts.plot) announce(write_image(out / "bias_heatmap", render_heatmap(table.trace.values())));
        return;
    }

    const auto l = load_for_inference(opts);
    const auto& cfg = l.checkpoint.config;
    require(opts.bias_channel < cfg.channels, ErrorKind::InvalidArgument,
            "--bias-channel " + std::to_string(opts.bias_channel) + " out of range for C=" + std::to_string(cfg.channels));
    const Fredformer model(cfg);
    const auto tag = opts.part.empty() ? SplitTag::Val : parse_split_tag(opts.part);
    const auto probe = standardize(l.raw.get(tag), l.scaler).head(opts.probe_windows);
    require(!probe.empty(), ErrorKind::EmptyInput, "the " + to_string(tag) + " split of " + opts.data + " has no windows");

    const auto predict = predictor_of(model, l.checkpoint.params);
    const auto report = bias_report(predict, probe, opts.bias_band_size, opts.bias_channel);
    require(report.status == BiasStatus::Ok, ErrorKind::EmptyInput, "no key components detected in the probe");

    BiasTrace trace;
    trace.component_bins = report.components.bins();
    trace.rows.push_back(report.deltas);
    const auto epoch = metadata(l.checkpoint, "best_epoch");
    write_trace_csv(out / "bias_heatmap.csv", trace, {epoch ? std::stol(*epoch) : Eigen::Index{0}});
    announce(out / "bias_heatmap.csv");

    // Probe-averaged amplitude spectra over the horizon: the last H input
    // points, the forecast and the target.
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(probe.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Matrix inputs;
    Matrix targets;
    probe.gather(idx, inputs, targets);
    const Matrix forecast = predict(inputs);
    const Eigen::Index h = cfg.horizon;
    const Eigen::Index bins = half_bins(h);
    Matrix curves = Matrix::Zero(bins, 3);
    for (Eigen::Index i = 0; i < probe.size(); ++i) {
        const Eigen::Index row = i * cfg.channels + opts.bias_channel;
        const RowVector hist = inputs.row(row).tail(std::min(h, cfg.lookback));
        const RowVector fc = forecast.row(row);
        const RowVector truth = targets.row(row);
        const RowVector* sources[] = {&hist, &fc, &truth};
        for (int s = 0; s < 3; ++s) {
            const auto spec = dft(std::span<const double>(sources[s]->data(), static_cast<std::size_t>(sources[s]->size())));
            for (Eigen::Index k = 0; k < bins && k < static_cast<Eigen::Index>(spec.size()); ++k) {
                curves(k, s) += std::abs(spec[static_cast<std::size_t>(k)]);
            }
        }
    }
    curves /= static_cast<double>(probe.size());
    std::string csv = "bin,input,output,truth\n";
    for (Eigen::Index k = 0; k < bins; ++k) {
        csv += std::to_string(k) + ',' + format_double(curves(k, 0)) + ',' + format_double(curves(k, 1)) + ',' +
               format_double(curves(k, 2)) + '\n';
    }
    write_text(out / "amplitude_spectrum.csv", csv);

    if (opts.plot) {
        announce(write_image(out / "bias_heatmap", render_heatmap(trace.values())));
        announce(write_image(out / "amplitude_spectrum", render_lines(curves)));
    }
}

void run_forecast(const Options& opts) {
    const auto cp = load_checkpoint(opts.checkpoint);
    const auto series = load_csv(opts.data);
    check_compatible(cp, series, opts);
    const auto& cfg = cp.config;
    const Eigen::Index end = opts.end.value_or(series.length());
    require(end >= cfg.lookback && end <= series.length(), ErrorKind::InvalidArgument,
            "--end " + std::to_string(end) + " must lie in [" + std::to_string(cfg.lookback) + ", " +
                std::to_string(series.length()) + "]");
    const Scaler scaler = cp.scaler ? *cp.scaler : Scaler::fit(series.values);

    auto window = series.slice(end - cfg.lookback, cfg.lookback);
    window.values = scaler.transform(window.values);
    const Fredformer model(cfg);
    auto forecast = model.forward(cp.params, window);
    forecast.values = scaler.inverse(forecast.values);
    forecast.channel_names = series.channel_names;
    std::vector<std::string> steps;
    for (Eigen::Index t = 1; t <= cfg.horizon; ++t) steps.push_back("+" + std::to_string(t));
    forecast.timestamps = steps;

    const fs::path path = fs::path(opts.out_dir) / "forecast.csv";
    write_csv(path, forecast);
    announce(path);
}

}  // namespace fredformer::cli

#include "commands.hpp"
#include "manifest.hpp"

#include "fredformer/error.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using fredformer::cli::Options;

void add_common(CLI::App& app, Options& o) {
    app.add_option("--data", o.data, "Input CSV (header row, optional leading date column)");
    app.add_option("--out-dir", o.out_dir, "Directory for every artifact of the run")->capture_default_str();
    app.add_option("--seed", o.seed, "Seed for generation, initialization and shuffling")->capture_default_str();
    app.add_option("--lookback", o.lookback, "Look-back window L")->capture_default_str();
    app.add_option("--horizon", o.horizon, "Forecast horizon H")->capture_default_str();
    app.add_option("--patch-len", o.patch_len, "Frequency bins per band S")->capture_default_str();
    app.add_option("--embed-dim", o.embed_dim, "Token embedding width")->capture_default_str();
    app.add_option("--heads", o.heads, "Attention heads")->capture_default_str();
    app.add_option("--head-dim", o.head_dim, "Width per attention head")->capture_default_str();
    app.add_option("--depth", o.depth, "Encoder blocks per band")->capture_default_str();
    app.add_option("--mlp-dim", o.mlp_dim, "Feed-forward hidden width")->capture_default_str();
    app.add_flag("--nystrom", o.nystrom, "Use Nystrom-approximated channel attention");
    app.add_option("--landmarks", o.landmarks, "Nystrom landmark count")->capture_default_str();
    app.add_flag("--share-band-weights", o.share_band_weights, "One encoder shared by every band");
    app.add_flag("--no-instance-norm", o.no_instance_norm, "Disable per-instance normalization");
    app.add_option("--split", o.split, "auto, ett_h, ett_m, ratio or ratio:a,b,c")->capture_default_str();
    app.add_flag("--plot", o.plot, "Also render images next to the CSV output");
    app.add_option("--jobs", o.jobs, "Worker threads for evaluation")->capture_default_str();
}

// Options declared by several subcommands; one copy per subcommand.
struct Shared {
    std::string checkpoint;
    std::string part;
    Eigen::Index bias_band_size = 8;
    Eigen::Index bias_channel = 0;
    Eigen::Index probe_windows = 32;

    void apply(Options& o) const {
        o.checkpoint = checkpoint;
        o.part = part;
        o.bias_band_size = bias_band_size;
        o.bias_channel = bias_channel;
        o.probe_windows = probe_windows;
    }
};

void add_probe(CLI::App& sub, Shared& o) {
    sub.add_option("--bias-band-size", o.bias_band_size, "Band size for key-component detection")->capture_default_str();
    sub.add_option("--bias-channel", o.bias_channel, "Channel tracked by the bias probe")->capture_default_str();
    sub.add_option("--probe-windows", o.probe_windows, "Validation windows in the bias probe")->capture_default_str();
}

/// CLI11 config dump without the `key=""` lines of unset options.
std::string replay_config(const CLI::App& app) {
    std::istringstream in(app.config_to_str(true, false));
    std::string out;
    for (std::string line; std::getline(in, line);) {
        if (line.size() >= 3 && line.compare(line.size() - 3, 3, "=\"\"") == 0) continue;
        out += line + '\n';
    }
    return out;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : ",") + p;
    return out;
}

void collect(const CLI::App& app, std::map<std::string, std::string>& config) {
    for (const auto* opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config" || name == "version") continue;
        if (opt->get_expected_min() == 0) {
            config[name] = opt->count() > 0 ? "true" : "false";
        } else {
            config[name] = opt->count() > 0 ? join(opt->results()) : opt->get_default_str();
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    namespace cli = fredformer::cli;
    Options opts;
    std::map<std::string, Shared> shared;

    CLI::App app{"Frequency-debiased multivariate forecasting", "fredformer"};
    app.set_version_flag("--version", FREDFORMER_VERSION);
    app.set_config("--config", "", "Options file (TOML/INI); command-line flags take precedence");
    app.require_subcommand(1);
    add_common(app, opts);

    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset and its report");
    gen->add_option("mode", opts.mode, "case1, case2-plant or case2-rearrange")->required();
    gen->add_option("--length", opts.length, "Series length")->capture_default_str();
    gen->add_option("--bins", opts.bins, "Planted frequency bins, comma separated")->delimiter(',');
    gen->add_option("--amps", opts.amps, "Planted amplitudes, comma separated")->delimiter(',');
    gen->add_option("--noise-std", opts.noise_std, "Gaussian noise level (default 0.1 x smallest amplitude)");
    gen->add_option("--channels", opts.channels, "Channels to generate")->capture_default_str();
    gen->add_option("--input", opts.input, "Source CSV for case2-rearrange");

    auto* train = app.add_subcommand("train", "Fit a model; write checkpoint, loss, bias trace and metrics");
    train->add_option("--epochs", opts.epochs, "Maximum epochs")->capture_default_str();
    train->add_option("--batch-size", opts.batch_size, "Windows per step")->capture_default_str();
    train->add_option("--lr", opts.lr, "Adam learning rate")->capture_default_str();
    train->add_option("--patience", opts.patience, "Epochs without validation improvement before stopping")
        ->capture_default_str();
    train->add_option("--train-stride", opts.train_stride, "Step between training windows")->capture_default_str();
    train->add_flag("--no-channel-attention", opts.no_channel_attention, "Feed-forward-only encoder blocks");
    train->add_flag("--no-frequency-refinement", opts.no_frequency_refinement,
                    "Single un-normalized band over the whole spectrum");
    add_probe(*train, shared["train"]);

    auto* eval = app.add_subcommand("evaluate", "MSE and MAE of a checkpoint on one split");
    eval->add_option("--checkpoint", shared["evaluate"].checkpoint, "Checkpoint written by train");
    eval->add_option("--part", shared["evaluate"].part, "train, val or test (default test)");
    eval->add_flag("--raw-scale", opts.raw_scale, "Score forecasts in the original units");

    auto* bias = app.add_subcommand("bias-report", "Epoch x component relative-error heatmap");
    bias->add_option("--trace", opts.trace, "Bias trace CSV written by train");
    bias->add_option("--checkpoint", shared["bias-report"].checkpoint, "Checkpoint to probe (with --data)");
    bias->add_option("--part", shared["bias-report"].part, "Split the probe is drawn from (default val)");
    add_probe(*bias, shared["bias-report"]);

    auto* fc = app.add_subcommand("forecast", "Forecast the next H steps after a window of the data");
    fc->add_option("--checkpoint", shared["forecast"].checkpoint, "Checkpoint written by train");
    fc->add_option("--end", opts.end, "Forecast after column end-1 (default: end of data)");

    for (auto* sub : {gen, train, eval, bias, fc}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    if (const auto it = shared.find(command); it != shared.end()) it->second.apply(opts);
    cli::RunManifest manifest;
    collect(app, manifest.config);
    collect(*sub, manifest.config);
    // flags typed on the command line
    for (int i = 1; i < argc; ++i) {
        const std::string_view arg(argv[i]);
        if (arg.substr(0, 2) == "--") opts.given.emplace(arg.substr(2, arg.find('=') - 2));
    }

    try {
        cli::validate_usage(command, opts);
    } catch (const cli::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\nRun with --help for more information.\n";
        return 2;
    }

    try {
        manifest.command = command;
        manifest.argv.assign(argv, argv + argc);
        manifest.config_text = replay_config(app);
        manifest.seed = opts.seed;
        manifest.out_dir = opts.out_dir;
        manifest.tool_version = FREDFORMER_VERSION;
        manifest.replay = "fredformer " + command + (command == "generate" ? " " + opts.mode : "") + " --config " +
                          (manifest.out_dir / cli::kReplayConfigFile).string();
        for (const auto& [role, path] : cli::command_inputs(command, opts)) {
            const bool present = std::filesystem::is_regular_file(path);
            manifest.inputs.push_back({role, path, present ? cli::sha256_file(path) : std::string()});
        }
        cli::write_manifest(manifest);

        if (command == "generate") cli::run_generate(opts);
        else if (command == "train") cli::run_train(opts);
        else if (command == "evaluate") cli::run_evaluate(opts);
        else if (command == "bias-report") cli::run_bias_report(opts);
        else cli::run_forecast(opts);
    } catch (const fredformer::Error& e) {
        std::cerr << "error (" << fredformer::to_string(e.kind()) << "): " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

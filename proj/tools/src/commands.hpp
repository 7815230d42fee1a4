#pragma once

#include "fredformer/model.hpp"
#include "fredformer/train.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace fredformer::cli {

/// Bad flags or flag combinations; maps to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Options {
    // common
    std::string data;
    std::string out_dir = "run";
    std::uint64_t seed = 0;
    Eigen::Index lookback = 96;
    Eigen::Index horizon = 96;
    Eigen::Index patch_len = 8;
    Eigen::Index embed_dim = 32;
    Eigen::Index heads = 4;
    Eigen::Index head_dim = 8;
    Eigen::Index depth = 2;
    Eigen::Index mlp_dim = 64;
    bool nystrom = false;
    Eigen::Index landmarks = 8;
    bool share_band_weights = false;
    bool no_instance_norm = false;
    std::string split = "auto";
    bool plot = false;
    int jobs = 1;

    // generate
    std::string mode;
    Eigen::Index length = 10000;
    std::vector<Eigen::Index> bins;
    std::vector<double> amps;
    std::optional<double> noise_std;
    Eigen::Index channels = 1;
    std::string input;

    // train
    Eigen::Index epochs = 50;
    Eigen::Index batch_size = 32;
    double lr = 1e-4;
    Eigen::Index patience = 3;
    Eigen::Index train_stride = 1;
    bool no_channel_attention = false;
    bool no_frequency_refinement = false;

    // bias probe (train, bias-report)
    Eigen::Index bias_band_size = 8;
    Eigen::Index bias_channel = 0;
    Eigen::Index probe_windows = 32;

    // evaluate, bias-report, forecast
    std::string checkpoint;
    std::string trace;
    std::string part;
    bool raw_scale = false;
    std::optional<Eigen::Index> end;

    // flags typed on the command line (names without dashes)
    std::set<std::string> given;
};

FredformerConfig model_config(const Options& opts, Eigen::Index channels);
TrainConfig train_config(const Options& opts);

/// Everything checkable without reading input files. Throws UsageError.
void validate_usage(const std::string& command, const Options& opts);

/// (role, path) of every input file the command will read.
std::vector<std::pair<std::string, std::string>> command_inputs(const std::string& command, const Options& opts);

void run_generate(const Options& opts);
void run_train(const Options& opts);
void run_evaluate(const Options& opts);
void run_bias_report(const Options& opts);
void run_forecast(const Options& opts);

}  // namespace fredformer::cli

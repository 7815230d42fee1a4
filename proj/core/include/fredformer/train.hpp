#pragma once

#include "fredformer/data.hpp"
#include "fredformer/model.hpp"
#include "fredformer/spectral.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace fredformer {

/// Which channel and band size the per-epoch bias trace tracks.
struct BiasProbeSpec {
    Eigen::Index band_size = 8;
    Eigen::Index channel = 0;
    Eigen::Index probe_windows = 32;
};

struct TrainConfig {
    Eigen::Index epochs = 50;
    Eigen::Index batch_size = 32;
    double learning_rate = 1e-4;
    Eigen::Index patience = 3;
    std::uint64_t seed = 0;
    std::optional<BiasProbeSpec> bias;

    void validate() const;
};

/// Epoch x component matrix of mean relative errors on the probe.
struct BiasTrace {
    std::vector<Eigen::Index> component_bins;
    std::vector<std::vector<double>> rows;

    Eigen::Index epochs() const { return static_cast<Eigen::Index>(rows.size()); }
    Eigen::Index components() const { return static_cast<Eigen::Index>(component_bins.size()); }
    Matrix values() const;
};

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    std::vector<double> per_horizon_mse;  // one entry per forecast step
};

struct EpochLog {
    Eigen::Index epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    ModelParams params;  // best-validation parameters
    BiasTrace trace;
    std::vector<EpochLog> history;
    Eigen::Index best_epoch = 0;
    bool stopped_early = false;
};

/// Maps a (B*C) x L input batch to a (B*C) x H forecast batch.
using Predictor = std::function<Matrix(const Matrix&)>;

Predictor predictor_of(const Fredformer& model, const ModelParams& params);

/// First-and-second-moment gradient descent over a flat parameter vector.
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(Vector& params, const Vector& grad);
    long steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    Vector m_;
    Vector v_;
    long t_ = 0;
};

/// Mean squared and absolute error over every instance, channel and step.
/// `jobs` > 1 evaluates batches on worker threads; the result does not
/// depend on the job count. The predictor must then be callable concurrently.
Metrics evaluate(const Predictor& predict, const WindowedDataset& split, Eigen::Index batch_size = 64, int jobs = 1);
Metrics evaluate(const Fredformer& model, const ModelParams& params, const WindowedDataset& split, int jobs = 1);

enum class BiasStatus { Ok, NoComponents };

struct BiasReport {
    BiasStatus status = BiasStatus::Ok;
    KeyComponentSet components;
    std::vector<double> deltas;  // one per component, averaged over the probe
};

/// Key components of a probe: the last H look-back points ("history") and
/// the H-step target are transformed, amplitudes averaged over instances,
/// then compared band by band. Requires L >= H.
KeyComponentSet detect_probe_components(const WindowedDataset& probe, Eigen::Index band_size, Eigen::Index channel);

/// Mean relative error at each component bin between forecast and target
/// horizon spectra. Instances whose target amplitude vanishes at a bin are
/// skipped for that bin.
std::vector<double> bias_row(const Predictor& predict, const WindowedDataset& probe, const KeyComponentSet& components,
                             Eigen::Index channel);

/// Detect + measure in one call.
BiasReport bias_report(const Predictor& predict, const WindowedDataset& probe, Eigen::Index band_size,
                       Eigen::Index channel);

/// Trains on time-domain MSE; one bias-trace row per epoch when configured;
/// early-stops after `patience` epochs without validation improvement.
TrainResult fit(const Fredformer& model, ModelParams init, const WindowedDataset& train, const WindowedDataset& val,
                const TrainConfig& config);

}  // namespace fredformer

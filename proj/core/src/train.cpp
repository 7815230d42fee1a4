#include "fredformer/train.hpp"

#include "fredformer/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <mutex>
#include <random>
#include <thread>

namespace fredformer {

void TrainConfig::validate() const {
    require(epochs >= 1, ErrorKind::InvalidArgument, "epochs must be >= 1");
    require(batch_size >= 1, ErrorKind::InvalidArgument, "batch_size must be >= 1");
    require(learning_rate >= 0.0 && std::isfinite(learning_rate), ErrorKind::InvalidArgument,
            "learning_rate must be finite and >= 0");
    require(patience >= 1, ErrorKind::InvalidArgument, "patience must be >= 1");
    if (bias) {
        require(bias->band_size >= 1 && bias->channel >= 0 && bias->probe_windows >= 1, ErrorKind::InvalidArgument,
                "bias probe needs band_size >= 1, channel >= 0 and probe_windows >= 1");
    }
}

Matrix BiasTrace::values() const {
    Matrix out(epochs(), components());
    for (Eigen::Index e = 0; e < epochs(); ++e) {
        for (Eigen::Index k = 0; k < components(); ++k) out(e, k) = rows[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
    }
    return out;
}

Predictor predictor_of(const Fredformer& model, const ModelParams& params) {
    return [&model, &params](const Matrix& inputs) { return model.forecast_batch(params, inputs); };
}

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(Vector& params, const Vector& grad) {
    if (m_.size() != params.size()) {
        m_ = Vector::Zero(params.size());
        v_ = Vector::Zero(params.size());
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

Metrics evaluate(const Predictor& predict, const WindowedDataset& split, Eigen::Index batch_size, int jobs) {
    require(!split.empty(), ErrorKind::EmptyInput, "cannot evaluate an empty split");
    require(batch_size >= 1 && jobs >= 1, ErrorKind::InvalidArgument, "batch_size and jobs must be >= 1");
    const Eigen::Index horizon = split.horizon();
    const Eigen::Index batches = (split.size() + batch_size - 1) / batch_size;

    // per-batch partial sums, reduced in batch order
    Matrix sq(horizon, batches);
    Vector abs_sum(batches);
    std::atomic<Eigen::Index> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        Matrix inputs;
        Matrix targets;
        std::vector<Eigen::Index> idx;
        for (Eigen::Index b = next++; b < batches; b = next++) {
            try {
                const Eigen::Index begin = b * batch_size;
                const Eigen::Index end = std::min(split.size(), begin + batch_size);
                idx.resize(static_cast<std::size_t>(end - begin));
                std::iota(idx.begin(), idx.end(), begin);
                split.gather(idx, inputs, targets);
                const Matrix pred = predict(inputs);
                require(pred.rows() == targets.rows() && pred.cols() == targets.cols(), ErrorKind::ShapeMismatch,
                        "predictor returned the wrong shape");
                const Matrix diff = pred - targets;
                sq.col(b) = diff.array().square().colwise().sum().matrix().transpose();
                abs_sum[b] = diff.cwiseAbs().sum();
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = batches;
            }
        }
    };
    const auto threads = static_cast<Eigen::Index>(std::min<Eigen::Index>(jobs, batches));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (Eigen::Index t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    Vector per_step = Vector::Zero(horizon);
    double total_abs = 0.0;
    for (Eigen::Index b = 0; b < batches; ++b) {
        per_step += sq.col(b);
        total_abs += abs_sum[b];
    }
    const double rows = static_cast<double>(split.size() * split.channels());
    Metrics m;
    m.mse = per_step.sum() / (rows * static_cast<double>(horizon));
    m.mae = total_abs / (rows * static_cast<double>(horizon));
    m.per_horizon_mse.resize(static_cast<std::size_t>(horizon));
    for (Eigen::Index h = 0; h < horizon; ++h) m.per_horizon_mse[static_cast<std::size_t>(h)] = per_step[h] / rows;
    return m;
}

Metrics evaluate(const Fredformer& model, const ModelParams& params, const WindowedDataset& split, int jobs) {
    return evaluate(predictor_of(model, params), split, 64, jobs);
}

KeyComponentSet detect_probe_components(const WindowedDataset& probe, Eigen::Index band_size, Eigen::Index channel) {
    require(!probe.empty(), ErrorKind::EmptyInput, "bias probe is empty");
    require(probe.horizon() >= 2, ErrorKind::InvalidArgument, "bias probe needs a horizon >= 2");
    require(probe.lookback() >= probe.horizon(), ErrorKind::InvalidArgument,
            "bias probe compares the last H look-back points with the target, so it needs L >= H");
    require(channel >= 0 && channel < probe.channels(), ErrorKind::InvalidArgument,
            "probe channel " + std::to_string(channel) + " out of range");
    const Eigen::Index horizon = probe.horizon();
    const DftPlan plan(horizon);
    Matrix hist(probe.size(), horizon);
    Matrix truth(probe.size(), horizon);
    for (Eigen::Index i = 0; i < probe.size(); ++i) {
        hist.row(i) = probe.lookback_window(i).row(channel).tail(horizon);
        truth.row(i) = probe.target_window(i).row(channel);
    }
    Matrix hr, hi, tr, ti;
    plan.forward(hist, hr, hi);
    plan.forward(truth, tr, ti);
    const Vector hist_amp = (hr.array().square() + hi.array().square()).sqrt().colwise().mean().transpose();
    const Vector truth_amp = (tr.array().square() + ti.array().square()).sqrt().colwise().mean().transpose();
    return detect_key_components(std::span<const double>(hist_amp.data(), static_cast<std::size_t>(hist_amp.size())),
                                 std::span<const double>(truth_amp.data(), static_cast<std::size_t>(truth_amp.size())),
                                 band_size);
}

std::vector<double> bias_row(const Predictor& predict, const WindowedDataset& probe, const KeyComponentSet& components,
                             Eigen::Index channel) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(probe.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Matrix inputs;
    Matrix targets;
    probe.gather(idx, inputs, targets);
    const Matrix forecast = predict(inputs);

    const Eigen::Index c = probe.channels();
    Matrix pred_rows(probe.size(), probe.horizon());
    Matrix truth_rows(probe.size(), probe.horizon());
    for (Eigen::Index i = 0; i < probe.size(); ++i) {
        pred_rows.row(i) = forecast.row(i * c + channel);
        truth_rows.row(i) = targets.row(i * c + channel);
    }
    const DftPlan plan(probe.horizon());
    Matrix pr, pi, tr, ti;
    plan.forward(pred_rows, pr, pi);
    plan.forward(truth_rows, tr, ti);

    std::vector<double> out;
    out.reserve(components.size());
    for (const auto& comp : components.components) {
        double sum = 0.0;
        Eigen::Index used = 0;
        for (Eigen::Index i = 0; i < probe.size(); ++i) {
            const Complex truth(tr(i, comp.bin_index), ti(i, comp.bin_index));
            if (std::abs(truth) < 1e-12) continue;
            sum += relative_error(Complex(pr(i, comp.bin_index), pi(i, comp.bin_index)), truth);
            ++used;
        }
        require(used > 0, ErrorKind::UndefinedReference,
                "bin " + std::to_string(comp.bin_index) + " has zero target amplitude on every probe instance");
        out.push_back(sum / static_cast<double>(used));
    }
    return out;
}

BiasReport bias_report(const Predictor& predict, const WindowedDataset& probe, Eigen::Index band_size,
                       Eigen::Index channel) {
    BiasReport report;
    report.components = detect_probe_components(probe, band_size, channel);
    if (report.components.empty()) {
        report.status = BiasStatus::NoComponents;
        return report;
    }
    report.deltas = bias_row(predict, probe, report.components, channel);
    return report;
}

TrainResult fit(const Fredformer& model, ModelParams init, const WindowedDataset& train, const WindowedDataset& val,
                const TrainConfig& config) {
    config.validate();
    require(!train.empty(), ErrorKind::EmptyInput, "training split is empty");
    require(!val.empty(), ErrorKind::EmptyInput, "validation split is empty");
    const auto& mc = model.config();
    require(train.channels() == mc.channels && train.lookback() == mc.lookback && train.horizon() == mc.horizon,
            ErrorKind::ShapeMismatch,
            "dataset windows (C=" + std::to_string(train.channels()) + ", L=" + std::to_string(train.lookback()) +
                ", H=" + std::to_string(train.horizon()) + ") do not match the model (C=" + std::to_string(mc.channels) +
                ", L=" + std::to_string(mc.lookback) + ", H=" + std::to_string(mc.horizon) + ")");

    TrainResult result;
    ModelParams params = std::move(init);
    ModelParams grad = params.zeros_like();
    Adam optimizer(config.learning_rate);
    std::mt19937_64 rng(config.seed);

    std::optional<WindowedDataset> probe;
    if (config.bias) {
        probe = val.head(config.bias->probe_windows);
        result.trace.component_bins =
            detect_probe_components(*probe, config.bias->band_size, config.bias->channel).bins();
    }
    const KeyComponentSet tracked = [&] {
        KeyComponentSet s;
        for (Eigen::Index b : result.trace.component_bins) s.components.push_back({0, b, 0.0, 0.0});
        return s;
    }();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index stale = 0;
    Matrix inputs;
    Matrix targets;
    result.params = params;

    for (Eigen::Index epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
            train.gather(std::span<const Eigen::Index>(order.data() + begin, end - begin), inputs, targets);
            double loss = 0.0;
            try {
                loss = model.loss_and_gradient(params, inputs, targets, grad);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::NonFinite) throw;
                fail(ErrorKind::Diverged, "training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
            }
            require(std::isfinite(loss) && grad.values().allFinite(), ErrorKind::Diverged,
                    "training diverged at epoch " + std::to_string(epoch) + " (loss " + format_double(loss) + ")");
            optimizer.step(params.values(), grad.values());
            loss_sum += loss * static_cast<double>(end - begin);
        }
        require(params.values().allFinite(), ErrorKind::Diverged,
                "parameters became non-finite at epoch " + std::to_string(epoch));

        const double val_loss = evaluate(model, params, val).mse;
        result.history.push_back({epoch, loss_sum / static_cast<double>(order.size()), val_loss});
        if (probe && !tracked.empty()) {
            result.trace.rows.push_back(bias_row(predictor_of(model, params), *probe, tracked, config.bias->channel));
        } else if (probe) {
            result.trace.rows.emplace_back();
        }

        if (val_loss < best) {
            best = val_loss;
            result.params = params;
            result.best_epoch = epoch;
            stale = 0;
        } else if (++stale >= config.patience) {
            result.stopped_early = epoch < config.epochs;
            break;
        }
    }
    return result;
}

}  // namespace fredformer

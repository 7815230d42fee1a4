#pragma once

#include "fredformer/series.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fredformer {

/// Reads a header-first CSV. A leading column named `date` becomes the
/// timestamps; every other column must be numeric and complete.
MultivariateSeries load_csv(const std::filesystem::path& path);

/// Writes `date,<channel names...>` rows. Values use the shortest
/// round-trip representation, so equal series produce equal bytes.
void write_csv(const std::filesystem::path& path, const MultivariateSeries& series);

/// Shortest round-trip decimal for a double.
std::string format_double(double v);

struct SplitScheme {
    enum class Kind { EttMonths, Ratio };

    Kind kind = Kind::Ratio;
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
    Eigen::Index steps_per_day = 24;  // ETT months only: 24 hourly, 96 for 15-minute data

    static SplitScheme ett_months(Eigen::Index steps_per_day = 24);
    static SplitScheme ratio(double train = 0.7, double val = 0.1, double test = 0.2);
    /// "ett_h", "ett_m", "ratio" or "ratio:0.6,0.2,0.2".
    static SplitScheme parse(const std::string& text);
    std::string to_string() const;
};

enum class SplitTag { Train, Val, Test };
std::string to_string(SplitTag tag);
SplitTag parse_split_tag(const std::string& text);

struct SplitPart {
    MultivariateSeries series;  // includes the look-back border, if any
    Eigen::Index border = 0;    // leading points borrowed from the previous split

    Eigen::Index usable() const { return series.length() - border; }
};

struct Splits {
    SplitPart train;
    SplitPart val;
    SplitPart test;

    const SplitPart& get(SplitTag tag) const;
};

/// Chronological partition. Validation and test parts carry the preceding
/// `lookback` points as look-back context only.
Splits split(const MultivariateSeries& series, const SplitScheme& scheme, Eigen::Index lookback,
             Eigen::Index horizon);

/// Per-channel z-score. Zero-variance channels get std 1 and are listed in
/// `clamped_channels`.
struct Scaler {
    Vector mean;
    Vector stddev;
    std::vector<Eigen::Index> clamped_channels;

    static Scaler fit(const Matrix& values);
    Matrix transform(const Matrix& values) const;
    Matrix inverse(const Matrix& values) const;
};

/// Sliding windows over one split. Instance i looks back over columns
/// [i*stride, i*stride + L) and targets the next H columns.
class WindowedDataset {
public:
    WindowedDataset() = default;
    WindowedDataset(Matrix values, Eigen::Index lookback, Eigen::Index horizon, Eigen::Index stride, SplitTag tag);

    Eigen::Index size() const { return count_; }
    bool empty() const { return count_ == 0; }
    Eigen::Index channels() const { return values_.rows(); }
    Eigen::Index lookback() const { return lookback_; }
    Eigen::Index horizon() const { return horizon_; }
    Eigen::Index stride() const { return stride_; }
    SplitTag tag() const { return tag_; }
    const Matrix& values() const { return values_; }
    const Scaler* scaler() const { return scaler_.mean.size() ? &scaler_ : nullptr; }

    Matrix lookback_window(Eigen::Index i) const;
    Matrix target_window(Eigen::Index i) const;

    /// Stacks instances into (B*C) x L inputs and (B*C) x H targets,
    /// instance-major.
    void gather(std::span<const Eigen::Index> indices, Matrix& inputs, Matrix& targets) const;

    /// First `count` instances (or fewer) as a new dataset.
    WindowedDataset head(Eigen::Index count) const;

    friend WindowedDataset standardize(const WindowedDataset& dataset, const Scaler& scaler);

private:
    Matrix values_;
    Eigen::Index lookback_ = 0;
    Eigen::Index horizon_ = 0;
    Eigen::Index stride_ = 1;
    Eigen::Index count_ = 0;
    SplitTag tag_ = SplitTag::Train;
    Scaler scaler_;
};

WindowedDataset window(const MultivariateSeries& series, Eigen::Index lookback, Eigen::Index horizon,
                       Eigen::Index stride = 1, SplitTag tag = SplitTag::Train);

/// Applies a scaler fitted on the training split.
WindowedDataset standardize(const WindowedDataset& dataset, const Scaler& scaler);

struct PreparedData {
    WindowedDataset train;
    WindowedDataset val;
    WindowedDataset test;
    Scaler scaler;

    const WindowedDataset& get(SplitTag tag) const;
};

/// split -> fit scaler on the train part -> window and standardize all three.
/// When `standardized` is false the scaler is still fitted and stored but the
/// windows stay on the raw scale.
PreparedData prepare(const MultivariateSeries& series, const SplitScheme& scheme, Eigen::Index lookback,
                     Eigen::Index horizon, Eigen::Index train_stride = 1, bool standardized = true);

}  // namespace fredformer

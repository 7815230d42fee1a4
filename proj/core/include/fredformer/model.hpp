#pragma once

#include "fredformer/series.hpp"
#include "fredformer/spectral.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fredformer {

/// Hyperparameters of one Fredformer instance. Field names follow the
/// cf_* configuration surface (cf_dim, cf_heads, cf_head_dim, cf_depth, cf_mlp).
struct FredformerConfig {
    Eigen::Index lookback = 96;
    Eigen::Index horizon = 96;
    Eigen::Index channels = 7;
    Eigen::Index patch_len = 8;
    Eigen::Index embed_dim = 32;  // cf_dim
    Eigen::Index heads = 4;       // cf_heads
    Eigen::Index head_dim = 8;    // cf_head_dim
    Eigen::Index depth = 2;       // cf_depth
    Eigen::Index mlp_dim = 64;    // cf_mlp
    bool use_nystrom = false;
    Eigen::Index landmarks = 8;
    bool share_band_weights = false;
    bool instance_norm = true;
    // Ablation switches: without channel attention each block is feed-forward
    // only; without frequency refinement the spectrum is a single un-normalized band.
    bool channel_attention = true;
    bool frequency_refinement = true;
    std::uint64_t seed = 0;

    Eigen::Index input_bins() const { return half_bins(lookback); }
    Eigen::Index output_bins() const { return half_bins(horizon); }
    Eigen::Index effective_patch_len() const { return frequency_refinement ? patch_len : input_bins(); }
    Eigen::Index num_bands() const;
    Eigen::Index num_encoders() const { return share_band_weights ? 1 : num_bands(); }
    Eigen::Index token_width() const { return 2 * effective_patch_len(); }
    Eigen::Index attention_width() const { return heads * head_dim; }
    Eigen::Index effective_landmarks() const { return use_nystrom ? landmarks : channels; }

    void validate() const;
};

bool operator==(const FredformerConfig& a, const FredformerConfig& b);

/// One sub-frequency band: C x S real and imaginary coefficient blocks.
struct Band {
    Matrix real_part;
    Matrix imag_part;
};

struct BandSet {
    std::vector<Band> bands;
    Eigen::Index patch_len = 0;
    Eigen::Index pad_bins = 0;  // zero-filled trailing bins of the last band
    Eigen::Index source_bins = 0;
    Eigen::Index origin_length = 0;

    Eigen::Index num_bands() const { return static_cast<Eigen::Index>(bands.size()); }
    /// Valid (non-padding) bins of band n.
    Eigen::Index valid_bins(Eigen::Index band) const;
    /// Concatenation of the bands with padding removed.
    Spectrum concatenate() const;
};

struct BandStats {
    double real_min = 0.0;
    double real_max = 0.0;
    double imag_min = 0.0;
    double imag_max = 0.0;
};

struct NormStats {
    std::vector<BandStats> bands;
};

/// Non-overlapping patching of the frequency axis into ceil(F/S) bands.
BandSet patch_spectrum(const Spectrum& spectrum, Eigen::Index patch_len);

struct NormalizedBands {
    BandSet bands;
    NormStats stats;
};

/// Min-max scales each band's real and imaginary blocks to [0, 1] over their
/// C x S entries (padding excluded). Constant blocks become zero.
NormalizedBands normalize_bands(const BandSet& bands);

/// Min-max scales the first `valid_cols` columns of `block` in place and
/// zeroes the rest. Returns (min, max) of the valid region.
std::pair<double, double> minmax_scale(Eigen::Ref<Matrix> block, Eigen::Index valid_cols);

struct ParamSpec {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index offset = 0;

    Eigen::Index size() const { return rows * cols; }
};

/// Every trainable array of the network in one flat vector. Gradients use
/// the same layout, so optimizers and checkpoints work on `values()` directly.
class ModelParams {
public:
    ModelParams() = default;
    explicit ModelParams(const FredformerConfig& config);

    const std::vector<ParamSpec>& specs() const { return specs_; }
    const ParamSpec& spec(const std::string& name) const;
    Vector& values() { return values_; }
    const Vector& values() const { return values_; }
    Eigen::Index size() const { return values_.size(); }

    Eigen::Map<Matrix> matrix(const ParamSpec& s) { return {values_.data() + s.offset, s.rows, s.cols}; }
    Eigen::Map<const Matrix> matrix(const ParamSpec& s) const { return {values_.data() + s.offset, s.rows, s.cols}; }
    Eigen::Map<Matrix> matrix(const std::string& name) { return matrix(spec(name)); }
    Eigen::Map<const Matrix> matrix(const std::string& name) const { return matrix(spec(name)); }

    /// Parameters of the band encoders (embedding and blocks), excluding the head.
    Eigen::Index encoder_parameter_count() const;

    ModelParams zeros_like() const;
    bool same_layout(const ModelParams& other) const;

private:
    std::vector<ParamSpec> specs_;
    Vector values_;
};

/// Offsets of the arrays belonging to one encoder block.
struct BlockLayout {
    ParamSpec ln1_gain, ln1_bias, query, key, value, out, out_bias;
    ParamSpec ln2_gain, ln2_bias, ff1, ff1_bias, ff2, ff2_bias;
};

struct EncoderLayout {
    ParamSpec embed, embed_bias;
    std::vector<BlockLayout> blocks;
};

struct ModelLayout {
    std::vector<EncoderLayout> encoders;
    ParamSpec head, head_bias;
};

ModelLayout layout_of(const ModelParams& params, const FredformerConfig& config);

struct ChannelAttentionResult {
    Matrix features;                                  // C x M
    std::vector<std::vector<Matrix>> weights;         // [block][head] C x C
};

/// Fredformer forecaster: DFT -> band patching -> local normalization ->
/// per-band channel-wise encoders -> linear summarization -> IDFT.
class Fredformer {
public:
    explicit Fredformer(FredformerConfig config);

    const FredformerConfig& config() const { return config_; }

    /// Seeded initialization: linear layers U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
    /// layer norms gain 1 and bias 0.
    ModelParams init_params() const;
    ModelParams zero_params() const { return ModelParams(config_); }

    /// Runs encoder `band` on a C x 2S token matrix (real | imag).
    ChannelAttentionResult channel_attention(const ModelParams& params, Eigen::Index band,
                                             const Matrix& tokens) const;

    /// Band n is encoded with band-n parameters only. Returns N matrices C x M.
    std::vector<Matrix> encode_bands(const ModelParams& params, const BandSet& normalized) const;

    /// Head map from the N x C x M features to a C x floor(H/2) spectrum.
    Spectrum summarize(const ModelParams& params, const std::vector<Matrix>& features) const;

    /// Forecasts C x H from a C x L look-back window.
    MultivariateSeries forward(const ModelParams& params, const MultivariateSeries& lookback) const;

    /// Batched forecast; rows are (instance, channel) pairs ordered
    /// instance-major, so the input is (B*C) x L and the output (B*C) x H.
    Matrix forecast_batch(const ModelParams& params, const Matrix& inputs) const;

    /// Mean squared error of forecast_batch against `targets`, with the
    /// gradient w.r.t. every parameter written into `grad` (overwritten).
    double loss_and_gradient(const ModelParams& params, const Matrix& inputs, const Matrix& targets,
                             ModelParams& grad) const;

private:
    struct Pass;
    void run(const ModelParams& params, const Matrix& inputs, Pass& pass) const;
    void check_params(const ModelParams& params) const;

    FredformerConfig config_;
    DftPlan input_plan_;
    DftPlan output_plan_;
    ModelParams reference_;  // layout template, values unused
    ModelLayout layout_;
};

}  // namespace fredformer

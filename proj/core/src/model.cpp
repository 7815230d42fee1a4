#include "fredformer/model.hpp"

#include "fredformer/attention.hpp"
#include "fredformer/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace fredformer {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInstanceNormEps = 1e-5;

template <class F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(name) + ": " + e.what());
    }
}

std::string band_prefix(const FredformerConfig& cfg, Eigen::Index encoder) {
    return cfg.share_band_weights ? std::string("shared") : "band" + std::to_string(encoder);
}

struct LayerNormCache {
    Matrix xhat;
    Vector rstd;
};

Matrix layer_norm(const Matrix& x, const Eigen::Map<const Matrix>& gain, const Eigen::Map<const Matrix>& bias,
                  LayerNormCache& cache) {
    const Vector mean = x.rowwise().mean();
    Matrix centered = x.colwise() - mean;
    const Vector var = centered.array().square().rowwise().mean();
    cache.rstd = (var.array() + kLayerNormEps).rsqrt();
    cache.xhat = centered.array().colwise() * cache.rstd.array();
    Matrix y = cache.xhat.array().rowwise() * gain.row(0).array();
    y.rowwise() += bias.row(0);
    return y;
}

Matrix layer_norm_backward(const Matrix& grad_y, const Eigen::Map<const Matrix>& gain, const LayerNormCache& cache,
                           Eigen::Map<Matrix> grad_gain, Eigen::Map<Matrix> grad_bias) {
    grad_gain.row(0) += (grad_y.array() * cache.xhat.array()).colwise().sum().matrix();
    grad_bias.row(0) += grad_y.colwise().sum();
    const Matrix gxhat = grad_y.array().rowwise() * gain.row(0).array();
    const Vector mean1 = gxhat.rowwise().mean();
    const Vector mean2 = (gxhat.array() * cache.xhat.array()).rowwise().mean();
    Matrix gx = gxhat.colwise() - mean1;
    gx.array() -= cache.xhat.array().colwise() * mean2.array();
    gx.array().colwise() *= cache.rstd.array();
    return gx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

struct BlockCache {
    LayerNormCache ln1;
    Matrix u1;
    Matrix q, k, v;
    Matrix weights;  // (B*C) x (heads*C), exact attention only
    std::vector<NystromCache> nystrom;
    Matrix attn_cat;
    LayerNormCache ln2;
    Matrix u2;
    Matrix h1;
    Matrix act;
};

struct EncoderCache {
    Matrix tokens;
    std::vector<BlockCache> blocks;
};

Matrix block_forward(const ModelParams& p, const BlockLayout& lay, const FredformerConfig& cfg, const Matrix& z,
                     BlockCache& c) {
    const Eigen::Index channels = cfg.channels;
    const Eigen::Index batch = z.rows() / channels;
    const Eigen::Index d = cfg.head_dim;
    Matrix mid = z;

    if (cfg.channel_attention) {
        c.u1 = layer_norm(z, p.matrix(lay.ln1_gain), p.matrix(lay.ln1_bias), c.ln1);
        c.q.noalias() = c.u1 * p.matrix(lay.query);
        c.k.noalias() = c.u1 * p.matrix(lay.key);
        c.v.noalias() = c.u1 * p.matrix(lay.value);
        c.attn_cat.resize(z.rows(), cfg.attention_width());
        if (cfg.use_nystrom) {
            c.nystrom.assign(static_cast<std::size_t>(batch * cfg.heads), {});
        } else {
            c.weights.resize(z.rows(), cfg.heads * channels);
        }
        const double scale = 1.0 / std::sqrt(static_cast<double>(d));
        for (Eigen::Index b = 0; b < batch; ++b) {
            for (Eigen::Index h = 0; h < cfg.heads; ++h) {
                const auto qb = c.q.block(b * channels, h * d, channels, d);
                const auto kb = c.k.block(b * channels, h * d, channels, d);
                const auto vb = c.v.block(b * channels, h * d, channels, d);
                auto out = c.attn_cat.block(b * channels, h * d, channels, d);
                if (cfg.use_nystrom) {
                    out = nystrom_attention(qb, kb, vb, cfg.landmarks,
                                            &c.nystrom[static_cast<std::size_t>(b * cfg.heads + h)]);
                } else {
                    auto w = c.weights.block(b * channels, h * channels, channels, channels);
                    w = softmax_rows(scale * (qb * kb.transpose()));
                    out.noalias() = w * vb;
                }
            }
        }
        mid.noalias() += c.attn_cat * p.matrix(lay.out);
        mid.rowwise() += p.matrix(lay.out_bias).row(0);
    }

    c.u2 = layer_norm(mid, p.matrix(lay.ln2_gain), p.matrix(lay.ln2_bias), c.ln2);
    c.h1.noalias() = c.u2 * p.matrix(lay.ff1);
    c.h1.rowwise() += p.matrix(lay.ff1_bias).row(0);
    c.act = c.h1.unaryExpr(&gelu);
    Matrix out = mid;
    out.noalias() += c.act * p.matrix(lay.ff2);
    out.rowwise() += p.matrix(lay.ff2_bias).row(0);
    return out;
}

Matrix block_backward(const ModelParams& p, const BlockLayout& lay, const FredformerConfig& cfg, const BlockCache& c,
                      const Matrix& grad_out, ModelParams& g) {
    const Eigen::Index channels = cfg.channels;
    const Eigen::Index batch = grad_out.rows() / channels;
    const Eigen::Index d = cfg.head_dim;

    g.matrix(lay.ff2).noalias() += c.act.transpose() * grad_out;
    g.matrix(lay.ff2_bias).row(0) += grad_out.colwise().sum();
    Matrix grad_h1 = grad_out * p.matrix(lay.ff2).transpose();
    grad_h1.array() *= c.h1.unaryExpr(&gelu_grad).array();
    g.matrix(lay.ff1).noalias() += c.u2.transpose() * grad_h1;
    g.matrix(lay.ff1_bias).row(0) += grad_h1.colwise().sum();
    const Matrix grad_u2 = grad_h1 * p.matrix(lay.ff1).transpose();
    Matrix grad_mid = grad_out;
    grad_mid += layer_norm_backward(grad_u2, p.matrix(lay.ln2_gain), c.ln2, g.matrix(lay.ln2_gain),
                                    g.matrix(lay.ln2_bias));
    if (!cfg.channel_attention) return grad_mid;

    g.matrix(lay.out).noalias() += c.attn_cat.transpose() * grad_mid;
    g.matrix(lay.out_bias).row(0) += grad_mid.colwise().sum();
    const Matrix grad_cat = grad_mid * p.matrix(lay.out).transpose();

    Matrix gq(c.q.rows(), c.q.cols());
    Matrix gk(c.k.rows(), c.k.cols());
    Matrix gv(c.v.rows(), c.v.cols());
    for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index h = 0; h < cfg.heads; ++h) {
            const auto qb = c.q.block(b * channels, h * d, channels, d);
            const auto kb = c.k.block(b * channels, h * d, channels, d);
            const auto vb = c.v.block(b * channels, h * d, channels, d);
            const auto go = grad_cat.block(b * channels, h * d, channels, d);
            AttentionGrads ag =
                cfg.use_nystrom
                    ? nystrom_attention_backward(qb, kb, vb, c.nystrom[static_cast<std::size_t>(b * cfg.heads + h)], go)
                    : exact_attention_backward(qb, kb, vb, c.weights.block(b * channels, h * channels, channels, channels),
                                               go);
            gq.block(b * channels, h * d, channels, d) = ag.q;
            gk.block(b * channels, h * d, channels, d) = ag.k;
            gv.block(b * channels, h * d, channels, d) = ag.v;
        }
    }
    g.matrix(lay.query).noalias() += c.u1.transpose() * gq;
    g.matrix(lay.key).noalias() += c.u1.transpose() * gk;
    g.matrix(lay.value).noalias() += c.u1.transpose() * gv;
    Matrix grad_u1 = gq * p.matrix(lay.query).transpose();
    grad_u1.noalias() += gk * p.matrix(lay.key).transpose();
    grad_u1.noalias() += gv * p.matrix(lay.value).transpose();
    grad_mid += layer_norm_backward(grad_u1, p.matrix(lay.ln1_gain), c.ln1, g.matrix(lay.ln1_gain),
                                    g.matrix(lay.ln1_bias));
    return grad_mid;
}

Matrix encoder_forward(const ModelParams& p, const EncoderLayout& lay, const FredformerConfig& cfg, const Matrix& tokens,
                       EncoderCache& cache) {
    Matrix z = tokens * p.matrix(lay.embed);
    z.rowwise() += p.matrix(lay.embed_bias).row(0);
    cache.blocks.resize(lay.blocks.size());
    for (std::size_t b = 0; b < lay.blocks.size(); ++b) z = block_forward(p, lay.blocks[b], cfg, z, cache.blocks[b]);
    return z;
}

void encoder_backward(const ModelParams& p, const EncoderLayout& lay, const FredformerConfig& cfg,
                      const EncoderCache& cache, Matrix grad, ModelParams& g) {
    for (std::size_t b = lay.blocks.size(); b-- > 0;) grad = block_backward(p, lay.blocks[b], cfg, cache.blocks[b], grad, g);
    g.matrix(lay.embed).noalias() += cache.tokens.transpose() * grad;
    g.matrix(lay.embed_bias).row(0) += grad.colwise().sum();
}

Matrix tokens_of(const Band& band) {
    Matrix t(band.real_part.rows(), 2 * band.real_part.cols());
    t << band.real_part, band.imag_part;
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

Eigen::Index FredformerConfig::num_bands() const {
    const Eigen::Index s = effective_patch_len();
    return s > 0 ? (input_bins() + s - 1) / s : 0;
}

void FredformerConfig::validate() const {
    require(lookback >= 2, ErrorKind::InvalidArgument, "lookback must be >= 2");
    require(horizon >= 2, ErrorKind::InvalidArgument, "horizon must be >= 2");
    require(channels >= 1, ErrorKind::InvalidArgument, "channels must be >= 1");
    require(patch_len >= 1 && patch_len <= input_bins(), ErrorKind::InvalidArgument,
            "patch_len must lie in [1, " + std::to_string(input_bins()) + "], got " + std::to_string(patch_len));
    require(embed_dim >= 1 && heads >= 1 && head_dim >= 1 && depth >= 1 && mlp_dim >= 1,
            ErrorKind::InvalidArgument, "embed_dim, heads, head_dim, depth and mlp_dim must be >= 1");
    require(!use_nystrom || (landmarks >= 1 && landmarks <= channels), ErrorKind::InvalidArgument,
            "landmarks must lie in [1, channels=" + std::to_string(channels) + "], got " + std::to_string(landmarks));
}

bool operator==(const FredformerConfig& a, const FredformerConfig& b) {
    return a.lookback == b.lookback && a.horizon == b.horizon && a.channels == b.channels &&
           a.patch_len == b.patch_len && a.embed_dim == b.embed_dim && a.heads == b.heads &&
           a.head_dim == b.head_dim && a.depth == b.depth && a.mlp_dim == b.mlp_dim &&
           a.use_nystrom == b.use_nystrom && a.landmarks == b.landmarks &&
           a.share_band_weights == b.share_band_weights && a.instance_norm == b.instance_norm &&
           a.channel_attention == b.channel_attention && a.frequency_refinement == b.frequency_refinement &&
           a.seed == b.seed;
}

// ---------------------------------------------------------------------------
// Bands

Eigen::Index BandSet::valid_bins(Eigen::Index band) const {
    return band + 1 == num_bands() ? patch_len - pad_bins : patch_len;
}

Spectrum BandSet::concatenate() const {
    require(!bands.empty(), ErrorKind::EmptyInput, "empty band set");
    const Eigen::Index channels = bands.front().real_part.rows();
    Spectrum out;
    out.origin_length = origin_length;
    out.real_part.resize(channels, source_bins);
    out.imag_part.resize(channels, source_bins);
    for (Eigen::Index n = 0; n < num_bands(); ++n) {
        const Eigen::Index valid = valid_bins(n);
        out.real_part.middleCols(n * patch_len, valid) = bands[static_cast<std::size_t>(n)].real_part.leftCols(valid);
        out.imag_part.middleCols(n * patch_len, valid) = bands[static_cast<std::size_t>(n)].imag_part.leftCols(valid);
    }
    return out;
}

BandSet patch_spectrum(const Spectrum& spectrum, Eigen::Index patch_len) {
    spectrum.validate();
    const Eigen::Index bins = spectrum.bins();
    require(patch_len >= 1 && patch_len <= bins, ErrorKind::InvalidArgument,
            "patch length must lie in [1, " + std::to_string(bins) + "], got " + std::to_string(patch_len));
    const Eigen::Index count = (bins + patch_len - 1) / patch_len;
    BandSet out;
    out.patch_len = patch_len;
    out.pad_bins = count * patch_len - bins;
    out.source_bins = bins;
    out.origin_length = spectrum.origin_length;
    out.bands.reserve(static_cast<std::size_t>(count));
    for (Eigen::Index n = 0; n < count; ++n) {
        const Eigen::Index valid = std::min(patch_len, bins - n * patch_len);
        Band band{Matrix::Zero(spectrum.channels(), patch_len), Matrix::Zero(spectrum.channels(), patch_len)};
        band.real_part.leftCols(valid) = spectrum.real_part.middleCols(n * patch_len, valid);
        band.imag_part.leftCols(valid) = spectrum.imag_part.middleCols(n * patch_len, valid);
        out.bands.push_back(std::move(band));
    }
    return out;
}

std::pair<double, double> minmax_scale(Eigen::Ref<Matrix> block, Eigen::Index valid_cols) {
    auto valid = block.leftCols(valid_cols);
    const double lo = valid.minCoeff();
    const double hi = valid.maxCoeff();
    const double range = hi - lo;
    if (range > 0.0) {
        // endpoints map to exactly 0 and 1
        valid = (valid.array() - lo) / range;
    } else {
        valid.setZero();
    }
    block.rightCols(block.cols() - valid_cols).setZero();
    return {lo, hi};
}

NormalizedBands normalize_bands(const BandSet& bands) {
    NormalizedBands out{bands, {}};
    out.stats.bands.reserve(bands.bands.size());
    for (Eigen::Index n = 0; n < bands.num_bands(); ++n) {
        Band& band = out.bands.bands[static_cast<std::size_t>(n)];
        const Eigen::Index valid = bands.valid_bins(n);
        const auto [rlo, rhi] = minmax_scale(band.real_part, valid);
        const auto [ilo, ihi] = minmax_scale(band.imag_part, valid);
        out.stats.bands.push_back({rlo, rhi, ilo, ihi});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parameters

ModelParams::ModelParams(const FredformerConfig& config) {
    config.validate();
    Eigen::Index offset = 0;
    auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
        specs_.push_back({std::move(name), rows, cols, offset});
        offset += rows * cols;
    };
    const Eigen::Index m = config.embed_dim;
    const Eigen::Index aw = config.attention_width();
    for (Eigen::Index e = 0; e < config.num_encoders(); ++e) {
        const std::string prefix = band_prefix(config, e);
        add(prefix + ".embed.weight", config.token_width(), m);
        add(prefix + ".embed.bias", 1, m);
        for (Eigen::Index b = 0; b < config.depth; ++b) {
            const std::string bp = prefix + ".block" + std::to_string(b);
            if (config.channel_attention) {
                add(bp + ".ln1.gain", 1, m);
                add(bp + ".ln1.bias", 1, m);
                add(bp + ".attn.query", m, aw);
                add(bp + ".attn.key", m, aw);
                add(bp + ".attn.value", m, aw);
                add(bp + ".attn.out", aw, m);
                add(bp + ".attn.out_bias", 1, m);
            }
            add(bp + ".ln2.gain", 1, m);
            add(bp + ".ln2.bias", 1, m);
            add(bp + ".ff1.weight", m, config.mlp_dim);
            add(bp + ".ff1.bias", 1, config.mlp_dim);
            add(bp + ".ff2.weight", config.mlp_dim, m);
            add(bp + ".ff2.bias", 1, m);
        }
    }
    add("head.weight", config.num_bands() * m, 2 * config.output_bins());
    add("head.bias", 1, 2 * config.output_bins());
    values_ = Vector::Zero(offset);
}

const ParamSpec& ModelParams::spec(const std::string& name) const {
    for (const auto& s : specs_) {
        if (s.name == name) return s;
    }
    fail(ErrorKind::InvalidArgument, "no parameter named '" + name + "'");
}

Eigen::Index ModelParams::encoder_parameter_count() const {
    Eigen::Index total = 0;
    for (const auto& s : specs_) {
        if (s.name.rfind("head.", 0) != 0) total += s.size();
    }
    return total;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams out = *this;
    out.values_.setZero();
    return out;
}

bool ModelParams::same_layout(const ModelParams& other) const {
    if (specs_.size() != other.specs_.size() || size() != other.size()) return false;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& a = specs_[i];
        const auto& b = other.specs_[i];
        if (a.name != b.name || a.rows != b.rows || a.cols != b.cols || a.offset != b.offset) return false;
    }
    return true;
}

ModelLayout layout_of(const ModelParams& params, const FredformerConfig& config) {
    ModelLayout out;
    for (Eigen::Index e = 0; e < config.num_encoders(); ++e) {
        const std::string prefix = band_prefix(config, e);
        EncoderLayout enc;
        enc.embed = params.spec(prefix + ".embed.weight");
        enc.embed_bias = params.spec(prefix + ".embed.bias");
        for (Eigen::Index b = 0; b < config.depth; ++b) {
            const std::string bp = prefix + ".block" + std::to_string(b);
            BlockLayout blk;
            if (config.channel_attention) {
                blk.ln1_gain = params.spec(bp + ".ln1.gain");
                blk.ln1_bias = params.spec(bp + ".ln1.bias");
                blk.query = params.spec(bp + ".attn.query");
                blk.key = params.spec(bp + ".attn.key");
                blk.value = params.spec(bp + ".attn.value");
                blk.out = params.spec(bp + ".attn.out");
                blk.out_bias = params.spec(bp + ".attn.out_bias");
            }
            blk.ln2_gain = params.spec(bp + ".ln2.gain");
            blk.ln2_bias = params.spec(bp + ".ln2.bias");
            blk.ff1 = params.spec(bp + ".ff1.weight");
            blk.ff1_bias = params.spec(bp + ".ff1.bias");
            blk.ff2 = params.spec(bp + ".ff2.weight");
            blk.ff2_bias = params.spec(bp + ".ff2.bias");
            enc.blocks.push_back(std::move(blk));
        }
        out.encoders.push_back(std::move(enc));
    }
    out.head = params.spec("head.weight");
    out.head_bias = params.spec("head.bias");
    return out;
}

// ---------------------------------------------------------------------------
// Network

struct Fredformer::Pass {
    Vector mean;
    Vector scale;
    std::vector<EncoderCache> bands;
    Matrix features;
    Matrix coeffs;
    Matrix forecast;
};

Fredformer::Fredformer(FredformerConfig config)
    : config_((config.validate(), config)),
      input_plan_(config.lookback),
      output_plan_(config.horizon),
      reference_(config),
      layout_(layout_of(reference_, config)) {}

void Fredformer::check_params(const ModelParams& params) const {
    require(params.same_layout(reference_), ErrorKind::ShapeMismatch,
            "parameter layout does not match the model configuration");
}

ModelParams Fredformer::init_params() const {
    ModelParams params(config_);
    std::mt19937_64 rng(config_.seed);
    const ModelLayout& lay = layout_;
    auto linear = [&](const ParamSpec& w, const ParamSpec& b) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : params.matrix(w).reshaped()) v = dist(rng);
        if (b.size() > 0) {
            for (double& v : params.matrix(b).reshaped()) v = dist(rng);
        }
    };
    for (const auto& enc : lay.encoders) {
        linear(enc.embed, enc.embed_bias);
        for (const auto& blk : enc.blocks) {
            if (config_.channel_attention) {
                params.matrix(blk.ln1_gain).setOnes();
                linear(blk.query, {});
                linear(blk.key, {});
                linear(blk.value, {});
                linear(blk.out, blk.out_bias);
            }
            params.matrix(blk.ln2_gain).setOnes();
            linear(blk.ff1, blk.ff1_bias);
            linear(blk.ff2, blk.ff2_bias);
        }
    }
    linear(lay.head, lay.head_bias);
    return params;
}

void Fredformer::run(const ModelParams& params, const Matrix& inputs, Pass& pass) const {
    const auto& cfg = config_;
    const Eigen::Index channels = cfg.channels;
    require(inputs.cols() == cfg.lookback && inputs.rows() > 0 && inputs.rows() % channels == 0,
            ErrorKind::ShapeMismatch,
            "input batch must be (B*" + std::to_string(channels) + ") x " + std::to_string(cfg.lookback) + ", got " +
                std::to_string(inputs.rows()) + " x " + std::to_string(inputs.cols()));
    require(inputs.allFinite(), ErrorKind::NonFinite, "input batch contains non-finite values");
    check_params(params);
    const Eigen::Index rows = inputs.rows();
    const Eigen::Index batch = rows / channels;

    Matrix normed = inputs;
    if (cfg.instance_norm) {
        pass.mean = inputs.rowwise().mean();
        normed.colwise() -= pass.mean;
        pass.scale = (normed.array().square().rowwise().mean() + kInstanceNormEps).sqrt();
        normed.array().colwise() /= pass.scale.array();
    } else {
        pass.mean = Vector::Zero(rows);
        pass.scale = Vector::Ones(rows);
    }

    Matrix re;
    Matrix im;
    stage("dft", [&] { input_plan_.forward(normed, re, im); });

    const Eigen::Index s = cfg.effective_patch_len();
    const Eigen::Index nbands = cfg.num_bands();
    const Eigen::Index bins = cfg.input_bins();
    const Eigen::Index m = cfg.embed_dim;
    pass.bands.resize(static_cast<std::size_t>(nbands));
    pass.features.resize(rows, nbands * m);
    for (Eigen::Index n = 0; n < nbands; ++n) {
        EncoderCache& cache = pass.bands[static_cast<std::size_t>(n)];
        const Eigen::Index valid = std::min(s, bins - n * s);
        cache.tokens = Matrix::Zero(rows, 2 * s);
        cache.tokens.leftCols(valid) = re.middleCols(n * s, valid);
        cache.tokens.middleCols(s, valid) = im.middleCols(n * s, valid);
        if (cfg.frequency_refinement) {
            for (Eigen::Index b = 0; b < batch; ++b) {
                minmax_scale(cache.tokens.block(b * channels, 0, channels, s), valid);
                minmax_scale(cache.tokens.block(b * channels, s, channels, s), valid);
            }
        }
        const auto& enc = layout_.encoders[static_cast<std::size_t>(cfg.share_band_weights ? 0 : n)];
        const Matrix z = stage("encoder", [&] { return encoder_forward(params, enc, cfg, cache.tokens, cache); });
        require(z.allFinite(), ErrorKind::NonFinite,
                "encoder: band " + std::to_string(n) + " produced non-finite activations (max |param| = " +
                    std::to_string(params.values().cwiseAbs().maxCoeff()) + ")");
        pass.features.middleCols(n * m, m) = z;
    }

    pass.coeffs = pass.features * params.matrix(layout_.head);
    pass.coeffs.rowwise() += params.matrix(layout_.head_bias).row(0);
    const Eigen::Index out_bins = cfg.output_bins();
    pass.forecast = stage("idft", [&] {
        return output_plan_.inverse(pass.coeffs.leftCols(out_bins), pass.coeffs.rightCols(out_bins));
    });
    pass.forecast.array().colwise() *= pass.scale.array();
    pass.forecast.colwise() += pass.mean;
    require(pass.forecast.allFinite(), ErrorKind::NonFinite, "summarize: forecast contains non-finite values");
}

Matrix Fredformer::forecast_batch(const ModelParams& params, const Matrix& inputs) const {
    Pass pass;
    run(params, inputs, pass);
    return std::move(pass.forecast);
}

double Fredformer::loss_and_gradient(const ModelParams& params, const Matrix& inputs, const Matrix& targets,
                                     ModelParams& grad) const {
    require(targets.rows() == inputs.rows() && targets.cols() == config_.horizon, ErrorKind::ShapeMismatch,
            "targets must be (B*C) x H");
    Pass pass;
    run(params, inputs, pass);
    if (!grad.same_layout(params)) grad = params.zeros_like();
    grad.values().setZero();

    const Matrix diff = pass.forecast - targets;
    const double count = static_cast<double>(diff.size());
    const double loss = diff.squaredNorm() / count;

    Matrix grad_y = (2.0 / count) * diff;
    grad_y.array().colwise() *= pass.scale.array();
    Matrix grad_re;
    Matrix grad_im;
    output_plan_.inverse_adjoint(grad_y, grad_re, grad_im);
    Matrix grad_coeffs(grad_re.rows(), grad_re.cols() + grad_im.cols());
    grad_coeffs << grad_re, grad_im;

    grad.matrix(layout_.head).noalias() += pass.features.transpose() * grad_coeffs;
    grad.matrix(layout_.head_bias).row(0) += grad_coeffs.colwise().sum();
    const Matrix grad_features = grad_coeffs * params.matrix(layout_.head).transpose();

    const Eigen::Index m = config_.embed_dim;
    for (Eigen::Index n = 0; n < config_.num_bands(); ++n) {
        const auto& enc = layout_.encoders[static_cast<std::size_t>(config_.share_band_weights ? 0 : n)];
        encoder_backward(params, enc, config_, pass.bands[static_cast<std::size_t>(n)], grad_features.middleCols(n * m, m),
                         grad);
    }
    return loss;
}

ChannelAttentionResult Fredformer::channel_attention(const ModelParams& params, Eigen::Index band,
                                                     const Matrix& tokens) const {
    check_params(params);
    require(band >= 0 && band < config_.num_bands(), ErrorKind::InvalidArgument,
            "band " + std::to_string(band) + " out of range");
    require(tokens.rows() == config_.channels && tokens.cols() == config_.token_width(), ErrorKind::ShapeMismatch,
            "tokens must be C x 2S");
    const ModelLayout& lay = layout_;
    EncoderCache cache;
    cache.tokens = tokens;
    ChannelAttentionResult out;
    out.features = encoder_forward(params, lay.encoders[static_cast<std::size_t>(config_.share_band_weights ? 0 : band)],
                                   config_, tokens, cache);
    require(out.features.allFinite(), ErrorKind::NonFinite,
            "channel attention: band " + std::to_string(band) + " produced non-finite activations");
    if (config_.channel_attention) {
        const Eigen::Index d = config_.head_dim;
        const Eigen::Index c = config_.channels;
        for (const auto& blk : cache.blocks) {
            std::vector<Matrix> heads;
            for (Eigen::Index h = 0; h < config_.heads; ++h) {
                if (config_.use_nystrom) {
                    heads.push_back(nystrom_weights(blk.q.middleCols(h * d, d), blk.k.middleCols(h * d, d),
                                                    config_.landmarks));
                } else {
                    heads.push_back(blk.weights.middleCols(h * c, c));
                }
            }
            out.weights.push_back(std::move(heads));
        }
    }
    return out;
}

std::vector<Matrix> Fredformer::encode_bands(const ModelParams& params, const BandSet& normalized) const {
    require(normalized.num_bands() == config_.num_bands() && normalized.patch_len == config_.effective_patch_len(),
            ErrorKind::ShapeMismatch,
            "band set has " + std::to_string(normalized.num_bands()) + " bands of length " +
                std::to_string(normalized.patch_len) + ", model expects " + std::to_string(config_.num_bands()) +
                " of length " + std::to_string(config_.effective_patch_len()));
    std::vector<Matrix> out;
    out.reserve(normalized.bands.size());
    for (Eigen::Index n = 0; n < normalized.num_bands(); ++n) {
        out.push_back(channel_attention(params, n, tokens_of(normalized.bands[static_cast<std::size_t>(n)])).features);
    }
    return out;
}

Spectrum Fredformer::summarize(const ModelParams& params, const std::vector<Matrix>& features) const {
    check_params(params);
    const Eigen::Index m = config_.embed_dim;
    require(static_cast<Eigen::Index>(features.size()) == config_.num_bands(), ErrorKind::ShapeMismatch,
            "summarize: expected " + std::to_string(config_.num_bands()) + " feature blocks, got " +
                std::to_string(features.size()));
    Matrix flat(config_.channels, config_.num_bands() * m);
    for (std::size_t n = 0; n < features.size(); ++n) {
        require(features[n].rows() == config_.channels && features[n].cols() == m, ErrorKind::ShapeMismatch,
                "summarize: feature block " + std::to_string(n) + " must be C x M");
        flat.middleCols(static_cast<Eigen::Index>(n) * m, m) = features[n];
    }
    Matrix coeffs = flat * params.matrix("head.weight");
    coeffs.rowwise() += params.matrix("head.bias").row(0);
    Spectrum out;
    out.origin_length = config_.horizon;
    out.real_part = coeffs.leftCols(config_.output_bins());
    out.imag_part = coeffs.rightCols(config_.output_bins());
    return out;
}

MultivariateSeries Fredformer::forward(const ModelParams& params, const MultivariateSeries& lookback) const {
    lookback.validate();
    require(lookback.channels() == config_.channels && lookback.length() == config_.lookback, ErrorKind::ShapeMismatch,
            "forward: expected " + std::to_string(config_.channels) + " x " + std::to_string(config_.lookback) +
                " input, got " + std::to_string(lookback.channels()) + " x " + std::to_string(lookback.length()));

    MultivariateSeries normed = lookback;
    Vector mean = Vector::Zero(config_.channels);
    Vector scale = Vector::Ones(config_.channels);
    if (config_.instance_norm) {
        mean = lookback.values.rowwise().mean();
        normed.values.colwise() -= mean;
        scale = (normed.values.array().square().rowwise().mean() + kInstanceNormEps).sqrt();
        normed.values.array().colwise() /= scale.array();
    }
    const Spectrum spec = stage("dft", [&] { return spectrum_of(normed); });
    BandSet bands = stage("patch", [&] { return patch_spectrum(spec, config_.effective_patch_len()); });
    if (config_.frequency_refinement) bands = stage("normalize", [&] { return normalize_bands(bands).bands; });
    const auto features = stage("encoder", [&] { return encode_bands(params, bands); });
    const Spectrum out_spec = stage("summarize", [&] { return summarize(params, features); });
    Matrix values = stage("idft", [&] { return reconstruct(out_spec); });
    values.array().colwise() *= scale.array();
    values.colwise() += mean;
    require(values.allFinite(), ErrorKind::NonFinite, "forward: forecast contains non-finite values");

    MultivariateSeries out;
    out.values = std::move(values);
    out.channel_names = lookback.channel_names;
    return out;
}

}  // namespace fredformer

#include "fredformer/checkpoint.hpp"

#include "fredformer/error.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace fredformer {
namespace {

using nlohmann::json;

json config_json(const FredformerConfig& c) {
    return {{"schema_version", kConfigSchemaVersion},
            {"lookback", c.lookback},
            {"horizon", c.horizon},
            {"channels", c.channels},
            {"patch_len", c.patch_len},
            {"embed_dim", c.embed_dim},
            {"heads", c.heads},
            {"head_dim", c.head_dim},
            {"depth", c.depth},
            {"mlp_dim", c.mlp_dim},
            {"use_nystrom", c.use_nystrom},
            {"landmarks", c.landmarks},
            {"share_band_weights", c.share_band_weights},
            {"instance_norm", c.instance_norm},
            {"channel_attention", c.channel_attention},
            {"frequency_refinement", c.frequency_refinement},
            {"seed", c.seed}};
}

template <class T>
void read_field(const json& j, const char* key, T& out) {
    require(j.contains(key), ErrorKind::Parse, std::string("config is missing \"") + key + "\"");
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, std::string("config field \"") + key + "\": " + e.what());
    }
}

FredformerConfig config_of(const json& j) {
    require(j.is_object(), ErrorKind::Parse, "config must be a JSON object");
    int schema = 0;
    read_field(j, "schema_version", schema);
    require(schema == kConfigSchemaVersion, ErrorKind::Parse,
            "unsupported config schema_version " + std::to_string(schema));
    FredformerConfig c;
    read_field(j, "lookback", c.lookback);
    read_field(j, "horizon", c.horizon);
    read_field(j, "channels", c.channels);
    read_field(j, "patch_len", c.patch_len);
    read_field(j, "embed_dim", c.embed_dim);
    read_field(j, "heads", c.heads);
    read_field(j, "head_dim", c.head_dim);
    read_field(j, "depth", c.depth);
    read_field(j, "mlp_dim", c.mlp_dim);
    read_field(j, "use_nystrom", c.use_nystrom);
    read_field(j, "landmarks", c.landmarks);
    read_field(j, "share_band_weights", c.share_band_weights);
    read_field(j, "instance_norm", c.instance_norm);
    read_field(j, "channel_attention", c.channel_attention);
    read_field(j, "frequency_refinement", c.frequency_refinement);
    read_field(j, "seed", c.seed);
    c.validate();
    return c;
}

std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string config_to_json(const FredformerConfig& config, int indent) { return config_json(config).dump(indent); }

FredformerConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Parse, std::string("config JSON: ") + e.what());
    }
    return config_of(j);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    checkpoint.config.validate();
    const ModelParams reference(checkpoint.config);
    require(reference.same_layout(checkpoint.params), ErrorKind::ShapeMismatch,
            "parameters do not match the checkpoint config");

    json arrays = json::array();
    for (const auto& s : checkpoint.params.specs()) {
        const auto block = checkpoint.params.values().segment(s.offset, s.size());
        arrays.push_back({{"name", s.name},
                          {"shape", {s.rows, s.cols}},
                          {"data", std::vector<double>(block.data(), block.data() + block.size())}});
    }
    json root = {{"format", kCheckpointFormat},
                 {"format_version", kCheckpointVersion},
                 {"config", config_json(checkpoint.config)},
                 {"params", std::move(arrays)},
                 {"metadata", checkpoint.metadata}};
    if (checkpoint.scaler) {
        root["scaler"] = {{"mean", to_vector(checkpoint.scaler->mean)},
                          {"stddev", to_vector(checkpoint.scaler->stddev)},
                          {"clamped_channels", checkpoint.scaler->clamped_channels}};
    }
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write checkpoint " + path.string());
    out << root.dump() << '\n';
    require(static_cast<bool>(out), ErrorKind::Io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open checkpoint " + path.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Parse, "checkpoint " + path.string() + ": " + e.what());
    }
    const auto where = "checkpoint " + path.string() + ": ";
    require(root.is_object() && root.value("format", std::string()) == kCheckpointFormat, ErrorKind::Parse,
            where + "not a fredformer checkpoint");
    require(root.value("format_version", 0) == kCheckpointVersion, ErrorKind::Parse,
            where + "unsupported format_version");
    require(root.contains("config") && root.contains("params") && root["params"].is_array(), ErrorKind::Parse,
            where + "missing config or params");

    Checkpoint cp;
    cp.config = config_of(root["config"]);
    cp.params = ModelParams(cp.config);
    std::vector<bool> seen(cp.params.specs().size(), false);
    try {
        for (const auto& entry : root["params"]) {
            const auto name = entry.at("name").get<std::string>();
            const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
            const auto data = entry.at("data").get<std::vector<double>>();
            const auto& specs = cp.params.specs();
            const auto it = std::find_if(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.name == name; });
            require(it != specs.end(), ErrorKind::ShapeMismatch, where + "unexpected array \"" + name + "\"");
            require(shape.size() == 2 && shape[0] == it->rows && shape[1] == it->cols, ErrorKind::ShapeMismatch,
                    where + "array \"" + name + "\" has the wrong shape, expected " + std::to_string(it->rows) + "x" +
                        std::to_string(it->cols));
            require(static_cast<Eigen::Index>(data.size()) == it->size(), ErrorKind::ShapeMismatch,
                    where + "array \"" + name + "\" declares " + std::to_string(it->size()) + " values but holds " +
                        std::to_string(data.size()));
            cp.params.values().segment(it->offset, it->size()) = to_eigen(data);
            seen[static_cast<std::size_t>(it - specs.begin())] = true;
        }
        for (std::size_t i = 0; i < seen.size(); ++i) {
            require(seen[i], ErrorKind::ShapeMismatch, where + "missing array \"" + cp.params.specs()[i].name + "\"");
        }
        if (root.contains("metadata")) cp.metadata = root["metadata"].get<std::map<std::string, std::string>>();
        if (root.contains("scaler")) {
            Scaler s;
            s.mean = to_eigen(root["scaler"].at("mean").get<std::vector<double>>());
            s.stddev = to_eigen(root["scaler"].at("stddev").get<std::vector<double>>());
            s.clamped_channels = root["scaler"].value("clamped_channels", std::vector<Eigen::Index>{});
            require(s.mean.size() == cp.config.channels && s.stddev.size() == cp.config.channels,
                    ErrorKind::ShapeMismatch, where + "scaler does not have one entry per channel");
            cp.scaler = std::move(s);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, where + e.what());
    }
    require(cp.params.values().allFinite(), ErrorKind::NonFinite, where + "non-finite parameter values");
    return cp;
}

}  // namespace fredformer

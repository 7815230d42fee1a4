#include "support.hpp"

#include <filesystem>
#include <fstream>

using namespace fredformer;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("fredformer_ckpt_" + std::to_string(std::random_device{}()) + name);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("round trip preserves config, params and scaler exactly") {
    FredformerConfig cfg;
    cfg.channels = 3;
    cfg.lookback = 24;
    cfg.horizon = 12;
    cfg.patch_len = 5;
    cfg.use_nystrom = true;
    cfg.landmarks = 2;
    cfg.instance_norm = false;
    cfg.seed = 1234567890123ULL;
    Fredformer model(cfg);
    Checkpoint cp{cfg, model.init_params(), Scaler{Vector::LinSpaced(3, 0.1, 0.3), Vector::Constant(3, 2.0), {1}},
                  {{"split", "ratio"}}};
    const auto path = temp_file(".json");
    save_checkpoint(path, cp);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.config == cfg);
    CHECK(back.params.values() == cp.params.values());
    REQUIRE(back.scaler.has_value());
    CHECK(back.scaler->mean == cp.scaler->mean);
    CHECK(back.scaler->clamped_channels == std::vector<Eigen::Index>{1});
    CHECK(back.metadata.at("split") == "ratio");

    const auto again = temp_file(".json");
    save_checkpoint(again, back);
    CHECK(slurp(path) == slurp(again));
    fs::remove(path);
    fs::remove(again);
}

TEST_CASE("config json round trip") {
    FredformerConfig cfg;
    cfg.share_band_weights = true;
    cfg.channel_attention = false;
    CHECK(config_from_json(config_to_json(cfg)) == cfg);
    CHECK(fftest::error_kind_of([] { config_from_json("{\"schema_version\": 1}"); }) == ErrorKind::Parse);
    CHECK(fftest::error_kind_of([] { config_from_json("not json"); }) == ErrorKind::Parse);
}

TEST_CASE("loading validates every array") {
    FredformerConfig cfg;
    cfg.channels = 2;
    cfg.lookback = 16;
    cfg.horizon = 8;
    cfg.patch_len = 4;
    cfg.embed_dim = 4;
    cfg.mlp_dim = 4;
    cfg.heads = 1;
    cfg.head_dim = 2;
    cfg.depth = 1;
    Fredformer model(cfg);
    const auto path = temp_file(".json");
    save_checkpoint(path, {cfg, model.init_params(), std::nullopt, {}});
    const std::string good = slurp(path);

    const auto corrupt = [&](const std::string& from, const std::string& to) {
        std::string text = good;
        const auto pos = text.find(from);
        REQUIRE(pos != std::string::npos);
        text.replace(pos, from.size(), to);
        std::ofstream(path, std::ios::binary) << text;
        try {
            load_checkpoint(path);
        } catch (const Error& e) {
            return std::make_pair(e.kind(), std::string(e.what()));
        }
        return std::make_pair(ErrorKind::InvalidArgument, std::string("no error"));
    };
    auto [kind, what] = corrupt("\"shape\":[8,4]", "\"shape\":[4,8]");
    CHECK(kind == ErrorKind::ShapeMismatch);
    CHECK(what.find("band0.embed.weight") != std::string::npos);
    std::tie(kind, what) = corrupt("\"format_version\":1", "\"format_version\":9");
    CHECK(kind == ErrorKind::Parse);
    std::tie(kind, what) = corrupt("\"name\":\"head.bias\"", "\"name\":\"head.extra\"");
    CHECK(kind == ErrorKind::ShapeMismatch);
    std::tie(kind, what) = corrupt("fredformer-checkpoint", "something-else");
    CHECK(kind == ErrorKind::Parse);

    CHECK(fftest::error_kind_of([] { load_checkpoint("/nonexistent/ckpt.json"); }) == ErrorKind::Io);
    FredformerConfig other = cfg;
    other.patch_len = 8;
    CHECK(fftest::error_kind_of([&] { save_checkpoint(path, {other, model.init_params(), std::nullopt, {}}); }) ==
          ErrorKind::ShapeMismatch);
    fs::remove(path);
}

}  // TEST_SUITE

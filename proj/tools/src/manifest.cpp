#include "manifest.hpp"

#include "fredformer/error.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

namespace fredformer::cli {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());

    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    require(ctx && EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) == 1, ErrorKind::Io, "sha256 init failed");
    std::array<char, 1 << 16> buffer{};
    while (in) {
        in.read(buffer.data(), buffer.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
    }
    require(in.eof(), ErrorKind::Io, "read error on " + path.string());

    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "fredformer";
    j["tool_version"] = tool_version;
    j["command"] = command;
    j["argv"] = argv;
    j["seed"] = seed;
    j["out_dir"] = out_dir.string();
    j["config"] = nlohmann::ordered_json(config);
    j["inputs"] = nlohmann::ordered_json::array();
    for (const auto& in : inputs) {
        j["inputs"].push_back({{"role", in.role}, {"path", in.path.string()}, {"sha256", in.sha256}});
    }
    j["replay"] = replay;
    return j.dump(2) + "\n";
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
}

}  // namespace

void write_manifest(const RunManifest& manifest) {
    std::error_code ec;
    std::filesystem::create_directories(manifest.out_dir, ec);
    require(!ec, ErrorKind::Io, "cannot create output directory " + manifest.out_dir.string() + ": " + ec.message());
    write_text(manifest.out_dir / kReplayConfigFile, manifest.config_text);
    write_text(manifest.out_dir / kManifestFile, manifest.to_json());
}

}  // namespace fredformer::cli

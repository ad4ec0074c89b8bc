#include "daseg/cli/manifest.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "daseg/error.hpp"

#ifndef DASEG_VERSION
#define DASEG_VERSION "unknown"
#endif

namespace daseg {
namespace {

struct DigestDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using Digest = std::unique_ptr<EVP_MD_CTX, DigestDeleter>;

Digest new_digest() {
    Digest ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 initialisation failed");
    return ctx;
}

void update(EVP_MD_CTX* ctx, std::string_view bytes) {
    if (EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1) throw Error("sha256 update failed");
}

void update_file(EVP_MD_CTX* ctx, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        update(ctx, std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
    }
}

std::string finish(EVP_MD_CTX* ctx) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, md.data(), &len) != 1) throw Error("sha256 finalisation failed");
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

}  // namespace

void to_json(nlohmann::json& j, const RunManifest& m) {
    j = {{"run_id", m.run_id},   {"command", m.command},   {"argv", m.argv},       {"config", m.config},
         {"dataset_hashes", m.dataset_hashes}, {"version", m.version}, {"outputs", m.outputs}};
}

void from_json(const nlohmann::json& j, RunManifest& m) {
    m.run_id = j.at("run_id").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.argv = j.value("argv", std::vector<std::string>{});
    m.config = j.at("config");
    m.dataset_hashes = j.value("dataset_hashes", std::map<std::string, std::string>{});
    m.version = j.value("version", std::string{});
    m.outputs = j.value("outputs", std::vector<std::string>{});
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / kManifestName);
    if (!out) throw Error("cannot write manifest in " + dir.string());
    out << nlohmann::json(m).dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / kManifestName);
    if (!in) throw Error("no manifest in " + dir.string());
    return nlohmann::json::parse(in).get<RunManifest>();
}

std::string sha256_hex(std::string_view bytes) {
    auto ctx = new_digest();
    update(ctx.get(), bytes);
    return finish(ctx.get());
}

std::string sha256_file(const std::filesystem::path& path) {
    auto ctx = new_digest();
    update_file(ctx.get(), path);
    return finish(ctx.get());
}

std::string hash_directory(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) throw DataError("not a directory: " + root.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    auto ctx = new_digest();
    for (const auto& f : files) {
        const auto rel = std::filesystem::relative(f, root).generic_string();
        update(ctx.get(), rel);
        update(ctx.get(), std::string_view("\0", 1));
        update_file(ctx.get(), f);
    }
    return finish(ctx.get());
}

std::string version_stamp() { return DASEG_VERSION; }

std::string make_run_id(const std::string& salt) {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(now.time_since_epoch()).count();
    return fmt::format("{:04d}{:02d}{:02d}T{:02d}{:02d}{:02d}-{}", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                       tm.tm_hour, tm.tm_min, tm.tm_sec, sha256_hex(salt + std::to_string(ns)).substr(0, 6));
}

}  // namespace daseg

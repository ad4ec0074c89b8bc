#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace daseg {

/// Everything needed to replay a command: what ran, on which inputs, with which settings.
struct RunManifest {
    std::string run_id;
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json config;                             // resolved configuration snapshot
    std::map<std::string, std::string> dataset_hashes;  // input name -> sha256 of its files
    std::string version;
    std::vector<std::string> outputs;  // paths relative to the run directory
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

inline constexpr const char* kManifestName = "manifest.json";

void write_manifest(const std::filesystem::path& dir, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& dir);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
/// Hash over every regular file below `root`: relative path and content, in sorted path order.
std::string hash_directory(const std::filesystem::path& root);

std::string version_stamp();
/// Timestamp plus a short content hash, e.g. 20261018T101502-3fa2c1.
std::string make_run_id(const std::string& salt);

}  // namespace daseg

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mtqa/errors.hpp"

namespace mtqa {

/// Reproducibility sidecar written next to every command's first output:
/// the command, its resolved configuration, seed, input digests, and output
/// paths.
struct RunManifest {
  std::string tool;
  std::string version;
  std::string command;
  uint64_t seed = 0;
  std::string config_json;  // resolved configuration, serialized
  std::vector<std::pair<std::string, std::string>> inputs;  // (path, fnv1a64 hex)
  std::vector<std::string> outputs;
};

uint64_t file_digest(const std::string& path);

RunManifest make_manifest(const std::string& command, uint64_t seed,
                          const std::string& config_json,
                          const std::vector<std::string>& input_paths,
                          const std::vector<std::string>& output_paths);

std::string manifest_path_for(const std::string& first_output);
void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

/// Recomputes the digests of the manifest's inputs; returns false and fills
/// error when any file is missing or changed.
bool verify_manifest(const RunManifest& manifest, std::string* error);

}  // namespace mtqa

#include "mtqa/manifest.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtqa/hash.hpp"
#include "mtqa/version.hpp"

namespace mtqa {

using ordered_json = nlohmann::ordered_json;

uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open input for digesting: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

RunManifest make_manifest(const std::string& command, uint64_t seed,
                          const std::string& config_json,
                          const std::vector<std::string>& input_paths,
                          const std::vector<std::string>& output_paths) {
  RunManifest m;
  m.tool = kToolName;
  m.version = kToolVersion;
  m.command = command;
  m.seed = seed;
  m.config_json = config_json;
  for (const auto& p : input_paths) m.inputs.emplace_back(p, hex64(file_digest(p)));
  m.outputs = output_paths;
  return m;
}

std::string manifest_path_for(const std::string& first_output) {
  return first_output + ".manifest.json";
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  ordered_json j;
  j["tool"] = manifest.tool;
  j["version"] = manifest.version;
  j["command"] = manifest.command;
  j["seed"] = manifest.seed;
  j["config"] = ordered_json::parse(manifest.config_json);
  ordered_json inputs = ordered_json::array();
  for (const auto& [p, digest] : manifest.inputs)
    inputs.push_back(ordered_json{{"path", p}, {"fnv1a64", digest}});
  j["inputs"] = inputs;
  j["outputs"] = manifest.outputs;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open manifest: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest: " + std::string(e.what()));
  }
  RunManifest m;
  m.tool = j.at("tool").get<std::string>();
  m.version = j.at("version").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.seed = j.at("seed").get<uint64_t>();
  m.config_json = j.at("config").dump();
  for (const auto& ji : j.at("inputs"))
    m.inputs.emplace_back(ji.at("path").get<std::string>(),
                          ji.at("fnv1a64").get<std::string>());
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  return m;
}

bool verify_manifest(const RunManifest& manifest, std::string* error) {
  for (const auto& [path, digest] : manifest.inputs) {
    uint64_t actual;
    try {
      actual = file_digest(path);
    } catch (const Error& e) {
      if (error) *error = e.what();
      return false;
    }
    if (hex64(actual) != digest) {
      if (error) *error = "digest mismatch for " + path;
      return false;
    }
  }
  return true;
}

}  // namespace mtqa

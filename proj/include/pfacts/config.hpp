#pragma once

// Run configuration (INI file with per-command overrides) and the run
// manifest written next to every command's outputs.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pfacts/dataio.hpp"
#include "pfacts/model.hpp"

namespace pfacts {

inline constexpr std::string_view kArtifactVersion = "1.0.0";
inline constexpr const char* kEmbedTokenEnv = "PFACTS_EMBED_TOKEN";

struct ModelConfig {
  std::size_t hidden = 0;  // 0: same as the embedding dimension
  double dropout = 0.1;
};

struct SamplingConfig {
  std::size_t k = 1000;
  std::size_t cap = 3;
  std::size_t max_iter = 100;
  double tol = 1e-4;
};

struct EmbeddingConfig {
  enum class Mode { kFile, kHttp };
  Mode mode = Mode::kFile;
  std::string path;
  std::string endpoint;
  std::size_t batch_size = 32;
  std::size_t timeout_ms = 30000;
  int retries = 2;
};

struct RunConfig {
  std::vector<std::uint64_t> seeds{42, 123, 456, 789, 1024};
  SplitSpec split;
  TrainConfig train;
  ModelConfig model;
  SamplingConfig sampling;
  EmbeddingConfig embedding;
  std::map<std::string, std::string> paths;

  // Throws ConfigError on empty or repeated seeds and invalid sub-configs.
  void check() const;
  // Stable `section.key=value` lines covering every setting.
  std::string canonical() const;
  std::string path_or(const std::string& key, const std::string& fallback = "") const;
};

// Sections: run, split, train, model, sampling, embedding, paths. Keys
// outside these are rejected except under [paths].
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

// Apply one `section.key=value` override.
void apply_override(RunConfig& config, std::string_view assignment);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::string config_hash;  // sha256 of RunConfig::canonical()
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;  // path -> sha256
  std::vector<std::string> outputs;
  std::string version{kArtifactVersion};
  std::string timestamp;  // UTC, ISO 8601
};

RunManifest make_manifest(const std::string& command, const RunConfig& config,
                          const std::vector<std::filesystem::path>& inputs);
std::string manifest_json(const RunManifest& manifest);
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

// Bearer token for the embedding endpoint, from the environment only.
std::string embed_token_from_env();

}  // namespace pfacts

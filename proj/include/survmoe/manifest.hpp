#pragma once

// Run manifests: every CLI command records its resolved configuration, seeds,
// dataset fingerprints, output paths, and metric results, so a run can be
// replayed and checked for bit-identical metrics. Wall-clock runtime is the
// one deliberately volatile field.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace survmoe::manifest {

inline constexpr const char* kArtifactVersion = "survmoe-0.1.0";

struct DatasetFingerprint {
  std::string path;
  long rows = 0;             // data rows (header excluded)
  std::string column_hash;   // FNV-1a 64 over the header line, hex
  std::string content_hash;  // FNV-1a 64 over the full file bytes, hex
};

DatasetFingerprint fingerprint_csv(const std::string& path);

struct RunManifest {
  std::string artifact_version = kArtifactVersion;
  std::string command;
  nlohmann::json config;  // full resolved flag set, replayable
  std::vector<std::uint64_t> seeds;
  std::vector<DatasetFingerprint> datasets;
  std::vector<std::string> outputs;  // files written by the run
  double runtime_seconds = 0.0;
  nlohmann::json metrics;  // metric results, when the command produces any
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

void write_manifest(const RunManifest& m, const std::string& path);
RunManifest read_manifest(const std::string& path);

/// Write-temp-then-rename so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace survmoe::manifest

#include "survmoe/manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "survmoe/common.hpp"

namespace survmoe::manifest {

namespace {

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace

DatasetFingerprint fingerprint_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("fingerprint_csv: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();

  DatasetFingerprint fp;
  fp.path = path;
  fp.content_hash = hex64(fnv1a64(bytes.data(), bytes.size()));

  std::istringstream lines(bytes);
  std::string line;
  long non_empty = 0;
  bool first = true;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      fp.column_hash = hex64(fnv1a64(line.data(), line.size()));
      first = false;
      continue;
    }
    if (!line.empty()) ++non_empty;
  }
  fp.rows = non_empty;
  return fp;
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["artifact_version"] = m.artifact_version;
  j["command"] = m.command;
  j["config"] = m.config;
  j["seeds"] = m.seeds;
  j["datasets"] = nlohmann::json::array();
  for (const auto& d : m.datasets)
    j["datasets"].push_back({{"path", d.path},
                             {"rows", d.rows},
                             {"column_hash", d.column_hash},
                             {"content_hash", d.content_hash}});
  j["outputs"] = m.outputs;
  j["runtime_seconds"] = m.runtime_seconds;
  j["metrics"] = m.metrics;
  return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.artifact_version = j.at("artifact_version").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config");
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& d : j.at("datasets")) {
    DatasetFingerprint fp;
    fp.path = d.at("path").get<std::string>();
    fp.rows = d.at("rows").get<long>();
    fp.column_hash = d.at("column_hash").get<std::string>();
    fp.content_hash = d.at("content_hash").get<std::string>();
    m.datasets.push_back(fp);
  }
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.runtime_seconds = j.at("runtime_seconds").get<double>();
  if (j.contains("metrics")) m.metrics = j.at("metrics");
  return m;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  write_file_atomic(path, manifest_to_json(m).dump(2) + "\n");
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("read_manifest: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return manifest_from_json(j);
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_file_atomic: cannot open " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write_file_atomic: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace survmoe::manifest

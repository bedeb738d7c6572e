#pragma once

// CSV ingestion/emission and JSON (de)serialization of schema objects.

#include <string>

#include <json.hpp>

#include "survmoe/dataset.hpp"

namespace survmoe::data {

SchemaDecl read_schema_decl(const std::string& path);
void write_schema_decl(const std::string& path, const SchemaDecl& decl);

/// Fit mode: builds categorical vocabularies (sorted unique levels plus a
/// dedicated "missing" level) from this file's contents.
Dataset load_csv_fit(const std::string& path, const SchemaDecl& decl,
                     FeatureSchema& schema_out);

/// Apply mode: uses an existing schema; unknown categorical levels map to the
/// "missing" level and bump *unknown_warnings when given.
Dataset load_csv(const std::string& path, const FeatureSchema& schema,
                 int* unknown_warnings = nullptr);

/// Writes raw (unstandardized) feature values plus time/event columns.
void write_csv(const std::string& path, const Dataset& ds, const FeatureSchema& schema);

/// Ground-truth sidecar for synthetic data: class label and raw event time.
void write_labels_csv(const std::string& path, const Dataset& ds);

/// Class labels from a write_labels_csv sidecar (row order matches records).
std::vector<int> read_labels_csv(const std::string& path);

nlohmann::json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& j);
nlohmann::json grid_to_json(const TimeGrid& grid);
TimeGrid grid_from_json(const nlohmann::json& j);

}  // namespace survmoe::data

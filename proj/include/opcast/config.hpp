#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "opcast/grid.hpp"
#include "opcast/kwargs.hpp"

namespace opcast {

enum class Contingency { none, latest_date, preceding_year };

std::string_view to_string(Contingency c);
/// Accepts `none`, `latest-date`, `preceding-year`; throws BadContingency.
Contingency parse_contingency(std::string_view text);

enum class Source { remote, file };

struct GatheringSpec {
  Source source = Source::remote;
  std::string dataset;
  /// Every other gathering key, stringified, forwarded verbatim to the data store.
  std::map<std::string, std::string> request_params;
  std::optional<std::string> path;
  std::optional<std::string> open_with;

  friend bool operator==(const GatheringSpec&, const GatheringSpec&) = default;
};

/// Ordered transform chain; `kwargs[k]` holds the argument expression of `functions[k]`.
struct TransformSpec {
  std::vector<std::string> functions;
  std::vector<std::string> kwargs;

  bool empty() const { return functions.empty(); }
  friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

struct VariableSpec {
  std::string name;
  GatheringSpec gathering;
  TransformSpec processing;
  bool is_static = false;
  Contingency contingency = Contingency::none;

  friend bool operator==(const VariableSpec&, const VariableSpec&) = default;
};

/// The data store library: every variable the pipeline knows how to fetch.
struct DataStoreConfig {
  std::map<std::string, VariableSpec> variables;
  /// Directory the file was loaded from; relative `path`s resolve against it.
  std::filesystem::path base_dir;

  const VariableSpec& at(const std::string& name) const;
  friend bool operator==(const DataStoreConfig& a, const DataStoreConfig& b) { return a.variables == b.variables; }
};

enum class InferenceMode { dense, patch };

struct ModelSettings {
  std::string weights_path;
  std::string stats_path;
  std::optional<int> days;
  std::vector<double> thresholds{0.2, 0.4, 0.6, 0.8};
  InferenceMode mode = InferenceMode::dense;
  int patch = 15;
  /// Model inputs in channel order; defaults to the pilot's variable list.
  std::vector<std::string> features;
};

struct PilotConfig {
  std::string site_name;
  BBox bbox;
  std::string datastore_class = "http";
  std::string processing_class = "fdi";
  std::string datastore_path;
  std::optional<std::string> datastore_url;
  std::string output_dir = "output";
  std::string cache_dir = "cache";
  ModelSettings model;
  std::vector<std::string> variables;
  ValueMap locals;
  /// Directory of the pilot file; relative paths above resolve against it.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const;
};

DataStoreConfig parse_datastore_config(std::string_view toml_text);
DataStoreConfig load_datastore_config(const std::filesystem::path& path);
std::string serialize_datastore_config(const DataStoreConfig& cfg);

/// Checks the pilot against the library it draws variables from.
PilotConfig parse_pilot_config(std::string_view toml_text, const DataStoreConfig& library);

/// Reads only the location of the data store library from a pilot file.
std::string pilot_datastore_path(std::string_view toml_text);

struct LoadedConfig {
  PilotConfig pilot;
  DataStoreConfig library;
};

/// Loads a pilot file and the data store library it points to.
LoadedConfig load_configs(const std::filesystem::path& pilot_path);

}  // namespace opcast

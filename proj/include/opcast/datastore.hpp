#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "opcast/config.hpp"
#include "opcast/grid.hpp"
#include "opcast/transform.hpp"

namespace opcast {

/// Dates a dataset can be served for, strictly ascending.
class AvailabilityIndex {
 public:
  AvailabilityIndex() = default;
  /// Sorts and de-duplicates.
  explicit AvailabilityIndex(std::vector<Date> dates);

  const std::vector<Date>& dates() const noexcept { return dates_; }
  bool contains(Date d) const;
  bool empty() const noexcept { return dates_.empty(); }
  AvailabilityIndex without(Date d) const;

 private:
  std::vector<Date> dates_;
};

/// Fallback date for a requested date missing from `index`:
///  - latest-date:    the most recent date strictly before `requested`
///  - preceding-year: `requested` one calendar year earlier (Feb 29 -> Feb 28), if available
///  - none:           no fallback
/// Throws NoFallbackDate.
Date apply_contingency(Contingency policy, Date requested, const AvailabilityIndex& index);

struct FetchResult {
  std::string variable;
  Grid grid;
  Date requested;
  Date served;
  Contingency fallback = Contingency::none;
};

/// Transport to a data service. Implementations return nullopt when the
/// service answers but cannot deliver, and throw FetchFailed when the
/// service cannot be reached at all.
class DataStoreClient {
 public:
  virtual ~DataStoreClient() = default;
  virtual AvailabilityIndex availability(const std::string& dataset) = 0;
  virtual std::optional<Grid> fetch(const std::string& dataset, Date date, const BBox& bbox,
                                    const std::map<std::string, std::string>& params) = 0;
};

/// Plain-HTTP client for `/datasets/{name}/availability` and
/// `/datasets/{name}/data`. Each request gets up to three attempts.
class HttpDataStoreClient final : public DataStoreClient {
 public:
  explicit HttpDataStoreClient(std::string base_url);
  AvailabilityIndex availability(const std::string& dataset) override;
  std::optional<Grid> fetch(const std::string& dataset, Date date, const BBox& bbox,
                            const std::map<std::string, std::string>& params) override;

  static constexpr int kAttempts = 3;

 private:
  std::string base_url_;
};

/// Reads a fixture directory directly (same layout the mock service serves).
class DirectoryDataStoreClient final : public DataStoreClient {
 public:
  explicit DirectoryDataStoreClient(std::filesystem::path root);
  AvailabilityIndex availability(const std::string& dataset) override;
  std::optional<Grid> fetch(const std::string& dataset, Date date, const BBox& bbox,
                            const std::map<std::string, std::string>& params) override;

 private:
  std::filesystem::path root_;
};

/// Data store classes selectable per pilot: `http` and `directory`.
std::shared_ptr<DataStoreClient> make_datastore_client(const std::string& datastore_class,
                                                       const std::string& location);

/// Opens `spec.gathering.path` with the reader named by `open_with`
/// (`netcdf` or `opgrid`) and crops it to `bbox`.
Grid fetch_from_file(const VariableSpec& spec, const BBox& bbox, const std::filesystem::path& base_dir = {});

class DataStore {
 public:
  DataStore(std::shared_ptr<DataStoreClient> client, std::filesystem::path base_dir);

  /// Primary fetch, then the variable's contingency policy on failure. The
  /// returned grid is cropped to `bbox` and renamed to the variable.
  /// Static remote variables are served from their most recent date.
  FetchResult fetch_variable(const VariableSpec& spec, Date date, const BBox& bbox);

 private:
  std::optional<Grid> try_fetch(const VariableSpec& spec, Date date, const BBox& bbox);

  std::shared_ptr<DataStoreClient> client_;
  std::filesystem::path base_dir_;
};

struct CacheEntry {
  std::string file;
  BBox bbox;
  std::uint32_t checksum = 0;
};

/// Processed static variables kept on disk, one OPGRID file per variable
/// plus `manifest.json`. Writes go through temp files and renames.
class StaticCache {
 public:
  explicit StaticCache(std::filesystem::path root);

  /// Hit only on exact bbox match and a valid checksum.
  std::optional<Grid> lookup(const std::string& variable, const BBox& bbox) const;
  void store(const std::string& variable, const BBox& bbox, const Grid& grid);

  const std::filesystem::path& root() const { return root_; }
  const std::map<std::string, CacheEntry>& entries() const { return entries_; }

 private:
  void reload();
  void write_manifest() const;

  std::filesystem::path root_;
  std::map<std::string, CacheEntry> entries_;
};

struct StaticRecord {
  std::string variable;
  bool cache_hit = false;
  std::optional<FetchResult> fetch;
};

struct PrepareStaticResult {
  StaticCache cache;
  std::vector<StaticRecord> records;
};

/// Fetches, transforms and caches every static pilot variable that is not
/// already cached for the pilot's bbox. Processed grids are added to
/// `env.consumed` in pilot order.
PrepareStaticResult prepare_static(const PilotConfig& pilot, const DataStoreConfig& library, DataStore& store,
                                   const TransformRegistry& registry, PipelineEnv& env,
                                   const std::filesystem::path& cache_root, Date date);

}  // namespace opcast

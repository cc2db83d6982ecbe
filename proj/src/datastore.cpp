#include "opcast/datastore.hpp"

#include <httplib.h>

#include <json.hpp>

#include "opcast/error.hpp"
#include "opcast/io.hpp"
#include "opcast/mock_datastore.hpp"
#include "opcast/netcdf.hpp"

namespace opcast {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string prefix;
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto path_at = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  Endpoint e;
  e.scheme_host_port = path_at == std::string::npos ? url : url.substr(0, path_at);
  e.prefix = path_at == std::string::npos ? "" : url.substr(path_at);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

// GET with up to `attempts` tries. Transport errors and 5xx are retried;
// any other status is returned as is.
httplib::Result get_with_retry(const std::string& base_url, const std::string& path, const httplib::Params& params,
                               int attempts, const std::string& subject) {
  const Endpoint e = split_url(base_url);
  httplib::Client client(e.scheme_host_port);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  std::string last_error;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    auto res = client.Get(e.prefix + path, params, httplib::Headers{});
    if (res && res->status < 500) return res;
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
  }
  throw Error(Errc::FetchFailed, subject, "after " + std::to_string(attempts) + " attempts: " + last_error);
}

}  // namespace

HttpDataStoreClient::HttpDataStoreClient(std::string base_url) : base_url_(std::move(base_url)) {}

AvailabilityIndex HttpDataStoreClient::availability(const std::string& dataset) {
  auto res = get_with_retry(base_url_, "/datasets/" + dataset + "/availability", {}, kAttempts, dataset);
  if (res->status == 404) return {};
  if (res->status != 200) {
    throw Error(Errc::FetchFailed, dataset, "availability answered HTTP " + std::to_string(res->status));
  }
  try {
    std::vector<Date> dates;
    const json doc = json::parse(res->body);
    for (const auto& d : doc.at("dates")) dates.push_back(parse_date(d.get<std::string>()));
    return AvailabilityIndex(std::move(dates));
  } catch (const json::exception& e) {
    throw Error(Errc::FetchFailed, dataset, std::string("malformed availability response: ") + e.what());
  }
}

std::optional<Grid> HttpDataStoreClient::fetch(const std::string& dataset, Date date, const BBox& bbox,
                                               const std::map<std::string, std::string>& params) {
  httplib::Params query(params.begin(), params.end());
  query.erase("date");
  query.erase("bbox");
  query.emplace("date", format_date(date));
  query.emplace("bbox", bbox.to_query());
  httplib::Result res = [&] {
    try {
      return get_with_retry(base_url_, "/datasets/" + dataset + "/data", query, kAttempts, dataset);
    } catch (const Error&) {
      return httplib::Result{};
    }
  }();
  if (!res || res->status != 200) return std::nullopt;
  const auto* p = reinterpret_cast<const std::uint8_t*>(res->body.data());
  return decode_opgrid({p, res->body.size()});
}

DirectoryDataStoreClient::DirectoryDataStoreClient(fs::path root) : root_(std::move(root)) {}

AvailabilityIndex DirectoryDataStoreClient::availability(const std::string& dataset) {
  return FixtureStore(root_).availability(dataset);
}

std::optional<Grid> DirectoryDataStoreClient::fetch(const std::string& dataset, Date date, const BBox& bbox,
                                                    const std::map<std::string, std::string>&) {
  const FixtureStore store(root_);
  if (store.is_failing(dataset, date)) return std::nullopt;
  auto grid = store.load(dataset, date);
  if (!grid) return std::nullopt;
  return crop_bbox(*grid, bbox);
}

std::shared_ptr<DataStoreClient> make_datastore_client(const std::string& datastore_class,
                                                       const std::string& location) {
  if (datastore_class == "http") return std::make_shared<HttpDataStoreClient>(location);
  if (datastore_class == "directory") return std::make_shared<DirectoryDataStoreClient>(location);
  throw Error(Errc::UnknownDatastoreClass, datastore_class, "expected 'http' or 'directory'");
}

Grid fetch_from_file(const VariableSpec& spec, const BBox& bbox, const fs::path& base_dir) {
  if (!spec.gathering.path || !spec.gathering.open_with) {
    throw Error(Errc::MissingGathering, spec.name, "file source needs path and open_with");
  }
  fs::path path(*spec.gathering.path);
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  const std::string& reader = *spec.gathering.open_with;
  if (reader != "netcdf" && reader != "opgrid") {
    throw Error(Errc::UnknownReader, reader, "supported readers: netcdf, opgrid");
  }
  if (!fs::exists(path)) throw Error(Errc::FileNotFound, path.string());

  const auto bytes = read_file_bytes(path);
  Grid g;
  try {
    if (reader == "netcdf") {
      const auto it = spec.gathering.request_params.find("variable");
      g = nc::grid_from_file(nc::decode(bytes), it == spec.gathering.request_params.end() ? "" : it->second);
    } else {
      g = decode_opgrid(bytes);
    }
  } catch (const Error& e) {
    if (e.code() == Errc::BadGridFile) throw;
    throw Error(Errc::BadGridFile, path.string(), e.what()).with_cause(e.code());
  }
  return crop_bbox(g, bbox);
}

DataStore::DataStore(std::shared_ptr<DataStoreClient> client, fs::path base_dir)
    : client_(std::move(client)), base_dir_(std::move(base_dir)) {}

std::optional<Grid> DataStore::try_fetch(const VariableSpec& spec, Date date, const BBox& bbox) {
  if (!client_) throw Error(Errc::FetchFailed, spec.name, "no data store client configured");
  return client_->fetch(spec.gathering.dataset, date, bbox, spec.gathering.request_params);
}

FetchResult DataStore::fetch_variable(const VariableSpec& spec, Date date, const BBox& bbox) {
  FetchResult out{spec.name, {}, date, date, Contingency::none};
  if (spec.gathering.source == Source::file) {
    out.grid = fetch_from_file(spec, bbox, base_dir_).renamed(spec.name);
    return out;
  }

  const AvailabilityIndex index = client_ ? client_->availability(spec.gathering.dataset) : AvailabilityIndex{};
  if (spec.is_static) {
    if (index.empty()) throw Error(Errc::FetchFailed, spec.name, "no dates available for static variable");
    out.served = index.dates().back();
    auto g = try_fetch(spec, out.served, bbox);
    if (!g) throw Error(Errc::FetchFailed, spec.name, "static data request for " + format_date(out.served) + " failed");
    out.grid = g->renamed(spec.name);
    return out;
  }

  std::optional<Grid> g;
  if (index.contains(date)) g = try_fetch(spec, date, bbox);
  if (g) {
    out.grid = g->renamed(spec.name);
    return out;
  }

  const std::string requested = format_date(date);
  if (spec.contingency == Contingency::none) {
    throw Error(Errc::FetchFailed, spec.name, requested + " unavailable and contingency is none");
  }
  try {
    out.served = apply_contingency(spec.contingency, date, index.without(date));
  } catch (const Error& e) {
    throw Error(Errc::FetchFailed, spec.name, requested + " unavailable: " + e.what()).with_cause(e.code());
  }
  g = try_fetch(spec, out.served, bbox);
  if (!g) {
    throw Error(Errc::FetchFailed, spec.name,
                requested + " unavailable and fallback " + format_date(out.served) + " failed too");
  }
  out.grid = g->renamed(spec.name);
  out.fallback = spec.contingency;
  return out;
}

StaticCache::StaticCache(fs::path root) : root_(std::move(root)) { reload(); }

void StaticCache::reload() {
  entries_.clear();
  const fs::path manifest = root_ / "manifest.json";
  if (!fs::exists(manifest)) return;
  try {
    const auto doc = json::parse(read_file_text(manifest));
    for (const auto& [name, e] : doc.at("entries").items()) {
      CacheEntry entry;
      entry.file = e.at("file").get<std::string>();
      entry.bbox = BBox::parse(e.at("bbox").get<std::string>());
      entry.checksum = e.at("crc32").get<std::uint32_t>();
      entries_.emplace(name, std::move(entry));
    }
  } catch (const std::exception&) {
    // A corrupt manifest is treated as an empty cache and rebuilt.
    entries_.clear();
  }
}

std::optional<Grid> StaticCache::lookup(const std::string& variable, const BBox& bbox) const {
  const auto it = entries_.find(variable);
  if (it == entries_.end() || !(it->second.bbox == bbox)) return std::nullopt;
  const fs::path file = root_ / it->second.file;
  if (!fs::exists(file)) return std::nullopt;
  const auto bytes = read_file_bytes(file);
  if (crc32_of(bytes) != it->second.checksum) return std::nullopt;
  try {
    return decode_opgrid(bytes);
  } catch (const Error&) {
    return std::nullopt;
  }
}

void StaticCache::store(const std::string& variable, const BBox& bbox, const Grid& grid) {
  fs::create_directories(root_);
  const auto bytes = encode_opgrid(grid);
  CacheEntry entry{variable + ".opgrid", bbox, crc32_of(bytes)};
  write_file_atomic(root_ / entry.file, bytes);
  entries_[variable] = std::move(entry);
  write_manifest();
}

void StaticCache::write_manifest() const {
  json entries = json::object();
  for (const auto& [name, e] : entries_) {
    entries[name] = {{"file", e.file}, {"bbox", e.bbox.to_query()}, {"crc32", e.checksum}};
  }
  write_file_atomic(root_ / "manifest.json", json{{"entries", entries}}.dump(2) + "\n");
}

PrepareStaticResult prepare_static(const PilotConfig& pilot, const DataStoreConfig& library, DataStore& store,
                                   const TransformRegistry& registry, PipelineEnv& env, const fs::path& cache_root,
                                   Date date) {
  PrepareStaticResult out{StaticCache(cache_root), {}};
  for (const auto& name : pilot.variables) {
    const VariableSpec& spec = library.at(name);
    if (!spec.is_static) continue;
    StaticRecord record{name, false, std::nullopt};
    if (auto cached = out.cache.lookup(name, pilot.bbox)) {
      record.cache_hit = true;
      env.consumed.insert_or_assign(name, std::move(*cached));
    } else {
      FetchResult fetched = store.fetch_variable(spec, date, pilot.bbox);
      env.variable = name;
      Grid processed = apply_cascade(spec.processing, fetched.grid, env, registry);
      out.cache.store(name, pilot.bbox, processed);
      env.consumed.insert_or_assign(name, std::move(processed));
      record.fetch = std::move(fetched);
    }
    out.records.push_back(std::move(record));
  }
  return out;
}

}  // namespace opcast

#include <algorithm>
#include <cmath>

#include "opcast/error.hpp"
#include "opcast/io.hpp"
#include "opcast/output.hpp"

namespace opcast {

namespace {

using nc::Attribute;
using nc::File;
using nc::Variable;

constexpr const char* kEpochDays = "days since 1970-01-01";

double epoch_days(Date d) { return static_cast<double>(d.time_since_epoch().count()); }

Variable coord_variable(const std::string& name, std::uint32_t dim, const std::vector<double>& values) {
  const bool is_lat = name == "lat";
  return {name,
          {dim},
          {{"units", std::string(is_lat ? "degrees_north" : "degrees_east")},
           {"standard_name", std::string(is_lat ? "latitude" : "longitude")}},
          values};
}

Variable time_variable(std::uint32_t dim, std::vector<double> days) {
  return {"time",
          {dim},
          {{"units", std::string(kEpochDays)}, {"calendar", std::string("standard")},
           {"standard_name", std::string("time")}},
          std::move(days)};
}

const std::string* text_attr(const File& f, const std::string& name) {
  const Attribute* a = f.attribute(name);
  return a ? std::get_if<std::string>(&a->values) : nullptr;
}

std::optional<std::uint32_t> dim_index(const File& f, const std::string& name) {
  for (std::uint32_t k = 0; k < f.dims.size(); ++k) {
    if (f.dims[k].name == name) return k;
  }
  return std::nullopt;
}

template <typename T>
const std::vector<T>& data_of(const File& f, const std::string& name) {
  const Variable* v = f.variable(name);
  if (!v) throw Error(Errc::BadGridFile, name, "variable not found");
  const auto* data = std::get_if<std::vector<T>>(&v->data);
  if (!data) throw Error(Errc::BadGridFile, name, "unexpected variable type");
  return *data;
}

Date date_from_days(double days) { return Date{std::chrono::days{static_cast<long>(std::floor(days))}}; }

std::vector<ProvenanceRecord> parse_provenance(const std::string& text) {
  std::vector<ProvenanceRecord> out;
  if (text == "none" || text.empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(';', start), text.size());
    const std::string item = text.substr(start, end - start);
    const auto colon = item.find(':'), arrow = item.find("<-"), paren = item.find('(');
    if (colon == std::string::npos || arrow == std::string::npos || paren == std::string::npos || item.back() != ')') {
      throw Error(Errc::BadGridFile, "fallback_provenance", "cannot parse '" + item + "'");
    }
    ProvenanceRecord r;
    r.variable = item.substr(0, colon);
    r.requested = parse_date(item.substr(colon + 1, arrow - colon - 1));
    r.served = parse_date(item.substr(arrow + 2, paren - arrow - 2));
    r.fallback = parse_contingency(item.substr(paren + 1, item.size() - paren - 2));
    out.push_back(std::move(r));
    start = end + 1;
  }
  return out;
}

Grid drop_time(const Grid& g) {
  return Grid::make_static(g.name(), g.units(), g.lat(), g.lon(), g.values(), g.missing());
}

}  // namespace

nc::File danger_netcdf(const DangerMap& map) {
  const Grid& p = map.p_fire;
  if (!map.category.same_lat_lon(p)) throw Error(Errc::GridMismatch, "category", "category and p_fire grids differ");
  File f;
  f.dims = {{"time", 1}, {"lat", static_cast<std::uint32_t>(p.ny())}, {"lon", static_cast<std::uint32_t>(p.nx())}};
  f.attributes.push_back({"Conventions", std::string("CF-1.8")});
  f.attributes.push_back({"title", std::string("Fire danger index")});
  if (!map.pilot.empty()) f.attributes.push_back({"pilot", map.pilot});
  f.attributes.push_back({"forecast_date", format_date(map.forecast_date)});
  f.attributes.push_back({"fallback_provenance", format_provenance(map.provenance)});

  f.variables.push_back(time_variable(0, {epoch_days(map.forecast_date)}));
  f.variables.push_back(coord_variable("lat", 1, p.lat()));
  f.variables.push_back(coord_variable("lon", 2, p.lon()));
  f.variables.push_back({"p_fire",
                         {0, 1, 2},
                         {{"long_name", std::string("probability of fire")}, {"units", std::string("1")}},
                         p.values()});
  std::vector<std::int32_t> category(map.category.values().size());
  std::transform(map.category.values().begin(), map.category.values().end(), category.begin(),
                 [](float v) { return static_cast<std::int32_t>(v); });
  f.variables.push_back({"category",
                         {0, 1, 2},
                         {{"long_name", std::string("fire danger category")},
                          {"units", std::string("1")},
                          {"thresholds", map.thresholds}},
                         std::move(category)});
  return f;
}

std::vector<std::uint8_t> encode_netcdf3(const DangerMap& map) { return nc::encode(danger_netcdf(map)); }

void write_netcdf3(const DangerMap& map, const std::filesystem::path& path) {
  write_file_atomic(path, encode_netcdf3(map));
}

DangerMap decode_netcdf3_danger(std::span<const std::uint8_t> bytes) {
  const File f = nc::decode(bytes);
  DangerMap out;
  out.p_fire = drop_time(nc::grid_from_file(f, "p_fire"));
  const Grid cat = drop_time(nc::grid_from_file(f, "category"));
  out.category = Grid::like(out.p_fire, "category", "1", cat.values());
  std::vector<float> nofire(out.p_fire.values().size());
  for (std::size_t k = 0; k < nofire.size(); ++k) nofire[k] = 1.0f - out.p_fire.values()[k];
  out.p_nofire = Grid::like(out.p_fire, "p_nofire", "1", std::move(nofire));
  if (const auto* s = text_attr(f, "pilot")) out.pilot = *s;
  if (const auto* s = text_attr(f, "forecast_date")) out.forecast_date = parse_date(*s);
  if (const auto* s = text_attr(f, "fallback_provenance")) out.provenance = parse_provenance(*s);
  if (const Variable* v = f.variable("category")) {
    if (const Attribute* a = v->attribute("thresholds")) {
      if (const auto* t = std::get_if<std::vector<double>>(&a->values)) out.thresholds = *t;
    }
  }
  return out;
}

DangerMap read_netcdf3_danger(const std::filesystem::path& path) {
  return decode_netcdf3_danger(read_file_bytes(path));
}

nc::File snapshot_netcdf(const SampleTensor& s, const std::string& pilot,
                         const std::vector<ProvenanceRecord>& provenance) {
  if (s.nf == 0 || s.features.empty()) throw Error(Errc::EmptySample, "snapshot", "sample has no features");
  if (s.features.size() != s.nf || s.dates.size() != s.days || s.lat.size() != s.h || s.lon.size() != s.w ||
      s.values.size() != s.nf * s.days * s.h * s.w) {
    throw Error(Errc::ShapeMismatch, "snapshot", "inconsistent sample tensor");
  }
  std::string names;
  for (const auto& n : s.features) {
    if (n.empty() || n.find(',') != std::string::npos) {
      throw Error(Errc::BadArgument, n, "feature names must be non-empty and free of commas");
    }
    names += (names.empty() ? "" : ",") + n;
  }
  File f;
  f.dims = {{"feature", static_cast<std::uint32_t>(s.nf)},
            {"time", static_cast<std::uint32_t>(s.days)},
            {"lat", static_cast<std::uint32_t>(s.h)},
            {"lon", static_cast<std::uint32_t>(s.w)}};
  f.attributes.push_back({"Conventions", std::string("CF-1.8")});
  f.attributes.push_back({"title", std::string("Model input sample")});
  if (!pilot.empty()) f.attributes.push_back({"pilot", pilot});
  f.attributes.push_back({"features", names});
  f.attributes.push_back({"fallback_provenance", format_provenance(provenance)});
  std::vector<double> days;
  for (Date d : s.dates) days.push_back(epoch_days(d));
  f.variables.push_back(time_variable(1, std::move(days)));
  f.variables.push_back(coord_variable("lat", 2, s.lat));
  f.variables.push_back(coord_variable("lon", 3, s.lon));
  f.variables.push_back({"sample", {0, 1, 2, 3}, {{"long_name", std::string("scaled model input")}}, s.values});
  return f;
}

std::vector<std::uint8_t> encode_input_snapshot(const SampleTensor& sample, const std::string& pilot,
                                                const std::vector<ProvenanceRecord>& provenance) {
  return nc::encode(snapshot_netcdf(sample, pilot, provenance));
}

void write_input_snapshot(const SampleTensor& sample, const std::filesystem::path& path, const std::string& pilot,
                          const std::vector<ProvenanceRecord>& provenance) {
  write_file_atomic(path, encode_input_snapshot(sample, pilot, provenance));
}

SampleTensor decode_input_snapshot(std::span<const std::uint8_t> bytes, std::vector<ProvenanceRecord>* provenance) {
  const File f = nc::decode(bytes);
  const auto feature = dim_index(f, "feature"), time = dim_index(f, "time");
  const auto lat = dim_index(f, "lat"), lon = dim_index(f, "lon");
  if (!feature || !time || !lat || !lon) throw Error(Errc::BadGridFile, "snapshot", "missing dimensions");
  const Variable* sample = f.variable("sample");
  if (!sample || sample->dimids != std::vector<std::uint32_t>{*feature, *time, *lat, *lon}) {
    throw Error(Errc::BadGridFile, "sample", "expected dims (feature, time, lat, lon)");
  }
  SampleTensor s;
  s.nf = f.dims[*feature].length;
  s.days = f.dims[*time].length;
  s.h = f.dims[*lat].length;
  s.w = f.dims[*lon].length;
  s.values = data_of<float>(f, "sample");
  s.lat = data_of<double>(f, "lat");
  s.lon = data_of<double>(f, "lon");
  for (double d : data_of<double>(f, "time")) s.dates.push_back(date_from_days(d));
  const std::string* names = text_attr(f, "features");
  if (!names) throw Error(Errc::BadGridFile, "features", "missing feature-name attribute");
  std::size_t start = 0;
  while (start <= names->size()) {
    const auto end = std::min(names->find(',', start), names->size());
    s.features.push_back(names->substr(start, end - start));
    start = end + 1;
  }
  if (s.features.size() != s.nf) throw Error(Errc::BadGridFile, "features", "name count does not match dimension");
  if (provenance) {
    const std::string* text = text_attr(f, "fallback_provenance");
    *provenance = text ? parse_provenance(*text) : std::vector<ProvenanceRecord>{};
  }
  return s;
}

SampleTensor read_input_snapshot(const std::filesystem::path& path, std::vector<ProvenanceRecord>* provenance) {
  return decode_input_snapshot(read_file_bytes(path), provenance);
}

std::vector<Grid> unstack_sample(const SampleTensor& s) {
  std::vector<TimePoint> times;
  for (Date d : s.dates) times.push_back(to_timepoint(d));
  std::vector<Grid> out;
  const std::size_t block = s.days * s.h * s.w;
  for (std::size_t f = 0; f < s.nf; ++f) {
    std::vector<float> values(s.values.begin() + static_cast<std::ptrdiff_t>(f * block),
                              s.values.begin() + static_cast<std::ptrdiff_t>((f + 1) * block));
    out.push_back(Grid::make_timed(s.features[f], "", times, s.lat, s.lon, std::move(values)));
  }
  return out;
}

Grid fdi_window_max(const std::vector<DangerMap>& maps, std::size_t window) {
  if (window == 0 || window > maps.size()) {
    throw Error(Errc::WindowTooLarge, std::to_string(window),
                "window must be between 1 and the number of maps (" + std::to_string(maps.size()) + ")");
  }
  const Grid& last = maps.back().p_fire;
  for (const auto& m : maps) {
    if (!m.p_fire.same_lat_lon(last)) throw Error(Errc::GridMismatch, format_date(m.forecast_date));
  }
  std::vector<float> out = last.values();
  for (std::size_t k = maps.size() - window; k + 1 < maps.size(); ++k) {
    const Grid& g = maps[k].p_fire;
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = std::fmax(out[p], g.values()[p]);
  }
  return Grid::like(last, "p_fire_max", "1", std::move(out));
}

std::string geojson_file_name(const std::string& pilot, Date date) {
  return "fdi_" + pilot + "_" + format_date(date) + ".geojson";
}

std::string netcdf_file_name(const std::string& pilot, Date date) {
  return "fdi_" + pilot + "_" + format_date(date) + ".nc";
}

std::string snapshot_file_name(const std::string& pilot, Date date) {
  return "input_" + pilot + "_" + format_date(date) + ".nc";
}

}  // namespace opcast

#include <cmath>
#include <cstdio>

#include "opcast/error.hpp"
#include "opcast/io.hpp"
#include "opcast/output.hpp"

namespace opcast {

namespace {

void put_fixed(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  out += buf;
}

void put_point(std::string& out, double lon, double lat) {
  out += '[';
  put_fixed(out, lon);
  out += ',';
  put_fixed(out, lat);
  out += ']';
}

double spacing_of(const std::vector<double>& coords) {
  return coords.size() > 1 ? coords[1] - coords[0] : 0.0;
}

}  // namespace

std::vector<double> cell_edges(const std::vector<double>& c, double fallback_spacing) {
  std::vector<double> e(c.size() + 1);
  if (c.empty()) return {};
  if (c.size() == 1) {
    e[0] = c[0] - fallback_spacing / 2;
    e[1] = c[0] + fallback_spacing / 2;
    return e;
  }
  e.front() = c.front() - (c[1] - c[0]) / 2;
  for (std::size_t k = 1; k < c.size(); ++k) e[k] = (c[k - 1] + c[k]) / 2;
  e.back() = c.back() + (c.back() - c[c.size() - 2]) / 2;
  return e;
}

std::string geojson_text(const DangerMap& map, bool suppress_category_1) {
  const Grid& p = map.p_fire;
  if (!map.category.same_lat_lon(p)) throw Error(Errc::GridMismatch, "category", "category and p_fire grids differ");
  const double lat_step = spacing_of(p.lat()), lon_step = spacing_of(p.lon());
  const double default_step = 0.1;
  const auto lat_edges = cell_edges(p.lat(), lat_step > 0 ? lat_step : (lon_step > 0 ? lon_step : default_step));
  const auto lon_edges = cell_edges(p.lon(), lon_step > 0 ? lon_step : (lat_step > 0 ? lat_step : default_step));
  const std::string date = format_date(map.forecast_date);

  std::string out = R"({"type":"FeatureCollection","features":[)";
  bool first = true;
  for (std::size_t i = 0; i < p.ny(); ++i) {
    for (std::size_t j = 0; j < p.nx(); ++j) {
      const int category = static_cast<int>(map.category.at(i, j));
      if (suppress_category_1 && category == 1) continue;
      out += first ? "\n" : ",\n";
      first = false;
      const double s = lat_edges[i], n = lat_edges[i + 1], w = lon_edges[j], e = lon_edges[j + 1];
      out += R"({"type":"Feature","geometry":{"type":"Polygon","coordinates":[[)";
      put_point(out, w, s);
      out += ',';
      put_point(out, e, s);
      out += ',';
      put_point(out, e, n);
      out += ',';
      put_point(out, w, n);
      out += ',';
      put_point(out, w, s);
      out += R"(]]},"properties":{"p_fire":)";
      const float v = p.at(i, j);
      if (p.is_missing(v)) out += "null";
      else put_fixed(out, v);
      out += ",\"category\":" + std::to_string(category) + ",\"date\":\"" + date + "\",\"lat\":";
      put_fixed(out, p.lat()[i]);
      out += ",\"lon\":";
      put_fixed(out, p.lon()[j]);
      out += "}}";
    }
  }
  out += "\n]}\n";
  return out;
}

void write_geojson(const DangerMap& map, const std::filesystem::path& path, bool suppress_category_1) {
  write_file_atomic(path, geojson_text(map, suppress_category_1));
}

}  // namespace opcast

#include "demo_assets.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>

#include "opcast/io.hpp"
#include "opcast/netcdf.hpp"
#include "opcast/output.hpp"

namespace opcast::assets {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> axis(int first, int count, double denom) {
  std::vector<double> out;
  for (int k = first; k < first + count; ++k) out.push_back(k / denom);
  return out;
}

// 20 x 20 at 0.1 degrees, 39.8..41.7 N and 14.8..16.7 E
std::vector<double> weather_lat() { return axis(398, 20, 10.0); }
std::vector<double> weather_lon() { return axis(148, 20, 10.0); }

double day_number(Date d) { return static_cast<double>(d.time_since_epoch().count()); }

double field(const std::string& v, double hour_of_day, double day, double lat, double lon) {
  const double diurnal = std::sin(kTwoPi * (hour_of_day - 9.0) / 24.0);
  const double t2m = 293.15 + 6.0 * diurnal + 0.7 * std::fmod(day, 5.0) - 3.0 * (lat - 40.0) + 1.5 * (lon - 15.0) +
                     2.0 * std::sin(3.0 * lat) * std::cos(2.0 * lon);
  if (v == "t2m") return t2m;
  if (v == "d2m") {
    const double spread = 4.0 + 3.0 * (1.0 + std::sin(kTwoPi * (hour_of_day - 15.0) / 24.0)) / 2.0;
    return t2m - spread - 1.2 * (lon - 14.8);
  }
  if (v == "u10") return 3.0 + 2.0 * std::sin(kTwoPi * hour_of_day / 24.0 + lat) + 0.3 * std::fmod(day, 3.0);
  if (v == "v10") return -1.0 + 2.0 * std::cos(kTwoPi * hour_of_day / 24.0 + lon);
  return 0.0;
}

std::vector<std::uint8_t> text_bytes(const std::string& s) { return {s.begin(), s.end()}; }

DangerMap golden_map(std::vector<double> lat, std::vector<double> lon, std::vector<float> p) {
  DangerMap m;
  m.thresholds = {0.2, 0.4, 0.6, 0.8};
  m.p_fire = Grid::make_static("p_fire", "1", lat, lon, p);
  std::vector<float> q(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) q[k] = 1.0f - p[k];
  m.p_nofire = Grid::make_static("p_nofire", "1", lat, lon, std::move(q));
  m.category = classify_danger(m.p_fire, m.thresholds);
  m.forecast_date = parse_date(kDemoDate);
  m.pilot = "golden";
  return m;
}

}  // namespace

Grid hourly_weather(const std::string& variable, Date date) {
  const auto lat = weather_lat(), lon = weather_lon();
  std::vector<TimePoint> time;
  std::vector<float> values;
  const TimePoint start = to_timepoint(date - std::chrono::days{2});
  for (int h = 0; h < 72; ++h) {
    const TimePoint t = start + std::chrono::hours{h};
    time.push_back(t);
    const double day = day_number(floor_day(t));
    for (double y : lat) {
      for (double x : lon) values.push_back(static_cast<float>(field(variable, h % 24, day, y, x)));
    }
  }
  const std::string units = variable == "u10" || variable == "v10" ? "m s-1" : "K";
  return Grid::make_timed(variable, units, std::move(time), lat, lon, std::move(values));
}

Grid ndvi_snapshot(Date request) {
  // 16-day composites: the two most recent composite dates up to `request`.
  const Date anchor = parse_date("2024-06-22");
  const auto offset = (request - anchor).count();
  const Date latest = anchor + std::chrono::days{(offset >= 0 ? offset / 16 : (offset - 15) / 16) * 16};
  const std::vector<Date> dates{latest - std::chrono::days{16}, latest};
  const auto lat = axis(796, 39, 20.0), lon = axis(296, 39, 20.0);
  std::vector<TimePoint> time;
  std::vector<float> values;
  for (Date d : dates) {
    time.push_back(to_timepoint(d));
    const double season = 0.02 * std::fmod(day_number(d) / 16.0, 4.0);
    for (std::size_t i = 0; i < lat.size(); ++i) {
      for (std::size_t j = 0; j < lon.size(); ++j) {
        const double v = 0.45 + 0.2 * std::sin(2.0 * lat[i] + lon[j]) - season;
        values.push_back(i == 10 && j == 12 ? kNaN : static_cast<float>(v));
      }
    }
  }
  return Grid::make_timed("ndvi", "1", std::move(time), lat, lon, std::move(values));
}

Grid demo_dem() {
  const auto lat = weather_lat(), lon = weather_lon();
  std::vector<float> values;
  for (double y : lat) {
    for (double x : lon) {
      const double r2 = (y - 40.8) * (y - 40.8) + (x - 15.7) * (x - 15.7);
      values.push_back(static_cast<float>(150.0 + 900.0 * std::exp(-r2 / 0.18) + 40.0 * (x - 14.8)));
    }
  }
  return Grid::make_static("elevation", "m", lat, lon, std::move(values));
}

ModelConfig demo_model_config() {
  ModelConfig cfg;
  cfg.nf = 5;
  cfg.days = 3;
  cfg.hidden = 16;
  cfg.kernel = 3;
  return cfg;
}

ConvLstmWeights demo_weights() { return random_weights(demo_model_config(), 20240709, 0.35f); }

std::string demo_stats_json() {
  const json stats = {
      {"t2m", {{"mean", 298.0}, {"std", 4.0}, {"fill", 0.0}}},
      {"rh", {{"mean", 45.0}, {"std", 15.0}, {"fill", 0.0}}},
      {"wind", {{"mean", 4.5}, {"std", 1.5}, {"fill", 0.0}}},
      {"ndvi", {{"mean", 0.45}, {"std", 0.15}, {"fill", 0.0}}},
      {"slope", {{"mean", 3.0}, {"std", 2.5}, {"fill", 0.0}}},
  };
  return stats.dump(2) + "\n";
}

std::map<std::string, std::vector<std::uint8_t>> demo_files() {
  std::map<std::string, std::vector<std::uint8_t>> files;
  json datasets = json::object();

  const std::vector<Date> weather_dates{parse_date("2024-07-08"), parse_date("2024-07-09")};
  for (const std::string v : {"t2m", "d2m", "u10", "v10"}) {
    const std::string name = "era5_" + v;
    json dates = json::array();
    for (Date d : weather_dates) {
      files["fixtures/demo/" + name + "/" + format_date(d) + ".opgrid"] = encode_opgrid(hourly_weather(v, d));
      dates.push_back(format_date(d));
    }
    datasets[name] = {{"dates", dates}, {"fail", json::array()}};
  }

  json ndvi_dates = json::array();
  for (const char* d : {"2024-07-07", "2024-07-08"}) {
    files[std::string("fixtures/demo/modis_ndvi/") + d + ".opgrid"] = encode_opgrid(ndvi_snapshot(parse_date(d)));
    ndvi_dates.push_back(d);
  }
  datasets["modis_ndvi"] = {{"dates", ndvi_dates}, {"fail", json::array()}};
  files["fixtures/demo/manifest.json"] = text_bytes(json{{"datasets", datasets}}.dump(2) + "\n");

  nc::File dem = nc::file_from_grid(demo_dem());
  dem.attributes.push_back({"title", std::string("Synthetic elevation for the demo pilot")});
  files["data/dem_demo.nc"] = nc::encode(dem);

  files["pilots/demo/model.opfw"] = encode_weights(demo_model_config(), demo_weights());
  files["pilots/demo/stats.json"] = text_bytes(demo_stats_json());
  return files;
}

std::map<std::string, std::vector<std::uint8_t>> golden_files() {
  std::map<std::string, std::vector<std::uint8_t>> files;

  files["danger_1x1.nc"] = encode_netcdf3(golden_map({40.0}, {15.0}, {0.4f}));

  std::vector<float> p;
  for (int k = 0; k < 20; ++k) p.push_back(static_cast<float>(k) / 19.0f);
  DangerMap m = golden_map(axis(400, 4, 10.0), axis(150, 5, 10.0), p);
  m.provenance = {{"ndvi", parse_date("2024-07-09"), parse_date("2024-07-08"), Contingency::latest_date}};
  files["danger_4x5.nc"] = encode_netcdf3(m);

  SampleTensor s;
  s.nf = 2;
  s.days = 3;
  s.h = 3;
  s.w = 4;
  s.features = {"t2m", "ndvi"};
  s.dates = trailing_days(parse_date(kDemoDate), 3);
  s.lat = axis(400, 3, 10.0);
  s.lon = axis(150, 4, 10.0);
  for (std::size_t k = 0; k < 2 * 3 * 3 * 4; ++k) s.values.push_back(static_cast<float>(k) * 0.25f - 1.0f);
  files["snapshot_2x3x3x4.nc"] = encode_input_snapshot(s, "golden", m.provenance);

  std::vector<float> dem;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 6; ++j) dem.push_back(static_cast<float>(100 * i + 10 * j));
  }
  files["dem_5x6.nc"] = nc::encode(nc::file_from_grid(
      Grid::make_static("elevation", "m", axis(400, 5, 10.0), axis(150, 6, 10.0), std::move(dem))));
  return files;
}

int write_tree(const fs::path& root, const std::map<std::string, std::vector<std::uint8_t>>& files) {
  int changed = 0;
  for (const auto& [rel, bytes] : files) {
    const fs::path path = root / rel;
    if (fs::exists(path) && read_file_bytes(path) == bytes) continue;
    write_file_atomic(path, bytes);
    ++changed;
  }
  return changed;
}

}  // namespace opcast::assets

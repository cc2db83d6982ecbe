#include <algorithm>
#include <cmath>
#include <numbers>

#include "opcast/error.hpp"
#include "opcast/transform.hpp"

namespace opcast {

namespace {

void require_same_coords(const Grid& a, const Grid& b) {
  if (!a.same_lat_lon(b) || a.has_time() != b.has_time() || a.time() != b.time()) {
    throw Error(Errc::GridMismatch, b.name(), "coordinates differ from " + a.name());
  }
}

Grid rebuild(const Grid& shape, std::string name, std::string units, std::vector<TimePoint> time,
             std::vector<float> values) {
  return Grid::make_timed(std::move(name), std::move(units), std::move(time), shape.lat(), shape.lon(),
                          std::move(values), shape.missing());
}

void require_hourly(const Grid& g) {
  if (!g.has_time() || g.time().empty()) throw Error(Errc::NotHourly, g.name(), "no time axis");
  using std::chrono::hours;
  auto min_gap = hours::max();
  for (std::size_t k = 0; k < g.time().size(); ++k) {
    const auto since_epoch = g.time()[k].time_since_epoch();
    if (since_epoch % hours{1} != std::chrono::seconds{0}) {
      throw Error(Errc::NotHourly, g.name(), format_timestamp(g.time()[k]) + " is not on the hour");
    }
    if (k > 0) min_gap = std::min(min_gap, std::chrono::duration_cast<hours>(g.time()[k] - g.time()[k - 1]));
  }
  if (g.time().size() > 1 && min_gap != hours{1}) {
    throw Error(Errc::NotHourly, g.name(), "time steps are not hourly");
  }
}

}  // namespace

Grid wind_speed_from_uv(const Grid& u, const Grid& v) {
  require_same_coords(u, v);
  std::vector<float> out(u.values().size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const float a = u.values()[k];
    const float b = v.values()[k];
    if (u.is_missing(a) || v.is_missing(b)) {
      out[k] = kNaN;
      continue;
    }
    out[k] = static_cast<float>(std::sqrt(double{a} * a + double{b} * b));
  }
  return Grid::like(u, "sfcWind", "m/s", std::move(out));
}

Grid daily_aggregate(const Grid& hourly, AggregateMode mode) {
  require_hourly(hourly);
  const std::size_t plane = hourly.plane();
  std::vector<TimePoint> days;
  std::vector<float> out;
  std::vector<std::size_t> counts;

  for (std::size_t t = 0; t < hourly.nt(); ++t) {
    const TimePoint day{floor_day(hourly.time()[t])};
    if (days.empty() || days.back() != day) {
      days.push_back(day);
      out.insert(out.end(), plane, kNaN);
      counts.assign(plane, 0);
    }
    float* acc = out.data() + (days.size() - 1) * plane;
    const auto slice = hourly.slice(t);
    for (std::size_t k = 0; k < plane; ++k) {
      const float v = slice[k];
      if (hourly.is_missing(v)) continue;
      if (counts[k]++ == 0) {
        acc[k] = v;
      } else {
        acc[k] = mode == AggregateMode::max ? std::max(acc[k], v) : std::min(acc[k], v);
      }
    }
  }
  return rebuild(hourly, hourly.name(), hourly.units(), std::move(days), std::move(out));
}

Grid fill_time_dimension(const Grid& input, const std::vector<Date>& dates) {
  if (!input.has_time() || input.time().empty()) {
    throw Error(Errc::BadArgument, input.name(), "fill_time_dimension needs a time axis");
  }
  std::vector<TimePoint> times;
  std::vector<float> values;
  values.reserve(dates.size() * input.plane());
  for (Date d : dates) {
    const TimePoint tp = to_timepoint(d);
    auto it = std::upper_bound(input.time().begin(), input.time().end(), tp);
    if (it == input.time().begin()) throw Error(Errc::NoPriorObservation, format_date(d), input.name());
    const auto slice = input.slice(static_cast<std::size_t>(it - input.time().begin()) - 1);
    values.insert(values.end(), slice.begin(), slice.end());
    times.push_back(tp);
  }
  return rebuild(input, input.name(), input.units(), std::move(times), std::move(values));
}

Grid compute_slope(const Grid& dem) {
  if (dem.has_time()) throw Error(Errc::BadArgument, dem.name(), "DEM must be static");
  const std::size_t ny = dem.ny(), nx = dem.nx();
  const double dlat = ny > 1 ? (dem.lat().back() - dem.lat().front()) / static_cast<double>(ny - 1) : 1.0;
  const double dlon = nx > 1 ? (dem.lon().back() - dem.lon().front()) / static_cast<double>(nx - 1) : 1.0;
  const double dy = kMetersPerDegree * dlat;
  constexpr double to_rad = std::numbers::pi / 180.0;
  const float max_slope = std::nextafter(90.0f, 0.0f);

  auto z = [&](std::ptrdiff_t i, std::ptrdiff_t j) -> double {
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(ny) - 1);
    j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(nx) - 1);
    const float v = dem.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    return dem.is_missing(v) ? std::numeric_limits<double>::quiet_NaN() : double{v};
  };

  std::vector<float> out(ny * nx);
  for (std::size_t ui = 0; ui < ny; ++ui) {
    const double dx = kMetersPerDegree * std::cos(dem.lat()[ui] * to_rad) * dlon;
    const auto i = static_cast<std::ptrdiff_t>(ui);
    for (std::size_t uj = 0; uj < nx; ++uj) {
      const auto j = static_cast<std::ptrdiff_t>(uj);
      // Rows ascend northward: i + 1 is the northern neighbour.
      const double nw = z(i + 1, j - 1), n = z(i + 1, j), ne = z(i + 1, j + 1);
      const double w = z(i, j - 1), e = z(i, j + 1);
      const double sw = z(i - 1, j - 1), s = z(i - 1, j), se = z(i - 1, j + 1);
      const double dzdx = ((ne + 2 * e + se) - (nw + 2 * w + sw)) / (8.0 * dx);
      const double dzdy = ((nw + 2 * n + ne) - (sw + 2 * s + se)) / (8.0 * dy);
      const double deg = std::atan(std::sqrt(dzdx * dzdx + dzdy * dzdy)) / to_rad;
      out[ui * nx + uj] = std::isnan(deg) ? kNaN : std::min(static_cast<float>(deg), max_slope);
    }
  }
  return Grid::make_static("slope", "degrees", dem.lat(), dem.lon(), std::move(out), dem.missing());
}

Grid relative_humidity(const Grid& t2m, const Grid& d2m) {
  require_same_coords(t2m, d2m);
  std::vector<float> out(t2m.values().size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const float tk = t2m.values()[k];
    const float tdk = d2m.values()[k];
    if (t2m.is_missing(tk) || d2m.is_missing(tdk)) {
      out[k] = kNaN;
      continue;
    }
    const double t = double{tk} - 273.15;
    const double td = double{tdk} - 273.15;
    const double rh = 100.0 * std::exp(kMagnusA * td / (kMagnusB + td) - kMagnusA * t / (kMagnusB + t));
    out[k] = static_cast<float>(std::clamp(rh, 0.0, 100.0));
  }
  return Grid::like(t2m, "relative_humidity", "%", std::move(out));
}

Grid standardize(const Grid& input, const ScalingStats& stats, const std::string& feature) {
  const FeatureStats& s = stats.at(feature);
  if (!(s.std > 0.0)) throw Error(Errc::ZeroSigma, feature);
  std::vector<float> out(input.values().size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const float v = input.values()[k];
    out[k] = input.is_missing(v) ? s.fill : static_cast<float>((double{v} - s.mean) / s.std);
  }
  return Grid::like(input, input.name(), "1", std::move(out));
}

Grid destandardize(const Grid& input, const ScalingStats& stats, const std::string& feature) {
  const FeatureStats& s = stats.at(feature);
  std::vector<float> out(input.values().size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = static_cast<float>(double{input.values()[k]} * s.std + s.mean);
  }
  return Grid::like(input, input.name(), input.units(), std::move(out));
}

TransformRegistry builtin_registry() {
  TransformRegistry r;
  r.register_transform("wind_speed_from_uv", [](const Grid& u, const TransformArgs& a) {
    return wind_speed_from_uv(u, a.grid(std::string(kVariableKey)));
  });
  r.register_transform("daily_aggregate", [](const Grid& g, const TransformArgs& a) {
    const std::string mode = a.string_or("mode", "max");
    if (mode != "max" && mode != "min") throw Error(Errc::BadArgument, "mode", "expected 'max' or 'min'");
    return daily_aggregate(g, mode == "max" ? AggregateMode::max : AggregateMode::min);
  });
  r.register_transform("daily_max", [](const Grid& g, const TransformArgs&) {
    return daily_aggregate(g, AggregateMode::max);
  });
  r.register_transform("daily_min", [](const Grid& g, const TransformArgs&) {
    return daily_aggregate(g, AggregateMode::min);
  });
  r.register_transform("fill_time_dimension", [](const Grid& g, const TransformArgs& a) {
    return fill_time_dimension(g, a.dates("dates"));
  });
  r.register_transform("compute_slope", [](const Grid&, const TransformArgs& a) {
    if (!a.has(std::string(kVariableKey))) throw Error(Errc::MissingDEM, "compute_slope", "needs variable: <dem>");
    return compute_slope(a.grid(std::string(kVariableKey)));
  });
  r.register_transform("relative_humidity", [](const Grid& g, const TransformArgs& a) {
    const auto refs = a.grids(std::string(kVariableKey));
    if (refs.size() == 2) return relative_humidity(*refs[0], *refs[1]);
    if (refs.size() == 1) return relative_humidity(g, *refs[0]);
    throw Error(Errc::BadArgument, "variable", "expected [t2m, d2m] or the dew point alone");
  });
  r.register_transform("standardize", [](const Grid& g, const TransformArgs& a) {
    if (!a.env().stats) throw Error(Errc::UnknownFeature, a.env().variable, "no scaling statistics loaded");
    return standardize(g, *a.env().stats, a.string_or("feature", a.env().variable));
  });
  return r;
}

}  // namespace opcast

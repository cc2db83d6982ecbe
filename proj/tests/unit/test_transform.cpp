#include <doctest.h>

#include <bit>
#include <cmath>
#include <numbers>

#include "opcast/transform.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace opcast;
using namespace opcast::testing;

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

std::shared_ptr<const ScalingStats> stats_of(std::map<std::string, FeatureStats> entries) {
  return std::make_shared<const ScalingStats>(std::move(entries));
}

Grid hourly(Rng& rng, const std::string& name, Date first, int hours, std::size_t ny, std::size_t nx, float lo,
            float hi) {
  return Grid::make_timed(name, "K", hours_from(first, hours), axis(40.0, 0.1, ny), axis(15.0, 0.1, nx),
                          rng.floats(static_cast<std::size_t>(hours) * ny * nx, lo, hi));
}

std::vector<std::uint32_t> bits_of(const Grid& g) {
  std::vector<std::uint32_t> out;
  for (float v : g.values()) out.push_back(std::bit_cast<std::uint32_t>(v));
  return out;
}

TransformSpec spec_of(std::vector<std::string> functions, std::vector<std::string> kwargs = {}) {
  TransformSpec s;
  s.functions = std::move(functions);
  s.kwargs = kwargs.empty() ? std::vector<std::string>(s.functions.size()) : std::move(kwargs);
  return s;
}

/// Saturation vapour pressure over water (hPa), Magnus form.
double svp(double celsius) { return 6.1094 * std::exp(17.625 * celsius / (celsius + 243.04)); }

}  // namespace

TEST_SUITE("transform.stats") {
  TEST_CASE("parse") {
    const auto s = ScalingStats::parse(R"({"t2m": {"mean": 290, "std": 5}, "rh": {"mean": 1, "std": 2, "fill": -1}})");
    CHECK(s.at("t2m").mean == 290.0);
    CHECK(s.at("t2m").fill == 0.0f);
    CHECK(s.at("rh").fill == -1.0f);
    CHECK_ERRC(s.at("lst"), Errc::UnknownFeature);
    CHECK_ERRC(ScalingStats::parse(R"({"a": {"mean": 0, "std": 0}})"), Errc::ZeroSigma);
    CHECK_ERRC(ScalingStats::parse(R"({"a": {"mean": 0, "std": -1}})"), Errc::ZeroSigma);
    CHECK_ERRC(ScalingStats::parse(R"({"a": {"mean": 0}})"), Errc::BadConfig);
    CHECK_ERRC(ScalingStats::parse("{"), Errc::BadConfig);
  }
}

TEST_SUITE("transform.builtin") {
  TEST_CASE("wind speed") {
    const Grid u = constant_grid("u10", 3, 4, 3.0f), v = constant_grid("v10", 3, 4, 4.0f);
    const Grid w = wind_speed_from_uv(u, v);
    CHECK(w.name() == "sfcWind");
    CHECK(w.values() == std::vector<float>(12, 5.0f));
    CHECK(wind_speed_from_uv(constant_grid("u", 2, 2, 0), constant_grid("v", 2, 2, 0)).values() ==
          std::vector<float>(4, 0.0f));
    CHECK_ERRC(wind_speed_from_uv(u, constant_grid("v", 3, 5, 1)), Errc::GridMismatch);

    Rng rng(1);
    for (int round = 0; round < 50; ++round) {
      const Grid a = hourly(rng, "u", day("2024-07-09"), 3, 4, 5, -20, 20);
      const Grid b = hourly(rng, "v", day("2024-07-09"), 3, 4, 5, -20, 20);
      const Grid s = wind_speed_from_uv(a, b);
      for (std::size_t k = 0; k < s.values().size(); ++k) {
        REQUIRE(std::abs(s.values()[k] - std::hypot(a.values()[k], b.values()[k])) <= 1e-6 * (1 + s.values()[k]));
      }
    }
  }

  TEST_CASE("daily aggregate") {
    const auto one_day = Grid::make_timed("g", "1", hours_from(day("2024-07-09"), 24), {0.0}, {0.0},
                                          std::vector<float>(24, 7.0f));
    const Grid c = daily_aggregate(one_day, AggregateMode::max);
    CHECK(c.time() == midnights({day("2024-07-09")}));
    CHECK(c.values() == std::vector<float>{7.0f});

    std::vector<float> ramp;
    for (int h = 1; h <= 24; ++h) ramp.push_back(static_cast<float>(h));
    const auto r = Grid::make_timed("g", "1", hours_from(day("2024-07-09"), 24), {0.0}, {0.0}, ramp);
    CHECK(daily_aggregate(r, AggregateMode::max).values() == std::vector<float>{24.0f});
    CHECK(daily_aggregate(r, AggregateMode::min).values() == std::vector<float>{1.0f});
  }

  TEST_CASE("daily minimum of a humidity series") {
    // two days of hourly RH with a dry afternoon on each
    std::vector<float> rh;
    for (int h = 0; h < 48; ++h) rh.push_back(static_cast<float>(70 - 30 * std::sin((h % 24) * std::numbers::pi / 24)));
    const auto g = Grid::make_timed("rh", "%", hours_from(day("2024-07-08"), 48), {0.0}, {0.0}, rh);
    const Grid m = daily_aggregate(g, AggregateMode::min);
    CHECK(m.nt() == 2);
    CHECK(m.values()[0] == doctest::Approx(40.0).epsilon(1e-6));
    CHECK(m.values()[1] == doctest::Approx(40.0).epsilon(1e-6));
  }

  TEST_CASE("days without hours are absent, missing hours are skipped") {
    auto times = hours_from(day("2024-07-07"), 2);
    times.push_back(to_timepoint(day("2024-07-09")) + std::chrono::hours{5});
    const Grid gap = daily_aggregate(Grid::make_timed("g", "1", times, {0.0}, {0.0}, {1, 2, 3}), AggregateMode::max);
    CHECK(gap.time() == midnights({day("2024-07-07"), day("2024-07-09")}));
    CHECK(gap.values() == std::vector<float>{2, 3});
    const auto g = Grid::make_timed("g", "1", hours_from(day("2024-07-09"), 3), {0.0}, {0.0, 1.0},
                                    {kNaN, kNaN, 2, kNaN, 5, kNaN});
    const Grid m = daily_aggregate(g, AggregateMode::max);
    CHECK(m.values()[0] == 5.0f);
    CHECK(std::isnan(m.values()[1]));
  }

  TEST_CASE("daily aggregate rejects non hourly input") {
    CHECK_ERRC(daily_aggregate(constant_grid("g", 2, 2, 1), AggregateMode::max), Errc::NotHourly);
    const auto half = Grid::make_timed("g", "1", {to_timepoint(day("2024-07-09")) + std::chrono::minutes{30}}, {0.0},
                                       {0.0}, {1});
    CHECK_ERRC(daily_aggregate(half, AggregateMode::max), Errc::NotHourly);
    const auto daily = Grid::make_timed("g", "1", midnights({day("2024-07-08"), day("2024-07-09")}), {0.0}, {0.0},
                                        {1, 2});
    CHECK_ERRC(daily_aggregate(daily, AggregateMode::max), Errc::NotHourly);
  }

  TEST_CASE("daily aggregate matches a per-day scan and max >= min") {
    Rng rng(2);
    for (int round = 0; round < 100; ++round) {
      const int hours = rng.integer(1, 80);
      const Date first = day("2024-02-27");
      std::vector<TimePoint> times;
      const auto start = to_timepoint(first) + std::chrono::hours{rng.integer(0, 23)};
      for (int h = 0; h < hours; ++h) times.push_back(start + std::chrono::hours{h});
      auto values = rng.floats(static_cast<std::size_t>(hours) * 6, -10, 10);
      for (auto& v : values) {
        if (rng.chance(0.05)) v = kNaN;
      }
      const auto g = Grid::make_timed("g", "1", times, axis(40, 0.1, 2), axis(15, 0.1, 3), values);
      const Grid mx = daily_aggregate(g, AggregateMode::max);
      const Grid mn = daily_aggregate(g, AggregateMode::min);
      const auto want_max = naive_daily(g, true), want_min = naive_daily(g, false);
      REQUIRE(mx.nt() == want_max.size());
      std::size_t t = 0;
      for (const auto& [d, cells] : want_max) {
        REQUIRE(mx.time()[t] == to_timepoint(d));
        for (std::size_t k = 0; k < cells.size(); ++k) {
          const float got = mx.slice(t)[k], lo = mn.slice(t)[k];
          if (std::isnan(cells[k])) {
            REQUIRE(std::isnan(got));
            REQUIRE(std::isnan(lo));
          } else {
            REQUIRE(got == cells[k]);
            REQUIRE(lo == want_min.at(d)[k]);
            REQUIRE(got >= lo);
          }
        }
        ++t;
      }
    }
  }

  TEST_CASE("forward fill") {
    const Date d0 = day("2024-06-22"), d16 = day("2024-07-08");
    const auto g = Grid::make_timed("ndvi", "1", midnights({d0, d16}), {0.0}, {0.0, 1.0}, {0.1f, 0.2f, 0.3f, 0.4f});
    CHECK(bit_equal(fill_time_dimension(g, {d0, d16}), g));
    const auto span = trailing_days(d16 - std::chrono::days{1}, 16);
    REQUIRE(span.front() == d0);
    const Grid f = fill_time_dimension(g, span);
    CHECK(f.nt() == 16);
    for (std::size_t t = 0; t < 16; ++t) {
      CHECK(f.slice(t)[0] == 0.1f);
      CHECK(f.slice(t)[1] == 0.2f);
    }
    CHECK(fill_time_dimension(g, {day("2024-07-20")}).values() == std::vector<float>{0.3f, 0.4f});
    const Error e = caught([&] { fill_time_dimension(g, {day("2024-06-21")}); });
    CHECK(e.code() == Errc::NoPriorObservation);
    CHECK(e.subject() == "2024-06-21");
  }

  TEST_CASE("forward fill is a right-continuous step function") {
    Rng rng(3);
    for (int round = 0; round < 200; ++round) {
      std::vector<Date> obs;
      Date d = day("2024-01-01") + std::chrono::days{rng.integer(0, 5)};
      const int n = rng.integer(1, 5);
      for (int k = 0; k < n; ++k) {
        obs.push_back(d);
        d += std::chrono::days{rng.integer(1, 20)};
      }
      const auto g = Grid::make_timed("g", "1", midnights(obs), axis(0, 1, 2), axis(0, 1, 2), rng.floats(n * 4, 0, 1));
      std::vector<Date> requested;
      const int m = rng.integer(1, 10);
      Date r = day("2023-12-28") + std::chrono::days{rng.integer(0, 10)};
      for (int k = 0; k < m; ++k) {
        requested.push_back(r);
        r += std::chrono::days{rng.integer(1, 15)};
      }
      std::vector<float> want;
      if (!naive_forward_fill(g, requested, want)) {
        CHECK_ERRC(fill_time_dimension(g, requested), Errc::NoPriorObservation);
        continue;
      }
      const Grid f = fill_time_dimension(g, requested);
      REQUIRE(f.values() == want);
      REQUIRE(f.time() == midnights(requested));
    }
  }

  TEST_CASE("slope of a flat plane is zero") {
    const Grid s = compute_slope(constant_grid("dem", 5, 6, 420.0f));
    CHECK(s.values() == std::vector<float>(30, 0.0f));
    CHECK(s.name() == "slope");
    CHECK_ERRC(compute_slope(Grid::make_timed("dem", "m", hours_from(day("2024-07-09"), 1), {0.0}, {0.0}, {1})),
               Errc::BadArgument);
  }

  TEST_CASE("slope of a north-south ramp") {
    // z rises a metres per metre northward; exact at every interior cell
    for (double a : {0.05, 0.3, 1.0, 4.0}) {
      const auto lat = axis(40.0, 0.01, 6), lon = axis(15.0, 0.01, 5);
      std::vector<float> z;
      for (double y : lat) {
        for (std::size_t j = 0; j < lon.size(); ++j) z.push_back(static_cast<float>(a * (y - 40.0) * kMetersPerDegree));
      }
      const Grid s = compute_slope(Grid::make_static("dem", "m", lat, lon, z));
      for (std::size_t i = 1; i + 1 < lat.size(); ++i) {
        for (std::size_t j = 0; j < lon.size(); ++j) {
          CHECK(s.at(i, j) == doctest::Approx(std::atan(a) * kDeg).epsilon(1e-4));
        }
      }
    }
  }

  TEST_CASE("slope of an east-west ramp at the equator") {
    const double a = 0.5;
    const auto lat = axis(-0.0001, 0.0001, 3), lon = axis(10.0, 0.0001, 5);
    std::vector<float> z;
    for (std::size_t i = 0; i < lat.size(); ++i) {
      for (double x : lon) z.push_back(static_cast<float>(a * (x - 10.0) * kMetersPerDegree));
    }
    const Grid s = compute_slope(Grid::make_static("dem", "m", lat, lon, z));
    for (std::size_t j = 1; j + 1 < lon.size(); ++j) {
      CHECK(s.at(1, j) == doctest::Approx(std::atan(a) * kDeg).epsilon(1e-3));
    }
  }

  TEST_CASE("3x3 patch against the Horn stencil by hand") {
    // rows south to north: 1 2 3 / 4 5 6 / 7 8 9, scaled by 1000 m, at 0.01 degree spacing on the equator.
    // centre: dz/dx = ((9+2*6+3) - (7+2*4+1)) * 1000 / (8 dx) = 1000 / dx
    //         dz/dy = ((7+2*8+9) - (1+2*2+3)) * 1000 / (8 dy) = 3000 / dy
    const auto lat = std::vector<double>{-0.01, 0.0, 0.01}, lon = std::vector<double>{0.0, 0.01, 0.02};
    const Grid dem = Grid::make_static("dem", "m", lat, lon, {1000, 2000, 3000, 4000, 5000, 6000, 7000, 8000, 9000});
    const double d = 0.01 * kMetersPerDegree;
    const double expected = std::atan(std::sqrt(1.0 + 9.0) * 1000.0 / d) * kDeg;
    CHECK(compute_slope(dem).at(1, 1) == doctest::Approx(expected).epsilon(1e-5));
    // south-west corner with edge replication: neighbours outside repeat the border cell
    // dz/dx = ((2+2*2+5) - (1+2*1+4)) * 1000 / (8 dx) = 4000 / (8 dx)
    // dz/dy = ((4+2*4+5) - (1+2*1+2)) * 1000 / (8 dy) = 12000 / (8 dy)
    const double dx0 = kMetersPerDegree * std::cos(-0.01 * std::numbers::pi / 180) * 0.01;
    const double corner = std::atan(std::hypot(4000.0 / (8 * dx0), 12000.0 / (8 * d))) * kDeg;
    CHECK(compute_slope(dem).at(0, 0) == doctest::Approx(corner).epsilon(1e-5));
  }

  TEST_CASE("slope stays in [0, 90)") {
    Rng rng(4);
    for (int round = 0; round < 100; ++round) {
      const std::size_t ny = rng.integer(1, 7), nx = rng.integer(1, 7);
      const float scale = rng.chance(0.3) ? 1e7f : 2000.0f;
      const Grid s = compute_slope(random_static(rng, "dem", ny, nx, -scale, scale));
      for (float v : s.values()) {
        REQUIRE(v >= 0.0f);
        REQUIRE(v < 90.0f);
      }
    }
  }

  TEST_CASE("relative humidity") {
    const Grid t = constant_grid("t2m", 2, 2, 298.15f);
    CHECK(relative_humidity(t, t).values() == std::vector<float>(4, 100.0f));
    const Grid td = constant_grid("d2m", 2, 2, 288.15f);
    const double oracle = 100.0 * svp(15.0) / svp(25.0);
    CHECK(oracle == doctest::Approx(53.83).epsilon(1e-4));
    const Grid rh = relative_humidity(t, td);
    for (float v : rh.values()) CHECK(v == doctest::Approx(oracle).epsilon(1e-5));
    CHECK(relative_humidity(t, constant_grid("d2m", 2, 2, 300.0f)).values() == std::vector<float>(4, 100.0f));
    CHECK_ERRC(relative_humidity(t, constant_grid("d2m", 3, 2, 1)), Errc::GridMismatch);
  }

  TEST_CASE("relative humidity matches the vapour pressure ratio") {
    Rng rng(5);
    const Grid t = hourly(rng, "t2m", day("2024-07-09"), 4, 3, 3, 250, 320);
    const Grid td = hourly(rng, "d2m", day("2024-07-09"), 4, 3, 3, 240, 310);
    const Grid rh = relative_humidity(t, td);
    for (std::size_t k = 0; k < rh.values().size(); ++k) {
      const double want = std::clamp(100.0 * svp(td.values()[k] - 273.15) / svp(t.values()[k] - 273.15), 0.0, 100.0);
      REQUIRE(rh.values()[k] == doctest::Approx(want).epsilon(1e-5));
    }
  }

  TEST_CASE("standardize") {
    const ScalingStats stats({{"t2m", {290.0, 5.0, 0.0f}}});
    CHECK(standardize(constant_grid("t2m", 2, 3, 290.0f), stats, "t2m").values() == std::vector<float>(6, 0.0f));
    CHECK(standardize(constant_grid("t2m", 2, 3, 295.0f), stats, "t2m").values() == std::vector<float>(6, 1.0f));
    const auto with_gap = Grid::make_static("t2m", "K", {0.0}, {0.0, 1.0}, {kNaN, 300.0f});
    CHECK(standardize(with_gap, stats, "t2m").values() == std::vector<float>{0.0f, 2.0f});
    CHECK_ERRC(standardize(with_gap, stats, "lst"), Errc::UnknownFeature);
    CHECK_ERRC(ScalingStats({{"t2m", {290.0, 0.0, 0.0f}}}), Errc::ZeroSigma);
  }

  TEST_CASE("standardize with moments of the same grid") {
    Rng rng(6);
    for (int round = 0; round < 50; ++round) {
      const Grid g = random_static(rng, "f", 20, 25, rng.uniformf(-100, 0), rng.uniformf(1, 100));
      double sum = 0, sq = 0;
      for (float v : g.values()) sum += v;
      const double mean = sum / static_cast<double>(g.values().size());
      for (float v : g.values()) sq += (v - mean) * (v - mean);
      const double sd = std::sqrt(sq / static_cast<double>(g.values().size()));
      const ScalingStats stats({{"f", {mean, sd, 0.0f}}});
      const Grid s = standardize(g, stats, "f");
      double m2 = 0, s2 = 0;
      for (float v : s.values()) m2 += v;
      m2 /= static_cast<double>(s.values().size());
      for (float v : s.values()) s2 += (v - m2) * (v - m2);
      s2 = std::sqrt(s2 / static_cast<double>(s.values().size()));
      CHECK(std::abs(m2) < 1e-5);
      CHECK(std::abs(s2 - 1.0) < 1e-5);

      const Grid back = destandardize(s, stats, "f");
      for (std::size_t k = 0; k < g.values().size(); ++k) {
        REQUIRE(std::abs(back.values()[k] - g.values()[k]) <= 1e-5 * std::max(1.0f, std::abs(g.values()[k])));
      }
    }
  }

  TEST_CASE("transforms are pure") {
    Rng rng(7);
    const Grid u = hourly(rng, "u", day("2024-07-08"), 48, 4, 4, -10, 10);
    const Grid v = hourly(rng, "v", day("2024-07-08"), 48, 4, 4, -10, 10);
    const Grid dem = random_static(rng, "dem", 4, 4, 0, 1500);
    const ScalingStats stats({{"u", {0.0, 3.0, 0.0f}}});
    const auto dates = trailing_days(day("2024-07-09"), 2);
    CHECK(bits_of(wind_speed_from_uv(u, v)) == bits_of(wind_speed_from_uv(u, v)));
    CHECK(bits_of(daily_aggregate(u, AggregateMode::max)) == bits_of(daily_aggregate(u, AggregateMode::max)));
    CHECK(bits_of(fill_time_dimension(u, dates)) == bits_of(fill_time_dimension(u, dates)));
    CHECK(bits_of(compute_slope(dem)) == bits_of(compute_slope(dem)));
    CHECK(bits_of(relative_humidity(u, v)) == bits_of(relative_humidity(u, v)));
    CHECK(bits_of(standardize(u, stats, "u")) == bits_of(standardize(u, stats, "u")));
  }
}

TEST_SUITE("transform.cascade") {
  TEST_CASE("empty spec is the identity") {
    Rng rng(8);
    const Grid g = random_static(rng, "g", 3, 3);
    CHECK(bit_equal(apply_cascade({}, g, {}, builtin_registry()), g));
  }

  TEST_CASE("daily max then standardize versus the reverse") {
    // the afternoon of 2024-07-09 is missing and every observed value sits below the mean
    std::vector<float> values;
    for (int h = 0; h < 48; ++h) values.push_back(h >= 36 ? kNaN : static_cast<float>(280 + (h % 24) * 0.25));
    const auto g = Grid::make_timed("t2m", "K", hours_from(day("2024-07-08"), 48), {0.0}, {0.0}, values);
    PipelineEnv env;
    env.variable = "t2m";
    env.stats = stats_of({{"t2m", {290.0, 5.0, 0.0f}}});
    const auto reg = builtin_registry();

    const Grid forward = apply_cascade(spec_of({"daily_max", "standardize"}), g, env, reg);
    const Grid manual = standardize(daily_aggregate(g, AggregateMode::max), *env.stats, "t2m");
    CHECK(bit_equal(forward, manual));
    CHECK(forward.values()[0] == doctest::Approx((280 + 23 * 0.25 - 290) / 5.0));
    CHECK(forward.values()[1] == doctest::Approx((280 + 11 * 0.25 - 290) / 5.0));

    const Grid reverse = apply_cascade(spec_of({"standardize", "daily_max"}), g, env, reg);
    CHECK(bit_equal(reverse, daily_aggregate(standardize(g, *env.stats, "t2m"), AggregateMode::max)));
    CHECK(reverse.values()[1] == 0.0f);
    CHECK_FALSE(bit_equal(forward, reverse));
  }

  TEST_CASE("non commuting custom steps follow list order") {
    TransformRegistry reg;
    reg.register_transform("add1", [](const Grid& g, const TransformArgs&) {
      auto v = g.values();
      for (auto& x : v) x += 1;
      return Grid::like(g, g.name(), g.units(), v);
    });
    reg.register_transform("scale", [](const Grid& g, const TransformArgs& a) {
      auto v = g.values();
      for (auto& x : v) x = static_cast<float>(x * a.number("by"));
      return Grid::like(g, g.name(), g.units(), v);
    });
    Rng rng(9);
    for (int round = 0; round < 50; ++round) {
      const Grid g = random_static(rng, "g", 3, 4, -10, 10);
      const auto fg = apply_cascade(spec_of({"add1", "scale"}, {"", "{by: 3}"}), g, {}, reg);
      const auto gf = apply_cascade(spec_of({"scale", "add1"}, {"{by: 3}", ""}), g, {}, reg);
      for (std::size_t k = 0; k < g.values().size(); ++k) {
        REQUIRE(fg.values()[k] == (g.values()[k] + 1) * 3);
        REQUIRE(gf.values()[k] == g.values()[k] * 3 + 1);
      }
      CHECK_FALSE(bit_equal(fg, gf));
    }
  }

  TEST_CASE("grid references and context arguments") {
    Rng rng(10);
    PipelineEnv env;
    env.variable = "wind";
    const Grid u = hourly(rng, "u10", day("2024-07-09"), 24, 2, 2, -5, 5);
    const Grid v = hourly(rng, "v10", day("2024-07-09"), 24, 2, 2, -5, 5);
    env.consumed.emplace("v10", v);
    env.context["dates"] = Value(Value::List{Value("2024-07-09")});
    const auto reg = builtin_registry();

    const Grid w = apply_cascade(spec_of({"wind_speed_from_uv", "daily_aggregate", "fill_time_dimension"},
                                         {"{variable: 'v10'}", "{mode: 'min'}", "{dates: dates}"}),
                                 u, env, reg);
    const Grid manual = fill_time_dimension(daily_aggregate(wind_speed_from_uv(u, v), AggregateMode::min),
                                            {day("2024-07-09")});
    CHECK(bit_equal(w, manual));

    CHECK_ERRC(apply_cascade(spec_of({"wind_speed_from_uv"}, {"{variable: 'd2m'}"}), u, env, reg),
               Errc::DanglingGridRef);
    CHECK_ERRC(apply_cascade(spec_of({"fill_time_dimension"}, {"{dates: nowhere}"}), u, env, reg),
               Errc::UnresolvedReference);
  }

  TEST_CASE("registered transform called through the cascade matches the direct call") {
    TransformRegistry reg;
    reg.register_transform("slope", [](const Grid& g, const TransformArgs&) { return compute_slope(g); });
    Rng rng(11);
    const Grid dem = random_static(rng, "dem", 5, 5, 0, 900);
    CHECK(bit_equal(apply_cascade(spec_of({"slope"}), dem, {}, reg), compute_slope(dem)));
    CHECK_ERRC(reg.register_transform("slope", [](const Grid& g, const TransformArgs&) { return g; }),
               Errc::DuplicateTransform);
  }

  TEST_CASE("registries are isolated per pilot") {
    TransformRegistry a = builtin_registry();
    TransformRegistry b = builtin_registry();
    b.register_transform("pilot_b_only", [](const Grid& g, const TransformArgs&) { return g; });
    const auto spec = spec_of({"daily_max", "pilot_b_only"});
    CHECK_NOTHROW(check_cascade("x", spec, b));
    const Error e = caught([&] { apply_cascade(spec, constant_grid("x", 1, 1, 0), {}, a); });
    CHECK(e.code() == Errc::UnknownTransform);
    CHECK(e.subject() == "pilot_b_only");
    CHECK(std::string(e.what()).find("position 2") != std::string::npos);
    CHECK_ERRC(apply_cascade(spec_of({"nope"}), constant_grid("x", 1, 1, 0), {}, a), Errc::UnknownTransform);
    CHECK_ERRC(registry_for_class("wildfire"), Errc::UnknownProcessingClass);
    CHECK(registry_for_class("fdi").names() == builtin_registry().names());
  }

  TEST_CASE("failures inside a step carry their cause") {
    const auto g = Grid::make_timed("ndvi", "1", midnights({day("2024-07-08")}), {0.0}, {0.0}, {0.5f});
    PipelineEnv env;
    env.context["dates"] = Value("2024-07-01");
    const Error e = caught([&] {
      apply_cascade(spec_of({"fill_time_dimension"}, {"{dates: dates}"}), g, env, builtin_registry());
    });
    CHECK(e.code() == Errc::TransformFailed);
    CHECK(e.subject() == "fill_time_dimension");
    CHECK(e.cause() == std::optional<Errc>(Errc::NoPriorObservation));

    const Error slope = caught([&] { apply_cascade(spec_of({"compute_slope"}), g, env, builtin_registry()); });
    CHECK(slope.cause() == std::optional<Errc>(Errc::MissingDEM));

    env.variable = "ndvi";
    const Error nostats = caught([&] { apply_cascade(spec_of({"standardize"}), g, env, builtin_registry()); });
    CHECK(nostats.cause() == std::optional<Errc>(Errc::UnknownFeature));
  }

  TEST_CASE("relative humidity from a pair of references") {
    Rng rng(12);
    PipelineEnv env;
    const Grid t = hourly(rng, "t2m", day("2024-07-09"), 2, 2, 2, 290, 300);
    const Grid d = hourly(rng, "d2m", day("2024-07-09"), 2, 2, 2, 280, 290);
    env.consumed.emplace("t2m", t);
    env.consumed.emplace("d2m", d);
    const auto reg = builtin_registry();
    const Grid pair = apply_cascade(spec_of({"relative_humidity"}, {"{variable: [t2m, d2m]}"}), t, env, reg);
    const Grid single = apply_cascade(spec_of({"relative_humidity"}, {"{variable: 'd2m'}"}), t, env, reg);
    CHECK(bit_equal(pair, single));
    CHECK(bit_equal(pair, relative_humidity(t, d)));
  }
}

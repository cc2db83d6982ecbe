#include <doctest.h>

#include <bit>
#include <cstring>
#include <limits>

#include "opcast/grid.hpp"
#include "test_support.hpp"

using namespace opcast;
using namespace opcast::testing;

namespace {

Grid random_timed(Rng& rng, const std::string& name, const std::vector<Date>& dates, std::size_t ny, std::size_t nx) {
  return Grid::make_timed(name, "K", midnights(dates), axis(40.0, 0.1, ny), axis(15.0, 0.1, nx),
                          rng.floats(dates.size() * ny * nx, -5.0f, 5.0f));
}

/// Random strictly ascending axis.
std::vector<double> random_axis(Rng& rng, std::size_t n, double start) {
  std::vector<double> out;
  double v = start;
  for (std::size_t k = 0; k < n; ++k) {
    v += rng.uniform(0.01, 0.5);
    out.push_back(v);
  }
  return out;
}

std::vector<std::uint32_t> bits_of(const Grid& g) {
  std::vector<std::uint32_t> out;
  for (float v : g.values()) out.push_back(std::bit_cast<std::uint32_t>(v));
  return out;
}

}  // namespace

TEST_SUITE("grid.date") {
  TEST_CASE("parse and format") {
    CHECK(format_date(day("2024-02-29")) == "2024-02-29");
    CHECK_ERRC(parse_date("2023-02-29"), Errc::BadDate);
    CHECK_ERRC(parse_date("2024-7-09"), Errc::BadDate);
    CHECK_ERRC(parse_date("2024-07-09x"), Errc::BadDate);
    CHECK(parse_timestamp("2024-07-09") == to_timepoint(day("2024-07-09")));
    const TimePoint t = parse_timestamp("2024-07-09T13:05:00Z");
    CHECK(format_timestamp(t) == "2024-07-09T13:05:00Z");
    CHECK(format_timestamp(to_timepoint(day("2024-07-09"))) == "2024-07-09");
  }

  TEST_CASE("preceding year clamps the leap day") {
    CHECK(preceding_year(day("2024-02-29")) == day("2023-02-28"));
    CHECK(preceding_year(day("2024-07-09")) == day("2023-07-09"));
    CHECK(preceding_year(day("2025-03-01")) == day("2024-03-01"));
  }

  TEST_CASE("trailing days end at the last date") {
    CHECK(trailing_days(day("2024-03-01"), 3) ==
          std::vector<Date>{day("2024-02-28"), day("2024-02-29"), day("2024-03-01")});
    CHECK(trailing_days(day("2024-03-01"), 1) == std::vector<Date>{day("2024-03-01")});
  }
}

TEST_SUITE("grid.types") {
  TEST_CASE("bbox") {
    CHECK_ERRC(BBox::make(1, 1, 0, 1), Errc::BadBBox);
    CHECK_ERRC(BBox::make(0, 1, 2, 1), Errc::BadBBox);
    const BBox b = BBox::make(40.0, 41.5, 15.0, 16.5);
    CHECK(BBox::parse(b.to_query()) == b);
    CHECK_ERRC(BBox::parse("1,2,3"), Errc::BadBBox);
    CHECK_ERRC(BBox::parse("1,2,3,x"), Errc::BadBBox);
  }

  TEST_CASE("construction invariants") {
    CHECK_ERRC(Grid::make_static("g", "1", {0.0, 1.0}, {0.0}, {1.0f}), Errc::InvalidGrid);
    CHECK_ERRC(Grid::make_static("g", "1", {1.0, 0.0}, {0.0}, {1.0f, 2.0f}), Errc::InvalidGrid);
    CHECK_ERRC(Grid::make_static("g", "1", {0.0, 0.0}, {0.0}, {1.0f, 2.0f}), Errc::InvalidGrid);
    CHECK_ERRC(Grid::make_static("g", "1", {}, {}, {}), Errc::InvalidGrid);
    const auto t = hours_from(day("2024-07-09"), 2);
    CHECK_ERRC(Grid::make_timed("g", "1", {t[1], t[0]}, {0.0}, {0.0}, {1.0f, 2.0f}), Errc::InvalidGrid);
    const Grid ok = Grid::make_timed("g", "1", t, {0.0}, {0.0, 1.0}, {1, 2, 3, 4});
    CHECK(ok.nt() == 2);
    CHECK(ok.at(1, 0, 1) == 4.0f);
    CHECK_FALSE(constant_grid("s", 2, 2, 0).has_time());
  }
}

TEST_SUITE("grid.crop") {
  TEST_CASE("bbox covering the full grid is the identity") {
    Rng rng(1);
    const Grid g = random_static(rng, "g", 10, 10);
    CHECK(bit_equal(crop_bbox(g, BBox::make(39.0, 42.0, 14.0, 17.0)), g));
  }

  TEST_CASE("4 lats by 5 lons out of a 10x10 grid") {
    Rng rng(2);
    const Grid g = random_static(rng, "g", 10, 10);
    const Grid c = crop_bbox(g, BBox::make(40.25, 40.65, 15.15, 15.65));
    REQUIRE(c.ny() == 4);
    REQUIRE(c.nx() == 5);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 5; ++j) CHECK(c.at(i, j) == g.at(i + 3, j + 2));
    }
  }

  TEST_CASE("bounds are inclusive") {
    const Grid g = Grid::make_static("g", "1", {0.0, 1.0, 2.0}, {0.0, 1.0, 2.0}, std::vector<float>(9, 1.0f));
    const Grid c = crop_bbox(g, BBox::make(1.0, 2.0, 0.0, 1.0));
    CHECK(c.lat() == std::vector<double>{1.0, 2.0});
    CHECK(c.lon() == std::vector<double>{0.0, 1.0});
  }

  TEST_CASE("disjoint bbox") {
    CHECK_ERRC(crop_bbox(constant_grid("g", 3, 3, 1), BBox::make(0, 1, 0, 1)), Errc::EmptyCrop);
  }

  TEST_CASE("matches an index filter and is idempotent on random grids") {
    Rng rng(3);
    for (int round = 0; round < 300; ++round) {
      const std::size_t ny = rng.integer(1, 12), nx = rng.integer(1, 12);
      const auto lat = random_axis(rng, ny, 39.0), lon = random_axis(rng, nx, 14.0);
      const bool timed = rng.chance(0.5);
      const std::size_t nt = timed ? rng.integer(1, 3) : 1;
      auto values = rng.floats(nt * ny * nx, -1, 1);
      const Grid g = timed ? Grid::make_timed("g", "1", hours_from(day("2024-01-01"), static_cast<int>(nt)), lat, lon,
                                              values)
                           : Grid::make_static("g", "1", lat, lon, values);
      const double a = rng.uniform(38.5, 42.0), b = rng.uniform(38.5, 42.0);
      const double c = rng.uniform(13.5, 17.0), d = rng.uniform(13.5, 17.0);
      if (a == b || c == d) continue;
      const BBox box = BBox::make(std::min(a, b), std::max(a, b), std::min(c, d), std::max(c, d));

      std::vector<std::size_t> rows, cols;
      for (std::size_t i = 0; i < ny; ++i) {
        if (lat[i] >= box.lat_min && lat[i] <= box.lat_max) rows.push_back(i);
      }
      for (std::size_t j = 0; j < nx; ++j) {
        if (lon[j] >= box.lon_min && lon[j] <= box.lon_max) cols.push_back(j);
      }
      if (rows.empty() || cols.empty()) {
        CHECK_ERRC(crop_bbox(g, box), Errc::EmptyCrop);
        continue;
      }
      const Grid out = crop_bbox(g, box);
      REQUIRE(out.ny() == rows.size());
      REQUIRE(out.nx() == cols.size());
      CHECK(out.time() == g.time());
      for (std::size_t t = 0; t < nt; ++t) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
          CHECK(out.lat()[i] == lat[rows[i]]);
          for (std::size_t j = 0; j < cols.size(); ++j) REQUIRE(out.at(t, i, j) == g.at(t, rows[i], cols[j]));
        }
      }
      CHECK(bit_equal(crop_bbox(out, box), out));
    }
  }
}

TEST_SUITE("grid.regrid") {
  TEST_CASE("2x2 source, single target point") {
    const Grid g = Grid::make_static("g", "1", {0.0, 1.0}, {0.0, 1.0}, {1, 2, 3, 4});
    CHECK(regrid_nearest(g, {0.4}, {0.4}).at(0, 0) == 1.0f);
    CHECK(regrid_nearest(g, {0.6}, {0.4}).at(0, 0) == 3.0f);
    CHECK(regrid_nearest(g, {0.4}, {0.9}).at(0, 0) == 2.0f);
  }

  TEST_CASE("equidistant target takes the smaller coordinate") {
    const Grid g = Grid::make_static("g", "1", {0.0, 1.0}, {0.0, 1.0}, {1, 2, 3, 4});
    CHECK(regrid_nearest(g, {0.5}, {0.0}).at(0, 0) == 1.0f);
    CHECK(regrid_nearest(g, {1.0}, {0.5}).at(0, 0) == 3.0f);
    CHECK(regrid_nearest(g, {0.5}, {0.5}).at(0, 0) == 1.0f);
  }

  TEST_CASE("missing values propagate") {
    const Grid g = Grid::make_static("g", "1", {0.0, 1.0}, {0.0}, {kNaN, 2});
    const Grid r = regrid_nearest(g, {0.1, 0.2, 0.9}, {0.0});
    CHECK(std::isnan(r.at(0, 0)));
    CHECK(std::isnan(r.at(1, 0)));
    CHECK(r.at(2, 0) == 2.0f);
  }

  TEST_CASE("onto its own coordinates is the identity") {
    Rng rng(4);
    for (int round = 0; round < 300; ++round) {
      const std::size_t ny = rng.integer(1, 9), nx = rng.integer(1, 9);
      auto values = rng.floats(2 * ny * nx, -100, 100);
      for (auto& v : values) {
        if (rng.chance(0.1)) v = kNaN;
      }
      const Grid g = Grid::make_timed("g", "u", hours_from(day("2024-01-01"), 2), random_axis(rng, ny, 30.0),
                                      random_axis(rng, nx, 10.0), values);
      REQUIRE(bit_equal(regrid_nearest(g, g.lat(), g.lon()), g));
    }
  }

  TEST_CASE("agrees with an argmin over all source cells") {
    Rng rng(5);
    for (int round = 0; round < 200; ++round) {
      const std::size_t ny = rng.integer(1, 6), nx = rng.integer(1, 6);
      const Grid g = Grid::make_static("g", "1", random_axis(rng, ny, 0.0), random_axis(rng, nx, 0.0),
                                       rng.floats(ny * nx, -1, 1));
      const auto tlat = random_axis(rng, rng.integer(1, 6), -0.5), tlon = random_axis(rng, rng.integer(1, 6), -0.5);
      const Grid r = regrid_nearest(g, tlat, tlon);
      for (std::size_t i = 0; i < tlat.size(); ++i) {
        for (std::size_t j = 0; j < tlon.size(); ++j) {
          double best = std::numeric_limits<double>::infinity();
          float expected = 0;
          for (std::size_t a = 0; a < ny; ++a) {
            for (std::size_t b = 0; b < nx; ++b) {
              const double dy = g.lat()[a] - tlat[i], dx = g.lon()[b] - tlon[j];
              const double d2 = dy * dy + dx * dx;
              if (d2 < best) {
                best = d2;
                expected = g.at(a, b);
              }
            }
          }
          REQUIRE(r.at(i, j) == expected);
        }
      }
    }
  }
}

TEST_SUITE("grid.align") {
  TEST_CASE("own time axis, subset, absent date") {
    Rng rng(6);
    const std::vector<Date> dates{day("2024-07-07"), day("2024-07-08"), day("2024-07-09")};
    const Grid g = random_timed(rng, "g", dates, 2, 3);
    CHECK(bit_equal(align_time(g, dates), g));
    const Grid sub = align_time(g, {day("2024-07-09")});
    CHECK(sub.nt() == 1);
    CHECK(std::equal(sub.values().begin(), sub.values().end(), g.slice(2).begin()));
    const Error e = caught([&] { align_time(g, {day("2024-07-10")}); });
    CHECK(e.code() == Errc::MissingDate);
    CHECK(std::string(e.what()).find("2024-07-10") != std::string::npos);
  }

  TEST_CASE("hourly steps other than midnight do not count") {
    const Grid g = Grid::make_timed("g", "1", hours_from(day("2024-07-09"), 3), {0.0}, {0.0}, {1, 2, 3});
    CHECK(align_time(g, {day("2024-07-09")}).values() == std::vector<float>{1});
    const Grid late = Grid::make_timed("g", "1", {hours_from(day("2024-07-09"), 2)[1]}, {0.0}, {0.0}, {1});
    CHECK_ERRC(align_time(late, {day("2024-07-09")}), Errc::MissingDate);
  }
}

TEST_SUITE("grid.stack") {
  TEST_CASE("shape arithmetic") {
    Rng rng(7);
    const std::vector<Date> dates{day("2024-07-07"), day("2024-07-08"), day("2024-07-09")};
    const auto s = stack_sample({random_timed(rng, "a", dates, 4, 5), random_timed(rng, "b", dates, 4, 5)}, dates);
    CHECK(s.nf == 2);
    CHECK(s.days == 3);
    CHECK(s.h == 4);
    CHECK(s.w == 5);
    CHECK(s.values.size() == 2 * 3 * 4 * 5);
    CHECK(s.features == std::vector<std::string>{"a", "b"});
    CHECK(s.dates == dates);
  }

  TEST_CASE("static grids repeat along days") {
    Rng rng(8);
    const std::vector<Date> dates{day("2024-07-07"), day("2024-07-08"), day("2024-07-09")};
    const Grid dem = random_static(rng, "dem", 4, 5, 0, 1000);
    const auto s = stack_sample({dem, random_timed(rng, "ndvi", dates, 4, 5)}, dates);
    for (std::size_t d = 0; d < 3; ++d) {
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 5; ++j) CHECK(s.at(0, d, i, j) == dem.at(i, j));
      }
    }
  }

  TEST_CASE("mismatched coordinates and missing dates") {
    Rng rng(9);
    const std::vector<Date> dates{day("2024-07-09")};
    const Grid a = random_timed(rng, "a", dates, 2, 2);
    const Grid b = Grid::make_static("b", "1", axis(40.0, 0.1, 2), axis(15.05, 0.1, 2), {1, 2, 3, 4});
    const Error e = caught([&] { stack_sample({a, b}, dates); });
    CHECK(e.code() == Errc::GridMismatch);
    CHECK(e.subject() == "b");
    CHECK_ERRC(stack_sample({a}, {day("2024-07-10")}), Errc::MissingDate);
    CHECK_ERRC(stack_sample({}, dates), Errc::EmptySample);
  }

  TEST_CASE("fill replaces missing cells per feature") {
    const std::vector<Date> dates{day("2024-07-09")};
    const Grid a = Grid::make_static("a", "1", {0.0}, {0.0, 1.0}, {kNaN, 1});
    const Grid b = Grid::make_static("b", "1", {0.0}, {0.0, 1.0}, {-9, kNaN}, -9.0f);
    const std::vector<float> fill{0.5f, 7.0f};
    const auto s = stack_sample({a, b}, dates, fill);
    CHECK(s.values == std::vector<float>{0.5f, 1.0f, 7.0f, 7.0f});
  }

  TEST_CASE("matches a quadruple loop over the inputs") {
    Rng rng(10);
    for (int round = 0; round < 100; ++round) {
      const int ndays = rng.integer(1, 4);
      const auto dates = trailing_days(day("2024-07-09"), ndays);
      const std::size_t ny = rng.integer(1, 5), nx = rng.integer(1, 5);
      std::vector<Grid> grids;
      const int nf = rng.integer(1, 4);
      for (int f = 0; f < nf; ++f) {
        if (rng.chance(0.3)) {
          grids.push_back(random_static(rng, "s" + std::to_string(f), ny, nx));
        } else {
          // extra leading and trailing days so the selection is not trivial
          auto wide = trailing_days(day("2024-07-10"), ndays + 2);
          grids.push_back(random_timed(rng, "t" + std::to_string(f), wide, ny, nx));
        }
      }
      const auto s = stack_sample(grids, dates);
      for (int f = 0; f < nf; ++f) {
        const Grid& g = grids[f];
        for (int d = 0; d < ndays; ++d) {
          std::size_t t = 0;
          if (g.has_time()) {
            while (g.time()[t] != to_timepoint(dates[d])) ++t;
          }
          for (std::size_t i = 0; i < ny; ++i) {
            for (std::size_t j = 0; j < nx; ++j) REQUIRE(s.at(f, d, i, j) == g.at(t, i, j));
          }
        }
      }
    }
  }
}

TEST_SUITE("grid.opgrid") {
  TEST_CASE("layout") {
    const Grid g = Grid::make_static("g", "1", {0.0}, {0.0, 1.0}, {1.0f, -2.0f});
    const auto bytes = encode_opgrid(g);
    REQUIRE(bytes.size() > 9);
    CHECK(std::memcmp(bytes.data(), "OPGR", 4) == 0);
    CHECK(bytes[4] == kOpgridVersion);
    const std::uint32_t len = bytes[5] | bytes[6] << 8 | bytes[7] << 16 | static_cast<std::uint32_t>(bytes[8]) << 24;
    CHECK(bytes.size() == 9 + len + 2 * 4);
    CHECK(bytes[9] == '{');
    CHECK(bytes[9 + len - 1] == '}');
    float tail;
    std::memcpy(&tail, bytes.data() + bytes.size() - 4, 4);
    CHECK(tail == -2.0f);
  }

  TEST_CASE("round trip is bit exact, NaN becomes the quiet NaN") {
    Rng rng(11);
    for (int round = 0; round < 300; ++round) {
      const std::size_t ny = rng.integer(1, 6), nx = rng.integer(1, 6), nt = rng.integer(1, 3);
      std::vector<float> values(nt * ny * nx);
      for (auto& v : values) {
        v = std::bit_cast<float>(static_cast<std::uint32_t>(rng.bits()));
        if (rng.chance(0.1)) v = std::bit_cast<float>(0x7F800001u);  // signalling
      }
      const float missing = rng.chance(0.5) ? kNaN : -9999.0f;
      const Grid g = rng.chance(0.5)
                         ? Grid::make_timed("v" + std::to_string(round), "m s-1",
                                            hours_from(day("2024-02-28"), static_cast<int>(nt)),
                                            random_axis(rng, ny, 30.0), random_axis(rng, nx, -5.0), values, missing)
                         : Grid::make_static("s", "", random_axis(rng, ny, 30.0), random_axis(rng, nx, -5.0),
                                             std::vector<float>(values.begin(), values.begin() + ny * nx), missing);
      const Grid back = decode_opgrid(encode_opgrid(g));
      CHECK(back.name() == g.name());
      CHECK(back.units() == g.units());
      CHECK(back.has_time() == g.has_time());
      CHECK(back.time() == g.time());
      CHECK(back.lat() == g.lat());
      CHECK(back.lon() == g.lon());
      CHECK(std::bit_cast<std::uint32_t>(back.missing()) ==
            (std::isnan(missing) ? 0x7FC00000u : std::bit_cast<std::uint32_t>(missing)));
      const auto got = bits_of(back), want = bits_of(g);
      for (std::size_t k = 0; k < got.size(); ++k) {
        const bool nan = std::isnan(g.values()[k]);
        REQUIRE(got[k] == (nan ? 0x7FC00000u : want[k]));
      }
      REQUIRE(encode_opgrid(back) == encode_opgrid(g));
    }
  }

  TEST_CASE("corrupted input") {
    const Grid g = Grid::make_static("g", "1", {0.0, 1.0}, {0.0, 1.0}, {1, 2, 3, 4});
    auto bytes = encode_opgrid(g);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_ERRC(decode_opgrid(bad), Errc::BadMagic);
    bad = bytes;
    bad[4] = 9;
    CHECK_ERRC(decode_opgrid(bad), Errc::BadMagic);
    bad = bytes;
    bad[8] = 0x40;
    CHECK_ERRC(decode_opgrid(bad), Errc::TruncatedPayload);
    for (std::size_t n = 0; n < bytes.size(); ++n) {
      const std::vector<std::uint8_t> prefix(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
      const auto code = error_of([&] { decode_opgrid(prefix); });
      REQUIRE(code);
      CHECK((*code == Errc::BadMagic || *code == Errc::TruncatedPayload || *code == Errc::BadGridFile));
      if (n >= 9 + 4) {
        // past the header: always a short payload
        const std::uint32_t len = bytes[5] | bytes[6] << 8;
        if (n >= 9 + len) CHECK(*code == Errc::TruncatedPayload);
      }
    }
  }

  TEST_CASE("file helpers") {
    TempDir dir("opgrid");
    Rng rng(12);
    const Grid g = random_static(rng, "g", 3, 4);
    write_opgrid_file(g, (dir / "a.opgrid").string());
    CHECK(bit_equal(read_opgrid_file((dir / "a.opgrid").string()), g));
  }
}

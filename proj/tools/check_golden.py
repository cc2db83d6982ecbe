#!/usr/bin/env python3
"""Reads the NetCDF golden files with scipy and checks their contents.

Exit status 0 when every file parses and matches, 1 otherwise, 77 when
scipy is not installed.
"""

import sys
from pathlib import Path

try:
    import numpy as np
    from scipy.io import netcdf_file
except ImportError:
    print("scipy not available")
    sys.exit(77)


def category(p, thresholds=(0.2, 0.4, 0.6, 0.8)):
    return 1 + sum(1 for t in thresholds if t <= p)


def text(value):
    return value.decode() if isinstance(value, bytes) else value


def check_danger(path, lat, lon, p_fire, provenance):
    with netcdf_file(path, "r", mmap=False) as f:
        assert f.version_byte == 1, "not CDF-1"
        assert f.dimensions == {"time": 1, "lat": len(lat), "lon": len(lon)}, f.dimensions
        assert np.allclose(f.variables["lat"][:], lat)
        assert np.allclose(f.variables["lon"][:], lon)
        assert text(f.variables["time"].units) == "days since 1970-01-01"
        assert f.variables["time"][0] == 19913.0  # 2024-07-09
        p = f.variables["p_fire"][:]
        assert p.dtype == np.dtype(">f4") and p.shape == (1, len(lat), len(lon))
        assert np.array_equal(p[0].ravel(), np.asarray(p_fire, dtype=np.float32))
        cat = f.variables["category"][:]
        assert cat.dtype == np.dtype(">i4")
        assert [int(c) for c in cat[0].ravel()] == [category(float(x)) for x in np.float32(p_fire)]
        assert list(f.variables["category"].thresholds) == [0.2, 0.4, 0.6, 0.8]
        assert text(f.pilot) == "golden"
        assert text(f.forecast_date) == "2024-07-09"
        assert text(f.fallback_provenance) == provenance, f.fallback_provenance


def check_snapshot(path):
    with netcdf_file(path, "r", mmap=False) as f:
        assert f.dimensions == {"feature": 2, "time": 3, "lat": 3, "lon": 4}, f.dimensions
        assert text(f.features) == "t2m,ndvi"
        assert text(f.fallback_provenance) == "ndvi:2024-07-09<-2024-07-08(latest-date)"
        assert list(f.variables["time"][:]) == [19911.0, 19912.0, 19913.0]
        expected = (np.arange(72, dtype=np.float32) * 0.25 - 1.0).reshape(2, 3, 3, 4)
        assert np.array_equal(f.variables["sample"][:], expected)


def check_dem(path):
    with netcdf_file(path, "r", mmap=False) as f:
        assert f.dimensions == {"lat": 5, "lon": 6}
        z = f.variables["elevation"]
        assert text(z.units) == "m"
        expected = np.array([[100 * i + 10 * j for j in range(6)] for i in range(5)], dtype=np.float32)
        assert np.array_equal(z[:], expected)
        assert np.allclose(f.variables["lat"][:], [40.0, 40.1, 40.2, 40.3, 40.4])


def main():
    root = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/golden")
    checks = [
        ("danger_1x1.nc", lambda p: check_danger(p, [40.0], [15.0], [0.4], "none")),
        ("danger_4x5.nc", lambda p: check_danger(
            p, [40.0, 40.1, 40.2, 40.3], [15.0, 15.1, 15.2, 15.3, 15.4],
            [np.float32(k) / np.float32(19) for k in range(20)],
            "ndvi:2024-07-09<-2024-07-08(latest-date)")),
        ("snapshot_2x3x3x4.nc", check_snapshot),
        ("dem_5x6.nc", check_dem),
    ]
    failed = 0
    for name, check in checks:
        try:
            check(root / name)
            print(f"ok   {name}")
        except Exception as e:  # noqa: BLE001
            failed += 1
            print(f"FAIL {name}: {type(e).__name__}: {e}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())

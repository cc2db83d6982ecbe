#!/usr/bin/env python3
"""Runs the demo forecast through the real binaries and checks the outputs
with third-party readers.

    demo_e2e.py OPCAST OPCAST_MOCK REPO_ROOT

Starts the mock service on a free port, runs the forecast, validates the
GeoJSON with shapely and reads the NetCDF with scipy. Exit status 77 when
either library is missing.
"""

import json
import os
import subprocess
import sys
import tempfile
from pathlib import Path

try:
    import numpy as np
    from scipy.io import netcdf_file
    from shapely.geometry import shape
    from shapely.validation import explain_validity
except ImportError as e:
    print(f"skipping: {e}")
    sys.exit(77)

DATE = "2024-07-09"


def check_geojson(path):
    doc = json.loads(Path(path).read_text())
    assert doc["type"] == "FeatureCollection"
    features = doc["features"]
    assert len(features) == 16 * 16, len(features)
    previous = None
    for k, f in enumerate(features):
        assert f["type"] == "Feature"
        geom = shape(f["geometry"])
        assert geom.geom_type == "Polygon", geom.geom_type
        assert geom.is_valid, f"feature {k}: {explain_validity(geom)}"
        assert geom.exterior.is_ccw, f"feature {k}: exterior ring is clockwise"
        ring = f["geometry"]["coordinates"][0]
        assert ring[0] == ring[-1]
        props = f["properties"]
        assert set(props) == {"p_fire", "category", "date", "lat", "lon"}, props
        assert props["date"] == DATE
        assert 0.0 <= props["p_fire"] <= 1.0
        assert 1 <= props["category"] <= 5
        assert geom.contains(shape({"type": "Point", "coordinates": [props["lon"], props["lat"]]}))
        key = (props["lat"], props["lon"])
        assert previous is None or key > previous, "features not in row-major order"
        previous = key


def check_netcdf(path):
    with netcdf_file(path, "r", mmap=False) as f:
        assert f.version_byte == 1
        assert f.dimensions == {"time": 1, "lat": 16, "lon": 16}, f.dimensions
        prov = f.fallback_provenance
        prov = prov.decode() if isinstance(prov, bytes) else prov
        assert prov == f"ndvi:{DATE}<-2024-07-08(latest-date)", prov
        p = f.variables["p_fire"][:]
        assert np.all((p >= 0) & (p <= 1))


def main():
    opcast, mock, root = sys.argv[1], sys.argv[2], Path(sys.argv[3])
    server = subprocess.Popen([mock, "--fixtures", str(root / "fixtures/demo"), "--port", "0"],
                              stdout=subprocess.PIPE, text=True)
    try:
        url = server.stdout.readline().strip()
        assert url.startswith("http://"), url
        with tempfile.TemporaryDirectory() as tmp:
            env = dict(os.environ, OPCAST_DATASTORE_URL=url, OPCAST_OUTPUT_DIR=f"{tmp}/out",
                       OPCAST_CACHE_DIR=f"{tmp}/cache")
            subprocess.run([opcast, "run", "--conf", str(root / "pilots/demo/setup.toml"), "--date", DATE,
                            "--prepare_static", "--collect_data", "--geojson", "--netcdf"],
                           env=env, check=True, stderr=subprocess.DEVNULL)
            check_geojson(f"{tmp}/out/fdi_demo_{DATE}.geojson")
            check_netcdf(f"{tmp}/out/fdi_demo_{DATE}.nc")
    finally:
        server.terminate()
        server.wait(timeout=10)
    print("demo outputs pass shapely and scipy checks")


if __name__ == "__main__":
    main()

"""Smoke test for the covradar Python extension.

Build and install the module first, then run from the repository root:

    pip install maturin
    maturin develop -m crates/py/Cargo.toml
    python3 python/smoke_test.py
"""

import json
import math
import pathlib
import sys

import covradar

ROOT = pathlib.Path(__file__).resolve().parent.parent
SP30 = ROOT / "fixtures" / "sp30"
FOCUS = "Presidente Prudente"
A, B = "2020-04-27", "2020-05-16"


def golden(name):
    return json.loads((SP30 / "golden" / name).read_text(encoding="utf-8"))


def expect_error(exc, fn, *args):
    try:
        fn(*args)
    except exc:
        return
    raise AssertionError(f"{fn.__name__}{args} did not raise {exc.__name__}")


def main():
    assert abs(covradar.haversine_km(0, 0, 0, 180) - math.pi * 6371) < 0.01
    assert covradar.format_isolation(0.47, 0.026) == "47% ± 0.026"

    ds = covradar.Dataset(str(SP30), k=6)
    assert len(ds) == 30 and ds.k == 6
    assert ds.date_range == ("2020-02-27", "2020-05-26")
    assert "presidente prudente" in ds.city_names()
    assert len(ds.nearest(FOCUS)) == 6

    hood = ds.neighborhood(FOCUS)
    assert set(ds.nearest(FOCUS)) <= set(hood["members"])
    assert set(hood["active"]) <= set(hood["members"])

    assert ds.curves(FOCUS, A, B) == golden("curves.json")
    assert ds.glyph(FOCUS, A, B) == golden("glyph.json")
    report = ds.report(FOCUS, A, B, mode="raw")
    assert report["curves"]["city_dominates"] is True
    assert report["glyph"]["mode"] == "raw"
    assert "±" in ds.isolation(FOCUS, A, B)["display"]

    expect_error(KeyError, ds.curves, "Atlantis", A, B)
    expect_error(ValueError, ds.curves, FOCUS, B, A)
    expect_error(ValueError, ds.glyph, FOCUS, A, B, "log")
    expect_error(OSError, covradar.Dataset, str(ROOT / "no-such-dir"))
    print(f"ok: {ds!r}, {report['curves']['city_window_total']} vs "
          f"{report['curves']['neighborhood_window_total']} cases")
    return 0


if __name__ == "__main__":
    sys.exit(main())

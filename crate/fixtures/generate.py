#!/usr/bin/env python3
"""Generate the bundled 30-city, 90-day synthetic dataset and its golden
API responses.

The golden files are computed here with plain Python (haversine, brute-force
nearest neighbors, per-day sums, math.atan) so they stay independent of the
Rust implementation. Re-running the script is deterministic.

    python3 fixtures/generate.py
"""

import datetime as dt
import json
import math
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "sp30")

START = dt.date(2020, 2, 27)
DAYS = 90
K = 6
FOCUS = "Presidente Prudente"
WINDOW = (dt.date(2020, 4, 27), dt.date(2020, 5, 16))
MODE = "unit_square"

# Approximate municipal seat coordinates, western São Paulo state.
CITIES = [
    ("Presidente Prudente", -22.1256, -51.3889, 230000),
    ("Martinópolis", -22.1458, -51.1708, 26000),
    ("Alfredo Marcondes", -21.9528, -51.4139, 4000),
    ("Álvares Machado", -22.0764, -51.4722, 24000),
    ("Regente Feijó", -22.2214, -51.3031, 20000),
    ("Pirapozinho", -22.2753, -51.5000, 27000),
    ("Caiabu", -22.0128, -51.2392, 4200),
    ("Santo Anastácio", -21.9775, -51.6519, 21000),
    ("Presidente Bernardes", -22.0056, -51.5531, 13000),
    ("Presidente Venceslau", -21.8761, -51.8439, 39000),
    ("Rancharia", -22.2292, -50.8931, 30000),
    ("Indiana", -22.1742, -51.2553, 5000),
    ("Emilianópolis", -21.8317, -51.4831, 3200),
    ("Anhumas", -22.2936, -51.3892, 4100),
    ("Taciba", -22.3886, -51.2853, 6000),
    ("Narandiba", -22.4058, -51.5244, 4700),
    ("Tarabai", -22.3017, -51.5619, 7500),
    ("Sandovalina", -22.4553, -51.7647, 4000),
    ("Estrela do Norte", -22.4861, -51.6633, 2700),
    ("Mirante do Paranapanema", -22.2919, -51.9064, 18000),
    ("Santo Expedito", -21.8467, -51.3928, 3000),
    ("Piquerobi", -21.8747, -51.7286, 3600),
    ("Quatá", -22.2475, -50.6983, 14000),
    ("João Ramalho", -22.2472, -50.7694, 4300),
    ("Iepê", -22.6606, -51.0769, 8000),
    ("Nantes", -22.6156, -51.2400, 3000),
    ("Marabá Paulista", -22.1067, -51.9617, 5000),
    ("Teodoro Sampaio", -22.5325, -52.1678, 23000),
    ("Caiuá", -21.8322, -51.9969, 6000),
    ("Ribeirão dos Índios", -21.8381, -51.6100, 2300),
]

# Cities that never report a case.
SILENT = {"Alfredo Marcondes", "Emilianópolis", "Estrela do Norte"}


def norm(name):
    return name.strip().lower()


def date_at(i):
    return START + dt.timedelta(days=i)


def make_cases(rng):
    """Daily new cases per city; only nonzero days are written out."""
    daily = {}
    for name, _, _, pop in CITIES:
        series = [0] * DAYS
        if name not in SILENT:
            onset = rng.randint(10, 70) if name != FOCUS else 20
            rate = (0.03 + rng.random() * 0.05) * (pop / 30000.0) ** 0.5
            for i in range(onset, DAYS):
                lam = rate * (1.0 + 0.06 * (i - onset))
                # Knuth's Poisson sampler, small lambdas only
                l, k, p = math.exp(-lam), 0, 1.0
                while True:
                    p *= rng.random()
                    if p <= l:
                        break
                    k += 1
                series[i] = k
            series[onset] = max(series[onset], 1)
        daily[name] = series
    return daily


def make_isolation(rng):
    rows = []
    for idx, (name, *_rest) in enumerate(CITIES):
        if idx % 5 == 4:
            continue  # no isolation data published for these
        base = rng.uniform(38, 55)
        for i in range(19, DAYS):
            if rng.random() < 0.1:
                continue  # missing day
            value = round(base + rng.uniform(-6, 6), 1)
            rows.append((name, date_at(i), value))
    return rows


def haversine(a, b):
    r = 6371.0
    la1, lo1 = math.radians(a[0]), math.radians(a[1])
    la2, lo2 = math.radians(b[0]), math.radians(b[1])
    h = math.sin((la2 - la1) / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2
    return 2 * r * math.atan2(math.sqrt(h), math.sqrt(1 - h))


def neighborhoods():
    coords = {norm(n): (lat, lon) for n, lat, lon, _ in CITIES}
    knn = {}
    for a in coords:
        others = sorted((haversine(coords[a], coords[b]), b) for b in coords if b != a)
        knn[a] = [b for _, b in others[:K]]
    return {a: sorted(set(knn[a]) | {b for b in knn if a in knn[b]}) for a in knn}


def cumulative(series, i):
    return sum(series[: i + 1])


def write_inputs(daily, isolation):
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, "coords.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("city,lat,lon,population\n")
        for name, lat, lon, pop in CITIES:
            f.write(f"{name},{lat},{lon},{pop}\n")
    with open(os.path.join(OUT, "cases.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("city,date,new_cases\n")
        # the data range spans every generated day, quiet ends included
        f.write(f"{FOCUS},{START.isoformat()},0\n")
        for name, *_ in CITIES:
            for i, n in enumerate(daily[name]):
                if n:
                    f.write(f"{name},{date_at(i).isoformat()},{n}\n")
        f.write(f"{FOCUS},{date_at(DAYS - 1).isoformat()},0\n")
    with open(os.path.join(OUT, "isolation.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("city,date,index\n")
        for name, day, value in isolation:
            f.write(f"{name},{day.isoformat()},{value}\n")
    features = []
    for name, lat, lon, _ in CITIES:
        s = 0.04
        ring = [[lon - s, lat - s], [lon + s, lat - s], [lon + s, lat + s], [lon - s, lat + s], [lon - s, lat - s]]
        features.append({
            "type": "Feature",
            "properties": {"name": name},
            "geometry": {"type": "Polygon", "coordinates": [[[round(x, 4), round(y, 4)] for x, y in ring]]},
        })
    with open(os.path.join(OUT, "boundaries.geojson"), "w", encoding="utf-8", newline="\n") as f:
        json.dump({"type": "FeatureCollection", "features": features}, f, ensure_ascii=False, indent=1)
        f.write("\n")


def golden(daily):
    series = {norm(n): daily[n] for n, *_ in CITIES}
    a, b = WINDOW
    ia, ib = (a - START).days, (b - START).days
    length = ib - ia + 1
    focus = norm(FOCUS)
    members = neighborhoods()[focus]
    active = [m for m in members if cumulative(series[m], ib) > 0]

    def window_points(s):
        return [sum(s[ia : t + 1]) for t in range(ia, ib + 1)]

    def whole_points(s):
        return [cumulative(s, t) for t in range(0, ib + 1)]

    def as_curve(values, first):
        return [{"date": date_at(first + i).isoformat(), "value": v} for i, v in enumerate(values)]

    city_w = window_points(series[focus])
    hood_w = [sum(col) for col in zip(*(window_points(series[m]) for m in active))] if active else [0] * length
    city_whole = whole_points(series[focus])
    hood_whole = [sum(col) for col in zip(*(whole_points(series[m]) for m in active))] if active else [0] * (ib + 1)
    curves = {
        "city": focus,
        "window": {"a": a.isoformat(), "b": b.isoformat()},
        "neighbors": active,
        "empty_neighborhood": not active,
        "neighborhood_whole_period": as_curve(hood_whole, 0),
        "city_whole_period": as_curve(city_whole, 0),
        "neighborhood_window": as_curve(hood_w, ia),
        "city_window": as_curve(city_w, ia),
        "city_window_total": city_w[-1],
        "neighborhood_window_total": hood_w[-1],
        "city_dominates": city_w[-1] > hood_w[-1],
    }

    totals = {c: window_points(series[c])[-1] for c in [focus] + active}
    slopes = {c: max(t, 0) / length for c, t in totals.items()}
    view_max = max(slopes.values())

    def saturation(c):
        if slopes[c] == 0:
            return 0.0
        return math.atan(slopes[c] / view_max) / (math.pi / 4)

    def entry(c):
        return {"city": c, "saturation": saturation(c), "window_total": totals[c]}

    ring = sorted(active, key=lambda c: (-max(totals[c], 0), c))
    glyph = {
        "focus": entry(focus),
        "segments": [entry(c) for c in ring],
        "window": {"a": a.isoformat(), "b": b.isoformat()},
        "mode": MODE,
    }
    return glyph, curves


def main():
    rng = random.Random(2020)
    daily = make_cases(rng)
    isolation = make_isolation(rng)
    write_inputs(daily, isolation)
    glyph, curves = golden(daily)
    gdir = os.path.join(OUT, "golden")
    os.makedirs(gdir, exist_ok=True)
    for name, doc in [("glyph.json", glyph), ("curves.json", curves)]:
        with open(os.path.join(gdir, name), "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(doc, ensure_ascii=False, separators=(",", ":")))
    print(f"focus={FOCUS} window={WINDOW[0]}..{WINDOW[1]} neighbors={curves['neighbors']}")
    print(f"city total={curves['city_window_total']} neighborhood total={curves['neighborhood_window_total']}")


if __name__ == "__main__":
    main()

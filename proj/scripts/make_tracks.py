#!/usr/bin/env python3
"""Generates the synthetic circuits shipped under assets/tracks/.

The oval is two straights joined by semicircles (analytic perimeter
2*straight + 2*pi*radius). The mixed circuit is a smooth wavy closed curve
with harmonically varied radius, tuned so curvature peaks form distinct
corners with sensible minimum radii.
"""

import json
import math
import os

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "assets", "tracks")

def write_track(name, filename, points, hw_left, hw_right):
    doc = {
        "name": name,
        "closed": True,
        "points": [
            {
                "x": round(x, 6),
                "y": round(y, 6),
                "half_width_left": round(wl, 4),
                "half_width_right": round(wr, 4),
            }
            for (x, y), wl, wr in zip(points, hw_left, hw_right)
        ],
    }
    path = os.path.join(OUT_DIR, filename)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
    print(f"wrote {path}: {len(points)} points")


def oval(straight=186.0, radius=100.0, spacing=2.0, half_width=6.0):
    perimeter = 2 * straight + 2 * math.pi * radius
    n = int(math.ceil(perimeter / spacing))
    pts = []
    for i in range(n):
        s = perimeter * i / n
        if s < straight:
            x, y = s, 0.0
        elif s < straight + math.pi * radius:
            a = (s - straight) / radius
            x = straight + radius * math.sin(a)
            y = radius * (1 - math.cos(a))
        elif s < 2 * straight + math.pi * radius:
            x = straight - (s - straight - math.pi * radius)
            y = 2 * radius
        else:
            a = (s - 2 * straight - math.pi * radius) / radius
            x = -radius * math.sin(a)
            y = 2 * radius - radius * (1 - math.cos(a))
        pts.append((x, y))
    print(f"oval analytic perimeter: {perimeter:.6f}")
    return pts, [half_width] * n, [half_width] * n


def wavy_circuit(spacing=2.0):
    # radius harmonics tuned for ~10 corners, min corner radius ~30 m
    def rho(t):
        return (
            205.0
            + 36.0 * math.cos(2 * t + 0.6)
            + 22.0 * math.cos(3 * t + 2.1)
            + 14.0 * math.cos(5 * t + 4.0)
            + 7.0 * math.cos(7 * t + 1.2)
        )

    # dense parametric sampling, then resample by arc length
    m = 20000
    raw = []
    for i in range(m):
        t = 2 * math.pi * i / m
        r = rho(t)
        raw.append((r * math.cos(t), r * math.sin(t)))
    # arc length resample
    seglen = []
    total = 0.0
    for i in range(m):
        x0, y0 = raw[i]
        x1, y1 = raw[(i + 1) % m]
        d = math.hypot(x1 - x0, y1 - y0)
        seglen.append(d)
        total += d
    n = int(math.ceil(total / spacing))
    pts = []
    target = 0.0
    acc = 0.0
    j = 0
    for i in range(n):
        target = total * i / n
        while acc + seglen[j] < target:
            acc += seglen[j]
            j += 1
        f = (target - acc) / seglen[j]
        x0, y0 = raw[j]
        x1, y1 = raw[(j + 1) % m]
        pts.append((x0 + f * (x1 - x0), y0 + f * (y1 - y0)))

    # curvature scan for reporting
    def curv(i):
        x0, y0 = pts[(i - 1) % n]
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        h1 = math.atan2(y2 - y1, x2 - x1)
        h0 = math.atan2(y1 - y0, x1 - x0)
        dh = (h1 - h0 + math.pi) % (2 * math.pi) - math.pi
        ds = 0.5 * (math.hypot(x2 - x1, y2 - y1) + math.hypot(x1 - x0, y1 - y0))
        return dh / ds

    ks = [curv(i) for i in range(n)]
    kmax = max(abs(k) for k in ks)
    # count corners: contiguous stretches with |k| > 1/150
    corners = 0
    inside = False
    for k in ks:
        if abs(k) > 1.0 / 150.0 and not inside:
            corners += 1
            inside = True
        elif abs(k) < 1.0 / 250.0:
            inside = False
    print(f"circuit: length {total:.1f} m, min radius {1.0/kmax:.1f} m, corners ~{corners}")

    # half widths: 5.5 m nominal with a gentle variation
    hw_l = [5.5 + 0.8 * math.sin(4 * math.pi * i / n + 0.3) for i in range(n)]
    hw_r = [5.5 + 0.8 * math.sin(4 * math.pi * i / n + 2.5) for i in range(n)]
    return pts, hw_l, hw_r


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    pts, wl, wr = oval()
    write_track("oval_1km", "oval_1km.json", pts, wl, wr)
    pts, wl, wr = wavy_circuit()
    write_track("circuit_1500m", "circuit_1500m.json", pts, wl, wr)


if __name__ == "__main__":
    main()

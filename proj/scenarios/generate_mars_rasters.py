"""Writes the synthetic Mars speed rasters used by mars.json.

A crater rim ring slows the healthy rover moderately and the broken rover
severely; a mild gap in the rim and two hills complete the terrain.
"""
import math
import pathlib

BASE = 0.229
RIM_SLOWDOWN = 0.4
BROKEN_RIM_SLOWDOWN = 0.94
BROKEN_SCALE = 0.1
N = 101


def terrain(x, y):
    d = abs(math.hypot(x - 0.2, y - 0.95) - 0.5)
    slope = math.exp(-((d / 0.045) ** 2))
    mild = 1 - 0.75 * math.exp(-((x - 0.62) ** 2 + (y - 0.58) ** 2) / 0.004)
    hill = 0.5 * math.exp(-((x - 0.8) ** 2 + (y - 0.25) ** 2) / 0.01) + 0.4 * math.exp(
        -((x - 0.35) ** 2 + (y - 0.2) ** 2) / 0.008
    )
    return slope * mild, hill


def write(path, scale, slowdown):
    rows = []
    for j in range(N):
        y = j / (N - 1)
        row = []
        for i in range(N):
            x = i / (N - 1)
            s, h = terrain(x, y)
            row.append(f"{scale * BASE * (1 - slowdown * s) * (1 - h):.6f}")
        rows.append(",".join(row))
    path.write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    here = pathlib.Path(__file__).parent
    write(here / "mars_speed.csv", 1.0, RIM_SLOWDOWN)
    write(here / "mars_broken_speed.csv", BROKEN_SCALE, BROKEN_RIM_SLOWDOWN)

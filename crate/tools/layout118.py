"""Deterministic planar layout for the 118-bus fixture.

IEEE 118 has no published geography. Buses are placed with a seeded
force-directed layout of the branch graph, then stretched onto a
1500 km x 1000 km rectangle and snapped to a 0.1 km grid.

usage: python3 tools/layout118.py data/case118.m > data/case118_layout.csv
"""
import re
import sys

import networkx as nx

WIDTH_KM = 1500.0
HEIGHT_KM = 1000.0
SEED = 118


def matrix(text, name):
    m = re.search(r"mpc\." + name + r"\s*=\s*\[(.*?)\];", text, re.S)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";").strip()
        if line:
            rows.append([float(v) for v in line.split()])
    return rows


text = open(sys.argv[1]).read()
g = nx.Graph()
for row in matrix(text, "bus"):
    g.add_node(int(row[0]))
for row in matrix(text, "branch"):
    g.add_edge(int(row[0]), int(row[1]))

pos = nx.spring_layout(g, seed=SEED, iterations=500)
xs = [p[0] for p in pos.values()]
ys = [p[1] for p in pos.values()]
x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)

print("bus_id,x_km,y_km")
for bus in sorted(pos):
    x, y = pos[bus]
    xk = round((x - x0) / (x1 - x0) * WIDTH_KM, 1)
    yk = round((y - y0) / (y1 - y0) * HEIGHT_KM, 1)
    print(f"{bus},{xk},{yk}")

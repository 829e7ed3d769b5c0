#!/usr/bin/env python3
"""Writes the synthetic pleural-cavity-like mesh used by the anatomy task."""
import argparse
import math
import struct


def build(n_lat, n_lon, radii):
    rx, ry, rz = radii
    verts = [(0.0, 0.0, rz)]
    for i in range(1, n_lat):
        theta = math.pi * i / n_lat
        for j in range(n_lon):
            phi = 2.0 * math.pi * j / n_lon
            bump = 1.0 + 0.08 * math.sin(3 * phi) * math.sin(2 * theta) + 0.05 * math.cos(5 * phi) * math.sin(theta) ** 2
            # flattened floor, like a cavity resting on the diaphragm
            zscale = 0.7 if math.cos(theta) < 0 else 1.0
            verts.append((rx * bump * math.sin(theta) * math.cos(phi),
                          ry * bump * math.sin(theta) * math.sin(phi),
                          rz * zscale * math.cos(theta)))
    verts.append((0.0, 0.0, -0.7 * rz))
    south = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * n_lon + (j % n_lon)

    tris = []
    for j in range(n_lon):
        tris.append((0, ring(1, j), ring(1, j + 1)))
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append((a, c, d))
            tris.append((a, d, b))
    for j in range(n_lon):
        tris.append((ring(n_lat - 1, j), south, ring(n_lat - 1, j + 1)))
    return verts, tris


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--obj", required=True)
    ap.add_argument("--stl")
    ap.add_argument("--lat", type=int, default=24)
    ap.add_argument("--lon", type=int, default=48)
    args = ap.parse_args()
    verts, tris = build(args.lat, args.lon, (0.045, 0.045, 0.035))
    with open(args.obj, "w") as f:
        f.write("# synthetic pleural cavity, metres, centred at the origin\n")
        for v in verts:
            f.write("v %.9f %.9f %.9f\n" % v)
        for t in tris:
            f.write("f %d %d %d\n" % (t[0] + 1, t[1] + 1, t[2] + 1))
    if args.stl:
        with open(args.stl, "wb") as f:
            f.write(b"synthetic pleural cavity".ljust(80, b"\0"))
            f.write(struct.pack("<I", len(tris)))
            for t in tris:
                a, b, c = (verts[k] for k in t)
                u = [b[k] - a[k] for k in range(3)]
                w = [c[k] - a[k] for k in range(3)]
                n = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]]
                norm = math.sqrt(sum(x * x for x in n)) or 1.0
                f.write(struct.pack("<3f", *(x / norm for x in n)))
                for v in (a, b, c):
                    f.write(struct.pack("<3f", *v))
                f.write(b"\0\0")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Regenerates everything under fixtures/.

Outputs are deterministic; rerunning overwrites files in place.

    python3 scripts/make_fixtures.py
"""

import json
import shutil
import math
import struct
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent / "fixtures"

BOX_FACES = [
    (0, 2, 1), (0, 3, 2),  # -z
    (4, 5, 6), (4, 6, 7),  # +z
    (0, 1, 5), (0, 5, 4),  # -y
    (2, 3, 7), (2, 7, 6),  # +y
    (1, 2, 6), (1, 6, 5),  # +x
    (0, 4, 7), (0, 7, 3),  # -x
]


def box(center, size):
    c = np.asarray(center, float)
    h = np.asarray(size, float) / 2
    signs = [(-1, -1, -1), (1, -1, -1), (1, 1, -1), (-1, 1, -1),
             (-1, -1, 1), (1, -1, 1), (1, 1, 1), (-1, 1, 1)]
    v = np.array([c + h * s for s in signs])
    return v, [tuple(f) for f in BOX_FACES]


def cylinder(center, radius, height, segments=16, axis="z"):
    c = np.asarray(center, float)
    ring = []
    for z in (-height / 2, height / 2):
        for k in range(segments):
            a = 2 * math.pi * k / segments
            ring.append([radius * math.cos(a), radius * math.sin(a), z])
    ring.append([0, 0, -height / 2])
    ring.append([0, 0, height / 2])
    v = np.array(ring)
    n = segments
    bot, top = 2 * n, 2 * n + 1
    f = []
    for k in range(n):
        k1 = (k + 1) % n
        f += [(k, k1, n + k1), (k, n + k1, n + k), (bot, k1, k), (top, n + k, n + k1)]
    if axis == "x":
        v = v[:, [2, 0, 1]]
    elif axis == "y":
        v = v[:, [1, 2, 0]]
    return v + c, f


def uv_sphere(center, radius, rings=8, segments=12):
    c = np.asarray(center, float)
    v = [[0, 0, radius]]
    for i in range(1, rings):
        th = math.pi * i / rings
        for k in range(segments):
            ph = 2 * math.pi * k / segments
            v.append([radius * math.sin(th) * math.cos(ph),
                      radius * math.sin(th) * math.sin(ph),
                      radius * math.cos(th)])
    v.append([0, 0, -radius])
    s = segments
    last = len(v) - 1
    f = []
    for k in range(s):
        f.append((0, 1 + k, 1 + (k + 1) % s))
    for i in range(rings - 2):
        a, b = 1 + i * s, 1 + (i + 1) * s
        for k in range(s):
            k1 = (k + 1) % s
            f += [(a + k, b + k, b + k1), (a + k, b + k1, a + k1)]
    base = 1 + (rings - 2) * s
    for k in range(s):
        f.append((last, base + (k + 1) % s, base + k))
    return np.array(v) + c, f


def quad(center, sx, sy):
    c = np.asarray(center, float)
    v = np.array([[-sx / 2, -sy / 2, 0], [sx / 2, -sy / 2, 0], [sx / 2, sy / 2, 0], [-sx / 2, sy / 2, 0]]) + c
    return v, [(0, 1, 2), (0, 2, 3)]


def rotation(rx=0.0, ry=0.0, rz=0.0):
    cx, sx, cy, sy, cz, sz = (math.cos(rx), math.sin(rx), math.cos(ry), math.sin(ry), math.cos(rz), math.sin(rz))
    X = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Y = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Z = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Z @ Y @ X


def transform(parts, R=None, t=(0, 0, 0), s=1.0):
    R = np.eye(3) if R is None else R
    return [(s * (v @ R.T) + np.asarray(t, float), f) for v, f in parts]


def write_obj(path, parts, names=None):
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    base = 1
    for i, (v, f) in enumerate(parts):
        lines.append(f"o {names[i] if names else f'part{i}'}")
        lines += ["v %.17g %.17g %.17g" % tuple(p) for p in v]
        lines += ["f %d %d %d" % (a + base, b + base, c + base) for a, b, c in f]
        base += len(v)
    path.write_text("\n".join(lines) + "\n")


def chair():
    return [
        box((0, 0, 0.45), (1.0, 1.0, 0.1)),
        box((-0.45, -0.45, 0.2), (0.1, 0.1, 0.4)),
        box((0.45, -0.45, 0.2), (0.1, 0.1, 0.4)),
        box((-0.45, 0.45, 0.2), (0.1, 0.1, 0.4)),
        box((0.45, 0.45, 0.2), (0.1, 0.1, 0.4)),
        box((0, 0.45, 0.9), (1.0, 0.1, 0.8)),
    ]


def corpus():
    shapes = {}
    shapes["s00_chair"] = chair()
    shapes["s01_table"] = [box((0, 0, 0.75), (2.0, 1.0, 0.08))] + [
        box((x, y, 0.355), (0.08, 0.08, 0.71)) for x in (-0.9, 0.9) for y in (-0.4, 0.4)
    ]
    shapes["s02_lamp"] = [
        cylinder((0, 0, 0.05), 0.5, 0.1),
        cylinder((0, 0, 0.6), 0.05, 1.0),
        cylinder((0, 0, 1.3), 0.3, 0.4),
    ]
    shapes["s03_shelf"] = [box((-0.5, 0, 1), (0.05, 0.4, 2)), box((0.5, 0, 1), (0.05, 0.4, 2))] + [
        box((0, 0, z), (0.95, 0.4, 0.04)) for z in (0.1, 0.6, 1.1, 1.6)
    ]
    shapes["s04_bed"] = [
        box((0, 0, 0.4), (2.0, 1.4, 0.2)),
        box((0, 0, 0.6), (1.9, 1.3, 0.2)),
        box((-1.05, 0, 0.7), (0.1, 1.4, 0.8)),
    ] + [box((x, y, 0.15), (0.1, 0.1, 0.3)) for x in (-0.9, 0.9) for y in (-0.6, 0.6)]
    shapes["s05_slabs"] = [box((0, 0, 0.1 * i + 0.05), (1.0, 0.6, 0.1)) for i in range(12)]
    shapes["s06_decal"] = [
        box((0, 0, 0.5), (1, 1, 1)),
        quad((0, 0, 1.0), 0.4, 0.4),
        box((0, 0, 1.25), (0.6, 0.6, 0.5)),
    ]
    shapes["s07_single"] = [box((0, 0, 0), (1, 2, 3))]
    shapes["s08_overlap"] = [box((0, 0, 0), (1, 1, 1)), box((0.2, 0.1, 0), (1, 1, 1))]
    shapes["s09_dominant"] = [box((0, 0, 0), (2, 2, 2)), box((1.2, 0, 0), (0.4, 0.4, 0.4))]
    shapes["s10_snowman"] = [
        uv_sphere((0, 0, 0.5), 0.5),
        uv_sphere((0, 0, 1.35), 0.35),
        uv_sphere((0, 0, 1.95), 0.25),
    ]
    shapes["s11_rotated_chair"] = transform(chair(), rotation(0.17, 0.52, 0.3), (0.3, -0.2, 0.1), 1.7)
    shapes["s12_mug"] = [
        cylinder((0, 0, 0.5), 0.4, 1.0, 24),
        box((0.5, 0, 0.75), (0.2, 0.1, 0.1)),
        box((0.5, 0, 0.25), (0.2, 0.1, 0.1)),
        box((0.6, 0, 0.5), (0.1, 0.1, 0.6)),
    ]
    shapes["s13_car"] = [
        box((0, 0, 0.9), (4.0, 2.0, 1.0)),
        box((-0.2, 0, 1.8), (2.0, 1.8, 0.8)),
    ] + [cylinder((x, y, 0.4), 0.4, 0.3, 16, "y") for x in (-1.3, 1.3) for y in (-1.15, 1.15)]
    shapes["s14_scattered"] = [box((2.0 * i, (i % 3) * 2.0, 0), (0.5, 0.5, 0.5)) for i in range(10)]
    shapes["s15_stool"] = [box((0, 0, 0.8), (1.0, 1.0, 0.2))] + [
        box((0.35 * math.cos(a), 0.35 * math.sin(a), 0.38), (0.15, 0.15, 0.8))
        for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)
    ]
    shapes["s16_dumbbell"] = [
        uv_sphere((-1, 0, 0), 0.4),
        cylinder((0, 0, 0), 0.08, 1.5, 12, "x"),
        uv_sphere((1, 0, 0), 0.4),
    ]
    shapes["s17_plus"] = [box((0, 0, 0), (3, 1, 1)), box((0, 0, 0), (1, 3, 1))]
    shapes["s19_tower"] = [box((0, 0, 0.2 * i + 0.1), (0.4 - 0.01 * i, 0.4 - 0.01 * i, 0.2)) for i in range(20)]
    for name, parts in shapes.items():
        write_obj(ROOT / "corpus" / f"{name}.obj", parts)
    write_glb(ROOT / "corpus" / "s18_lamp.glb")


def two_box_case(iou, ratio):
    """Boxes [0, ratio]x[0,1]² and a unit cube overlapping along x so the
    pair IoU is `iou`; returns None when unattainable."""
    la = ratio
    if iou == 0:
        return [box((la / 2, 0.5, 0.5), (la, 1, 1)), box((la + 1.0, 0.5, 0.5), (1, 1, 1))]
    ov = iou * (la + 1) / (1 + iou)
    if ov > 1.0 or ov > la:
        return None
    x0 = la - ov
    return [box((la / 2, 0.5, 0.5), (la, 1, 1)), box((x0 + 0.5, 0.5, 0.5), (1, 1, 1))]


def threshold_corpus():
    out = ROOT / "threshold"
    truth = {}
    ious = [0.0, 0.05, 0.0995, 0.1005, 0.15, 0.3]
    ratios = [1.0, 2.0, 2.995, 3.005, 5.0]
    k = 0
    for iou in ious:
        for ratio in ratios:
            parts = two_box_case(iou, ratio)
            if parts is None:
                continue
            name = f"t{k:02d}"
            k += 1
            write_obj(out / f"{name}.obj", parts)
            truth[name] = {"mean_part_iou": iou, "largest_rest_ratio": ratio,
                           "accept": iou <= 0.10 and ratio <= 3.0}
    # Three parts: an overlapping pair plus a far cube; mean over three pairs.
    for mean in [0.0995, 0.1005]:
        pair = 3 * mean
        ov = 2 * pair / (1 + pair)
        parts = [box((0.5, 0.5, 0.5), (1, 1, 1)), box((1.5 - ov, 0.5, 0.5), (1, 1, 1)), box((4, 0.5, 0.5), (1, 1, 1))]
        name = f"t{k:02d}"
        k += 1
        write_obj(out / f"{name}.obj", parts)
        truth[name] = {"mean_part_iou": mean, "largest_rest_ratio": 0.5, "accept": mean <= 0.10}
    (out / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")


def segment_dir():
    out = ROOT / "segment3"
    write_obj(out / "a_chair.obj", chair())
    shutil.copy(ROOT / "corpus" / "s04_bed.obj", out / "b_bed.obj")
    write_obj(out / "c_dominant.obj", [box((0, 0, 0), (2, 2, 2)), box((1.2, 0, 0), (0.4, 0.4, 0.4))])


def write_glb(path):
    """Three primitives under nested nodes with translation, rotation and scale."""
    prims = [box((0, 0, 0), (1, 1, 0.2)), cylinder((0, 0, 0), 0.1, 1.0, 12), box((0, 0, 0), (0.6, 0.6, 0.3))]
    blob = bytearray()
    accessors, views, meshes = [], [], []
    for v, f in prims:
        pos = np.asarray(v, np.float32)
        idx = np.asarray(f, np.uint32).reshape(-1)
        for data, target in ((pos.tobytes(), 34962), (idx.tobytes(), 34963)):
            while len(blob) % 4:
                blob.append(0)
            views.append({"buffer": 0, "byteOffset": len(blob), "byteLength": len(data), "target": target})
            blob += data
        accessors.append({"bufferView": len(views) - 2, "componentType": 5126, "count": len(pos), "type": "VEC3",
                          "min": pos.min(0).tolist(), "max": pos.max(0).tolist()})
        accessors.append({"bufferView": len(views) - 1, "componentType": 5125, "count": len(idx), "type": "SCALAR"})
        meshes.append({"primitives": [{"attributes": {"POSITION": len(accessors) - 2}, "indices": len(accessors) - 1}]})
    half = math.sqrt(0.5)
    nodes = [
        {"name": "root", "translation": [0, 0, 0.1], "scale": [2, 2, 2], "children": [1, 2], "mesh": 0},
        {"name": "pole", "translation": [0, 0, 0.55], "children": [3], "mesh": 1},
        {"name": "unused_arm", "rotation": [0, 0, half, half]},
        {"name": "shade", "translation": [0, 0, 0.65], "rotation": [half, 0, 0, half], "mesh": 2},
    ]
    doc = {"asset": {"version": "2.0"}, "scene": 0, "scenes": [{"nodes": [0]}], "nodes": nodes,
           "meshes": meshes, "accessors": accessors, "bufferViews": views,
           "buffers": [{"byteLength": len(blob)}]}
    js = json.dumps(doc, separators=(",", ":")).encode()
    js += b" " * (-len(js) % 4)
    blob += b"\0" * (-len(blob) % 4)
    total = 12 + 8 + len(js) + 8 + len(blob)
    data = struct.pack("<III", 0x46546C67, 2, total) + struct.pack("<II", len(js), 0x4E4F534A) + js
    data += struct.pack("<II", len(blob), 0x004E4942) + bytes(blob)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)

    # World-space reference: node matrices composed root-to-leaf.
    def trs(n):
        m = np.eye(4)
        t, r, s = n.get("translation", [0, 0, 0]), n.get("rotation", [0, 0, 0, 1]), n.get("scale", [1, 1, 1])
        x, y, z, w = r
        R = np.array([[1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                      [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                      [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)]])
        m[:3, :3] = R @ np.diag(s)
        m[:3, 3] = t
        return m

    world = {0: trs(nodes[0])}
    world[1] = world[0] @ trs(nodes[1])
    world[3] = world[1] @ trs(nodes[3])
    ref = []
    for node, mesh in ((0, 0), (1, 1), (3, 2)):
        v = np.asarray(prims[mesh][0], np.float32).astype(float)
        w = (world[node][:3, :3] @ v.T).T + world[node][:3, 3]
        ref.append({"node": nodes[node]["name"], "min": w.min(0).tolist(), "max": w.max(0).tolist(),
                    "faces": len(prims[mesh][1])})
    path.with_suffix(".reference.json").write_text(json.dumps(ref, indent=2) + "\n")


if __name__ == "__main__":
    corpus()
    threshold_corpus()
    segment_dir()

#!/usr/bin/env python3
"""Regenerates the scene fixtures, golden hand traces and their expected
event logs.

Expected events are written from the scripted phases of each trace (which
frame a thumb closes, which frame a fingertip first enters an entity box),
using direct box tests against the fixture geometry. Nothing here runs the
Rust engine.

Usage: python3 fixtures/gen_fixtures.py
"""

import json
import math
import os

ROOT = os.path.dirname(os.path.abspath(__file__))
DT = 0.02

OPEN = 0.05     # index-thumb distance of a relaxed hand (> release 0.03)
CLOSED = 0.01   # index-thumb distance of a pinch (< engage 0.02)


def write(path, text):
    full = os.path.join(ROOT, path)
    os.makedirs(os.path.dirname(full), exist_ok=True)
    with open(full, "w") as f:
        f.write(text)


# ---------------------------------------------------------------- scenes

CUBE_TRIS = [
    (0, 2, 3), (0, 3, 1), (4, 5, 7), (4, 7, 6), (0, 1, 5), (0, 5, 4),
    (2, 6, 7), (2, 7, 3), (0, 4, 6), (0, 6, 2), (1, 3, 7), (1, 7, 5),
]


def cube(lo, size):
    verts = []
    for i in range(8):
        verts.append(tuple(lo[k] + size * ((i >> k) & 1) for k in range(3)))
    return verts, CUBE_TRIS


def icosphere(radius, levels):
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]

    def unit(v):
        n = math.sqrt(sum(c * c for c in v))
        return tuple(c / n for c in v)

    verts = [unit(v) for v in verts]
    for _ in range(levels):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                va, vb = verts[a], verts[b]
                verts.append(unit(tuple((va[k] + vb[k]) / 2 for k in range(3))))
                cache[key] = len(verts) - 1
            return cache[key]

        nxt = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nxt

    verts = [tuple(radius * c for c in v) for v in verts]
    fixed = []
    for a, b, c in faces:
        va, vb, vc = verts[a], verts[b], verts[c]
        e1 = [vb[k] - va[k] for k in range(3)]
        e2 = [vc[k] - va[k] for k in range(3)]
        n = (e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0])
        centre = [(va[k] + vb[k] + vc[k]) for k in range(3)]
        fixed.append((a, b, c) if sum(n[k] * centre[k] for k in range(3)) > 0 else (a, c, b))
    return verts, fixed


def obj(entities):
    lines = ["# generated by gen_fixtures.py"]
    base = 0
    for ent_id, label, (verts, tris) in entities:
        for v in verts:
            lines.append("v " + " ".join(repr(float(c)) for c in v))
        lines.append(f"o {ent_id} {label}")
        for a, b, c in tris:
            lines.append(f"f {a + base + 1} {b + base + 1} {c + base + 1}")
        base += len(verts)
    return "\n".join(lines) + "\n"


def scene(name, meta, entities):
    write(f"scenes/{name}/scene.json", json.dumps(meta, indent=2) + "\n")
    write(f"scenes/{name}/entities.obj", obj(entities))


DEMO_MPU = 0.01
DEMO_BOXES = {
    # id: (lo corner um, edge um)
    "cube_1": ((20.0, 20.0, 20.0), 10.0),
    "tubule_1": ((40.0, 40.0, 40.0), 20.0),
    "cell_1": ((45.0, 45.0, 45.0), 5.0),
}

ICO_LEVELS = 3


def scenes():
    scene("unit_cube",
          {"name": "unit cube", "voxelSizeUm": [1.0, 1.0, 1.0], "dimensions": [1, 1, 1],
           "channels": [{"id": 0, "name": "DAPI"}], "metersPerMicrometer": 1.0},
          [("cube_1", "cube", cube((0.0, 0.0, 0.0), 1.0))])
    scene("demo",
          {"name": "kidney demo", "voxelSizeUm": [0.5, 0.5, 2.0], "dimensions": [200, 200, 50],
           "channels": [{"id": 0, "name": "DAPI"}, {"id": 1, "name": "CD31"}, {"id": 2, "name": "Podocin"}],
           "metersPerMicrometer": DEMO_MPU},
          [("cube_1", "glomerulus", cube(*DEMO_BOXES["cube_1"])),
           ("tubule_1", "tubule", cube(*DEMO_BOXES["tubule_1"])),
           ("cell_1", "podocyte", cube(*DEMO_BOXES["cell_1"]))])
    scene("icosphere",
          {"name": "icosphere r10", "voxelSizeUm": [0.25, 0.25, 0.25], "dimensions": [80, 80, 80],
           "channels": [{"id": 0, "name": "membrane"}], "metersPerMicrometer": 0.001},
          [("sphere_1", "sphere", icosphere(10.0, ICO_LEVELS))])
    scene("nested",
          {"name": "nested cubes", "voxelSizeUm": [1.0, 1.0, 1.0], "dimensions": [10, 10, 10],
           "channels": [{"id": 0, "name": "DAPI"}], "metersPerMicrometer": 0.01},
          [("outer", "tubule", cube((0.0, 0.0, 0.0), 10.0)),
           ("inner", "nucleus", cube((4.0, 4.0, 4.0), 2.0))])


# ---------------------------------------------------------------- traces

def pose(index, gap):
    """Hand with the thumb `gap` meters below the index tip."""
    return {
        "index": list(index),
        "thumb": [index[0], index[1] - gap, index[2]],
        "wrist": [index[0], index[1] - 0.08, index[2] + 0.06],
    }


def lerp(a, b, s):
    return tuple(a[k] + (b[k] - a[k]) * s for k in range(3))


class Trace:
    def __init__(self):
        self.frames = []
        self.events = []

    def frame(self, left, right):
        self.frames.append({"t": round(len(self.frames) * DT + 0.5, 6), "left": left, "right": right})
        return len(self.frames) - 1

    def event(self, frame, kind, **fields):
        self.events.append(dict({"frame": frame, "kind": kind}, **fields))

    def save(self, name):
        write(f"traces/{name}.jsonl", "".join(json.dumps(f) + "\n" for f in self.frames))
        write(f"traces/{name}.events.jsonl", "".join(json.dumps(e) + "\n" for e in self.events))


def demo_entity_at(world):
    """Smallest demo entity whose box strictly contains the world point."""
    p = [c / DEMO_MPU for c in world]
    hits = [(size, ent) for ent, (lo, size) in DEMO_BOXES.items()
            if all(lo[k] < p[k] < lo[k] + size for k in range(3))]
    return min(hits)[1] if hits else None


def hover_walk(tr, path, hovered, gap=OPEN):
    """Right hand walks `path`; records HoverChanged whenever the box test
    result changes."""
    for p in path:
        f = tr.frame(None, pose(p, gap))
        now = demo_entity_at(p)
        if now != hovered:
            tr.event(f, "HoverChanged", entity=now)
            hovered = now
    return hovered


def steps(a, b, n):
    return [lerp(a, b, (i + 1) / n) for i in range(n)]


OUTSIDE = (0.10, 0.25, 0.25)
CENTRE = (0.25, 0.25, 0.25)


def hover_trace():
    tr = Trace()
    h = hover_walk(tr, [OUTSIDE], None)
    h = hover_walk(tr, steps(OUTSIDE, CENTRE, 10), h)
    h = hover_walk(tr, [CENTRE] * 5, h)
    hover_walk(tr, steps(CENTRE, OUTSIDE, 10), h)
    tr.save("hover")


def pinch_on_cube(tr, selected):
    """Thumb closes at CENTRE: toggle, then hover drops (pinching tip is
    excluded); thumb reopens: hover returns."""
    for gap in (0.04, 0.03, 0.025):
        tr.frame(None, pose(CENTRE, gap))
    f = tr.frame(None, pose(CENTRE, CLOSED))
    tr.event(f, "SelectionToggled", entity="cube_1", selected=not selected)
    tr.event(f, "HoverChanged", entity=None)
    for _ in range(3):
        tr.frame(None, pose(CENTRE, CLOSED))
    tr.frame(None, pose(CENTRE, 0.025))
    f = tr.frame(None, pose(CENTRE, OPEN))
    tr.event(f, "HoverChanged", entity="cube_1")
    tr.frame(None, pose(CENTRE, OPEN))
    return not selected


def select_trace(name, toggles):
    tr = Trace()
    h = hover_walk(tr, [OUTSIDE], None)
    h = hover_walk(tr, steps(OUTSIDE, CENTRE, 10), h)
    selected = False
    for _ in range(toggles):
        selected = pinch_on_cube(tr, selected)
    hover_walk(tr, steps(CENTRE, OUTSIDE, 10), "cube_1")
    tr.save(name)
    return selected


EMPTY_RIGHT = (-0.3, 1.0, -0.4)


def translate_trace():
    tr = Trace()
    for _ in range(3):
        tr.frame(None, pose(EMPTY_RIGHT, OPEN))
    tr.frame(None, pose(EMPTY_RIGHT, CLOSED))
    for p in steps(EMPTY_RIGHT, (-0.3, 1.3, -0.4), 15):
        f = tr.frame(None, pose(p, CLOSED))
        tr.event(f, "TransformUpdated")
    for _ in range(3):
        tr.frame(None, pose((-0.3, 1.3, -0.4), CLOSED))
    for _ in range(3):
        tr.frame(None, pose((-0.3, 1.3, -0.4), OPEN))
    tr.save("translate_one")


def pinch_index(pinch_point):
    """Index tip whose closed pinch point (mid index/thumb) is `pinch_point`."""
    return (pinch_point[0], pinch_point[1] + CLOSED / 2, pinch_point[2])


def two_hand_trace(name, left_path, right_path):
    """Both thumbs close together on the first path point, hands follow the
    paths, both release together."""
    tr = Trace()
    l0, r0 = pinch_index(left_path[0]), pinch_index(right_path[0])
    for _ in range(3):
        tr.frame(pose(l0, OPEN), pose(r0, OPEN))
    tr.frame(pose(l0, CLOSED), pose(r0, CLOSED))
    for lp, rp in zip(left_path[1:], right_path[1:]):
        f = tr.frame(pose(pinch_index(lp), CLOSED), pose(pinch_index(rp), CLOSED))
        tr.event(f, "TransformUpdated")
    lz, rz = pinch_index(left_path[-1]), pinch_index(right_path[-1])
    for _ in range(3):
        tr.frame(pose(lz, CLOSED), pose(rz, CLOSED))
    for _ in range(3):
        tr.frame(pose(lz, OPEN), pose(rz, OPEN))
    tr.save(name)


def zoom_trace():
    mid = (0.0, 1.0, -0.5)
    n = 20
    half = [0.1 + 0.1 * i / n for i in range(n + 1)]
    left = [(mid[0] - h, mid[1], mid[2]) for h in half]
    right = [(mid[0] + h, mid[1], mid[2]) for h in half]
    two_hand_trace("zoom_2x", left, right)


def yaw_trace():
    mid = (0.0, 1.0, -0.5)
    r = 0.15
    n = 20
    left, right = [], []
    for i in range(n + 1):
        theta = (math.pi / 2) * i / n
        d = (math.cos(theta), 0.0, math.sin(theta))
        left.append(tuple(mid[k] - r * d[k] for k in range(3)))
        right.append(tuple(mid[k] + r * d[k] for k in range(3)))
    two_hand_trace("yaw_quarter", left, right)


def measure_lead_in(tr):
    """Index tips apart, then together: the measurement starts."""
    for _ in range(3):
        tr.frame(pose((-0.02, 0.0, 0.0), OPEN), pose((0.05, 0.05, 0.0), OPEN))
    f = tr.frame(pose((0.010, 0.015, 0.0), OPEN), pose((0.020, 0.025, 0.0), OPEN))
    tr.event(f, "MeasureStarted", measurementId="m1")


A_END = (0.0, 0.0, 0.0)
B_END = (0.03, 0.04, 0.0)


def measure_trace():
    tr = Trace()
    measure_lead_in(tr)
    ls = steps((0.010, 0.015, 0.0), A_END, 10)
    rs = steps((0.020, 0.025, 0.0), B_END, 10)
    for lp, rp in zip(ls, rs):
        tr.frame(pose(lp, OPEN), pose(rp, OPEN))
    tr.frame(pose(A_END, 0.025), pose(B_END, OPEN))
    f = tr.frame(pose(A_END, CLOSED), pose(B_END, OPEN))
    tr.event(f, "MeasureEndpointLocked", measurementId="m1", hand="left")
    for _ in range(3):
        tr.frame(pose(A_END, CLOSED), pose(B_END, OPEN))
    f = tr.frame(pose(A_END, CLOSED), pose(B_END, CLOSED))
    tr.event(f, "MeasureFinalized", measurement={"measurementId": "m1", "finalized": True})
    for _ in range(2):
        tr.frame(pose(A_END, CLOSED), pose(B_END, CLOSED))
    for _ in range(3):
        tr.frame(pose(A_END, OPEN), pose(B_END, OPEN))
    tr.save("measure_simple")


def measure_abort_trace():
    tr = Trace()
    measure_lead_in(tr)
    ls = steps((0.010, 0.015, 0.0), A_END, 5)
    rs = steps((0.020, 0.025, 0.0), B_END, 5)
    for lp, rp in zip(ls, rs):
        tr.frame(pose(lp, OPEN), pose(rp, OPEN))
    f = tr.frame(pose(ls[-1], OPEN), None)
    tr.event(f, "MeasureAborted", measurementId="m1")
    for _ in range(3):
        tr.frame(pose(ls[-1], OPEN), None)
    tr.save("measure_abort")


def identity():
    return {"t": [0.0, 0.0, 0.0], "q": [1.0, 0.0, 0.0, 0.0], "s": 1.0}


def expected_state(selection):
    return {"channels": {}, "transform": identity(), "selection": selection,
            "hover": None, "measurements": {}}


if __name__ == "__main__":
    scenes()
    hover_trace()
    select_trace("select_toggle", 2)
    select_trace("select_cube", 1)
    translate_trace()
    zoom_trace()
    yaw_trace()
    measure_trace()
    measure_abort_trace()
    write("expected/select_cube.json", json.dumps(expected_state(["cube_1"]), indent=2) + "\n")
    write("expected/select_toggle.json", json.dumps(expected_state([]), indent=2) + "\n")

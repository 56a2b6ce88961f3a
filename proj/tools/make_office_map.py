#!/usr/bin/env python3
"""Regenerate data/maps/office.json from the room layout below.

Rooms occupy the west column (a, b, c, Sply) and the east column (d, Print, S);
everything else is hallway. Each room lists which sides carry a door or a
window; the remaining room sides are walls. Hallway sides look at their
neighbor: another hallway cell reads "hallway", a room reads "door" when the
room has a door on that edge and "wall" otherwise, and the outer boundary reads
"wall". Every wall or window edge between two cells is impassable.
"""
import json
import pathlib
import sys

W, H = 4, 4
SIDES = "NWSE"
DELTA = {"N": (0, -1), "W": (-1, 0), "S": (0, 1), "E": (1, 0)}
OPPOSITE = {"N": "S", "S": "N", "W": "E", "E": "W"}

ROOMS = {
    (0, 0): ("a", {"E": "door", "N": "window"}),
    (0, 1): ("b", {"E": "door"}),
    (0, 2): ("c", {"E": "door"}),
    (0, 3): ("Sply", {"E": "door"}),
    (3, 0): ("d", {"W": "door", "N": "window"}),
    (3, 1): ("Print", {"W": "door"}),
    (3, 2): ("S", {"S": "door"}),
}


def feature(cell, side):
    x, y = cell
    dx, dy = DELTA[side]
    nb = (x + dx, y + dy)
    inside = 0 <= nb[0] < W and 0 <= nb[1] < H
    if cell in ROOMS:
        return ROOMS[cell][1].get(side, "wall")
    if not inside:
        return "wall"
    if nb in ROOMS:
        return "door" if ROOMS[nb][1].get(OPPOSITE[side]) == "door" else "wall"
    return "hallway"


def build():
    features, walls = {}, []
    for y in range(H):
        for x in range(W):
            cell = (x, y)
            features[f"{x},{y}"] = [feature(cell, s) for s in SIDES]
            for s in SIDES:
                dx, dy = DELTA[s]
                nb = (x + dx, y + dy)
                if not (0 <= nb[0] < W and 0 <= nb[1] < H):
                    continue
                if feature(cell, s) in ("wall", "window") and (s in "SE"):
                    walls.append([x, y, s])
                elif feature(cell, s) in ("wall", "window") and feature(nb, OPPOSITE[s]) not in ("wall", "window"):
                    raise SystemExit(f"inconsistent edge at {cell} {s}")
    labels = {}
    for cell, (name, _) in ROOMS.items():
        labels.setdefault(name, []).append(list(cell))
    return {
        "width": W,
        "height": H,
        "start": [0, 3],
        "blocked": [],
        "propositions": sorted(labels),
        "labels": labels,
        "actions": ["up", "left", "down", "right", "stay"],
        "slip": 0.9,
        "slip_model": "uniform_feasible",
        "deterministic": False,
        "wall_edges": walls,
        "observation": {"kind": "local_features", "features": features},
    }


def main():
    out = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else pathlib.Path(__file__).resolve().parent.parent / "data/maps/office.json"
    m = build()
    distinct = {tuple(v) for v in m["observation"]["features"].values()}
    print(f"{len(distinct)} distinct observations", file=sys.stderr)
    out.write_text(json.dumps(m, indent=1) + "\n")


if __name__ == "__main__":
    main()

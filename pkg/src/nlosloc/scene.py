"""Urban deployment geometry: buildings, street graph and gNB sites.

Scene files are YAML (or JSON) documents::

    name: toy
    bounds: [x0, y0, x1, y1]
    ue_height: 1.5
    default_speed_limit_kmh: 40
    buildings:                 # axis-aligned footprints with height
      - [x0, y0, x1, y1, height]
    streets:
      nodes: {A: [x, y], B: [x, y]}
      segments:
        - {from: A, to: B, speed_limit_kmh: 40}   # limit optional
    gnbs:
      - id: 0
        position: [x, y, z]          # z defaults to 5 m
        carrier_freq: 28.0e9
        array: {n_rings: 4, elements_per_ring: 16}
        beams: {count: 16, elevation_deg: -10}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np
import yaml

from . import _kernels
from .antenna import SPEED_OF_LIGHT, ArrayConfig, BeamCodebook, beam_weights  # noqa: F401

DEFAULT_CARRIER = 28e9
DEFAULT_GNB_HEIGHT = 5.0
DEFAULT_UE_HEIGHT = 1.5


class SceneError(ValueError):
    """Scene geometry violates an invariant; the message names the culprit."""


@dataclass(frozen=True)
class Building:
    x0: float
    y0: float
    x1: float
    y1: float
    height: float

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def overlaps(self, other: "Building") -> bool:
        return not (self.x1 < other.x0 or other.x1 < self.x0
                    or self.y1 < other.y0 or other.y1 < self.y0)


@dataclass(frozen=True)
class Street:
    a: str
    b: str
    speed_limit_kmh: float


@dataclass(frozen=True, eq=False)
class GnbSite:
    id: int
    position: np.ndarray
    carrier_freq: float
    array: ArrayConfig
    codebook: BeamCodebook

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq


@dataclass(frozen=True, eq=False)
class SceneMap:
    name: str
    bounds: tuple
    buildings: tuple
    nodes: dict
    streets: tuple
    gnbs: tuple
    ue_height: float = DEFAULT_UE_HEIGHT
    config: dict = field(default_factory=dict, repr=False)
    boxes: np.ndarray = field(init=False, repr=False)
    walls: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        boxes = np.array([[b.x0, b.y0, b.x1, b.y1, b.height] for b in self.buildings],
                         dtype=np.float64).reshape(-1, 5)
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "walls", _walls_from_boxes(boxes))

    @property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        for k, xy in self.nodes.items():
            g.add_node(k, pos=np.asarray(xy, dtype=float))
        for s in self.streets:
            g.add_edge(s.a, s.b, speed_limit_kmh=s.speed_limit_kmh)
        return g

    @property
    def extent(self) -> tuple:
        x0, y0, x1, y1 = self.bounds
        return (x1 - x0, y1 - y0)

    def digest(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _walls_from_boxes(boxes: np.ndarray) -> np.ndarray:
    rows = []
    for i, (x0, y0, x1, y1, h) in enumerate(boxes):
        rows.append((0, x0, y0, y1, -1.0, h, i))  # west face
        rows.append((0, x1, y0, y1, +1.0, h, i))  # east face
        rows.append((1, y0, x0, x1, -1.0, h, i))  # south face
        rows.append((1, y1, x0, x1, +1.0, h, i))  # north face
    return np.array(rows, dtype=np.float64).reshape(-1, 7)


def los_visible(p, q, scene: SceneMap) -> bool:
    """True iff the segment p-q touches no building (closed footprints).

    A building blocks the segment when the segment's 2-D projection meets the
    footprint and the segment height at some crossing point is at or below
    the roof.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return bool(_kernels.los_many(p[None], q[None], scene.boxes)[0])


def los_many(P, Q, scene: SceneMap) -> np.ndarray:
    return _kernels.los_many(np.asarray(P, float), np.asarray(Q, float), scene.boxes)


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------

def _array_from_config(cfg: dict, wavelength: float) -> ArrayConfig:
    n_rings = int(cfg.get("n_rings", 4))
    per_ring = int(cfg.get("elements_per_ring", 16))
    base = ArrayConfig.half_wavelength(wavelength, n_rings, per_ring)
    spacing = float(cfg.get("ring_spacing", base.ring_spacing))
    radius = float(cfg.get("radius", base.radius))
    return ArrayConfig(n_rings, per_ring, spacing, radius, wavelength)


def scene_from_config(cfg: dict) -> SceneMap:
    known = {"name", "bounds", "ue_height", "default_speed_limit_kmh", "buildings", "streets", "gnbs"}
    unknown = set(cfg) - known
    if unknown:
        raise SceneError(f"unknown scene keys: {sorted(unknown)}")
    bounds = tuple(float(v) for v in cfg["bounds"])
    if len(bounds) != 4 or bounds[2] <= bounds[0] or bounds[3] <= bounds[1]:
        raise SceneError(f"bounds must be [x0, y0, x1, y1] with x1>x0, y1>y0, got {bounds}")
    default_limit = float(cfg.get("default_speed_limit_kmh", 40.0))

    buildings = []
    for i, b in enumerate(cfg.get("buildings") or []):
        x0, y0, x1, y1, h = (float(v) for v in b)
        if not (x1 > x0 and y1 > y0 and h > 0):
            raise SceneError(f"building {i}: degenerate footprint or height {b}")
        buildings.append(Building(x0, y0, x1, y1, h))

    st = cfg.get("streets") or {}
    nodes = {str(k): tuple(float(c) for c in v) for k, v in (st.get("nodes") or {}).items()}
    streets = []
    for seg in st.get("segments") or []:
        a, b = str(seg["from"]), str(seg["to"])
        for n in (a, b):
            if n not in nodes:
                raise SceneError(f"street {a}-{b}: unknown node {n!r}")
        limit = float(seg.get("speed_limit_kmh", default_limit))
        streets.append(Street(a, b, limit))

    gnbs = []
    for g in cfg.get("gnbs") or []:
        pos = [float(v) for v in g["position"]]
        if len(pos) == 2:
            pos.append(DEFAULT_GNB_HEIGHT)
        f = float(g.get("carrier_freq", DEFAULT_CARRIER))
        if f <= 0:
            raise SceneError(f"gnb {g.get('id')}: carrier_freq must be positive")
        lam = SPEED_OF_LIGHT / f
        array = _array_from_config(g.get("array") or {}, lam)
        bcfg = g.get("beams") or {}
        codebook = BeamCodebook.uniform(array, int(bcfg.get("count", 16)),
                                        float(bcfg.get("elevation_deg", -10.0)),
                                        float(bcfg.get("azimuth_offset_deg", 0.0)))
        gnbs.append(GnbSite(int(g.get("id", len(gnbs))), np.array(pos), f, array, codebook))

    scene = SceneMap(str(cfg.get("name", "custom")), bounds, tuple(buildings), nodes,
                     tuple(streets), tuple(gnbs), float(cfg.get("ue_height", DEFAULT_UE_HEIGHT)),
                     config=_canonical(cfg))
    validate_scene(scene)
    return scene


def _canonical(cfg: dict) -> dict:
    return json.loads(json.dumps(cfg, sort_keys=True, default=float))


def validate_scene(scene: SceneMap) -> None:
    x0, y0, x1, y1 = scene.bounds

    def in_bounds(x, y):
        return x0 <= x <= x1 and y0 <= y <= y1

    bs = scene.buildings
    for i, b in enumerate(bs):
        if not (in_bounds(b.x0, b.y0) and in_bounds(b.x1, b.y1)):
            raise SceneError(f"building {i} extends outside bounds")
        for j in range(i + 1, len(bs)):
            if b.overlaps(bs[j]):
                raise SceneError(f"building {i} overlaps building {j}")
    for k, (x, y) in scene.nodes.items():
        if not in_bounds(x, y):
            raise SceneError(f"street node {k} outside bounds")
    for s in scene.streets:
        p = np.array([*scene.nodes[s.a], 0.0])
        q = np.array([*scene.nodes[s.b], 0.0])
        for i in range(len(bs)):
            if not _kernels.los_many(p[None], q[None], scene.boxes[i:i + 1])[0]:
                raise SceneError(f"street {s.a}-{s.b} intersects building {i}")
    for g in scene.gnbs:
        gx, gy, gz = g.position
        if not in_bounds(gx, gy):
            raise SceneError(f"gnb {g.id} outside bounds")
        for i, b in enumerate(bs):
            if b.contains(gx, gy) and gz <= b.height:
                raise SceneError(f"gnb inside building: gnb {g.id} in building {i}")


def load_scene(source) -> SceneMap:
    """Build a scene from a preset name, a YAML/JSON path, or a config dict."""
    if isinstance(source, SceneMap):
        return source
    if isinstance(source, dict):
        return scene_from_config(source)
    name = str(source)
    if name in PRESETS:
        return scene_from_config(PRESETS[name]())
    path = Path(name)
    if not path.exists():
        raise SceneError(f"no preset or scene file named {name!r}; presets: {sorted(PRESETS)}")
    text = path.read_text()
    cfg = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    return scene_from_config(cfg)


def scene_to_yaml(scene: SceneMap) -> str:
    return yaml.safe_dump(scene.config, sort_keys=False)


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

def grid_config(name, xs, ys, street_width, heights, gnbs, bounds, *, split=True,
                outer_ring=True, open_blocks=(), limits=None, default_limit=40.0):
    """Rectangular blocks between a lattice of streets.

    ``xs``/``ys`` are street centrelines; ``limits`` maps ``("h", j)`` or
    ``("v", i)`` to a per-street speed limit.  With ``outer_ring`` a strip of
    buildings lines the outer side of the boundary streets so that those
    streets behave like canyons too.
    """
    half = street_width / 2
    limits = limits or {}
    buildings = []
    k = 0
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            if (i, j) in open_blocks:
                continue
            bx0, bx1 = xs[i] + half, xs[i + 1] - half
            by0, by1 = ys[j] + half, ys[j + 1] - half
            h = heights[k % len(heights)]
            k += 1
            if split and (bx1 - bx0) >= (by1 - by0):
                mid = (bx0 + bx1) / 2
                buildings.append([bx0, by0, mid - 3, by1, h])
                buildings.append([mid + 3, by0, bx1, by1, heights[k % len(heights)]])
            elif split:
                mid = (by0 + by1) / 2
                buildings.append([bx0, by0, bx1, mid - 3, h])
                buildings.append([bx0, mid + 3, bx1, by1, heights[k % len(heights)]])
            else:
                buildings.append([bx0, by0, bx1, by1, h])
    if outer_ring:
        X0, Y0, X1, Y1 = bounds
        gap = 2.0
        if xs[0] - half - X0 > 1:
            buildings.append([X0, ys[0] - half + gap, xs[0] - half, ys[-1] + half - gap, heights[0]])
        if X1 - (xs[-1] + half) > 1:
            buildings.append([xs[-1] + half, ys[0] - half + gap, X1, ys[-1] + half - gap, heights[1 % len(heights)]])
        if ys[0] - half - Y0 > 1:
            buildings.append([X0, Y0, X1, ys[0] - half, heights[2 % len(heights)]])
        if Y1 - (ys[-1] + half) > 1:
            buildings.append([X0, ys[-1] + half, X1, Y1, heights[3 % len(heights)]])
    nodes = {}
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            nodes[f"n{i}_{j}"] = [float(x), float(y)]
    segments = []
    for j in range(len(ys)):
        for i in range(len(xs) - 1):
            seg = {"from": f"n{i}_{j}", "to": f"n{i + 1}_{j}"}
            if ("h", j) in limits:
                seg["speed_limit_kmh"] = limits[("h", j)]
            segments.append(seg)
    for i in range(len(xs)):
        for j in range(len(ys) - 1):
            seg = {"from": f"n{i}_{j}", "to": f"n{i}_{j + 1}"}
            if ("v", i) in limits:
                seg["speed_limit_kmh"] = limits[("v", i)]
            segments.append(seg)
    return {
        "name": name,
        "bounds": [float(v) for v in bounds],
        "ue_height": DEFAULT_UE_HEIGHT,
        "default_speed_limit_kmh": default_limit,
        "buildings": buildings,
        "streets": {"nodes": nodes, "segments": segments},
        "gnbs": gnbs,
    }


def _gnb(i, x, y, z=DEFAULT_GNB_HEIGHT):
    return {"id": i, "position": [x, y, z], "carrier_freq": DEFAULT_CARRIER,
            "array": {"n_rings": 4, "elements_per_ring": 16},
            "beams": {"count": 16, "elevation_deg": -10.0}}


def madrid_like_config() -> dict:
    xs = [20.0, 145.0, 275.0, 405.0, 530.0]
    ys = [20.0, 130.0, 240.0, 350.0]
    gnbs = [_gnb(0, 151.0, 136.0), _gnb(1, 411.0, 246.0), _gnb(2, 281.0, 26.0)]
    # top street is a 20 km/h street; the wide street at y=130 allows 60 km/h
    limits = {("h", 3): 20.0, ("h", 1): 60.0}
    return grid_config("madrid-like", xs, ys, 20.0, [24.0, 33.0, 18.0, 42.0, 27.0, 36.0],
                       gnbs, (0.0, 0.0, 550.0, 370.0), limits=limits, open_blocks=((2, 1),))


def toy_config() -> dict:
    xs = [20.0, 150.0, 280.0]
    ys = [20.0, 110.0, 200.0]
    gnbs = [_gnb(0, 26.0, 26.0), _gnb(1, 274.0, 194.0)]
    return grid_config("toy", xs, ys, 20.0, [22.0, 30.0, 18.0, 26.0], gnbs, (0.0, 0.0, 300.0, 220.0))


def toy_moved_config() -> dict:
    """Toy scene with gNB 1 relocated to the central intersection."""
    cfg = toy_config()
    cfg["name"] = "toy-moved"
    cfg["gnbs"][1] = _gnb(1, 156.0, 116.0)
    return cfg


PRESETS = {
    "madrid-like": madrid_like_config,
    "toy": toy_config,
    "toy-moved": toy_moved_config,
}

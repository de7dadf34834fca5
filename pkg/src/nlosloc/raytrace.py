"""Image-method specular tracer: LoS plus up to two wall reflections."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .antenna import SPEED_OF_LIGHT
from .scene import GnbSite, SceneMap

DEFAULT_REFLECTION_LOSS_DB = 6.0


class DegeneratePathError(ValueError):
    pass


def fspl_db(distance: float, freq: float) -> float:
    return 20.0 * np.log10(4.0 * np.pi * distance * freq / SPEED_OF_LIGHT)


def path_gain(length: float, bounce_count: int, carrier_freq: float,
              reflection_loss_db: float = DEFAULT_REFLECTION_LOSS_DB) -> complex:
    """Complex amplitude of a specular path of total ``length``.

    Free-space loss plus a fixed loss and a pi phase flip per bounce.
    """
    if not length > 0:
        raise DegeneratePathError("degenerate path: zero length")
    loss = fspl_db(length, carrier_freq) + bounce_count * reflection_loss_db
    phase = -2.0 * np.pi * carrier_freq * length / SPEED_OF_LIGHT + np.pi * bounce_count
    return complex(10.0 ** (-loss / 20.0) * np.exp(1j * phase))


def _angles(v: np.ndarray) -> tuple:
    az = float(np.arctan2(v[1], v[0]))
    el = float(np.arctan2(v[2], np.hypot(v[0], v[1])))
    return az, el


@dataclass(frozen=True, eq=False)
class PathComponent:
    delay: float
    gain: complex
    aod: tuple  # (azimuth, elevation) leaving the transmitter
    aoa: tuple  # (azimuth, elevation) at the gNB for the uplink reading (equals aod)
    aoa_ue: tuple  # (azimuth, elevation) the wave arrives from, seen at the UE
    bounce_count: int
    points: np.ndarray = field(repr=False)  # (bounce_count, 3) reflection points
    walls: tuple = ()

    @property
    def length(self) -> float:
        return self.delay * SPEED_OF_LIGHT

    @property
    def power(self) -> float:
        return abs(self.gain) ** 2

    @property
    def loss_db(self) -> float:
        return -20.0 * np.log10(abs(self.gain))


@dataclass(frozen=True, eq=False)
class PathSet:
    paths: tuple
    tx_id: int = -1
    rx_sample_id: int = -1

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    @property
    def K(self) -> int:
        return len(self.paths)

    def union(self, other: "PathSet") -> "PathSet":
        return PathSet(_sort(list(self.paths) + list(other.paths)), self.tx_id, self.rx_sample_id)


def _sort(paths):
    return tuple(sorted(paths, key=lambda p: (-p.power, p.delay, p.walls)))


def polyline(tx, rx, path: PathComponent) -> np.ndarray:
    return np.vstack([np.asarray(tx, float)[None], path.points.reshape(-1, 3), np.asarray(rx, float)[None]])


def trace(tx, rx, scene: SceneMap, max_bounces: int = 2, carrier_freq: float = 28e9,
          reflection_loss_db: float = DEFAULT_REFLECTION_LOSS_DB, tx_id: int = -1,
          rx_sample_id: int = -1) -> PathSet:
    """All LoS and specular paths from ``tx`` to ``rx`` up to ``max_bounces``."""
    if max_bounces not in (0, 1, 2):
        raise ValueError("max_bounces must be 0, 1 or 2")
    tx = np.asarray(tx, dtype=np.float64)
    rx = np.asarray(rx, dtype=np.float64)
    rows = _kernels.trace(tx, rx, scene.boxes, scene.walls, max_bounces)
    paths = []
    seen = set()
    for row in rows:
        nb = int(row[0])
        pts = np.empty((0, 3)) if nb == 0 else row[3:3 + 3 * nb].reshape(nb, 3).copy()
        key = (nb, tuple(np.round(pts.ravel(), 9)), round(float(row[9]), 9))
        if key in seen:
            continue
        seen.add(key)
        length = float(row[9])
        first = pts[0] if nb else rx
        last = pts[-1] if nb else tx
        aod = _angles(first - tx)
        aoa_ue = _angles(last - rx)
        walls = tuple(int(w) for w in row[1:1 + nb])
        paths.append(PathComponent(length / SPEED_OF_LIGHT,
                                   path_gain(length, nb, carrier_freq, reflection_loss_db),
                                   aod, aod, aoa_ue, nb, pts, walls))
    return PathSet(_sort(paths), tx_id, rx_sample_id)


def enumerate_paths(gnb: GnbSite, ue_pos, scene: SceneMap, max_bounces: int = 2,
                    reflection_loss_db: float = DEFAULT_REFLECTION_LOSS_DB,
                    rx_sample_id: int = -1) -> PathSet:
    return trace(gnb.position, ue_pos, scene, max_bounces, gnb.carrier_freq,
                 reflection_loss_db, gnb.id, rx_sample_id)


def dump_polylines(pathset: PathSet, tx, rx) -> str:
    """Line-delimited JSON records of path polylines for plotting."""
    lines = []
    for k, p in enumerate(pathset.paths):
        lines.append(json.dumps({
            "tx_id": pathset.tx_id, "sample": pathset.rx_sample_id, "k": k,
            "bounces": p.bounce_count, "delay": p.delay, "loss_db": p.loss_db,
            "points": polyline(tx, rx, p).tolist(),
        }))
    return "\n".join(lines) + ("\n" if lines else "")

"""Vehicle-like UE tracks on the street graph, sampled every 100 ms.

Kinematics: cruise at the street limit, brake at 3 m/s^2 so that the speed
is 20 km/h when the turn zone (the last 15 m before a turning intersection)
starts, hold 20 km/h through the zone, and accelerate at 2 m/s^2 after the
corner.  Positions advance by ``speed * dt`` along the street polyline each
step, so arc length between samples equals ``speed * dt`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .scene import SceneMap

DT = 0.1
TURN_SPEED_KMH = 20.0
DECEL = 3.0
ACCEL = 2.0
TURN_ZONE = 15.0


class MobilityError(ValueError):
    pass


def kmh(v: float) -> float:
    return v / 3.6


@dataclass(eq=False)
class Track:
    times: np.ndarray
    positions: np.ndarray  # (n, 2)
    speeds: np.ndarray  # m/s
    headings: np.ndarray  # (n, 2) unit vectors
    arclength: np.ndarray  # distance travelled since the first sample
    turn_distance: np.ndarray  # distance along the route to the nearest turning corner
    edges: list = field(default_factory=list)  # (u, v) street each sample lies on
    seed: int = 0
    track_id: int = 0

    def __len__(self):
        return len(self.times)

    @property
    def straight(self) -> np.ndarray:
        """Samples outside every turn zone."""
        return self.turn_distance > TURN_ZONE


def _unit(g, u, v):
    d = g.nodes[v]["pos"] - g.nodes[u]["pos"]
    return d / np.linalg.norm(d)


def _choose_next(g, u, v, rng):
    options = sorted(n for n in g.neighbors(v) if n != u)
    if not options:
        return u  # dead end: U-turn
    return options[int(rng.integers(len(options)))]


def generate_track(scene: SceneMap, seed: int, n_samples: int, dt: float = DT,
                   track_id: int = 0) -> Track:
    if n_samples < 1:
        raise MobilityError("n_samples must be at least 1")
    g = scene.graph
    if g.number_of_edges() == 0:
        raise MobilityError("street graph has no segments")
    if not nx.is_connected(g):
        raise MobilityError("street graph is disconnected")
    rng = np.random.default_rng(seed)
    edges = sorted(g.edges)
    lengths = np.array([np.linalg.norm(g.nodes[b]["pos"] - g.nodes[a]["pos"]) for a, b in edges])
    e = edges[int(rng.choice(len(edges), p=lengths / lengths.sum()))]
    u, v = (e if rng.random() < 0.5 else (e[1], e[0]))
    L = float(np.linalg.norm(g.nodes[v]["pos"] - g.nodes[u]["pos"]))
    s = float(rng.uniform(0.0, L))
    nxt = _choose_next(g, u, v, rng)
    v_turn = kmh(TURN_SPEED_KMH)

    def plan(u, v, nxt):
        heading = _unit(g, u, v)
        turn = float(heading @ _unit(g, v, nxt)) < 1.0 - 1e-9
        limit = kmh(g.edges[u, v]["speed_limit_kmh"])
        v_end = v_turn if turn else min(limit, kmh(g.edges[v, nxt]["speed_limit_kmh"]))
        return heading, turn, limit, v_end

    heading, turn, limit, v_end = plan(u, v, nxt)
    # start no faster than the braking curve allows
    room = max(L - s - (TURN_ZONE if turn else 0.0), 0.0)
    speed = min(limit, np.sqrt(v_end ** 2 + 2 * DECEL * room))
    since_turn = np.inf

    times = np.arange(n_samples) * dt
    pos = np.empty((n_samples, 2))
    spd = np.empty(n_samples)
    hdg = np.empty((n_samples, 2))
    arc = np.empty(n_samples)
    tdist = np.empty(n_samples)
    on_edge = []
    travelled = 0.0
    for k in range(n_samples):
        pu = g.nodes[u]["pos"]
        pos[k] = pu + heading * s
        spd[k] = speed
        hdg[k] = heading
        arc[k] = travelled
        ahead = (L - s) if turn else np.inf
        tdist[k] = min(ahead, since_turn)
        on_edge.append((u, v))

        # braking curve toward the end-of-street target speed
        remaining = L - s - (TURN_ZONE if turn else 0.0) - speed * dt - v_end * dt
        cap = np.sqrt(v_end ** 2 + 2 * DECEL * max(remaining, 0.0))
        new_speed = min(speed + ACCEL * dt, limit, cap)
        new_speed = max(new_speed, speed - DECEL * dt)

        step = speed * dt
        travelled += step
        s += step
        since_turn += step
        while s >= L:
            s -= L
            if turn:
                since_turn = s
            u, v = v, nxt
            L = float(np.linalg.norm(g.nodes[v]["pos"] - g.nodes[u]["pos"]))
            nxt = _choose_next(g, u, v, rng)
            heading, turn, limit, v_end = plan(u, v, nxt)
        speed = new_speed
    return Track(times, pos, spd, hdg, arc, tdist, on_edge, int(seed), track_id)


def split_counts(n_tracks: int) -> tuple:
    if n_tracks < 3:
        raise MobilityError("need at least 3 tracks for a train/val/test split")
    n_val = max(1, int(round(0.1 * n_tracks)))
    n_test = max(1, int(round(0.1 * n_tracks)))
    return n_tracks - n_val - n_test, n_val, n_test


def generate_dataset(scene: SceneMap, n_tracks: int = 40, samples_per_track: int = 600,
                     master_seed: int = 0):
    """Tracks with per-track seeds drawn from ``master_seed`` and a by-track split.

    Returns ``(tracks, split)`` where ``split[i]`` is ``'train'``, ``'val'`` or
    ``'test'`` for track ``i``.
    """
    n_train, n_val, n_test = split_counts(n_tracks)
    ss = np.random.SeedSequence(master_seed)
    seeds = ss.generate_state(n_tracks, dtype=np.uint32)
    tracks = [generate_track(scene, int(sd), samples_per_track, track_id=i) for i, sd in enumerate(seeds)]
    order = np.random.default_rng(master_seed).permutation(n_tracks)
    split = [""] * n_tracks
    for r, i in enumerate(order):
        split[i] = "train" if r < n_train else ("val" if r < n_train + n_val else "test")
    return tracks, split

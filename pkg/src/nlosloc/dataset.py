"""Simulated measurement datasets and their on-disk format.

A dataset is two files sharing a stem:

``<stem>.jsonl``
    First line: header object (``schema``, scene name and digest, OFDM
    config, seeds, split, gNB positions, array shapes, config hash).  Then
    one record per sample ordered by (track, time) with keys ``track``,
    ``k``, ``t``, ``pos``, ``speed``, ``heading``, ``los``, ``turn_dist``.

``<stem>.bin``
    Little-endian arrays back to back, C order, in header ``arrays`` order:
    ``csi`` complex128 (S, G, B, M), then ``csi_mask`` uint8 (S, G, B, M),
    ``paths`` float64 (S, G, P, 4), ``paths_valid`` uint8 (S, G, P).
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import MAX_TIME_PATHS, PATH_LOSS_THRESHOLD_DB, OfdmConfig, csi_grid, time_csi
from .mobility import Track, generate_dataset
from .raytrace import enumerate_paths
from .scene import SceneMap, load_scene

SCHEMA_VERSION = 1
WORKERS_ENV = "NLOSLOC_WORKERS"


class DatasetError(ValueError):
    pass


def config_hash(cfg) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(eq=False)
class Dataset:
    header: dict
    track: np.ndarray  # (S,) int
    k: np.ndarray  # (S,) int, sample index within the track
    time: np.ndarray
    position: np.ndarray  # (S, 2)
    speed: np.ndarray
    heading: np.ndarray  # (S, 2)
    los: np.ndarray  # (S, G) bool
    turn_distance: np.ndarray
    csi: np.ndarray  # (S, G, B, M) complex
    csi_mask: np.ndarray
    paths: np.ndarray  # (S, G, P, 4): delay, power dBm, azimuth, elevation
    paths_valid: np.ndarray  # (S, G, P)

    def __len__(self):
        return len(self.track)

    @property
    def split(self) -> list:
        return self.header["split"]

    @property
    def gnb_positions(self) -> np.ndarray:
        return np.asarray(self.header["gnb_positions"], float)

    @property
    def any_los(self) -> np.ndarray:
        return self.los.any(axis=1)

    def split_mask(self, name: str) -> np.ndarray:
        tracks = [i for i, s in enumerate(self.split) if s == name]
        return np.isin(self.track, tracks)

    def subset(self, mask) -> "Dataset":
        m = np.asarray(mask)
        return Dataset(self.header, *(getattr(self, n)[m] for n in _FIELDS))

    def track_ids(self, name: str | None = None) -> list:
        if name is None:
            return sorted(set(self.track.tolist()))
        return [i for i, s in enumerate(self.split) if s == name and np.any(self.track == i)]


_FIELDS = ("track", "k", "time", "position", "speed", "heading", "los", "turn_distance",
           "csi", "csi_mask", "paths", "paths_valid")


def _simulate_track(args):
    scene_cfg, track, ofdm_d, threshold_db = args
    scene = load_scene(scene_cfg)
    ofdm = OfdmConfig(**ofdm_d)
    G = len(scene.gnbs)
    B = max(len(g.codebook) for g in scene.gnbs)
    n = len(track)
    csi = np.zeros((n, G, B, ofdm.n_rbs), complex)
    mask = np.zeros((n, G, B, ofdm.n_rbs), bool)
    paths = np.zeros((n, G, MAX_TIME_PATHS, 4))
    valid = np.zeros((n, G, MAX_TIME_PATHS), bool)
    los = np.zeros((n, G), bool)
    for k in range(n):
        ue = np.array([track.positions[k, 0], track.positions[k, 1], scene.ue_height])
        sets = [enumerate_paths(g, ue, scene, rx_sample_id=k) for g in scene.gnbs]
        grid = csi_grid(sets, scene.gnbs, ofdm, threshold_db, ue, float(track.times[k]))
        csi[k], mask[k], los[k] = grid.values, grid.mask, grid.los
        for gi, ps in enumerate(sets):
            tc = time_csi(ps, threshold_db)
            paths[k, gi, :len(tc)] = tc
            valid[k, gi, :len(tc)] = True
    return csi, mask, paths, valid, los


def worker_count(default: int = 1) -> int:
    v = os.environ.get(WORKERS_ENV)
    if not v:
        return default
    try:
        n = int(v)
    except ValueError:
        raise DatasetError(f"{WORKERS_ENV} must be an integer, got {v!r}") from None
    return max(1, n)


def simulate(scene, n_tracks: int = 40, samples_per_track: int = 600, master_seed: int = 0,
             ofdm: OfdmConfig = OfdmConfig(), threshold_db: float = PATH_LOSS_THRESHOLD_DB,
             workers: int | None = None, extra_header: dict | None = None) -> Dataset:
    scene = load_scene(scene)
    tracks, split = generate_dataset(scene, n_tracks, samples_per_track, master_seed)
    jobs = [(scene.config, t, ofdm.to_dict(), threshold_db) for t in tracks]
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_simulate_track, jobs))
    else:
        results = [_simulate_track(j) for j in jobs]
    cols = [np.concatenate([r[i] for r in results]) for i in range(5)]
    header = {
        "schema": SCHEMA_VERSION,
        "scene": scene.name,
        "scene_digest": scene.digest(),
        "ofdm": ofdm.to_dict(),
        "threshold_db": threshold_db,
        "master_seed": master_seed,
        "track_seeds": [t.seed for t in tracks],
        "n_tracks": n_tracks,
        "samples_per_track": samples_per_track,
        "split": split,
        "gnb_positions": [g.position.tolist() for g in scene.gnbs],
        "ue_height": scene.ue_height,
        **(extra_header or {}),
    }
    header["config_hash"] = config_hash(header)
    return _assemble(header, tracks, *cols)


def _assemble(header, tracks: list, csi, mask, paths, valid, los) -> Dataset:
    cat = lambda f: np.concatenate([f(t) for t in tracks])
    return Dataset(
        header,
        cat(lambda t: np.full(len(t), t.track_id)),
        cat(lambda t: np.arange(len(t))),
        cat(lambda t: t.times), cat(lambda t: t.positions), cat(lambda t: t.speeds),
        cat(lambda t: t.headings), los, cat(lambda t: t.turn_distance),
        csi, mask, paths, valid,
    )


def tracks_of(ds: Dataset) -> list:
    """Rebuild lightweight Track objects (no street metadata) from a dataset."""
    out = []
    for tid in ds.track_ids():
        m = ds.track == tid
        out.append(Track(ds.time[m], ds.position[m], ds.speed[m], ds.heading[m],
                         np.zeros(m.sum()), ds.turn_distance[m], [], ds.header["track_seeds"][tid], tid))
    return out


# IO ------------------------------------------------------------------------------

def _stem(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".jsonl", ".bin") else p


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def write_dataset(ds: Dataset, path) -> tuple:
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    header = dict(ds.header)
    header["arrays"] = [
        {"name": "csi", "dtype": "<c16", "shape": list(ds.csi.shape)},
        {"name": "csi_mask", "dtype": "u1", "shape": list(ds.csi_mask.shape)},
        {"name": "paths", "dtype": "<f8", "shape": list(ds.paths.shape)},
        {"name": "paths_valid", "dtype": "u1", "shape": list(ds.paths_valid.shape)},
    ]
    jl, bn = stem.with_suffix(".jsonl"), stem.with_suffix(".bin")
    with open(jl, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i in range(len(ds)):
            rec = {"track": int(ds.track[i]), "k": int(ds.k[i]), "t": float(ds.time[i]),
                   "pos": [float(v) for v in ds.position[i]], "speed": float(ds.speed[i]),
                   "heading": [float(v) for v in ds.heading[i]], "los": [int(v) for v in ds.los[i]],
                   "turn_dist": _num(ds.turn_distance[i])}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(bn, "wb") as fh:
        for spec in header["arrays"]:
            fh.write(np.ascontiguousarray(getattr(ds, spec["name"]), dtype=spec["dtype"]).tobytes())
    return jl, bn


def read_dataset(path) -> Dataset:
    stem = _stem(path)
    jl, bn = stem.with_suffix(".jsonl"), stem.with_suffix(".bin")
    if not jl.exists() or not bn.exists():
        raise DatasetError(f"dataset files {jl} / {bn} not found")
    with open(jl) as fh:
        header = json.loads(fh.readline())
        if header.get("schema") != SCHEMA_VERSION:
            raise DatasetError(f"unsupported dataset schema {header.get('schema')}")
        recs = [json.loads(line) for line in fh if line.strip()]
    raw = bn.read_bytes()
    arrays, off = {}, 0
    for spec in header["arrays"]:
        dt = np.dtype(spec["dtype"])
        n = int(np.prod(spec["shape"], dtype=np.int64))
        if off + n * dt.itemsize > len(raw):
            raise DatasetError(f"binary sidecar truncated at {spec['name']}")
        arrays[spec["name"]] = np.frombuffer(raw, dt, n, off).reshape(spec["shape"]).copy()
        off += n * dt.itemsize
    arrays_meta = header.pop("arrays")
    del arrays_meta
    td = np.array([np.inf if r["turn_dist"] is None else r["turn_dist"] for r in recs], float)
    return Dataset(
        header,
        np.array([r["track"] for r in recs], int), np.array([r["k"] for r in recs], int),
        np.array([r["t"] for r in recs], float), np.array([r["pos"] for r in recs], float).reshape(-1, 2),
        np.array([r["speed"] for r in recs], float), np.array([r["heading"] for r in recs], float).reshape(-1, 2),
        np.array([r["los"] for r in recs], bool).reshape(len(recs), -1), td,
        arrays["csi"].astype(complex), arrays["csi_mask"].astype(bool),
        arrays["paths"].astype(float), arrays["paths_valid"].astype(bool),
    )

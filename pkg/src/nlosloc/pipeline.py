"""Dataset-level glue: impairments, input matrices, training and scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import posmodels as pm
from .dataset import Dataset
from .ekf import EkfParams, run_ekf_track
from .evaluate import ErrorReport, heading_error, position_error
from .features import (FeatureSpec, NormStats, UncertaintyConfig, build_matrix, fit_norm_stats,
                       inject_uncertainty, label_noise)
from .nn.train import TrainSchedule, train
from .antenna import SPEED_OF_LIGHT

STRAIGHT_MARGIN = 15.0  # metres from a turning corner


def impair(ds: Dataset, cfg: UncertaintyConfig, seed: int) -> Dataset:
    """Measurement impairments on every split (labels untouched)."""
    rng = np.random.default_rng(seed)
    s = {"csi": ds.csi, "csi_mask": ds.csi_mask, "paths": ds.paths, "paths_valid": ds.paths_valid}
    for kind in ("fr_c", "tof", "rp", "aoa"):
        s = inject_uncertainty(s, kind, rng, cfg)
    out = ds.subset(np.ones(len(ds), bool))
    out.csi, out.paths = s["csi"], s["paths"]
    return out


def fit_stats(ds: Dataset, mask=None) -> NormStats:
    m = ds.split_mask("train") if mask is None else mask
    return fit_norm_stats(ds.csi[m], ds.csi_mask[m], ds.paths[m], ds.paths_valid[m])


def inputs(ds: Dataset, spec: FeatureSpec, stats: NormStats) -> np.ndarray:
    return build_matrix(spec, stats, ds.csi, ds.csi_mask, ds.paths, ds.paths_valid)


def train_labels(ds: Dataset, std: float, seed: int) -> np.ndarray:
    """Positions with label noise applied; noise is only meant for training rows."""
    return label_noise(ds.position, std, np.random.default_rng(seed + 7919))


@dataclass
class Fitted:
    model: object
    history: object
    stats: NormStats
    spec: FeatureSpec


def fit_snapshot(ds: Dataset, spec: FeatureSpec, schedule: TrainSchedule, seed: int = 0,
                 label_std: float = 0.0, stats: NormStats | None = None, train_mask=None,
                 val_mask=None, model=None) -> Fitted:
    stats = fit_stats(ds, train_mask) if stats is None else stats
    X = inputs(ds, spec, stats)
    tm = ds.split_mask("train") if train_mask is None else train_mask
    vm = ds.split_mask("val") if val_mask is None else val_mask
    pos = train_labels(ds, label_std, seed)
    Y = pm.snapshot_labels(np.where(tm[:, None], pos, ds.position))
    model = pm.build_snapshot(X.shape[1], seed=seed) if model is None else model
    hist = train(model, (X[tm], Y[tm]), (X[vm], Y[vm]), schedule, seed)
    return Fitted(model, hist, stats, spec)


def _track_windows(ds, X, Y, mask, window, stride):
    xs, ys = [], []
    for tid in np.unique(ds.track[mask]):
        m = mask & (ds.track == tid)
        xw, yw, _ = pm.make_windows(X[m], Y[m], window, stride)
        xs.append(xw)
        ys.append(yw)
    return np.concatenate(xs), np.concatenate(ys)


def fit_sequence(ds: Dataset, spec: FeatureSpec, schedule: TrainSchedule, seed: int = 0,
                 label_std: float = 0.0, window: int = pm.WINDOW, stride: int = 5,
                 stats: NormStats | None = None, widths=pm.SEQUENCE_WIDTHS, lstm_hidden=None,
                 train_mask=None, val_mask=None, model=None) -> Fitted:
    stats = fit_stats(ds, train_mask) if stats is None else stats
    X = inputs(ds, spec, stats)
    tm = ds.split_mask("train") if train_mask is None else train_mask
    vm = ds.split_mask("val") if val_mask is None else val_mask
    pos = np.where(tm[:, None], train_labels(ds, label_std, seed), ds.position)
    Y = pm.sequence_labels(pos, ds.speed, ds.heading)
    train_set = _track_windows(ds, X, Y, tm, window, stride)
    val_set = _track_windows(ds, X, Y, vm, window, stride)
    if model is None:
        model = pm.build_sequence(X.shape[1], widths, lstm_hidden, window, seed)
    hist = train(model, train_set, val_set, schedule, seed)
    return Fitted(model, hist, stats, spec)


def fraction_mask(ds: Dataset, split: str, fraction: float, contiguous: bool = False, seed: int = 0):
    """Keep ``fraction`` of each track's rows in ``split``.

    ``contiguous`` keeps the leading segment of every track (sequence windows need
    consecutive samples); otherwise rows are drawn at random.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    base = ds.split_mask(split)
    out = np.zeros(len(ds), bool)
    rng = np.random.default_rng(seed)
    for tid in np.unique(ds.track[base]):
        idx = np.flatnonzero(base & (ds.track == tid))
        n = max(1, int(round(fraction * len(idx))))
        out[idx[:n] if contiguous else np.sort(rng.choice(idx, n, replace=False))] = True
    return out


def score_snapshot(ds: Dataset, fitted: Fitted, split: str = "test", name: str = "snapshot") -> ErrorReport:
    m = ds.split_mask(split)
    X = inputs(ds, fitted.spec, fitted.stats)[m]
    est = pm.predict(fitted.model, X)
    return ErrorReport(name, position_error(est, ds.position[m]), ds.any_los[m],
                       meta={"features": fitted.spec.name, "split": split})


def score_sequence(ds: Dataset, fitted: Fitted, split: str = "test", name: str = "sequence") -> ErrorReport:
    m = ds.split_mask(split)
    X = inputs(ds, fitted.spec, fitted.stats)
    pe, se, he, hm, lo = [], [], [], [], []
    for tid in np.unique(ds.track[m]):
        t = m & (ds.track == tid)
        est = pm.predict_track(fitted.model, X[t])
        pe.append(position_error(est.positions, ds.position[t]))
        se.append(np.abs(est.speeds - ds.speed[t]))
        he.append(heading_error(est.headings, ds.heading[t])[0])
        hm.append(ds.turn_distance[t] > STRAIGHT_MARGIN)
        lo.append(ds.any_los[t])
    cat = np.concatenate
    return ErrorReport(name, cat(pe), cat(lo), cat(se), cat(he), cat(hm),
                       meta={"features": fitted.spec.name, "split": split})


def centroid_report(ds: Dataset, split: str = "test") -> ErrorReport:
    c = ds.position[ds.split_mask("train")].mean(axis=0)
    m = ds.split_mask(split)
    return ErrorReport("centroid", position_error(np.broadcast_to(c, ds.position[m].shape), ds.position[m]),
                       ds.any_los[m], meta={"split": split})


def run_ekf(ds: Dataset, params: EkfParams = EkfParams(), split: str = "test", name: str = "ekf") -> ErrorReport:
    """EKF on the dominant path of each LoS gNB (range from ToF, azimuth from AoA)."""
    m = ds.split_mask(split)
    gpos = ds.gnb_positions
    hd = float(np.mean(gpos[:, 2]) - ds.header["ue_height"])
    pe, se, he, lo = [], [], [], []
    for tid in np.unique(ds.track[m]):
        t = np.flatnonzero(m & (ds.track == tid))
        meas = [[(SPEED_OF_LIGHT * ds.paths[i, g, 0, 0], ds.paths[i, g, 0, 2]) for g in range(len(gpos))]
                for i in t]
        los = ds.los[t] & ds.paths_valid[t, :, 0]
        v0 = ds.speed[t[0]] * ds.heading[t[0]]
        x0 = np.array([*ds.position[t[0]], *v0])
        res = run_ekf_track(meas, los, x0, gpos[:, :2], params, hd)
        ev = res.evaluate
        pe.append(position_error(res.positions, ds.position[t])[ev])
        se.append(np.abs(np.linalg.norm(res.velocities, axis=1) - ds.speed[t])[ev])
        he.append(heading_error(res.velocities, ds.heading[t])[0][ev])
        lo.append(ds.any_los[t][ev])
    cat = np.concatenate
    return ErrorReport(name, cat(pe), cat(lo), cat(se), cat(he), meta={"split": split, "ekf": params.to_dict()})

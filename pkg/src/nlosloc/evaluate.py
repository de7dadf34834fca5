"""Error metrics, ECDFs and JSON reports.

Percentiles use linear interpolation between closest ranks (numpy's
``'linear'`` method), so the 95th percentile of 1..100 is 95.05.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

PERCENTILES = (5, 25, 50, 75, 80, 95)


def position_error(est, truth) -> np.ndarray:
    return np.linalg.norm(np.asarray(est, float) - np.asarray(truth, float), axis=-1)


def heading_error(est, truth):
    """Angle between heading vectors in degrees and a flag for zero estimates."""
    e = np.atleast_2d(np.asarray(est, float))
    t = np.atleast_2d(np.asarray(truth, float))
    ne = np.linalg.norm(e, axis=-1)
    nt = np.linalg.norm(t, axis=-1)
    zero = ne == 0
    cos = np.einsum("ij,ij->i", e, t) / np.where(zero, 1.0, ne) / np.where(nt == 0, 1.0, nt)
    deg = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    deg = np.where(zero, 180.0, deg)
    if np.ndim(est) == 1:
        return float(deg[0]), bool(zero[0])
    return deg, zero


def ecdf(values):
    """Sorted values and step heights k/n."""
    v = np.sort(np.asarray(values, float).ravel())
    if v.size == 0:
        raise ValueError("ECDF of an empty sample")
    return v, np.arange(1, v.size + 1) / v.size


def ecdf_at(values, x: float) -> float:
    v, _ = ecdf(values)
    return float(np.searchsorted(v, x, side="right") / v.size)


def percentile(values, q):
    return float(np.percentile(np.asarray(values, float), q, method="linear"))


def aggregate(values) -> dict:
    v = np.asarray(values, float)
    if v.size == 0:
        return {"n": 0}
    out = {"n": int(v.size), "mean": float(v.mean()), "median": percentile(v, 50)}
    for q in PERCENTILES:
        out[f"p{q}"] = percentile(v, q)
    return out


def stratify_los(los):
    los = np.asarray(los, bool)
    idx = np.arange(los.size)
    return idx[los], idx[~los]


@dataclass
class ErrorReport:
    name: str
    position_error: np.ndarray
    los: np.ndarray
    speed_error: np.ndarray | None = None
    heading_error: np.ndarray | None = None
    heading_mask: np.ndarray | None = None  # samples where heading is scored
    meta: dict = field(default_factory=dict)

    def aggregates(self) -> dict:
        li, ni = stratify_los(self.los)
        out = {}
        for key, idx in (("all", np.arange(self.los.size)), ("los", li), ("nlos", ni)):
            block = {"position": aggregate(self.position_error[idx])}
            if self.speed_error is not None:
                block["speed"] = aggregate(self.speed_error[idx])
            if self.heading_error is not None:
                m = np.ones(self.los.size, bool) if self.heading_mask is None else self.heading_mask
                sel = idx[m[idx]]
                block["heading"] = aggregate(self.heading_error[sel])
            out[key] = block
        out["nlos_fraction"] = float(ni.size / max(self.los.size, 1))
        return out

    def to_dict(self) -> dict:
        per = {"position_error": self.position_error.tolist(), "los": self.los.astype(int).tolist()}
        if self.speed_error is not None:
            per["speed_error"] = self.speed_error.tolist()
        if self.heading_error is not None:
            per["heading_error"] = self.heading_error.tolist()
            if self.heading_mask is not None:
                per["heading_mask"] = self.heading_mask.astype(int).tolist()
        return {"name": self.name, "meta": self.meta, "aggregates": self.aggregates(), "samples": per}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorReport":
        s = d["samples"]
        get = lambda k, t=float: None if k not in s else np.asarray(s[k], t)
        return cls(d["name"], np.asarray(s["position_error"], float), np.asarray(s["los"], bool),
                   get("speed_error"), get("heading_error"), get("heading_mask", bool), d.get("meta", {}))


def comparison_table(reports) -> str:
    """Flat tab-separated table: one row per report and stratum."""
    cols = ("median", "mean", "p80", "p95")
    lines = ["name\tstratum\tn\t" + "\t".join(cols)]
    for r in reports:
        agg = r.aggregates()
        for s in ("all", "los", "nlos"):
            a = agg[s]["position"]
            vals = "\t".join(f"{a[c]:.3f}" if a.get("n") else "nan" for c in cols)
            lines.append(f"{r.name}\t{s}\t{a.get('n', 0)}\t{vals}")
    return "\n".join(lines) + "\n"


def ecdf_points(values) -> list:
    v, f = ecdf(values)
    return [[float(a), float(b)] for a, b in zip(v, f)]

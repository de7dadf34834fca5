"""Model inputs from beamformed CSI and path observables.

All array functions accept arbitrary leading (sample) dimensions: frequency
inputs end in ``(gnb, beam, rb)`` and path inputs in ``(gnb, path, 4)`` with
columns delay (s), power (dBm), azimuth, elevation (rad).

Vector layouts, flattened in C order:

* FR-Pow, FR-Ph: ``(gnb, beam, rb)``; FR-Ph carries 0 at ``rb = 0``.
* FR-C, FR-PP: ``(gnb, beam, rb, re/im)``.
* FR-Pow+Ph: FR-Pow followed by FR-Ph.
* path features: per gNB in ascending id, per path in descending power,
  fields ToF, RP, AoA.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .antenna import SPEED_OF_LIGHT

FREQ_VARIANTS = ("fr-c", "fr-pow", "fr-ph", "fr-pp", "fr-pow+ph")
TIME_FIELDS = ("tof", "rp", "aoa")
PATH_MODES = ("dominant", "top5")
RANGE_SENTINEL = 1.0
POWER_SENTINEL = 0.0


def wrap_angle(x):
    """Wrap to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=np.float64) + np.pi, 2 * np.pi) - np.pi
    return np.where(y <= -np.pi, y + 2 * np.pi, y)


@dataclass
class NormStats:
    """Global (min, max) per feature family, fitted on the training split."""

    ranges: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.ranges[key]

    def __contains__(self, key):
        return key in self.ranges

    def set(self, key, lo, hi):
        lo, hi = float(lo), float(hi)
        if not np.isfinite(lo) or not np.isfinite(hi):
            lo, hi = 0.0, 1.0
        if hi <= lo:
            hi = lo + 1.0
        self.ranges[key] = (lo, hi)

    def scale(self, key, x):
        lo, hi = self.ranges[key]
        return (x - lo) / (hi - lo)

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in sorted(self.ranges.items())}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls({k: (float(v[0]), float(v[1])) for k, v in d.items()})


@dataclass(frozen=True)
class FeatureSpec:
    variant: str = "td"  # one of FREQ_VARIANTS or "td"
    granularity: str = "rb"  # "rb" or "bw"
    combo: tuple = ("tof", "aoa")
    path_mode: str = "dominant"

    def __post_init__(self):
        if self.variant not in FREQ_VARIANTS + ("td",):
            raise ValueError(f"unknown feature variant {self.variant!r}")
        if self.granularity not in ("rb", "bw"):
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if self.variant == "td":
            if not self.combo or any(c not in TIME_FIELDS for c in self.combo):
                raise ValueError(f"bad time-domain combo {self.combo!r}")
            if self.path_mode not in PATH_MODES:
                raise ValueError(f"unknown path mode {self.path_mode!r}")
            object.__setattr__(self, "combo", tuple(c for c in TIME_FIELDS if c in self.combo))

    @property
    def name(self) -> str:
        if self.variant == "td":
            return f"td:{'+'.join(self.combo)}:{self.path_mode}"
        return f"{self.variant}:{self.granularity}"

    def to_dict(self) -> dict:
        return {"variant": self.variant, "granularity": self.granularity,
                "combo": list(self.combo), "path_mode": self.path_mode}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        return cls(d["variant"], d.get("granularity", "rb"), tuple(d.get("combo", ("tof", "aoa"))),
                   d.get("path_mode", "dominant"))


@dataclass(eq=False)
class FreqFeatures:
    variant: str
    values: np.ndarray
    granularity: str = "rb"
    shape: tuple = ()  # (gnb, beam, rb)


@dataclass(eq=False)
class TimeFeatures:
    combo: tuple
    path_mode: str
    values: np.ndarray


# frequency domain -----------------------------------------------------------

def power_db(values, mask):
    """RB power in dB; unavailable entries are NaN."""
    with np.errstate(divide="ignore"):
        p = 10.0 * np.log10(np.abs(values) ** 2)
    return np.where(mask & np.isfinite(p), p, np.nan)


def relative_phase(values, mask):
    """Wrapped RB-to-RB phase differences, shape (..., rb - 1).

    Differences touching an unavailable entry are 0.
    """
    values = np.asarray(values)
    if values.shape[-1] < 2:
        raise ValueError("relative phase needs at least two resource blocks")
    d = wrap_angle(np.angle(values[..., 1:] * np.conj(values[..., :-1])))
    ok = mask[..., 1:] & mask[..., :-1]
    return np.where(ok, d, 0.0)


def _phase_padded(values, mask):
    d = relative_phase(values, mask)
    return np.concatenate([np.zeros(d.shape[:-1] + (1,)), d], axis=-1)


def norm_power(values, mask, stats: NormStats):
    p = stats.scale("pow_db", power_db(values, mask))
    return np.where(mask, np.nan_to_num(p, nan=0.0), 0.0)


def _interleave(z):
    return np.stack([z.real, z.imag], axis=-1)


def _flat(a, lead):
    return a.reshape(a.shape[:lead] + (-1,))


def fr_pow(values, mask, stats: NormStats):
    lead = np.ndim(values) - 3
    return _flat(norm_power(values, mask, stats), lead)


def fr_ph(values, mask):
    lead = np.ndim(values) - 3
    return _flat(_phase_padded(values, mask), lead)


def fr_pp(values, mask, stats: NormStats):
    lead = np.ndim(values) - 3
    z = norm_power(values, mask, stats) * np.exp(1j * _phase_padded(values, mask))
    return _flat(_interleave(z), lead)


def fr_c(values, mask, stats: NormStats):
    lead = np.ndim(values) - 3
    z = np.where(mask, values, 0.0) / stats["fr_c"][1]
    return _flat(_interleave(z), lead)


def fr_bw_level(feat: FreqFeatures) -> FreqFeatures:
    """Per-(gnb, beam) mean across RBs; complex variants average the complex value."""
    if feat.granularity != "rb":
        raise ValueError("input must be RB-level")
    g, b, m = feat.shape
    v = np.asarray(feat.values)
    lead = v.shape[:-1]
    def ph_mean(x):
        return x[..., 1:].mean(axis=-1) if m > 1 else x[..., 0]
    if feat.variant in ("fr-c", "fr-pp"):
        x = v.reshape(lead + (g, b, m, 2))
        z = (x[..., 0] + 1j * x[..., 1]).mean(axis=-1)
        out = _interleave(z)
    elif feat.variant == "fr-pow":
        out = v.reshape(lead + (g, b, m)).mean(axis=-1)
    elif feat.variant == "fr-ph":
        out = ph_mean(v.reshape(lead + (g, b, m)))
    elif feat.variant == "fr-pow+ph":
        half = g * b * m
        pw = v[..., :half].reshape(lead + (g, b, m)).mean(axis=-1)
        ph = ph_mean(v[..., half:].reshape(lead + (g, b, m)))
        out = np.concatenate([pw.reshape(lead + (-1,)), ph.reshape(lead + (-1,))], axis=-1)
    else:
        raise ValueError(f"unknown variant {feat.variant!r}")
    return FreqFeatures(feat.variant, out.reshape(lead + (-1,)), "bw", feat.shape)


def freq_features(values, mask, variant: str, stats: NormStats, granularity: str = "rb") -> FreqFeatures:
    values = np.asarray(values)
    mask = np.asarray(mask, dtype=bool)
    shape = values.shape[-3:]
    if variant == "fr-c":
        v = fr_c(values, mask, stats)
    elif variant == "fr-pow":
        v = fr_pow(values, mask, stats)
    elif variant == "fr-ph":
        v = fr_ph(values, mask)
    elif variant == "fr-pp":
        v = fr_pp(values, mask, stats)
    elif variant == "fr-pow+ph":
        v = np.concatenate([fr_pow(values, mask, stats), fr_ph(values, mask)], axis=-1)
    else:
        raise ValueError(f"unknown frequency variant {variant!r}")
    out = FreqFeatures(variant, v, "rb", shape)
    return fr_bw_level(out) if granularity == "bw" else out


# time domain -----------------------------------------------------------------

def td_features(paths, valid, combo=("tof", "aoa"), path_mode="dominant",
                stats: NormStats | None = None) -> TimeFeatures:
    """Path features from ``paths`` (..., gnb, path, 4) and ``valid`` (..., gnb, path).

    Dominant mode keeps the strongest path per gNB with AoA as a 3-D unit
    vector; top-5 mode keeps five paths with AoA as the azimuth divided by pi.
    Missing paths get range 1.0, power 0.0 and a zero direction.
    """
    spec = FeatureSpec("td", combo=tuple(combo), path_mode=path_mode)
    paths = np.asarray(paths, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    n_keep = 1 if path_mode == "dominant" else 5
    if paths.shape[-2] < n_keep:
        pad = n_keep - paths.shape[-2]
        paths = np.concatenate([paths, np.zeros(paths.shape[:-2] + (pad, 4))], axis=-2)
        valid = np.concatenate([valid, np.zeros(valid.shape[:-1] + (pad,), bool)], axis=-1)
    p = paths[..., :n_keep, :]
    ok = valid[..., :n_keep]
    blocks = []
    if "tof" in spec.combo:
        r = SPEED_OF_LIGHT * p[..., 0]
        if stats is not None:
            r = stats.scale("range", r)
        blocks.append(np.where(ok, r, RANGE_SENTINEL)[..., None])
    if "rp" in spec.combo:
        rp = p[..., 1]
        if stats is not None:
            rp = stats.scale("rp", rp)
        blocks.append(np.where(ok, rp, POWER_SENTINEL)[..., None])
    if "aoa" in spec.combo:
        az, el = p[..., 2], p[..., 3]
        if path_mode == "dominant":
            ce = np.cos(el)
            d = np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)
        else:
            d = (az / np.pi)[..., None]
        blocks.append(np.where(ok[..., None], d, 0.0))
    v = np.concatenate(blocks, axis=-1)
    lead = v.ndim - 3
    return TimeFeatures(spec.combo, path_mode, v.reshape(v.shape[:lead] + (-1,)))


# uncertainty -----------------------------------------------------------------

@dataclass(frozen=True)
class UncertaintyConfig:
    fr_c_rel: float = 0.3
    tof_std_m: float = 10.0
    rp_std_db: float = 2.0
    aoa_step_deg: float = 22.5
    label_std_m: float = 5.0

    @classmethod
    def off(cls) -> "UncertaintyConfig":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)

    def to_dict(self) -> dict:
        return {"fr_c_rel": self.fr_c_rel, "tof_std_m": self.tof_std_m, "rp_std_db": self.rp_std_db,
                "aoa_step_deg": self.aoa_step_deg, "label_std_m": self.label_std_m}


UNCERTAINTY_KINDS = ("fr_c", "tof", "rp", "aoa")


def quantize_azimuth(az, step_deg: float = 22.5):
    if step_deg <= 0:
        return np.asarray(az, dtype=np.float64)
    step = np.deg2rad(step_deg)
    return wrap_angle(np.round(np.asarray(az) / step) * step)


def inject_uncertainty(sample: dict, kind: str, rng: np.random.Generator,
                       cfg: UncertaintyConfig = UncertaintyConfig()) -> dict:
    """Return a copy of ``sample`` with one measurement impairment applied.

    ``sample`` holds ``csi``/``csi_mask`` for ``kind='fr_c'`` and
    ``paths``/``paths_valid`` otherwise; leading sample dimensions are allowed.
    """
    if kind not in UNCERTAINTY_KINDS:
        raise ValueError(f"unknown uncertainty kind {kind!r}")
    out = dict(sample)
    if kind == "fr_c":
        h = np.asarray(sample["csi"])
        m = np.asarray(sample["csi_mask"], dtype=bool)
        if cfg.fr_c_rel == 0:
            return out
        n_ok = m.sum(axis=(-3, -2, -1), keepdims=True)
        rms = np.sqrt(np.where(m, np.abs(h) ** 2, 0.0).sum(axis=(-3, -2, -1), keepdims=True)
                      / np.maximum(n_ok, 1))
        sigma = cfg.fr_c_rel * rms / np.sqrt(2.0)
        noise = sigma * (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape))
        out["csi"] = np.where(m, h + noise, 0.0)
        return out
    p = np.array(sample["paths"], dtype=np.float64, copy=True)
    ok = np.asarray(sample["paths_valid"], dtype=bool)
    if kind == "tof" and cfg.tof_std_m > 0:
        p[..., 0] += np.where(ok, rng.standard_normal(ok.shape) * cfg.tof_std_m / SPEED_OF_LIGHT, 0.0)
    elif kind == "rp" and cfg.rp_std_db > 0:
        p[..., 1] += np.where(ok, rng.standard_normal(ok.shape) * cfg.rp_std_db, 0.0)
    elif kind == "aoa" and cfg.aoa_step_deg > 0:
        p[..., 2] = np.where(ok, quantize_azimuth(p[..., 2], cfg.aoa_step_deg), p[..., 2])
    out["paths"] = p
    return out


def label_noise(positions, std: float, rng: np.random.Generator):
    positions = np.asarray(positions, dtype=np.float64)
    if std == 0:
        return positions.copy()
    return positions + rng.standard_normal(positions.shape) * std


# normalization ---------------------------------------------------------------

def fit_norm_stats(csi=None, csi_mask=None, paths=None, paths_valid=None) -> NormStats:
    """Global min/max over the available training measurements."""
    st = NormStats()
    if csi is not None:
        m = np.asarray(csi_mask, dtype=bool)
        p = power_db(csi, m)[m]
        p = p[np.isfinite(p)]
        st.set("pow_db", p.min() if p.size else 0.0, p.max() if p.size else 1.0)
        a = np.abs(np.asarray(csi))[m]
        st.set("fr_c", 0.0, a.max() if a.size else 1.0)
    if paths is not None:
        ok = np.asarray(paths_valid, dtype=bool)
        r = SPEED_OF_LIGHT * np.asarray(paths)[..., 0][ok]
        rp = np.asarray(paths)[..., 1][ok]
        st.set("range", r.min() if r.size else 0.0, r.max() if r.size else 1.0)
        st.set("rp", rp.min() if rp.size else 0.0, rp.max() if rp.size else 1.0)
    return st


def build_matrix(spec: FeatureSpec, stats: NormStats, csi=None, csi_mask=None,
                 paths=None, paths_valid=None) -> np.ndarray:
    """(n_samples, n_features) input matrix for one feature spec."""
    if spec.variant == "td":
        return td_features(paths, paths_valid, spec.combo, spec.path_mode, stats).values
    return freq_features(csi, csi_mask, spec.variant, stats, spec.granularity).values

"""Snapshot and sequence positioning networks, prediction and transfer learning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import activations as act
from .nn.layers import LSTM, Dense, dense_params, lstm_params
from .nn.network import Network
from .nn.train import TrainSchedule, train

POSITION_SCALE = 300.0
SPEED_SCALE = 0.1
WINDOW = 50
SNAPSHOT_WIDTH = 512
SNAPSHOT_DEPTH = 5
SEQUENCE_WIDTHS = (1024, 512, 512, 256, 256)
SEQUENCE_TARGET = 1_667_192  # parameter target at 12 inputs
SEQUENCE_TARGET_SLOPE = 1024  # target grows by this per extra input
SEQUENCE_TOLERANCE = 0.05
SEQUENCE_LOSS_WEIGHTS = (0.8, 0.1, 0.1)


class ArchitectureError(ValueError):
    pass


class SnapshotModel(Network):
    """Five GELU dense layers and a two-unit linear position output."""

    kind = "snapshot"

    def __init__(self, input_dim: int, width: int = SNAPSHOT_WIDTH, depth: int = SNAPSHOT_DEPTH,
                 seed: int = 0, dtype=np.float64):
        if input_dim < 1:
            raise ArchitectureError("input_dim must be >= 1")
        rng = np.random.default_rng(seed)
        dims = [input_dim] + [width] * depth
        layers = [Dense(f"dense{i + 1}", dims[i], dims[i + 1], "gelu", rng, dtype) for i in range(depth)]
        layers.append(Dense("out", width, 2, "linear", rng, dtype))
        super().__init__(layers, [(0, 2)], [1.0])
        self.input_dim, self.width, self.depth, self.seed = input_dim, width, depth, seed
        expected = dense_params(input_dim, width) + (depth - 1) * dense_params(width, width) + dense_params(width, 2)
        if self.n_params != expected:
            raise ArchitectureError(f"parameter count {self.n_params} != {expected}")

    def config(self):
        return {"input_dim": self.input_dim, "width": self.width, "depth": self.depth, "seed": self.seed}

    def forward(self, x):
        for l in self.layers.values():
            x = l.forward(x)
        return x

    def backward(self, dy):
        for l in reversed(list(self.layers.values())):
            dy = l.backward(dy)
        return dy

    @property
    def first_layer(self) -> str:
        return "dense1"


def sequence_param_count(input_dim: int, widths=SEQUENCE_WIDTHS, lstm_hidden: int = 1, out: int = 5) -> int:
    dims = [input_dim] + list(widths)
    n = sum(dense_params(a, b) for a, b in zip(dims, dims[1:]))
    n += lstm_params(widths[3], lstm_hidden)
    n += lstm_params(widths[4] + lstm_hidden, out)
    return n


def sequence_target(input_dim: int) -> int:
    return SEQUENCE_TARGET + (input_dim - 12) * SEQUENCE_TARGET_SLOPE


def search_lstm_hidden(input_dim: int, widths=SEQUENCE_WIDTHS, target: int | None = None,
                       tolerance: float = SEQUENCE_TOLERANCE, max_hidden: int = 4096) -> int:
    """Parallel-LSTM size bringing the total closest to ``target``."""
    target = sequence_target(input_dim) if target is None else target
    hs = np.arange(1, max_hidden + 1)
    counts = np.array([sequence_param_count(input_dim, widths, int(h)) for h in hs])
    best = int(hs[np.argmin(np.abs(counts - target))])
    if abs(sequence_param_count(input_dim, widths, best) - target) > tolerance * target:
        raise ArchitectureError(f"no parallel LSTM size within {tolerance:.0%} of {target} parameters")
    return best


class SequenceModel(Network):
    """Per-step dense stack with a parallel LSTM and a final five-unit LSTM.

    ``dense4`` feeds both ``dense5`` and the parallel LSTM; their outputs
    are concatenated into the final linear LSTM, whose five outputs per step
    split into position (2), speed (1) and heading (2, tanh).
    """

    kind = "sequence"

    def __init__(self, input_dim: int, widths=SEQUENCE_WIDTHS, lstm_hidden: int | None = None,
                 window: int = WINDOW, seed: int = 0, dtype=np.float64, target: int | None = None,
                 tolerance: float = SEQUENCE_TOLERANCE):
        if input_dim < 1:
            raise ArchitectureError("input_dim must be >= 1")
        if len(widths) != 5 or min(widths) < 1:
            raise ArchitectureError("sequence model needs five positive dense widths")
        if window < 1:
            raise ArchitectureError("window length must be >= 1")
        widths = tuple(int(w) for w in widths)
        if lstm_hidden is None:
            lstm_hidden = search_lstm_hidden(input_dim, widths, target, tolerance)
        rng = np.random.default_rng(seed)
        dims = [input_dim] + list(widths)
        layers = [Dense(f"dense{i + 1}", dims[i], dims[i + 1], "gelu", rng, dtype) for i in range(5)]
        layers.append(LSTM("lstm_parallel", widths[3], lstm_hidden, "tanh", True, rng, dtype))
        layers.append(LSTM("lstm_out", widths[4] + lstm_hidden, 5, "linear", True, rng, dtype))
        super().__init__(layers, [(0, 2), (2, 3), (3, 5)], SEQUENCE_LOSS_WEIGHTS)
        self.input_dim, self.widths, self.lstm_hidden = input_dim, widths, lstm_hidden
        self.window, self.seed = window, seed
        expected = sequence_param_count(input_dim, widths, lstm_hidden)
        if self.n_params != expected:
            raise ArchitectureError(f"parameter count {self.n_params} != {expected}")

    def config(self):
        return {"input_dim": self.input_dim, "widths": list(self.widths), "lstm_hidden": self.lstm_hidden,
                "window": self.window, "seed": self.seed}

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] < 1:
            raise ArchitectureError("sequence input must be (batch, time >= 1, features)")
        L = self.layers
        h = x
        for i in range(1, 5):
            h = L[f"dense{i}"].forward(h)
        d5 = L["dense5"].forward(h)
        lp = L["lstm_parallel"].forward(h)
        self._split = d5.shape[-1]
        z = L["lstm_out"].forward(np.concatenate([d5, lp], axis=-1))
        self._z = z
        y = z.copy()
        y[..., 3:5] = np.tanh(z[..., 3:5])
        self._y = y
        return y

    def backward(self, dy):
        L = self.layers
        dz = dy.copy()
        dz[..., 3:5] = act.backward("tanh", self._z[..., 3:5], self._y[..., 3:5], dy[..., 3:5])
        dcat = L["lstm_out"].backward(dz)
        dh = L["dense5"].backward(dcat[..., :self._split]) + L["lstm_parallel"].backward(dcat[..., self._split:])
        for i in range(4, 0, -1):
            dh = L[f"dense{i}"].backward(dh)
        return dh

    @property
    def first_layer(self) -> str:
        return "dense1"


def build_snapshot(input_dim: int, seed: int = 0, dtype=np.float64) -> SnapshotModel:
    return SnapshotModel(input_dim, seed=seed, dtype=dtype)


def build_sequence(input_dim: int, widths=SEQUENCE_WIDTHS, lstm_hidden: int | None = None,
                   window: int = WINDOW, seed: int = 0, dtype=np.float64) -> SequenceModel:
    return SequenceModel(input_dim, widths, lstm_hidden, window, seed, dtype)


def model_from_manifest(manifest: dict, dtype=np.float64) -> Network:
    cfg = manifest["config"]
    if manifest["kind"] == "snapshot":
        return SnapshotModel(cfg["input_dim"], cfg["width"], cfg["depth"], cfg["seed"], dtype)
    if manifest["kind"] == "sequence":
        return SequenceModel(cfg["input_dim"], tuple(cfg["widths"]), cfg["lstm_hidden"], cfg["window"],
                             cfg["seed"], dtype)
    raise ArchitectureError(f"unknown model kind {manifest['kind']!r}")


# labels and windows ----------------------------------------------------------

def snapshot_labels(positions) -> np.ndarray:
    return np.asarray(positions, dtype=np.float64) / POSITION_SCALE


def sequence_labels(positions, speeds, headings) -> np.ndarray:
    return np.concatenate([np.asarray(positions) / POSITION_SCALE,
                           (np.asarray(speeds) * SPEED_SCALE)[..., None],
                           np.asarray(headings)], axis=-1)


def make_windows(X, Y=None, window: int = WINDOW, stride: int = 1, pad: bool = False):
    """Windows over one track.

    With ``pad`` every sample ends exactly one window; samples before index
    ``window - 1`` get windows left-padded with the first sample.  Returns
    ``(Xw, Yw, padded)``.
    """
    X = np.asarray(X)
    n = len(X)
    if window < 1:
        raise ArchitectureError("window length must be >= 1")
    if n == 0:
        raise ArchitectureError("empty track")
    if pad:
        ends = np.arange(n)
    else:
        ends = np.arange(min(window, n) - 1, n, stride)
    idx = ends[:, None] - np.arange(window - 1, -1, -1)[None, :]
    padded = idx.min(axis=1) < 0 if len(ends) else np.zeros(0, bool)
    idx = np.clip(idx, 0, None)
    Xw = X[idx]
    Yw = None if Y is None else np.asarray(Y)[idx]
    return Xw, Yw, padded


# prediction --------------------------------------------------------------------

def _check_width(model, features):
    if features.shape[-1] != model.input_dim:
        raise ArchitectureError(f"feature length {features.shape[-1]} does not match model input {model.input_dim}")


def predict(model: SnapshotModel, features, batch_size: int = 1024) -> np.ndarray:
    """Positions in metres."""
    x = np.asarray(features, dtype=model.dtype)
    _check_width(model, x)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    out = np.concatenate([model.forward(x[a:a + batch_size]) for a in range(0, len(x), batch_size)])
    pos = out.astype(np.float64) * POSITION_SCALE
    return pos[0] if single else pos


@dataclass
class SequenceEstimate:
    positions: np.ndarray
    speeds: np.ndarray
    headings: np.ndarray  # unit vectors
    heading_deg: np.ndarray
    padded: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))


def _decode(out):
    pos = out[..., 0:2] * POSITION_SCALE
    spd = out[..., 2] / SPEED_SCALE
    hv = out[..., 3:5]
    norm = np.linalg.norm(hv, axis=-1, keepdims=True)
    unit = np.divide(hv, norm, out=np.zeros_like(hv), where=norm > 0)
    ang = np.degrees(np.arctan2(unit[..., 1], unit[..., 0]))
    return pos, spd, unit, ang


def predict_sequence(model: SequenceModel, window) -> SequenceEstimate:
    """Per-step estimates for one window (time, features).

    A window shorter than the model window is left-padded with its first
    sample; padded steps are dropped from the output and flagged.
    """
    w = np.asarray(window, dtype=model.dtype)
    _check_width(model, w)
    if w.ndim != 2 or len(w) == 0:
        raise ArchitectureError("window must be (time >= 1, features)")
    n = len(w)
    padded = n < model.window
    if padded:
        w = np.concatenate([np.repeat(w[:1], model.window - n, axis=0), w])
    out = model.forward(w[None])[0].astype(np.float64)[-n:]
    pos, spd, unit, ang = _decode(out)
    return SequenceEstimate(pos, spd, unit, ang, np.full(n, padded))


def predict_track(model: SequenceModel, features, batch_size: int = 64) -> SequenceEstimate:
    """One estimate per sample from stride-1 sliding windows (last step of each)."""
    x = np.asarray(features, dtype=model.dtype)
    _check_width(model, x)
    Xw, _, padded = make_windows(x, None, model.window, 1, pad=True)
    outs = [model.forward(Xw[a:a + batch_size])[:, -1] for a in range(0, len(Xw), batch_size)]
    pos, spd, unit, ang = _decode(np.concatenate(outs).astype(np.float64))
    return SequenceEstimate(pos, spd, unit, ang, padded)


# transfer learning -------------------------------------------------------------

@dataclass(frozen=True)
class TransferPlan:
    trainable: tuple = ("dense1",)
    fraction: float = 0.1

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError("fraction must be in (0, 1]")


def transfer_adapt(source: Network, train_set, val_set, plan: TransferPlan = TransferPlan(),
                   schedule: TrainSchedule = TrainSchedule(), seed: int = 0, target: Network | None = None):
    """Copy ``source`` weights into a fresh model and retrain only ``plan.trainable``.

    The first phase uses early stopping as well.  Returns ``(model, history)``.
    """
    if target is None:
        target = model_from_manifest(source.manifest(), source.dtype)
    if target.manifest()["layers"] != source.manifest()["layers"]:
        raise ArchitectureError("source and target architectures differ")
    target.set_weights(source.get_weights())
    target.set_trainable(plan.trainable)
    sched = TrainSchedule(**{**schedule.to_dict(), "stop_lrs": tuple(schedule.stop_lrs), "early_stop_phase1": True})
    hist = train(target, train_set, val_set, sched, seed)
    target.set_trainable(target.layers)
    return target, hist

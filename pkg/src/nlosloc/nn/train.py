"""Mini-batch training with a fixed first phase and early-stopping phases."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .losses import WeightedMSE
from .network import Network
from .optim import Adam


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainSchedule:
    phase1_lr: float = 1e-3
    phase1_epochs: int = 200
    stop_lrs: tuple = (5e-4, 1e-4)
    max_stop_epochs: int = 500  # shared by all early-stopping phases
    patience: int = 25
    batch_size: int = 64
    early_stop_phase1: bool = False

    def __post_init__(self):
        lrs = (self.phase1_lr,) + tuple(self.stop_lrs)
        if any(b >= a for a, b in zip(lrs, lrs[1:])):
            raise ValueError("learning rates must strictly decrease")
        if self.patience < 1 or self.batch_size < 1 or self.phase1_epochs < 0 or self.max_stop_epochs < 0:
            raise ValueError(f"invalid schedule {self}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stop_lrs"] = list(self.stop_lrs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainSchedule":
        d = dict(d)
        if "stop_lrs" in d:
            d["stop_lrs"] = tuple(d["stop_lrs"])
        return cls(**d)


@dataclass
class History:
    epochs: list = field(default_factory=list)  # dicts: epoch, phase, lr, train_loss, val_loss
    stops: list = field(default_factory=list)  # (phase, best_epoch, best_val)

    @property
    def n_epochs(self) -> int:
        return len(self.epochs)

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "stops": [list(s) for s in self.stops]}

    @classmethod
    def from_dict(cls, d: dict) -> "History":
        return cls(list(d.get("epochs", [])), [tuple(s) for s in d.get("stops", [])])


def loss_of(model: Network) -> WeightedMSE:
    return WeightedMSE(model.output_slices, model.loss_weights)


def evaluate_loss(model: Network, X, Y, batch_size: int = 256) -> float:
    loss = loss_of(model)
    total, n = 0.0, len(X)
    for a in range(0, n, batch_size):
        xb, yb = X[a:a + batch_size], Y[a:a + batch_size]
        total += loss(model.forward(xb), yb) * len(xb)
    return total / n


def _epoch(model, opt, loss, X, Y, lr, batch_size, rng):
    params = model.trainable_params()
    order = rng.permutation(len(X))
    total = 0.0
    for a in range(0, len(X), batch_size):
        idx = order[a:a + batch_size]
        xb, yb = X[idx], Y[idx]
        out = model.forward(xb)
        val = loss(out, yb)
        if not np.isfinite(val):
            raise TrainingDiverged(f"non-finite training loss at lr {lr} (batch starting {a})")
        model.backward(loss.grad(out, yb))
        if params:
            opt.step(params, model.trainable_grads(), lr)
        total += val * len(idx)
    return total / len(X)


def train(model: Network, train_set, val_set, schedule: TrainSchedule = TrainSchedule(),
          seed: int = 0, log=None) -> History:
    """Train in place and return the per-epoch history.

    Early-stopping phases restore the best validation weights at each stop.
    With ``early_stop_phase1`` the first phase also stops after ``patience``
    epochs without improvement.
    """
    X, Y = (np.asarray(a, dtype=model.dtype) for a in train_set)
    Xv, Yv = (np.asarray(a, dtype=model.dtype) for a in val_set)
    if len(X) == 0 or len(Xv) == 0:
        raise ValueError("train and validation sets must be non-empty")
    rng = np.random.default_rng(seed)
    opt = Adam()
    loss = loss_of(model)
    hist = History()
    budget = schedule.max_stop_epochs

    def run_phase(phase, lr, max_epochs, stop):
        best, best_w, best_ep, wait = np.inf, None, -1, 0
        for _ in range(max_epochs):
            tl = _epoch(model, opt, loss, X, Y, lr, schedule.batch_size, rng)
            vl = evaluate_loss(model, Xv, Yv)
            if not np.isfinite(vl):
                raise TrainingDiverged(f"non-finite validation loss in phase {phase}")
            ep = hist.n_epochs
            hist.epochs.append({"epoch": ep, "phase": phase, "lr": lr, "train_loss": tl, "val_loss": vl})
            if log:
                log(f"epoch {ep} phase {phase} lr {lr:g} train {tl:.6g} val {vl:.6g}")
            if vl < best:
                best, best_ep, wait = vl, ep, 0
                if stop:
                    best_w = model.get_weights()
            elif stop:
                wait += 1
                if wait >= schedule.patience:
                    break
        if stop and best_w is not None:
            model.set_weights(best_w)
            hist.stops.append((phase, best_ep, best))
        return

    run_phase(1, schedule.phase1_lr, schedule.phase1_epochs, schedule.early_stop_phase1)
    for k, lr in enumerate(schedule.stop_lrs):
        used = sum(1 for e in hist.epochs if e["phase"] > 1)
        remaining = budget - used
        if remaining <= 0:
            break
        run_phase(k + 2, lr, remaining, True)
    return hist

"""Common plumbing for models built from named layers."""

from __future__ import annotations

import numpy as np


class Network:
    """Ordered named layers plus model-specific ``forward``/``backward`` wiring."""

    kind = "network"

    def __init__(self, layers, output_slices, loss_weights):
        self.layers = {l.name: l for l in layers}
        self.output_slices = [tuple(s) for s in output_slices]
        self.loss_weights = tuple(float(w) for w in loss_weights)

    # parameters
    @property
    def n_params(self) -> int:
        return sum(l.n_params for l in self.layers.values())

    def named_params(self):
        for l in self.layers.values():
            for k, p in l.params.items():
                yield f"{l.name}/{k}", p

    def named_grads(self):
        for l in self.layers.values():
            for k in l.params:
                yield f"{l.name}/{k}", l.grads[k]

    def trainable_params(self):
        return {f"{l.name}/{k}": p for l in self.layers.values() if l.trainable for k, p in l.params.items()}

    def trainable_grads(self):
        return {f"{l.name}/{k}": l.grads[k] for l in self.layers.values() if l.trainable for k in l.params}

    def get_weights(self) -> dict:
        return {k: p.copy() for k, p in self.named_params()}

    def set_weights(self, weights: dict):
        for l in self.layers.values():
            for k in l.params:
                src = weights[f"{l.name}/{k}"]
                if src.shape != l.params[k].shape:
                    raise ValueError(f"shape mismatch for {l.name}/{k}: {src.shape} vs {l.params[k].shape}")
                l.params[k][...] = src

    def set_trainable(self, names):
        names = set(names)
        unknown = names - set(self.layers)
        if unknown:
            raise ValueError(f"unknown layers {sorted(unknown)}")
        for l in self.layers.values():
            l.trainable = l.name in names

    @property
    def dtype(self):
        return next(iter(self.layers.values())).params["W"].dtype

    def manifest(self) -> dict:
        return {"kind": self.kind, "layers": [l.spec() for l in self.layers.values()],
                "output_slices": [list(s) for s in self.output_slices],
                "loss_weights": list(self.loss_weights), "config": self.config()}

    def config(self) -> dict:
        return {}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

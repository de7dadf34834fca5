"""Weighted sum of per-head mean squared errors."""

import numpy as np


class WeightedMSE:
    """``sum_i w_i * mean((y[..., s_i] - t[..., s_i])**2)`` over output slices ``s_i``."""

    def __init__(self, slices, weights):
        if len(slices) != len(weights):
            raise ValueError("one weight per output slice")
        self.slices = [slice(a, b) for a, b in slices]
        self.weights = [float(w) for w in weights]

    def parts(self, y, t):
        return [float(np.mean((y[..., s] - t[..., s]) ** 2)) for s in self.slices]

    def __call__(self, y, t):
        return float(sum(w * p for w, p in zip(self.weights, self.parts(y, t))))

    def grad(self, y, t):
        g = np.zeros_like(y)
        for w, s in zip(self.weights, self.slices):
            d = y[..., s] - t[..., s]
            g[..., s] += w * 2.0 * d / d.size
        return g

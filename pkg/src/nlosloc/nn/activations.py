"""Elementwise activations with derivatives."""

import numpy as np
from scipy.special import ndtr

GELU_C = 0.044715
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x):
    """x * Phi(x) with Phi the standard-normal CDF."""
    x = np.asarray(x)
    return x * ndtr(x)


def gelu_approx(x):
    x = np.asarray(x)
    return 0.5 * x * (1.0 + np.tanh(_SQRT_2_OVER_PI * (x + GELU_C * x ** 3)))


def gelu_grad(x):
    x = np.asarray(x)
    return ndtr(x) + x * INV_SQRT_2PI * np.exp(-0.5 * x * x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


ACTIVATIONS = ("gelu", "tanh", "linear")


def forward(name, z):
    if name == "gelu":
        return gelu(z).astype(z.dtype, copy=False)
    if name == "tanh":
        return np.tanh(z)
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


def backward(name, z, y, dy):
    """Gradient w.r.t. the pre-activation ``z`` given output ``y`` and upstream ``dy``."""
    if name == "gelu":
        return dy * gelu_grad(z).astype(z.dtype, copy=False)
    if name == "tanh":
        return dy * (1.0 - y * y)
    if name == "linear":
        return dy
    raise ValueError(f"unknown activation {name!r}")

"""Dense and LSTM layers with hand-written backward passes.

Layers keep the inputs and intermediates of their last ``forward`` call;
``backward`` consumes them, fills ``grads`` and returns the input gradient.
"""

from __future__ import annotations

import numpy as np

from . import activations as act


class Layer:
    kind = ""

    def __init__(self, name: str):
        self.name = name
        self.params: dict = {}
        self.grads: dict = {}
        self.trainable = True

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def zero_grad(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def spec(self) -> dict:
        raise NotImplementedError


class Dense(Layer):
    """``y = act(x @ W + b)`` over arbitrary leading dimensions."""

    kind = "dense"

    def __init__(self, name, input_dim, output_dim, activation="linear", rng=None, dtype=np.float64):
        super().__init__(name)
        if input_dim < 1 or output_dim < 1:
            raise ValueError("layer dimensions must be >= 1")
        if activation not in act.ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.input_dim, self.output_dim, self.activation = input_dim, output_dim, activation
        rng = np.random.default_rng(0) if rng is None else rng
        lim = np.sqrt(6.0 / input_dim)
        self.params = {"W": rng.uniform(-lim, lim, (input_dim, output_dim)).astype(dtype),
                       "b": np.zeros(output_dim, dtype=dtype)}
        self.zero_grad()

    def forward(self, x):
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"{self.name}: expected input width {self.input_dim}, got {x.shape[-1]}")
        self._x = x
        z = x @ self.params["W"] + self.params["b"]
        self._z = z
        if self.activation == "gelu":
            # keep Phi(z) for the backward pass
            self._cdf = act.ndtr(z).astype(z.dtype, copy=False)
            self._y = z * self._cdf
        else:
            self._y = act.forward(self.activation, z)
        return self._y

    def backward(self, dy):
        if self.activation == "gelu":
            z = self._z
            dz = dy * (self._cdf + z * act.INV_SQRT_2PI * np.exp(-0.5 * z * z))
        else:
            dz = act.backward(self.activation, self._z, self._y, dy)
        x2 = self._x.reshape(-1, self.input_dim)
        dz2 = dz.reshape(-1, self.output_dim)
        self.grads["W"] = x2.T @ dz2
        self.grads["b"] = dz2.sum(axis=0)
        return dz @ self.params["W"].T

    def spec(self):
        return {"kind": self.kind, "name": self.name, "input_dim": self.input_dim,
                "output_dim": self.output_dim, "activation": self.activation}


class LSTM(Layer):
    """Single LSTM layer on (batch, time, features) with zero initial state.

    Gate blocks in the kernel columns are ordered input, forget, cell,
    output.  ``activation`` applies to the cell candidate and the cell
    output; gates use the logistic sigmoid.
    """

    kind = "lstm"

    def __init__(self, name, input_dim, hidden, activation="tanh", return_sequences=True,
                 rng=None, dtype=np.float64):
        super().__init__(name)
        if input_dim < 1 or hidden < 1:
            raise ValueError("layer dimensions must be >= 1")
        if activation not in ("tanh", "linear"):
            raise ValueError(f"unsupported LSTM activation {activation!r}")
        self.input_dim, self.hidden, self.activation = input_dim, hidden, activation
        self.return_sequences = return_sequences
        rng = np.random.default_rng(0) if rng is None else rng
        h = hidden
        bias = np.zeros(4 * h, dtype=dtype)
        bias[h:2 * h] = 1.0
        self.params = {
            "W": rng.uniform(-1, 1, (input_dim, 4 * h)).astype(dtype) * np.sqrt(3.0 / input_dim),
            "U": rng.uniform(-1, 1, (h, 4 * h)).astype(dtype) * np.sqrt(3.0 / h),
            "b": bias,
        }
        self.zero_grad()

    @property
    def output_dim(self):
        return self.hidden

    def forward(self, x):
        if x.ndim != 3:
            raise ValueError(f"{self.name}: expected (batch, time, features) input")
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"{self.name}: expected input width {self.input_dim}, got {x.shape[-1]}")
        B, T, _ = x.shape
        if T < 1:
            raise ValueError("sequence length must be >= 1")
        h = self.hidden
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        zx = (x.reshape(B * T, -1) @ W + b).reshape(B, T, 4 * h)
        dt = x.dtype
        hs = np.zeros((B, T + 1, h), dtype=dt)
        cs = np.zeros((B, T + 1, h), dtype=dt)
        gates = np.empty((B, T, 4 * h), dtype=dt)  # activated i, f, g, o
        tc = np.empty((B, T, h), dtype=dt)  # act(c_t)
        for t in range(T):
            z = zx[:, t] + hs[:, t] @ U
            i = act.sigmoid(z[:, :h])
            f = act.sigmoid(z[:, h:2 * h])
            g = act.forward(self.activation, z[:, 2 * h:3 * h])
            o = act.sigmoid(z[:, 3 * h:])
            c = f * cs[:, t] + i * g
            a = act.forward(self.activation, c)
            cs[:, t + 1] = c
            tc[:, t] = a
            hs[:, t + 1] = o * a
            gates[:, t, :h], gates[:, t, h:2 * h], gates[:, t, 2 * h:3 * h], gates[:, t, 3 * h:] = i, f, g, o
        self._x, self._hs, self._cs, self._gates, self._tc = x, hs, cs, gates, tc
        return hs[:, 1:] if self.return_sequences else hs[:, -1]

    def backward(self, dy):
        x, hs, cs, gates, tc = self._x, self._hs, self._cs, self._gates, self._tc
        B, T, _ = x.shape
        h = self.hidden
        U = self.params["U"]
        if self.return_sequences:
            dh_out = dy
        else:
            dh_out = np.zeros((B, T, h), dtype=x.dtype)
            dh_out[:, -1] = dy
        dz = np.empty((B, T, 4 * h), dtype=x.dtype)
        dh_next = np.zeros((B, h), dtype=x.dtype)
        dc_next = np.zeros((B, h), dtype=x.dtype)
        lin = self.activation == "linear"
        for t in range(T - 1, -1, -1):
            i, f = gates[:, t, :h], gates[:, t, h:2 * h]
            g, o = gates[:, t, 2 * h:3 * h], gates[:, t, 3 * h:]
            dh = dh_out[:, t] + dh_next
            a = tc[:, t]
            dc = dc_next + dh * o * (1.0 if lin else (1.0 - a * a))
            dz[:, t, :h] = dc * g * i * (1.0 - i)
            dz[:, t, h:2 * h] = dc * cs[:, t] * f * (1.0 - f)
            dz[:, t, 2 * h:3 * h] = dc * i * (1.0 if lin else (1.0 - g * g))
            dz[:, t, 3 * h:] = dh * a * o * (1.0 - o)
            dc_next = dc * f
            dh_next = dz[:, t] @ U.T
        dz2 = dz.reshape(B * T, 4 * h)
        self.grads["W"] = x.reshape(B * T, -1).T @ dz2
        self.grads["U"] = hs[:, :-1].reshape(B * T, h).T @ dz2
        self.grads["b"] = dz2.sum(axis=0)
        return (dz2 @ self.params["W"].T).reshape(x.shape)

    def spec(self):
        return {"kind": self.kind, "name": self.name, "input_dim": self.input_dim,
                "output_dim": self.hidden, "activation": self.activation,
                "return_sequences": self.return_sequences}


def dense_params(input_dim: int, output_dim: int) -> int:
    return (input_dim + 1) * output_dim


def lstm_params(input_dim: int, hidden: int) -> int:
    return 4 * (input_dim + hidden + 1) * hidden

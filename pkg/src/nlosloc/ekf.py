"""Constant-velocity EKF with range and azimuth updates from LoS gNBs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .antenna import SPEED_OF_LIGHT
from .features import wrap_angle


@dataclass(frozen=True)
class EkfParams:
    sigma_tof: float = 50e-9  # s
    sigma_aoa_deg: float = 15.0
    sigma_v: float = 8.0  # m/s
    dt: float = 0.1

    def __post_init__(self):
        if min(self.sigma_tof, self.sigma_aoa_deg, self.sigma_v, self.dt) <= 0:
            raise ValueError("EKF parameters must be positive")

    @property
    def sigma_range(self) -> float:
        return self.sigma_tof * SPEED_OF_LIGHT

    def to_dict(self) -> dict:
        return {"sigma_tof": self.sigma_tof, "sigma_aoa_deg": self.sigma_aoa_deg,
                "sigma_v": self.sigma_v, "dt": self.dt}


@dataclass
class EkfState:
    x: np.ndarray  # (x, y, vx, vy)
    P: np.ndarray  # 4x4


def transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    return F


def process_noise(dt: float, sigma_v: float) -> np.ndarray:
    """Piecewise-constant white acceleration noise, ``sigma_v**2 * G G^T``."""
    g = np.array([dt * dt / 2.0, dt])
    q = sigma_v ** 2 * np.outer(g, g)
    Q = np.zeros((4, 4))
    Q[np.ix_([0, 2], [0, 2])] = q
    Q[np.ix_([1, 3], [1, 3])] = q
    return Q


def _sym(P):
    return 0.5 * (P + P.T)


def ekf_predict(state: EkfState, params: EkfParams, Q: np.ndarray | None = None) -> EkfState:
    F = transition(params.dt)
    Q = process_noise(params.dt, params.sigma_v) if Q is None else Q
    return EkfState(F @ state.x, _sym(F @ state.P @ F.T + Q))


def ekf_update(state: EkfState, measurements, params: EkfParams, height_diff: float = 0.0) -> EkfState:
    """Joint update with ``(gnb_xy, range_m, azimuth_rad)`` per gNB.

    Ranges are 3-D with a known vertical offset ``height_diff``; the
    azimuth is measured at the gNB toward the UE.  A gNB whose horizontal
    position coincides with the estimate is skipped.
    """
    x, P = state.x, state.P
    rows_h, rows_z, rows_r, jac = [], [], [], []
    sr2 = params.sigma_range ** 2
    sa2 = np.deg2rad(params.sigma_aoa_deg) ** 2
    for g, rng_m, az in measurements:
        g = np.asarray(g, dtype=np.float64)[:2]
        dx, dy = x[0] - g[0], x[1] - g[1]
        rho2 = dx * dx + dy * dy
        if rho2 < 1e-12:
            continue
        r = np.sqrt(rho2 + height_diff ** 2)
        jac.append([dx / r, dy / r, 0.0, 0.0])
        jac.append([-dy / rho2, dx / rho2, 0.0, 0.0])
        rows_h += [r, np.arctan2(dy, dx)]
        rows_z += [rng_m, az]
        rows_r += [sr2, sa2]
    if not jac:
        return EkfState(x.copy(), P.copy())
    H = np.array(jac)
    y = np.array(rows_z) - np.array(rows_h)
    y[1::2] = wrap_angle(y[1::2])
    R = np.diag(rows_r)
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    x_new = x + K @ y
    IKH = np.eye(4) - K @ H
    P_new = IKH @ P @ IKH.T + K @ R @ K.T
    return EkfState(x_new, _sym(P_new))


@dataclass
class EkfTrack:
    positions: np.ndarray  # (n, 2)
    velocities: np.ndarray  # (n, 2)
    evaluate: np.ndarray  # bool, True from the first LoS update on
    covariances: np.ndarray  # (n, 4, 4)


def run_ekf_track(measurements, los, init_state, gnb_positions, params: EkfParams = EkfParams(),
                  height_diff: float = 0.0, P0=None) -> EkfTrack:
    """Filter one track.

    ``measurements[k][g]`` is ``(range_m, azimuth_rad)`` for gNB ``g`` at
    sample ``k``; ``los[k][g]`` selects the gNBs used in the update.  The
    filter starts at ``init_state`` (the true state of sample 0); sample 0
    is updated too if it has a LoS gNB.
    """
    n = len(measurements)
    Q = process_noise(params.dt, params.sigma_v)
    st = EkfState(np.asarray(init_state, dtype=np.float64).copy(),
                  np.zeros((4, 4)) if P0 is None else np.asarray(P0, dtype=np.float64))
    pos = np.empty((n, 2))
    vel = np.empty((n, 2))
    covs = np.empty((n, 4, 4))
    ev = np.zeros(n, dtype=bool)
    started = False
    for k in range(n):
        if k > 0:
            st = ekf_predict(st, params, Q)
        meas = [(gnb_positions[g], m[0], m[1]) for g, m in enumerate(measurements[k]) if los[k][g]]
        if meas:
            st = ekf_update(st, meas, params, height_diff)
            started = True
        ev[k] = started
        pos[k], vel[k], covs[k] = st.x[:2], st.x[2:], st.P
    return EkfTrack(pos, vel, ev, covs)

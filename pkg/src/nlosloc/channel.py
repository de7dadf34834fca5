"""Beamformed OFDM frequency response and time-domain path observables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .antenna import SPEED_OF_LIGHT, ArrayConfig, steering_vector  # noqa: F401
from .raytrace import PathSet

PATH_LOSS_THRESHOLD_DB = 160.0
TX_POWER_DBM = 30.0
MAX_TIME_PATHS = 5


@dataclass(frozen=True)
class OfdmConfig:
    subcarrier_spacing: float = 120e3
    rb_size: int = 12
    n_rbs: int = 10
    fft_size: int = 4096
    observe_subcarrier: int = 6

    def __post_init__(self):
        if self.subcarrier_spacing <= 0 or self.rb_size < 1 or self.n_rbs < 1 or self.fft_size < 1:
            raise ValueError(f"invalid OFDM configuration {self}")

    @property
    def sampling_freq(self) -> float:
        # F_s / N equals the subcarrier spacing
        return self.fft_size * self.subcarrier_spacing

    @property
    def rb_bandwidth(self) -> float:
        return self.rb_size * self.subcarrier_spacing

    @property
    def phase_distance(self) -> float:
        """Propagation distance over which the RB-to-RB phase wraps once."""
        return SPEED_OF_LIGHT / self.rb_bandwidth

    @property
    def phase_delay(self) -> float:
        return 1.0 / self.rb_bandwidth

    @property
    def rb_subcarriers(self) -> np.ndarray:
        return self.observe_subcarrier + self.rb_size * np.arange(self.n_rbs)

    def to_dict(self) -> dict:
        return {"subcarrier_spacing": self.subcarrier_spacing, "rb_size": self.rb_size,
                "n_rbs": self.n_rbs, "fft_size": self.fft_size,
                "observe_subcarrier": self.observe_subcarrier}


@dataclass(eq=False)
class CsiGrid:
    """Beamformed CSI of one UE sample, indexed (gnb, beam, rb)."""

    values: np.ndarray
    mask: np.ndarray
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    time: float = 0.0
    los: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __post_init__(self):
        self.values = np.where(self.mask, self.values, 0.0 + 0.0j)


def _prefilter(paths, threshold_db):
    return [p for p in paths if p.loss_db <= threshold_db]


def beamformed_fr(paths, weights: np.ndarray, ofdm: OfdmConfig, tx_array: ArrayConfig,
                  rx_array: ArrayConfig | None = None, rx_weights=None) -> np.ndarray:
    """Beamformed response at the observed subcarrier of every RB.

    ``weights`` is one TX weight vector (n_tx,) or a stack (n_beams, n_tx);
    the result is (n_rbs,) or (n_beams, n_rbs) complex.  The UE side
    defaults to a single isotropic element with weight 1.
    """
    w = np.asarray(weights)
    single = w.ndim == 1
    w = np.atleast_2d(w)
    if w.shape[1] != tx_array.n_elements:
        raise ValueError(f"beam weight length {w.shape[1]} != array size {tx_array.n_elements}")
    plist = list(paths)
    if not plist:
        out = np.zeros((w.shape[0], ofdm.n_rbs), dtype=complex)
        return out[0] if single else out
    tau = np.array([p.delay for p in plist])
    h = np.array([p.gain for p in plist])
    aod = np.array([p.aod for p in plist])
    a_tx = steering_vector(tx_array, aod)  # (K, n_tx)
    tx_term = np.conj(a_tx) @ w.T  # a_TX^H b_TX, (K, n_beams)
    if rx_array is None:
        rx_term = np.ones(len(plist), dtype=complex)
    else:
        a_rx = steering_vector(rx_array, np.array([p.aoa_ue for p in plist]))
        b_rx = np.ones(rx_array.n_elements) / np.sqrt(rx_array.n_elements) if rx_weights is None else rx_weights
        rx_term = a_rx @ np.conj(b_rx)  # b_RX^H a_RX
    n = ofdm.rb_subcarriers
    delay_term = np.exp(-2j * np.pi * np.outer(tau, n) * ofdm.sampling_freq / ofdm.fft_size)  # (K, M)
    out = np.einsum("k,km,kb->bm", h * rx_term, delay_term, tx_term)
    return out[0] if single else out


def csi_grid(pathsets, gnbs, ofdm: OfdmConfig, threshold_db: float = PATH_LOSS_THRESHOLD_DB,
             position=None, time: float = 0.0) -> CsiGrid:
    """Stack the beamformed responses of every gNB and beam into a grid.

    Paths weaker than ``threshold_db`` are dropped first; grid entries whose
    own loss exceeds the threshold are masked as unavailable.
    """
    n_beams = max(len(g.codebook) for g in gnbs)
    values = np.zeros((len(gnbs), n_beams, ofdm.n_rbs), dtype=complex)
    los = np.zeros(len(gnbs), dtype=bool)
    for i, (ps, g) in enumerate(zip(pathsets, gnbs)):
        kept = _prefilter(ps, threshold_db)
        los[i] = any(p.bounce_count == 0 for p in ps)
        if kept:
            values[i, :len(g.codebook)] = beamformed_fr(kept, g.codebook.weight_matrix, ofdm, g.array)
    with np.errstate(divide="ignore"):
        loss = -10.0 * np.log10(np.abs(values) ** 2)
    mask = loss <= threshold_db
    return CsiGrid(values, mask, np.zeros(3) if position is None else np.asarray(position, float), time, los)


def time_csi(paths, threshold_db: float = PATH_LOSS_THRESHOLD_DB, tx_power_dbm: float = TX_POWER_DBM,
             max_paths: int = MAX_TIME_PATHS) -> np.ndarray:
    """Path observables of the strongest paths as an (n, 4) array.

    Columns: delay (s), received power (dBm), gNB-side azimuth and elevation
    (rad).  Rows are sorted by descending power.
    """
    kept = sorted(_prefilter(paths, threshold_db), key=lambda p: -p.power)[:max_paths]
    out = np.zeros((len(kept), 4))
    for r, p in enumerate(kept):
        out[r] = (p.delay, tx_power_dbm - p.loss_db, p.aoa[0], p.aoa[1])
    return out

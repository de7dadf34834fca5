"""Uniform cylindrical arrays, steering vectors and the beam codebook."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


def direction_vector(azimuth: float, elevation: float) -> np.ndarray:
    ce = np.cos(elevation)
    return np.array([ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation)])


@dataclass(frozen=True, eq=False)
class ArrayConfig:
    """Stacked uniform circular rings around a vertical axis.

    ``ring_spacing`` is the vertical distance between rings and ``radius``
    the ring radius, both in metres.  Element ``i`` of ring ``r`` sits at
    angle ``2*pi*i/elements_per_ring`` and height
    ``(r - (n_rings - 1)/2) * ring_spacing`` relative to the array centre.
    """

    n_rings: int = 4
    elements_per_ring: int = 16
    ring_spacing: float = 0.0
    radius: float = 0.0
    wavelength: float = SPEED_OF_LIGHT / 28e9
    positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_rings < 1 or self.elements_per_ring < 1:
            raise ValueError("array needs at least one ring and one element per ring")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        ang = 2 * np.pi * np.arange(self.elements_per_ring) / self.elements_per_ring
        zs = (np.arange(self.n_rings) - (self.n_rings - 1) / 2) * self.ring_spacing
        pos = np.empty((self.n_rings * self.elements_per_ring, 3))
        for r, z in enumerate(zs):
            sl = slice(r * self.elements_per_ring, (r + 1) * self.elements_per_ring)
            pos[sl, 0] = self.radius * np.cos(ang)
            pos[sl, 1] = self.radius * np.sin(ang)
            pos[sl, 2] = z
        object.__setattr__(self, "positions", pos)

    @classmethod
    def half_wavelength(cls, wavelength: float, n_rings: int = 4, elements_per_ring: int = 16):
        """Half-wavelength arc spacing in each ring and between rings."""
        if elements_per_ring >= 2:
            radius = wavelength / (4 * np.sin(np.pi / elements_per_ring))
        else:
            radius = 0.0
        spacing = wavelength / 2 if n_rings > 1 else 0.0
        return cls(n_rings, elements_per_ring, spacing, radius, wavelength)

    @classmethod
    def isotropic(cls, wavelength: float = SPEED_OF_LIGHT / 28e9):
        return cls(1, 1, 0.0, 0.0, wavelength)

    @property
    def n_elements(self) -> int:
        return self.n_rings * self.elements_per_ring


def steering_vector(array: ArrayConfig, direction, wavelength: float | None = None) -> np.ndarray:
    """Unit-modulus element phases ``exp(j 2pi/lambda <k, p_i>)``.

    ``direction`` is ``(azimuth, elevation)`` in radians, or an (n, 2) array
    of them, in which case the result has shape (n, n_elements).
    """
    lam = array.wavelength if wavelength is None else wavelength
    if lam <= 0:
        raise ValueError("wavelength must be positive")
    d = np.asarray(direction, dtype=np.float64)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    ce = np.cos(d[:, 1])
    k = np.stack([ce * np.cos(d[:, 0]), ce * np.sin(d[:, 0]), np.sin(d[:, 1])], axis=1)
    a = np.exp(1j * (2 * np.pi / lam) * (k @ array.positions.T))
    return a[0] if single else a


def beam_weights(array: ArrayConfig, azimuth: float, elevation: float) -> np.ndarray:
    """Unit-norm weights steering the array toward (azimuth, elevation).

    With ``a`` the steering vector of that direction, ``w = a / ||a||`` so
    that ``|w^H a| = ||a||``, the largest value any unit-norm ``w`` reaches.
    """
    a = steering_vector(array, (azimuth, elevation))
    return a / np.linalg.norm(a)


@dataclass(frozen=True, eq=False)
class Beam:
    azimuth: float
    elevation: float
    weights: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class BeamCodebook:
    beams: tuple

    @classmethod
    def uniform(cls, array: ArrayConfig, n_beams: int = 16, elevation_deg: float = -10.0,
                azimuth_offset_deg: float = 0.0):
        el = np.deg2rad(elevation_deg)
        beams = []
        for b in range(n_beams):
            az = np.deg2rad(azimuth_offset_deg) + 2 * np.pi * b / n_beams
            az = float(np.angle(np.exp(1j * az)))
            beams.append(Beam(az, float(el), beam_weights(array, az, el)))
        return cls(tuple(beams))

    def __len__(self):
        return len(self.beams)

    @property
    def weight_matrix(self) -> np.ndarray:
        """(n_beams, n_elements) complex."""
        return np.stack([b.weights for b in self.beams])

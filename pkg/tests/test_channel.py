import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlosloc.antenna import SPEED_OF_LIGHT, ArrayConfig, BeamCodebook
from nlosloc.channel import OfdmConfig, beamformed_fr, csi_grid, time_csi
from nlosloc.raytrace import PathComponent, PathSet, trace

OFDM = OfdmConfig()
ISO = ArrayConfig.isotropic()
UCA = ArrayConfig.half_wavelength(SPEED_OF_LIGHT / 28e9)
CB = BeamCodebook.uniform(UCA)


def path(tau, gain=1e-5 + 0j, az=0.3, el=-0.1, nb=0):
    return PathComponent(tau, gain, (az, el), (az, el), (az + np.pi, -el), nb, np.zeros((nb, 3)))


def rb_phase_step(h):
    return np.angle(h[1:] * np.conj(h[:-1]))


def test_defaults():
    assert OFDM.rb_bandwidth == 1.44e6
    assert OFDM.phase_distance == pytest.approx(208.19, abs=5e-3)
    assert OFDM.phase_delay == pytest.approx(694.44e-9, abs=5e-12)
    np.testing.assert_array_equal(OFDM.rb_subcarriers[:3], [6, 18, 30])


def test_zero_delay_constant():
    h = beamformed_fr([path(0.0, 0.3 - 0.2j)], np.ones(1), OFDM, ISO)
    np.testing.assert_allclose(h, np.full(10, 0.3 - 0.2j), atol=1e-15)


def test_half_period_delay_flips_phase():
    h = beamformed_fr([path(0.5 / OFDM.rb_bandwidth)], np.ones(1), OFDM, ISO)
    np.testing.assert_allclose(np.abs(np.abs(rb_phase_step(h)) - np.pi), 0, atol=1e-9)


def test_two_path_interference_alternates():
    dt = 1 / (2 * OFDM.rb_bandwidth)
    # align both paths at m = 0
    tau1 = 0.0
    tau2 = dt
    g2 = 1e-5 * np.exp(2j * np.pi * OFDM.rb_subcarriers[0] * OFDM.subcarrier_spacing * tau2)
    h = beamformed_fr([path(tau1), path(tau2, g2)], np.ones(1), OFDM, ISO)
    np.testing.assert_allclose(np.abs(h[0::2]), 2e-5, rtol=1e-9)
    np.testing.assert_allclose(np.abs(h[1::2]), 0, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-9, 3e-6))
def test_single_path_phase_law(tau):
    h = beamformed_fr([path(tau)], CB.weight_matrix[3], OFDM, UCA)
    expected = -2 * np.pi * tau * OFDM.rb_bandwidth
    err = np.angle(np.exp(1j * (rb_phase_step(h) - expected)))
    assert np.max(np.abs(err)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-9, 2e-6))
def test_recurrence_one_period(tau):
    a = beamformed_fr([path(tau)], np.ones(1), OFDM, ISO)
    b = beamformed_fr([path(tau + OFDM.phase_delay)], np.ones(1), OFDM, ISO)
    err = np.angle(np.exp(1j * (rb_phase_step(a) - rb_phase_step(b))))
    assert np.max(np.abs(err)) < 1e-9


def test_linearity_and_energy_bound():
    rng = np.random.default_rng(3)
    ps = [path(rng.uniform(1e-8, 1e-6), complex(*rng.normal(size=2)) * 1e-5, rng.uniform(-3, 3), -0.2)
          for _ in range(6)]
    W = CB.weight_matrix
    whole = beamformed_fr(ps, W, OFDM, UCA)
    parts = beamformed_fr(ps[:3], W, OFDM, UCA) + beamformed_fr(ps[3:], W, OFDM, UCA)
    np.testing.assert_allclose(whole, parts, rtol=1e-12, atol=1e-20)
    bound = sum(abs(p.gain) for p in ps) * np.sqrt(UCA.n_elements)
    assert np.all(np.abs(whole) <= bound + 1e-18)


def test_empty_paths_zero():
    assert np.all(beamformed_fr([], CB.weight_matrix, OFDM, UCA) == 0)


def test_weight_length_checked():
    with pytest.raises(ValueError):
        beamformed_fr([path(1e-7)], np.ones(3), OFDM, UCA)


def test_time_csi_threshold_and_order():
    weak = path(1e-6, 10 ** (-161 / 20) + 0j)
    assert time_csi([weak]).shape == (0, 4)
    ps = [path(1e-7 * (k + 1), 10 ** (-(100 + k) / 20) + 0j) for k in range(7)]
    out = time_csi(list(reversed(ps)))
    assert out.shape == (5, 4)
    assert np.all(np.diff(out[:, 1]) < 0)
    np.testing.assert_allclose(out[:, 1], 30.0 - (100 + np.arange(5)))


def test_time_csi_los_delay(free_scene):
    g = np.array([0.0, 0.0, 5.0])
    ue = np.array([30.0, 40.0, 1.5])
    out = time_csi(trace(g, ue, free_scene))
    assert out[0, 0] == np.linalg.norm(ue - g) / SPEED_OF_LIGHT


def test_grid_default_shape(madrid_scene):
    ue = np.array([145.0, 200.0, 1.5])
    sets = [trace(g.position, ue, madrid_scene) for g in madrid_scene.gnbs]
    grid = csi_grid(sets, madrid_scene.gnbs, OFDM, position=ue)
    assert grid.values.shape == (3, 16, 10)
    assert np.all(grid.values[~grid.mask] == 0)
    from nlosloc.scene import los_visible
    for i, g in enumerate(madrid_scene.gnbs):
        assert grid.los[i] == los_visible(g.position, ue, madrid_scene)

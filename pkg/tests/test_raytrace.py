import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlosloc import _kernels
from nlosloc.antenna import SPEED_OF_LIGHT
from nlosloc.raytrace import (DegeneratePathError, dump_polylines, fspl_db, path_gain, polyline,
                              trace)
from nlosloc.scene import load_scene

from conftest import minimal_config

GNB = np.array([-20.0, 0.0, 5.0])
UE = np.array([20.0, 0.0, 1.5])


def wall_scene():
    return load_scene(minimal_config(buildings=[(-50, 10, 50, 12, 20)], gnb=(-20.0, 0.0, 5.0)))


def test_free_space_single_los(free_scene):
    ps = trace(GNB, UE, free_scene, 2)
    assert len(ps) == 1
    p = ps.paths[0]
    assert p.bounce_count == 0
    assert p.delay == pytest.approx(np.linalg.norm(GNB - UE) / SPEED_OF_LIGHT, rel=1e-14)


def test_parallel_wall_mirror_path():
    ps = trace(GNB, UE, wall_scene(), 1)
    assert sorted(p.bounce_count for p in ps) == [0, 1]
    mirror = [p for p in ps if p.bounce_count == 1][0]
    image = np.array([-20.0, 20.0, 5.0])
    assert mirror.length == pytest.approx(np.linalg.norm(image - UE), abs=1e-9)
    assert mirror.points[0, 1] == pytest.approx(10.0)


def test_enclosed_ue_has_no_direct_path():
    walls = [(-30, -30, 30, -20, 20), (-30, 20, 30, 30, 20), (-30, -19, -20, 19, 20), (20, -19, 30, 19, 20)]
    s = load_scene(minimal_config(buildings=walls, gnb=(100.0, 100.0, 5.0)))
    assert len(trace([100.0, 100.0, 5.0], [0.0, 0.0, 1.5], s, 0)) == 0


def test_fspl_and_gain_model():
    # 20 log10(4 pi 100 28e9 / c) evaluated independently
    assert fspl_db(100.0, 28e9) == pytest.approx(101.3916, abs=1e-3)
    h0 = path_gain(100.0, 0, 28e9)
    h1 = path_gain(100.0, 1, 28e9, 6.0)
    assert -20 * np.log10(abs(h0)) == pytest.approx(101.3916, abs=1e-3)
    assert -20 * np.log10(abs(h1)) == pytest.approx(107.3916, abs=1e-3)


def test_integer_wavelength_phase_zero():
    f = 28e9
    lam = SPEED_OF_LIGHT / f
    h = path_gain(1000 * lam, 0, f)
    assert abs(np.angle(h)) < 1e-6


def test_degenerate_path():
    with pytest.raises(DegeneratePathError, match="degenerate path"):
        path_gain(0.0, 0, 28e9)


def test_bad_bounce_count(free_scene):
    with pytest.raises(ValueError):
        trace(GNB, UE, free_scene, 3)


def _points(scene):
    rng = np.random.default_rng(5)
    g = scene.graph
    edges = sorted(g.edges)
    out = []
    for _ in range(40):
        a, b = edges[rng.integers(len(edges))]
        pa, pb = g.nodes[a]["pos"], g.nodes[b]["pos"]
        xy = pa + rng.uniform() * (pb - pa)
        out.append(np.array([xy[0], xy[1], scene.ue_height]))
    return out


def test_reciprocity(madrid_scene):
    g = madrid_scene.gnbs[0].position
    for ue in _points(madrid_scene)[:15]:
        fwd = trace(g, ue, madrid_scene)
        rev = trace(ue, g, madrid_scene)
        assert sorted((p.bounce_count, round(p.length, 6)) for p in fwd) == \
            sorted((p.bounce_count, round(p.length, 6)) for p in rev)


def test_monotone_in_bounces(madrid_scene):
    g = madrid_scene.gnbs[1].position
    for ue in _points(madrid_scene)[:15]:
        sets = [trace(g, ue, madrid_scene, k) for k in (0, 1, 2)]
        for lo, hi in zip(sets, sets[1:]):
            keys_hi = {(p.bounce_count, round(p.length, 9), p.walls) for p in hi}
            assert {(p.bounce_count, round(p.length, 9), p.walls) for p in lo} <= keys_hi


def test_path_geometry(madrid_scene):
    walls = madrid_scene.walls
    for gi, gnb in enumerate(madrid_scene.gnbs):
        for ue in _points(madrid_scene):
            ps = trace(gnb.position, ue, madrid_scene)
            powers = [p.power for p in ps]
            assert powers == sorted(powers, reverse=True)
            for p in ps:
                assert p.delay > 0 and p.power <= 1
                poly = polyline(gnb.position, ue, p)
                assert np.linalg.norm(np.diff(poly, axis=0), axis=1).sum() == pytest.approx(p.length, abs=1e-6)
                assert p.points.shape == (p.bounce_count, 3)
                for j, w in enumerate(p.walls):
                    axis, coord = int(walls[w, 0]), walls[w, 1]
                    assert poly[j + 1, axis] == pytest.approx(coord, abs=1e-9)
                    d_in = poly[j + 1] - poly[j]
                    d_out = poly[j + 2] - poly[j + 1]
                    n = np.zeros(3)
                    n[axis] = 1.0
                    a_in = np.arccos(abs(d_in @ n) / np.linalg.norm(d_in))
                    a_out = np.arccos(abs(d_out @ n) / np.linalg.norm(d_out))
                    assert a_in == pytest.approx(a_out, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 5000.0), st.floats(0.0, 100.0), st.integers(0, 2))
def test_gain_decreases_with_length(d, extra, nb):
    if extra < 1e-6:
        return
    assert abs(path_gain(d + extra, nb, 28e9)) < abs(path_gain(d, nb, 28e9))


def test_polyline_dump(free_scene):
    ps = trace(GNB, UE, free_scene)
    line = dump_polylines(ps, GNB, UE).strip()
    assert '"bounces": 0' in line


def test_backends_agree(madrid_scene):
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    for gnb in madrid_scene.gnbs:
        for ue in _points(madrid_scene)[:20]:
            a = _kernels.trace_numpy(gnb.position, ue, madrid_scene.boxes, madrid_scene.walls, 2)
            b = _kernels.trace_numba(gnb.position, ue, madrid_scene.boxes, madrid_scene.walls, 2)
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)
    P = np.array(_points(madrid_scene))
    Q = np.repeat(madrid_scene.gnbs[0].position[None], len(P), axis=0)
    np.testing.assert_array_equal(_kernels.los_many_numpy(P, Q, madrid_scene.boxes),
                                  _kernels.los_many_numba(P, Q, madrid_scene.boxes))


def test_env_flag_selects_numpy():
    env = dict(os.environ, NLOSLOC_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", "from nlosloc import _kernels; print(_kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"

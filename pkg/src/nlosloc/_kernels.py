"""Hot geometry kernels for the image-method tracer.

Every kernel exists twice: a numba ``@njit`` loop version and a vectorised
pure-numpy version.  ``NLOSLOC_NUMBA=0`` in the environment (or a missing
numba install) selects the numpy path.  Both versions use the same
arithmetic in the same order so their outputs agree bit for bit on the
path sets they return.

Array layouts shared by both paths:

``boxes``  (n_buildings, 5) float64 -- ``x0, y0, x1, y1, height``
``walls``  (n_walls, 7) float64 -- ``axis, coord, lo, hi, outward_sign,
           height, building`` where ``axis`` 0 is the plane ``x = coord``
           and 1 the plane ``y = coord``; ``lo..hi`` is the extent along the
           other horizontal axis.
trace rows (n_paths, 10) -- ``bounces, wall1, wall2, r1x, r1y, r1z, r2x,
           r2y, r2z, length``; unused reflection slots hold NaN / -1.
"""

from __future__ import annotations

import os

import numpy as np

# parameter-space margin used to drop the contact of a leg with the wall it
# starts or ends on
LEG_EPS = 1e-9
ROW_WIDTH = 10

_flag = os.environ.get("NLOSLOC_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "no", "off")

try:
    if not _want_numba:
        raise ImportError("numba disabled by NLOSLOC_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag in CI
    HAVE_NUMBA = False


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------

def _swapped_numpy(P, Q):
    """Rows where Q precedes P lexicographically."""
    gt = np.zeros(P.shape[0], dtype=bool)
    eq = np.ones(P.shape[0], dtype=bool)
    for ax in range(3):
        gt |= eq & (P[:, ax] > Q[:, ax])
        eq &= P[:, ax] == Q[:, ax]
    return gt


def blocked_many_numpy(P, Q, boxes, tlo, thi):
    """Closed-set 2.5-D occlusion test for many segments at once.

    ``P``, ``Q`` are (n, 3); ``tlo``/``thi`` scalars or (n,) arrays giving the
    parameter window of each segment that is tested.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    n = P.shape[0]
    nb = boxes.shape[0]
    if nb == 0 or n == 0:
        return np.zeros(n, dtype=bool)
    lo_t = np.broadcast_to(np.asarray(tlo, dtype=np.float64), (n,))
    hi_t = np.broadcast_to(np.asarray(thi, dtype=np.float64), (n,))
    # Orient every segment the same way so rounding cannot break p/q symmetry.
    sw = _swapped_numpy(P, Q)
    P, Q = np.where(sw[:, None], Q, P), np.where(sw[:, None], P, Q)
    lo_t, hi_t = np.where(sw, 1.0 - hi_t, lo_t), np.where(sw, 1.0 - lo_t, hi_t)
    d = Q - P
    t0 = np.empty((n, nb))
    t1 = np.empty((n, nb))
    t0[:] = lo_t[:, None]
    t1[:] = hi_t[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        for ax in (0, 1):
            lo = boxes[:, ax][None, :]
            hi = boxes[:, ax + 2][None, :]
            dd = d[:, ax][:, None]
            pp = P[:, ax][:, None]
            ta = (lo - pp) / dd
            tb = (hi - pp) / dd
            tmin = np.minimum(ta, tb)
            tmax = np.maximum(ta, tb)
            zero = dd == 0.0
            inside = (pp >= lo) & (pp <= hi)
            tmin = np.where(zero, np.where(inside, -np.inf, np.inf), tmin)
            tmax = np.where(zero, np.where(inside, np.inf, -np.inf), tmax)
            t0 = np.maximum(t0, tmin)
            t1 = np.minimum(t1, tmax)
        hit = t0 <= t1
        pz = P[:, 2][:, None]
        dz = d[:, 2][:, None]
        za = pz + t0 * dz
        zb = pz + t1 * dz
        zmin = np.minimum(za, zb)
        hit &= zmin <= boxes[:, 4][None, :]
    return hit.any(axis=1)


def _reflect_point_numpy(T, target, axis, coord):
    # intersection of segment T -> target with the plane axis == coord
    n = T.shape[0]
    ar = np.arange(n)
    den = target[ar, axis] - T[ar, axis]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (coord - T[ar, axis]) / den
        R = T + t[:, None] * (target - T)
    R[ar, axis] = coord
    return R, t, den


def trace_numpy(tx, rx, boxes, walls, max_bounces):
    tx = np.asarray(tx, dtype=np.float64)
    rx = np.asarray(rx, dtype=np.float64)
    rows = []
    if not blocked_many_numpy(tx[None], rx[None], boxes, 0.0, 1.0)[0]:
        row = np.full(ROW_WIDTH, np.nan)
        row[0], row[1], row[2] = 0.0, -1.0, -1.0
        row[9] = np.sqrt(((rx - tx) ** 2).sum())
        rows.append(row[None])
    nw = walls.shape[0]
    if max_bounces >= 1 and nw:
        axis = walls[:, 0].astype(np.int64)
        coord = walls[:, 1]
        sign = walls[:, 4]
        other = 1 - axis
        ar = np.arange(nw)
        tx_front = sign * (tx[axis] - coord) > 0.0
        rx_front = sign * (rx[axis] - coord) > 0.0

        # single bounce
        idx = np.nonzero(tx_front & rx_front)[0]
        if idx.size:
            a = axis[idx]
            T = np.repeat(tx[None], idx.size, axis=0)
            T[np.arange(idx.size), a] = 2.0 * coord[idx] - T[np.arange(idx.size), a]
            tgt = np.repeat(rx[None], idx.size, axis=0)
            R, _, _ = _reflect_point_numpy(T, tgt, a, coord[idx])
            ro = R[np.arange(idx.size), other[idx]]
            ok = (ro >= walls[idx, 2]) & (ro <= walls[idx, 3])
            ok &= (R[:, 2] <= walls[idx, 5]) & (R[:, 2] >= 0.0)
            src = np.repeat(tx[None], idx.size, axis=0)
            ok &= ~blocked_many_numpy(src, R, boxes, 0.0, 1.0 - LEG_EPS)
            ok &= ~blocked_many_numpy(R, tgt, boxes, LEG_EPS, 1.0)
            if ok.any():
                k = np.nonzero(ok)[0]
                out = np.full((k.size, ROW_WIDTH), np.nan)
                out[:, 0] = 1.0
                out[:, 1] = idx[k]
                out[:, 2] = -1.0
                out[:, 3:6] = R[k]
                out[:, 9] = np.sqrt(((tgt[k] - T[k]) ** 2).sum(axis=1))
                rows.append(out)

        if max_bounces >= 2:
            w1s = np.nonzero(tx_front)[0]
            w2s = np.nonzero(rx_front)[0]
            if w1s.size and w2s.size:
                W1, W2 = np.meshgrid(w1s, w2s, indexing="ij")
                W1 = W1.ravel()
                W2 = W2.ravel()
                keep = W1 != W2
                W1, W2 = W1[keep], W2[keep]
                m = W1.size
                mr = np.arange(m)
                a1, a2 = axis[W1], axis[W2]
                c1, c2 = coord[W1], coord[W2]
                T1 = np.repeat(tx[None], m, axis=0)
                T1[mr, a1] = 2.0 * c1 - T1[mr, a1]
                ok = sign[W2] * (T1[mr, a2] - c2) > 0.0
                T2 = T1.copy()
                T2[mr, a2] = 2.0 * c2 - T2[mr, a2]
                tgt = np.repeat(rx[None], m, axis=0)
                R2, _, _ = _reflect_point_numpy(T2, tgt, a2, c2)
                r2o = R2[mr, 1 - a2]
                ok &= (r2o >= walls[W2, 2]) & (r2o <= walls[W2, 3])
                ok &= (R2[:, 2] <= walls[W2, 5]) & (R2[:, 2] >= 0.0)
                ok &= sign[W1] * (R2[mr, a1] - c1) > 0.0
                R1, t1, den1 = _reflect_point_numpy(T1, R2, a1, c1)
                ok &= den1 != 0.0
                r1o = R1[mr, 1 - a1]
                ok &= (r1o >= walls[W1, 2]) & (r1o <= walls[W1, 3])
                ok &= (R1[:, 2] <= walls[W1, 5]) & (R1[:, 2] >= 0.0)
                k = np.nonzero(ok)[0]
                if k.size:
                    src = np.repeat(tx[None], k.size, axis=0)
                    good = ~blocked_many_numpy(src, R1[k], boxes, 0.0, 1.0 - LEG_EPS)
                    good &= ~blocked_many_numpy(R1[k], R2[k], boxes, LEG_EPS, 1.0 - LEG_EPS)
                    good &= ~blocked_many_numpy(R2[k], tgt[k], boxes, LEG_EPS, 1.0)
                    k = k[good]
                if k.size:
                    out = np.full((k.size, ROW_WIDTH), np.nan)
                    out[:, 0] = 2.0
                    out[:, 1] = W1[k]
                    out[:, 2] = W2[k]
                    out[:, 3:6] = R1[k]
                    out[:, 6:9] = R2[k]
                    out[:, 9] = np.sqrt(((tgt[k] - T2[k]) ** 2).sum(axis=1))
                    rows.append(out)
    if not rows:
        return np.zeros((0, ROW_WIDTH))
    return np.concatenate(rows, axis=0)


def los_many_numpy(P, Q, boxes):
    return ~blocked_many_numpy(P, Q, boxes, 0.0, 1.0)


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

def _swapped(p, q):
    for ax in range(3):
        if p[ax] != q[ax]:
            return p[ax] > q[ax]
    return False


def _blocked_one(p, q, boxes, tlo, thi):
    if _swapped(p, q):
        p, q = q, p
        tlo, thi = 1.0 - thi, 1.0 - tlo
    dx = q[0] - p[0]
    dy = q[1] - p[1]
    dz = q[2] - p[2]
    for b in range(boxes.shape[0]):
        t0 = tlo
        t1 = thi
        if dx == 0.0:
            if p[0] < boxes[b, 0] or p[0] > boxes[b, 2]:
                continue
        else:
            ta = (boxes[b, 0] - p[0]) / dx
            tb = (boxes[b, 2] - p[0]) / dx
            lo = min(ta, tb)
            hi = max(ta, tb)
            t0 = max(t0, lo)
            t1 = min(t1, hi)
        if dy == 0.0:
            if p[1] < boxes[b, 1] or p[1] > boxes[b, 3]:
                continue
        else:
            ta = (boxes[b, 1] - p[1]) / dy
            tb = (boxes[b, 3] - p[1]) / dy
            lo = min(ta, tb)
            hi = max(ta, tb)
            t0 = max(t0, lo)
            t1 = min(t1, hi)
        if t0 > t1:
            continue
        za = p[2] + t0 * dz
        zb = p[2] + t1 * dz
        if min(za, zb) <= boxes[b, 4]:
            return True
    return False


def _blocked_many_loop(P, Q, boxes, tlo, thi):
    n = P.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        out[i] = _blocked_one(P[i], Q[i], boxes, tlo, thi)
    return out


def _reflect_one(T, target, axis, coord, R):
    den = target[axis] - T[axis]
    if den == 0.0:
        return False
    t = (coord - T[axis]) / den
    for j in range(3):
        R[j] = T[j] + t * (target[j] - T[j])
    R[axis] = coord
    return True


def _trace_loop(tx, rx, boxes, walls, max_bounces, cap):
    out = np.full((cap, 10), np.nan)
    n = 0
    if not _blocked_one(tx, rx, boxes, 0.0, 1.0):
        if n < cap:
            out[n, 0] = 0.0
            out[n, 1] = -1.0
            out[n, 2] = -1.0
            out[n, 9] = np.sqrt((rx[0] - tx[0]) ** 2 + (rx[1] - tx[1]) ** 2 + (rx[2] - tx[2]) ** 2)
        n += 1
    nw = walls.shape[0]
    if max_bounces < 1:
        return out, n
    T1 = np.empty(3)
    T2 = np.empty(3)
    R1 = np.empty(3)
    R2 = np.empty(3)
    for w in range(nw):
        a = int(walls[w, 0])
        c = walls[w, 1]
        s = walls[w, 4]
        if not (s * (tx[a] - c) > 0.0) or not (s * (rx[a] - c) > 0.0):
            continue
        for j in range(3):
            T1[j] = tx[j]
        T1[a] = 2.0 * c - T1[a]
        _reflect_one(T1, rx, a, c, R1)
        o = 1 - a
        if R1[o] < walls[w, 2] or R1[o] > walls[w, 3]:
            continue
        if R1[2] > walls[w, 5] or R1[2] < 0.0:
            continue
        if _blocked_one(tx, R1, boxes, 0.0, 1.0 - LEG_EPS):
            continue
        if _blocked_one(R1, rx, boxes, LEG_EPS, 1.0):
            continue
        if n < cap:
            out[n, 0] = 1.0
            out[n, 1] = w
            out[n, 2] = -1.0
            out[n, 3] = R1[0]
            out[n, 4] = R1[1]
            out[n, 5] = R1[2]
            out[n, 9] = np.sqrt((rx[0] - T1[0]) ** 2 + (rx[1] - T1[1]) ** 2 + (rx[2] - T1[2]) ** 2)
        n += 1
    if max_bounces < 2:
        return out, n
    for w1 in range(nw):
        a1 = int(walls[w1, 0])
        c1 = walls[w1, 1]
        s1 = walls[w1, 4]
        if not (s1 * (tx[a1] - c1) > 0.0):
            continue
        for j in range(3):
            T1[j] = tx[j]
        T1[a1] = 2.0 * c1 - T1[a1]
        for w2 in range(nw):
            if w2 == w1:
                continue
            a2 = int(walls[w2, 0])
            c2 = walls[w2, 1]
            s2 = walls[w2, 4]
            if not (s2 * (rx[a2] - c2) > 0.0):
                continue
            if not (s2 * (T1[a2] - c2) > 0.0):
                continue
            for j in range(3):
                T2[j] = T1[j]
            T2[a2] = 2.0 * c2 - T2[a2]
            _reflect_one(T2, rx, a2, c2, R2)
            o2 = 1 - a2
            if R2[o2] < walls[w2, 2] or R2[o2] > walls[w2, 3]:
                continue
            if R2[2] > walls[w2, 5] or R2[2] < 0.0:
                continue
            if not (s1 * (R2[a1] - c1) > 0.0):
                continue
            if not _reflect_one(T1, R2, a1, c1, R1):
                continue
            o1 = 1 - a1
            if R1[o1] < walls[w1, 2] or R1[o1] > walls[w1, 3]:
                continue
            if R1[2] > walls[w1, 5] or R1[2] < 0.0:
                continue
            if _blocked_one(tx, R1, boxes, 0.0, 1.0 - LEG_EPS):
                continue
            if _blocked_one(R1, R2, boxes, LEG_EPS, 1.0 - LEG_EPS):
                continue
            if _blocked_one(R2, rx, boxes, LEG_EPS, 1.0):
                continue
            if n < cap:
                out[n, 0] = 2.0
                out[n, 1] = w1
                out[n, 2] = w2
                out[n, 3] = R1[0]
                out[n, 4] = R1[1]
                out[n, 5] = R1[2]
                out[n, 6] = R2[0]
                out[n, 7] = R2[1]
                out[n, 8] = R2[2]
                out[n, 9] = np.sqrt((rx[0] - T2[0]) ** 2 + (rx[1] - T2[1]) ** 2 + (rx[2] - T2[2]) ** 2)
            n += 1
    return out, n


if HAVE_NUMBA:
    _swapped = njit(cache=True)(_swapped)
    _blocked_one = njit(cache=True)(_blocked_one)
    _blocked_many_loop = njit(cache=True)(_blocked_many_loop)
    _reflect_one = njit(cache=True)(_reflect_one)
    _trace_loop = njit(cache=True)(_trace_loop)


def blocked_many_numba(P, Q, boxes, tlo, thi):
    P = np.ascontiguousarray(np.atleast_2d(P), dtype=np.float64)
    Q = np.ascontiguousarray(np.atleast_2d(Q), dtype=np.float64)
    return _blocked_many_loop(P, Q, np.ascontiguousarray(boxes, dtype=np.float64),
                              float(tlo), float(thi))


def trace_numba(tx, rx, boxes, walls, max_bounces):
    tx = np.ascontiguousarray(tx, dtype=np.float64)
    rx = np.ascontiguousarray(rx, dtype=np.float64)
    boxes = np.ascontiguousarray(boxes, dtype=np.float64)
    walls = np.ascontiguousarray(walls, dtype=np.float64).reshape(-1, 7)
    cap = 64
    while True:
        out, n = _trace_loop(tx, rx, boxes, walls, int(max_bounces), cap)
        if n <= cap:
            return out[:n].copy()
        cap = n


def los_many_numba(P, Q, boxes):
    return ~blocked_many_numba(P, Q, boxes, 0.0, 1.0)


if HAVE_NUMBA:
    blocked_many = blocked_many_numba
    trace = trace_numba
    los_many = los_many_numba
    BACKEND = "numba"
else:
    blocked_many = blocked_many_numpy
    trace = trace_numpy
    los_many = los_many_numpy
    BACKEND = "numpy"

"""Batch kernels for the limit integrands: bilinear density reads, one-sided
table interpolation, and level-set membership, fused per point pair.

Both backends implement the identical arithmetic (same interpolation formula
and operation order) so results agree bitwise.  The numba path loops rows;
the numpy path vectorizes over rows.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit_or_plain


@njit_or_plain
def _bilinear_one(values, lo0, lo1, s0, s1, res, x, y):
    u0 = (x - lo0) / s0 - 0.5
    u1 = (y - lo1) / s1 - 0.5
    if u0 < 0.0:
        u0 = 0.0
    if u0 > res - 1.0:
        u0 = res - 1.0
    if u1 < 0.0:
        u1 = 0.0
    if u1 > res - 1.0:
        u1 = res - 1.0
    i0 = int(u0)
    i1 = int(u1)
    if i0 > res - 2:
        i0 = res - 2
    if i1 > res - 2:
        i1 = res - 2
    fx = u0 - i0
    fy = u1 - i1
    return (
        values[i0, i1] * (1 - fx) * (1 - fy)
        + values[i0 + 1, i1] * fx * (1 - fy)
        + values[i0, i1 + 1] * (1 - fx) * fy
        + values[i0 + 1, i1 + 1] * fx * fy
    )


@njit_or_plain
def _cell_label_one(labels, lo0, lo1, s0, s1, res, x, y):
    i0 = int(np.floor((x - lo0) / s0))
    i1 = int(np.floor((y - lo1) / s1))
    if i0 < 0:
        i0 = 0
    if i0 > res - 1:
        i0 = res - 1
    if i1 < 0:
        i1 = 0
    if i1 > res - 1:
        i1 = res - 1
    return labels[i0, i1]


@njit_or_plain
def _theta_interp_one(tgrid, tfit, x):
    """Linear interpolation with end clamping; returns (value, clamped)."""
    n = len(tgrid)
    if x < tgrid[0]:
        v = tfit[0]
        clamped = v > 0.0
    elif x > tgrid[n - 1]:
        v = tfit[n - 1]
        clamped = v < 1.0
    else:
        j = np.searchsorted(tgrid, x, side="right") - 1
        if j > n - 2:
            j = n - 2
        slope = (tfit[j + 1] - tfit[j]) / (tgrid[j + 1] - tgrid[j])
        v = tfit[j] + slope * (x - tgrid[j])
        clamped = False
    if v < 0.0:
        v = 0.0
    if v > 1.0:
        v = 1.0
    return v, clamped


@njit_or_plain
def _pair_integrand_numba(
    p1, p2, values, labels, lo0, lo1, s0, s1, res, tgrid, tfit, rdpow, eps_signed
):
    n = len(p1)
    out = np.empty(n)
    clamped = 0
    for i in range(n):
        l1 = _cell_label_one(labels, lo0, lo1, s0, s1, res, p1[i, 0], p1[i, 1])
        if l1 < 0:
            out[i] = 0.0
            continue
        l2 = _cell_label_one(labels, lo0, lo1, s0, s1, res, p2[i, 0], p2[i, 1])
        if l1 != l2:
            out[i] = 0.0
            continue
        f1 = _bilinear_one(values, lo0, lo1, s0, s1, res, p1[i, 0], p1[i, 1])
        f2 = _bilinear_one(values, lo0, lo1, s0, s1, res, p2[i, 0], p2[i, 1])
        t1, c1 = _theta_interp_one(tgrid, tfit, f1 * rdpow + eps_signed)
        t2, c2 = _theta_interp_one(tgrid, tfit, f2 * rdpow + eps_signed)
        if c1:
            clamped += 1
        if c2:
            clamped += 1
        out[i] = t1 * t2
    return out, clamped


def _bilinear_vec(values, lo0, lo1, s0, s1, res, pts):
    u0 = np.clip((pts[:, 0] - lo0) / s0 - 0.5, 0.0, res - 1.0)
    u1 = np.clip((pts[:, 1] - lo1) / s1 - 0.5, 0.0, res - 1.0)
    i0 = np.minimum(u0.astype(np.int64), res - 2)
    i1 = np.minimum(u1.astype(np.int64), res - 2)
    fx = u0 - i0
    fy = u1 - i1
    return (
        values[i0, i1] * (1 - fx) * (1 - fy)
        + values[i0 + 1, i1] * fx * (1 - fy)
        + values[i0, i1 + 1] * (1 - fx) * fy
        + values[i0 + 1, i1 + 1] * fx * fy
    )


def _cell_label_vec(labels, lo0, lo1, s0, s1, res, pts):
    i0 = np.clip(np.floor((pts[:, 0] - lo0) / s0).astype(np.int64), 0, res - 1)
    i1 = np.clip(np.floor((pts[:, 1] - lo1) / s1).astype(np.int64), 0, res - 1)
    return labels[i0, i1]


def _theta_interp_vec(tgrid, tfit, x):
    j = np.clip(np.searchsorted(tgrid, x, side="right") - 1, 0, len(tgrid) - 2)
    slope = (tfit[j + 1] - tfit[j]) / (tgrid[j + 1] - tgrid[j])
    v = tfit[j] + slope * (x - tgrid[j])
    below = x < tgrid[0]
    above = x > tgrid[-1]
    v = np.where(below, tfit[0], v)
    v = np.where(above, tfit[-1], v)
    clamped = int(np.sum(below & (tfit[0] > 0.0)) + np.sum(above & (tfit[-1] < 1.0)))
    return np.clip(v, 0.0, 1.0), clamped


def _pair_integrand_numpy(
    p1, p2, values, labels, lo0, lo1, s0, s1, res, tgrid, tfit, rdpow, eps_signed
):
    l1 = _cell_label_vec(labels, lo0, lo1, s0, s1, res, p1)
    l2 = _cell_label_vec(labels, lo0, lo1, s0, s1, res, p2)
    conn = (l1 >= 0) & (l1 == l2)
    out = np.zeros(len(p1))
    if np.any(conn):
        f1 = _bilinear_vec(values, lo0, lo1, s0, s1, res, p1[conn])
        f2 = _bilinear_vec(values, lo0, lo1, s0, s1, res, p2[conn])
        t1, c1 = _theta_interp_vec(tgrid, tfit, f1 * rdpow + eps_signed)
        t2, c2 = _theta_interp_vec(tgrid, tfit, f2 * rdpow + eps_signed)
        out[conn] = t1 * t2
        return out, c1 + c2
    return out, 0


def pair_integrand(p1, p2, values, labels, lower, side, res, tgrid, tfit, rdpow, eps_signed):
    """Integrand rows 1{p1 ~ p2 in the level set} * theta(f(p1)) * theta(f(p2)).

    Returns (array (n,), clamp count).  eps_signed is the signed one-sided
    lookup offset (-eps for the strict mode, +eps for the weak one).
    """
    p1 = np.ascontiguousarray(np.atleast_2d(p1), dtype=np.float64)
    p2 = np.ascontiguousarray(np.atleast_2d(p2), dtype=np.float64)
    fn = _pair_integrand_numba if USE_NUMBA else _pair_integrand_numpy
    return fn(
        p1,
        p2,
        np.ascontiguousarray(values),
        np.ascontiguousarray(labels),
        float(lower[0]),
        float(lower[1]),
        float(side[0]),
        float(side[1]),
        int(res),
        np.ascontiguousarray(tgrid),
        np.ascontiguousarray(tfit),
        float(rdpow),
        float(eps_signed),
    )


@njit_or_plain
def _f_diamond_numba(
    x1a, x1b, x2a, x2b, quad_n, values, labels, lo0, lo1, s0, s1, res, tgrid, tfit, rdpow, eps_signed
):
    n = len(x1a)
    out = np.zeros(n)
    clamped = 0
    for i in range(n):
        acc = 0.0
        for k in range(quad_n):
            s = (k + 0.5) / quad_n
            p1x = (1.0 - s) * x1a[i, 0] + s * x1b[i, 0]
            p1y = (1.0 - s) * x1a[i, 1] + s * x1b[i, 1]
            l1 = _cell_label_one(labels, lo0, lo1, s0, s1, res, p1x, p1y)
            if l1 < 0:
                continue
            p2x = (1.0 - s) * x2a[i, 0] + s * x2b[i, 0]
            p2y = (1.0 - s) * x2a[i, 1] + s * x2b[i, 1]
            l2 = _cell_label_one(labels, lo0, lo1, s0, s1, res, p2x, p2y)
            if l1 != l2:
                continue
            f1 = _bilinear_one(values, lo0, lo1, s0, s1, res, p1x, p1y)
            f2 = _bilinear_one(values, lo0, lo1, s0, s1, res, p2x, p2y)
            t1, c1 = _theta_interp_one(tgrid, tfit, f1 * rdpow + eps_signed)
            t2, c2 = _theta_interp_one(tgrid, tfit, f2 * rdpow + eps_signed)
            if c1:
                clamped += 1
            if c2:
                clamped += 1
            acc += t1 * t2
        out[i] = acc / quad_n
    return out, clamped


def _f_diamond_numpy(
    x1a, x1b, x2a, x2b, quad_n, values, labels, lo0, lo1, s0, s1, res, tgrid, tfit, rdpow, eps_signed
):
    n = len(x1a)
    s = ((np.arange(quad_n) + 0.5) / quad_n)[None, :, None]
    p1 = ((1.0 - s) * x1a[:, None, :] + s * x1b[:, None, :]).reshape(-1, 2)
    p2 = ((1.0 - s) * x2a[:, None, :] + s * x2b[:, None, :]).reshape(-1, 2)
    rows, clamped = _pair_integrand_numpy(
        p1, p2, values, labels, lo0, lo1, s0, s1, res, tgrid, tfit, rdpow, eps_signed
    )
    return rows.reshape(n, quad_n).sum(axis=1) / quad_n, clamped


def f_diamond_batch(
    x1_prev, x1_next, x2_prev, x2_next, quad_n, values, labels, lower, side, res, tgrid, tfit, rdpow, eps_signed
):
    """Midpoint-rule segment integrals of the pair integrand for chain steps.

    Row i integrates along the straight paths x1_prev[i] -> x1_next[i] and
    x2_prev[i] -> x2_next[i] with quad_n midpoint nodes; values lie in [0, 1].
    """
    args = (
        np.ascontiguousarray(np.atleast_2d(x1_prev), dtype=np.float64),
        np.ascontiguousarray(np.atleast_2d(x1_next), dtype=np.float64),
        np.ascontiguousarray(np.atleast_2d(x2_prev), dtype=np.float64),
        np.ascontiguousarray(np.atleast_2d(x2_next), dtype=np.float64),
        int(quad_n),
        np.ascontiguousarray(values),
        np.ascontiguousarray(labels),
        float(lower[0]),
        float(lower[1]),
        float(side[0]),
        float(side[1]),
        int(res),
        np.ascontiguousarray(tgrid),
        np.ascontiguousarray(tfit),
        float(rdpow),
        float(eps_signed),
    )
    fn = _f_diamond_numba if USE_NUMBA else _f_diamond_numpy
    return fn(*args)

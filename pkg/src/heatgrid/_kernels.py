"""Hot raster kernels with numba-compiled and pure-numpy implementations.

The numba path is the default. Set HEATGRID_DISABLE_NUMBA=1 to select the
vectorized numpy fallback. Both paths produce identical boolean rasters;
the float kernels agree to machine precision (summation order differs).
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = os.environ.get("HEATGRID_DISABLE_NUMBA", "").strip().lower()
NUMBA_ENABLED = _ENV_FLAG not in {"1", "true", "yes", "on"}

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:
        NUMBA_ENABLED = False

# Tie-break slack for |offset|^2 against radius^2, in cell^2 units.  Open
# balls drop offsets at exactly the radius, closed ones keep them.
_TIE_EPS = 1e-9


def ball_offsets(radius_cells, dimension, closed=False):
    """Integer offsets within Euclidean distance radius_cells of the origin.

    closed=False keeps |delta| < radius (open ball), closed=True keeps
    |delta| <= radius.  radius_cells is in units of grid cells.
    """
    r = float(radius_cells)
    if r < 0:
        raise ValueError("radius_cells must be nonnegative")
    m = int(np.floor(r + 1.0))
    ax = np.arange(-m, m + 1, dtype=np.int64)
    if dimension == 1:
        pts = ax[:, None]
    elif dimension == 2:
        a, b = np.meshgrid(ax, ax, indexing="ij")
        pts = np.column_stack([a.ravel(), b.ravel()])
    else:
        raise ValueError("offsets supported for dimension 1 and 2 only")
    d2 = (pts.astype(np.float64) ** 2).sum(axis=1)
    if closed:
        keep = d2 <= r * r + _TIE_EPS
    else:
        keep = d2 < r * r - _TIE_EPS
    return np.ascontiguousarray(pts[keep])


# -- dilation ----------------------------------------------------------------

def _dilate_1d(occ, offsets, out):
    n = occ.shape[0]
    m = offsets.shape[0]
    for i in range(n):
        if occ[i]:
            for k in range(m):
                j = i + offsets[k, 0]
                if 0 <= j < n:
                    out[j] = True


def _dilate_2d(occ, offsets, out):
    n0, n1 = occ.shape
    m = offsets.shape[0]
    for i0 in range(n0):
        for i1 in range(n1):
            if occ[i0, i1]:
                for k in range(m):
                    j0 = i0 + offsets[k, 0]
                    j1 = i1 + offsets[k, 1]
                    if 0 <= j0 < n0 and 0 <= j1 < n1:
                        out[j0, j1] = True


def dilate_mask_numpy(occ, offsets):
    """Union of occ shifted by every offset (vectorized shift-or)."""
    out = np.zeros_like(occ)
    shape = occ.shape
    for off in offsets:
        src = []
        dst = []
        for o, n in zip(off, shape):
            o = int(o)
            src.append(slice(max(-o, 0), n + min(-o, 0)))
            dst.append(slice(max(o, 0), n + min(o, 0)))
        if any(s.start >= s.stop for s in dst):
            continue
        out[tuple(dst)] |= occ[tuple(src)]
    return out


# -- offset convolution ------------------------------------------------------

def _convolve_1d(values, offsets, weights, out):
    n = values.shape[0]
    m = offsets.shape[0]
    for i in range(n):
        acc = 0.0
        for k in range(m):
            j = i - offsets[k, 0]
            if 0 <= j < n:
                acc += weights[k] * values[j]
        out[i] = acc


def _convolve_2d(values, offsets, weights, out):
    n0, n1 = values.shape
    m = offsets.shape[0]
    for i0 in range(n0):
        for i1 in range(n1):
            acc = 0.0
            for k in range(m):
                j0 = i0 - offsets[k, 0]
                j1 = i1 - offsets[k, 1]
                if 0 <= j0 < n0 and 0 <= j1 < n1:
                    acc += weights[k] * values[j0, j1]
            out[i0, i1] = acc


def convolve_offsets_numpy(values, offsets, weights):
    """out[x] = sum_k w_k values[x - delta_k], zero padded outside the box."""
    out = np.zeros_like(values)
    shape = values.shape
    for off, w in zip(offsets, weights):
        src = []
        dst = []
        for o, n in zip(off, shape):
            o = int(o)
            src.append(slice(max(-o, 0), n + min(-o, 0)))
            dst.append(slice(max(o, 0), n + min(o, 0)))
        if any(s.start >= s.stop for s in dst):
            continue
        out[tuple(dst)] += w * values[tuple(src)]
    return out


# -- radial shooting (2d ball ground state) ----------------------------------

def _shoot_radial_j0(energy, step):
    # u'' + u'/rho + E u = 0 with u(0)=1, u'(0)=0; series start at rho=step
    # avoids the coordinate singularity.  Returns u(1).
    rho = step
    e2 = energy * energy
    u = 1.0 - energy * rho * rho / 4.0 + e2 * rho ** 4 / 64.0
    v = -energy * rho / 2.0 + e2 * rho ** 3 / 16.0
    n = int(round((1.0 - step) / step))
    hh = (1.0 - step) / n
    for _ in range(n):
        k1u = v
        k1v = -v / rho - energy * u
        r2 = rho + 0.5 * hh
        u2 = u + 0.5 * hh * k1u
        v2 = v + 0.5 * hh * k1v
        k2u = v2
        k2v = -v2 / r2 - energy * u2
        u3 = u + 0.5 * hh * k2u
        v3 = v + 0.5 * hh * k2v
        k3u = v3
        k3v = -v3 / r2 - energy * u3
        r4 = rho + hh
        u4 = u + hh * k3u
        v4 = v + hh * k3v
        k4u = v4
        k4v = -v4 / r4 - energy * u4
        u = u + hh * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
        v = v + hh * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
        rho = r4
    return u


shoot_radial_j0_python = _shoot_radial_j0

if NUMBA_ENABLED:
    dilate_mask_numba_1d = njit(cache=True)(_dilate_1d)
    dilate_mask_numba_2d = njit(cache=True)(_dilate_2d)
    convolve_offsets_numba_1d = njit(cache=True)(_convolve_1d)
    convolve_offsets_numba_2d = njit(cache=True)(_convolve_2d)
    shoot_radial_j0_numba = njit(cache=True)(_shoot_radial_j0)

    def dilate_mask_numba(occ, offsets):
        out = np.zeros_like(occ)
        if occ.ndim == 1:
            dilate_mask_numba_1d(occ, offsets, out)
        else:
            dilate_mask_numba_2d(occ, offsets, out)
        return out

    def convolve_offsets_numba(values, offsets, weights):
        out = np.zeros_like(values)
        if values.ndim == 1:
            convolve_offsets_numba_1d(values, offsets, weights, out)
        else:
            convolve_offsets_numba_2d(values, offsets, weights, out)
        return out


def dilate_mask(occ, offsets):
    """Dilate a boolean raster by a precomputed offset set."""
    occ = np.ascontiguousarray(occ, dtype=bool)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    if offsets.size == 0:
        return np.zeros_like(occ)
    if NUMBA_ENABLED:
        return dilate_mask_numba(occ, offsets)
    return dilate_mask_numpy(occ, offsets)


def convolve_offsets(values, offsets, weights):
    """Discrete convolution against an offset/weight table, zero padded."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if NUMBA_ENABLED:
        return convolve_offsets_numba(values, offsets, weights)
    return convolve_offsets_numpy(values, offsets, weights)


def shoot_radial_j0(energy, step=None):
    """Boundary value u(1) of the 2d radial ground-state shooting problem.

    The numba path integrates at step 1e-5; the fallback uses 2e-4, which
    already saturates double precision for this smooth solution.
    """
    if NUMBA_ENABLED:
        return shoot_radial_j0_numba(float(energy), 1e-5 if step is None else float(step))
    return shoot_radial_j0_python(float(energy), 2e-4 if step is None else float(step))

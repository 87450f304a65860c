"""Grid-scale geometric constructions: local ground-energy maps, sublevel
sets and their dilations, ball ground energies, the C^2 mollifier, cutoff
functions, and the localization identity residual.

Local eigenproblems are small and solved densely; results are cached by the
content of the clipped ball window, so translated interior windows and
straight-edge windows are solved once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.integrate import simpson

from . import _kernels
from .bounds import sphere_surface, unit_ball_volume
from .core import DiscreteOperator, DomainMask, PotentialField, assemble_operator, restrict_to_open_set
from .report import BoundReport, make_report
from .spectral import eigensolve_lowest, grid_norm

DEFAULT_H_SLACK_COEFF = 5.0
_SUPPORT_TOL = 1e-11


class GeometryError(ValueError):
    pass


class MollifierError(ValueError):
    pass


class SupportError(ValueError):
    pass


@lru_cache(maxsize=None)
def ball_ground_energy(d: int) -> float:
    """Ground energy of the Dirichlet Laplacian on the unit ball.

    d=1 and d=3 are (pi/2)^2 and pi^2; d=2 is found by radial shooting
    (fourth-order Runge-Kutta plus bisection on the boundary value).
    """
    if d == 1:
        return math.pi**2 / 4.0
    if d == 3:
        return math.pi**2
    if d != 2:
        raise GeometryError("ball ground energies cover d in {1, 2, 3}")
    lo, hi = 5.0, 6.5
    flo = _kernels.shoot_radial_j0(lo)
    fhi = _kernels.shoot_radial_j0(hi)
    if not (flo > 0 > fhi):
        raise GeometryError("shooting bracket failed")
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        if _kernels.shoot_radial_j0(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- mollifier ----------------------------------------------------------------

# base profile (d(d+2)/(2 sigma_{d-1})) (1 - |x|^2) on the unit ball
def _base_coeff(d):
    return d * (d + 2) / (2.0 * sphere_surface(d))


# C^2 bump (1 - u^2)^3, normalized on the unit ball per dimension
_BUMP_MASS = {1: 32.0 / 35.0, 2: math.pi / 4.0, 3: 64.0 * math.pi / 315.0}


@dataclass(frozen=True)
class Mollifier:
    """Radial C^2 mollifier with certified mass and derivative norms."""

    dimension: int
    scale: float
    radii: np.ndarray
    values: np.ndarray
    mass_error: float
    grad_l1: float
    lap_l1: float

    def __call__(self, rr):
        return np.interp(rr, self.radii, self.values, right=0.0)


def base_profile_grad_l1(d: int) -> float:
    """Exact l1 norm d(d+2)/(d+1) of the base profile gradient."""
    return d * (d + 2) / (d + 1.0)


def base_profile_lap_tv(d: int) -> float:
    """Exact total variation 2 d(d+2) of the base profile Laplacian."""
    return 2.0 * d * (d + 2.0)


def _scaled_base(u, d, lam):
    # lam^d rho0(lam u): support u <= 1/lam
    c = _base_coeff(d) * lam**d
    w = lam * np.asarray(u, dtype=float)
    return np.where(w <= 1.0, c * (1.0 - w * w), 0.0)


def _bump(u, d, a):
    c = 1.0 / (_BUMP_MASS[d] * a**d)
    w = np.abs(np.asarray(u, dtype=float)) / a
    return np.where(w <= 1.0, c * (1.0 - w * w) ** 3, 0.0)


def _profile_1d(u_grid, d, lam, a):
    nodes, wts = np.polynomial.legendre.leggauss(96)
    v = 0.5 * a * (nodes + 1.0)  # [0, a]
    w = 0.5 * a * wts
    bv = _bump(v, 1, a)
    # even bump: integrate f(u-v)+f(u+v) over v in [0, a]
    out = (
        (_scaled_base(np.abs(u_grid[:, None] - v[None, :]), 1, lam) +
         _scaled_base(u_grid[:, None] + v[None, :], 1, lam)) * (bv * w)[None, :]
    ).sum(axis=1)
    return out


def _profile_2d(u_grid, d, lam, a):
    nr, wr = np.polynomial.legendre.leggauss(48)
    rho = 0.5 * a * (nr + 1.0)
    wrho = 0.5 * a * wr
    nphi = 256
    phi = (np.arange(nphi) + 0.5) * (2.0 * math.pi / nphi)
    wphi = 2.0 * math.pi / nphi
    cosphi = np.cos(phi)
    brho = _bump(rho, 2, a) * rho * wrho
    out = np.empty_like(u_grid)
    chunk = 256
    for s in range(0, u_grid.size, chunk):
        u = u_grid[s : s + chunk]
        # |u e1 - v|: distances over (u, rho, phi)
        d2 = (
            u[:, None, None] ** 2
            + rho[None, :, None] ** 2
            - 2.0 * u[:, None, None] * rho[None, :, None] * cosphi[None, None, :]
        )
        vals = _scaled_base(np.sqrt(np.maximum(d2, 0.0)), 2, lam)
        out[s : s + chunk] = (vals * brho[None, :, None]).sum(axis=(1, 2)) * wphi
    return out


def _profile_3d(u_grid, d, lam, a):
    c = _base_coeff(3) * lam**3

    def F(w):
        # antiderivative of w f(w) for the scaled base profile, clipped
        w = np.minimum(w, 1.0 / lam)
        return c * (w * w / 2.0 - lam * lam * w**4 / 4.0)

    nodes, wts = np.polynomial.legendre.leggauss(96)
    sv = 0.5 * a * (nodes + 1.0)
    ws = 0.5 * a * wts
    bs = _bump(sv, 3, a) * sv * ws
    out = np.empty_like(u_grid)
    pos = u_grid > 1e-12
    u = u_grid[pos]
    inner = F(u[:, None] + sv[None, :]) - F(np.abs(u[:, None] - sv[None, :]))
    out[pos] = (2.0 * math.pi / u) * (inner * bs[None, :]).sum(axis=1)
    if (~pos).any():
        # center value: 4 pi int s^2 b(s) f(s) ds
        out[~pos] = 4.0 * math.pi * (
            sv * bs * _scaled_base(sv, 3, lam)
        ).sum()
    return out


def mollifier_build(d: int, s: float, resolution: int = 4001) -> Mollifier:
    """Mollified, rescaled base profile with support in the unit ball.

    The base profile is shrunk by 1/(1+s) and convolved with a C^2 bump of
    radius s/(1+s); the (1+s) factors keep the gradient and Laplacian
    norms strictly inside the budgets d+1 and 2(d+1)^2.
    """
    if d not in (1, 2, 3):
        raise MollifierError("dimension must be 1, 2 or 3")
    if not 0.0 < s <= 0.05:
        raise MollifierError("scale s must lie in (0, 0.05]")
    lam = 1.0 + s
    grad_budget = lam * base_profile_grad_l1(d)
    lap_budget = lam * lam * base_profile_lap_tv(d)
    if grad_budget > d + 1.0:
        raise MollifierError(
            f"scale {s} overruns the gradient budget: {grad_budget:.6g} > {d + 1}"
        )
    if lap_budget > 2.0 * (d + 1.0) ** 2:
        raise MollifierError(
            f"scale {s} overruns the Laplacian budget: {lap_budget:.6g} > {2 * (d + 1) ** 2}"
        )
    a = s / lam
    radii = np.linspace(0.0, 1.0, resolution)
    profile = {1: _profile_1d, 2: _profile_2d, 3: _profile_3d}[d](radii, d, lam, a)
    profile = np.maximum(profile, 0.0)
    sigma = sphere_surface(d)
    mass = sigma * simpson(profile * radii ** (d - 1), x=radii)
    mass_error = abs(mass - 1.0)
    if mass_error > 1e-6:
        raise MollifierError(f"mollifier quadrature mass off by {mass_error:.2e}")
    profile = profile / mass
    dr = radii[1] - radii[0]
    p1 = np.gradient(profile, dr, edge_order=2)
    p2 = np.gradient(p1, dr, edge_order=2)
    grad_l1 = sigma * simpson(np.abs(p1) * radii ** (d - 1), x=radii)
    radial = np.empty_like(p1)
    radial[1:] = (d - 1) * p1[1:] / radii[1:]
    radial[0] = (d - 1) * p2[0]
    lap_l1 = sigma * simpson(np.abs(p2 + radial) * radii ** (d - 1), x=radii)
    if grad_l1 > d + 1.0 or lap_l1 > 2.0 * (d + 1.0) ** 2:
        raise MollifierError(
            f"certified norms exceed the budget: grad {grad_l1:.6g}, lap {lap_l1:.6g}"
        )
    return Mollifier(
        dimension=d,
        scale=s,
        radii=radii,
        values=profile,
        mass_error=mass_error,
        grad_l1=float(grad_l1),
        lap_l1=float(lap_l1),
    )


# -- local energy map ----------------------------------------------------------

@dataclass(frozen=True)
class EnergyField:
    """Ground energies of ball restrictions, one value per grid node.

    +inf marks nodes whose ball does not meet the domain.
    """

    grid: object
    radius: float
    values: np.ndarray


def _window_ground_energy(local_occ, v_vals, h, d):
    n = int(local_occ.sum())
    diag = 2.0 * d / h**2 + v_vals
    if d == 1:
        nodes = np.nonzero(local_occ)[0]
        off = np.where(np.diff(nodes) == 1, -1.0 / h**2, 0.0)
        lam = sla.eigh_tridiagonal(
            diag, off, eigvals_only=True, select="i", select_range=(0, 0)
        )
        return float(lam[0])
    idx = -np.ones(local_occ.shape, dtype=np.int64)
    idx[local_occ] = np.arange(n)
    m = np.zeros((n, n))
    m[np.arange(n), np.arange(n)] = diag
    for axis in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        both = local_occ[tuple(lo)] & local_occ[tuple(hi)]
        i = idx[tuple(lo)][both]
        j = idx[tuple(hi)][both]
        m[i, j] = -1.0 / h**2
        m[j, i] = -1.0 / h**2
    lam = sla.eigh(m, eigvals_only=True, subset_by_index=[0, 0])
    return float(lam[0])


def local_energy_map(mask: DomainMask, potential: PotentialField, r: float) -> EnergyField:
    """Ground energy of the ball restriction H_{B(x, r)} at every grid node."""
    grid = mask.grid
    h = grid.spacing
    d = grid.dimension
    if r < 3.0 * h:
        raise GeometryError(f"radius {r} resolves fewer than three cells")
    if mask.grid != potential.grid:
        raise GeometryError("mask and potential live on different grids")
    offsets = _kernels.ball_offsets(r / h, d, closed=False)
    m = int(np.max(np.abs(offsets)))
    ball = np.zeros((2 * m + 1,) * d, dtype=bool)
    ball[tuple((offsets + m).T)] = True
    pad = [(m, m)] * d
    occ_p = np.pad(mask.occupancy, pad, constant_values=False)
    v_p = np.pad(potential.values, pad, constant_values=0.0)
    shape = grid.shape
    values = np.full(shape, np.inf)
    cache: dict = {}
    for node in np.ndindex(*shape):
        window = tuple(slice(i, i + 2 * m + 1) for i in node)
        local_occ = occ_p[window] & ball
        if not local_occ.any():
            continue
        v_vals = v_p[window][local_occ]
        key = (local_occ.tobytes(), v_vals.tobytes())
        val = cache.get(key)
        if val is None:
            val = _window_ground_energy(local_occ, v_vals, h, d)
            cache[key] = val
        values[node] = val
    values.flags.writeable = False
    return EnergyField(grid=grid, radius=r, values=values)


def sublevel_sets(field: EnergyField, t: float, s: float):
    """Sublevel set F, its open s-dilation, and the residual set G.

    G removes the closed r-dilation of F from the bounding box (the
    conservative closure at grid scale).
    """
    if t <= 0 or s <= 0:
        raise GeometryError("t and s must be positive")
    h = field.grid.spacing
    d = field.grid.dimension
    f_mask = field.values < t
    u_mask = _kernels.dilate_mask(f_mask, _kernels.ball_offsets(s / h, d, closed=False))
    g_mask = ~_kernels.dilate_mask(
        f_mask, _kernels.ball_offsets(field.radius / h, d, closed=True)
    )
    return f_mask, u_mask, g_mask


def lemma41_check(
    f_mask: np.ndarray,
    grid,
    r: float,
    s: float,
    n_t: int,
    slack_coeff: float = DEFAULT_H_SLACK_COEFF,
) -> BoundReport:
    """Volume of the dilated sublevel set against omega_d (2r+s)^d N_t."""
    h = grid.spacing
    d = grid.dimension
    u_mask = _kernels.dilate_mask(f_mask, _kernels.ball_offsets(s / h, d, closed=False))
    lhs = float(u_mask.sum()) * h**d
    rhs = unit_ball_volume(d) * (2.0 * r + s) ** d * n_t
    slack = 1.0 + slack_coeff * h / r
    return make_report(
        suite="lemma41",
        label="dilated low-energy set volume vs counting function",
        lhs=lhs,
        rhs=rhs,
        slack=slack,
        params={"r": r, "s": s, "n_t": n_t, "cells": int(u_mask.sum())},
        grid_meta={"h": h, "dimension": d},
    )


def lemma42_check(
    g_mask: np.ndarray,
    mask: DomainMask,
    potential: PotentialField,
    t: float,
    r: float,
    E0d: float | None = None,
    slack_coeff: float = DEFAULT_H_SLACK_COEFF,
) -> BoundReport:
    """Ground energy of the residual set against t - E0d / r^2."""
    grid = mask.grid
    h = grid.spacing
    d = grid.dimension
    if E0d is None:
        E0d = ball_ground_energy(d)
    slack = slack_coeff * (h / r) * t
    bound = t - E0d / r**2 - slack
    sub_occ = g_mask & mask.occupancy
    if not sub_occ.any():
        return make_report(
            suite="lemma42",
            label="residual-set ground energy lower bound (vacuous: empty set)",
            lhs=bound,
            rhs=math.inf,
            passed=True,
            params={"t": t, "r": r, "E0d": E0d, "vacuous": True},
            grid_meta={"h": h, "dimension": d},
        )
    sub = DomainMask(grid, sub_occ)
    op = assemble_operator(sub, potential)
    e0 = float(eigensolve_lowest(op, count=1).eigenvalues[0])
    return make_report(
        suite="lemma42",
        label="residual-set ground energy lower bound",
        lhs=bound,
        rhs=e0,
        params={"t": t, "r": r, "E0d": E0d, "vacuous": False, "ndof": op.ndof},
        grid_meta={"h": h, "dimension": d},
    )


# -- cutoff --------------------------------------------------------------------

@dataclass(frozen=True)
class Cutoff:
    """Mollified cutoff: 0 on the r-dilation of F, 1 beyond the 2r-dilation."""

    values: np.ndarray
    grad_sup: float
    lap_sup: float
    grad_bound: float
    lap_bound: float
    support_ok: bool
    plateau_ok: bool


def cutoff_build(
    f_mask: np.ndarray,
    grid,
    r: float,
    mollifier: Mollifier,
    slack_coeff: float = DEFAULT_H_SLACK_COEFF,
) -> Cutoff:
    """1 minus the (r/2)-scaled mollifier convolved with the (3r/2)-dilation."""
    h = grid.spacing
    d = grid.dimension
    if mollifier.dimension != d:
        raise GeometryError("mollifier dimension mismatch")
    if r < 10.0 * h:
        raise GeometryError(f"radius {r} does not resolve the half-scale kernel")
    rr = 0.5 * r
    indicator = _kernels.dilate_mask(
        f_mask, _kernels.ball_offsets(1.5 * r / h, d, closed=False)
    ).astype(float)
    offsets = _kernels.ball_offsets(rr / h, d, closed=False)
    dist = np.sqrt((offsets.astype(float) ** 2).sum(axis=1)) * h
    weights = mollifier(dist / rr) / rr**d * h**d
    weights = weights / weights.sum()
    xi = 1.0 - _kernels.convolve_offsets(indicator, offsets, weights)

    inner = _kernels.dilate_mask(f_mask, _kernels.ball_offsets(r / h, d, closed=True))
    outer = _kernels.dilate_mask(
        f_mask, _kernels.ball_offsets(2.0 * r / h, d, closed=True)
    )
    support_ok = bool(np.abs(xi[inner]).max(initial=0.0) <= _SUPPORT_TOL)
    plateau_ok = bool(np.abs(1.0 - xi[~outer]).max(initial=0.0) <= _SUPPORT_TOL)

    grad2 = np.zeros_like(xi)
    lap = np.zeros_like(xi)
    interior = [slice(1, -1)] * d
    for axis in range(d):
        up = [slice(1, -1)] * d
        dn = [slice(1, -1)] * d
        up[axis] = slice(2, None)
        dn[axis] = slice(0, -2)
        diff = (xi[tuple(up)] - xi[tuple(dn)]) / (2.0 * h)
        grad2[tuple(interior)] += diff**2
        lap[tuple(interior)] += (
            xi[tuple(up)] - 2.0 * xi[tuple(interior)] + xi[tuple(dn)]
        ) / h**2
    hs = 1.0 + slack_coeff * h / r
    return Cutoff(
        values=xi,
        grad_sup=float(np.sqrt(grad2.max())),
        lap_sup=float(np.abs(lap).max()),
        grad_bound=mollifier.grad_l1 / r * hs,
        lap_bound=2.0 * mollifier.lap_l1 / r**2 * hs,
        support_ok=support_ok,
        plateau_ok=plateau_ok,
    )


# -- localization identity ------------------------------------------------------

def _scatter(op: DiscreteOperator, vec: np.ndarray) -> np.ndarray:
    arr = np.zeros(op.grid.shape)
    arr[tuple(op.dof_nodes.T)] = vec
    return arr


def _forward_diff(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(arr)
    lo = [slice(None)] * arr.ndim
    hi = [slice(None)] * arr.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    out[tuple(lo)] = (arr[tuple(hi)] - arr[tuple(lo)]) / h
    return out


def _laplacian(arr: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(arr)
    d = arr.ndim
    interior = [slice(1, -1)] * d
    for axis in range(d):
        up = [slice(1, -1)] * d
        dn = [slice(1, -1)] * d
        up[axis] = slice(2, None)
        dn[axis] = slice(0, -2)
        out[tuple(interior)] += (
            arr[tuple(up)] - 2.0 * arr[tuple(interior)] + arr[tuple(dn)]
        ) / h**2
    return out


def localization_residual(
    op: DiscreteOperator,
    lam: float,
    phi: np.ndarray,
    u_occ: np.ndarray,
    xi: np.ndarray,
    c_loc: float,
    suite: str = "lemma24",
) -> BoundReport:
    """Residual of (H_U - lam)(xi phi) against -2 grad xi . grad phi - (lap xi) phi.

    The cross term uses one-sided differences, which makes the commutator
    residual first order in h; the pass bound is c_loc * h * (1 + lam).
    """
    grid = op.grid
    h = grid.spacing
    d = grid.dimension
    if np.abs(xi[~u_occ]).max(initial=0.0) > _SUPPORT_TOL:
        raise SupportError("cutoff does not vanish outside the open set")
    sub_occ = u_occ & op.mask.occupancy
    if not sub_occ.any():
        raise GeometryError("open set misses the domain")
    sub = DomainMask(grid, sub_occ)
    sub_op = restrict_to_open_set(op, sub)
    phi_grid = _scatter(op, phi)
    prod = xi * phi_grid
    prod_sub = prod[tuple(sub_op.dof_nodes.T)]
    lhs_vec = sub_op.matrix @ prod_sub - lam * prod_sub

    rhs_grid = -_laplacian(xi, h) * phi_grid
    for axis in range(d):
        rhs_grid -= 2.0 * _forward_diff(xi, axis, h) * _forward_diff(phi_grid, axis, h)
    rhs_vec = rhs_grid[tuple(sub_op.dof_nodes.T)]

    resid = grid_norm(lhs_vec - rhs_vec, h, d, 2)
    phin = grid_norm(phi, h, d, 2)
    return make_report(
        suite=suite,
        label="localized eigenfunction commutator identity residual",
        lhs=resid,
        rhs=c_loc * h * (1.0 + lam) * phin,
        params={"lam": lam, "c_loc": c_loc},
        grid_meta={"h": h, "dimension": d, "ndof": sub_op.ndof},
    )

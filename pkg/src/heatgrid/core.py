"""Grids, domain masks, potentials, and discrete Schrodinger operators.

A grid carries nodes ``lo + i*h`` per axis.  A mask marks nodes as interior
degrees of freedom; exterior nodes are deleted, which imposes the Dirichlet
condition while keeping the matrix exactly symmetric and preserving domain
and potential monotonicity at the matrix level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class GridError(ValueError):
    pass


class MaskError(ValueError):
    pass


# Relative slack when checking that spacings divide box edges evenly.
_DIV_EPS = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectilinear grid: per-axis (lo, hi) box and one spacing h."""

    dimension: int
    box: tuple[tuple[float, float], ...]
    spacing: float

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "spacing", float(self.spacing))
        if len(box) != self.dimension:
            raise GridError("box must have one (lo, hi) pair per axis")
        if self.spacing <= 0:
            raise GridError("spacing must be positive")
        for lo, hi in box:
            if hi <= lo:
                raise GridError(f"degenerate axis ({lo}, {hi})")
            steps = (hi - lo) / self.spacing
            if abs(steps - round(steps)) > _DIV_EPS * max(1.0, steps):
                raise GridError(
                    f"spacing {self.spacing} does not divide axis ({lo}, {hi}) evenly"
                )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(
            int(round((hi - lo) / self.spacing)) + 1 for lo, hi in self.box
        )

    def axis_nodes(self, axis: int) -> np.ndarray:
        lo, _ = self.box[axis]
        n = self.shape[axis]
        return lo + self.spacing * np.arange(n)

    def node_coordinates(self) -> list[np.ndarray]:
        """Meshgrid coordinate arrays (ij indexing), one per axis."""
        axes = [self.axis_nodes(a) for a in range(self.dimension)]
        if self.dimension == 1:
            return axes
        return list(np.meshgrid(*axes, indexing="ij"))

    def node_index(self, point) -> tuple[int, ...]:
        """Multi-index of the grid node at the given coordinates."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.dimension,):
            raise GridError(f"point must have {self.dimension} coordinates")
        idx = []
        for a, x in enumerate(point):
            lo, hi = self.box[a]
            k = (x - lo) / self.spacing
            kr = int(round(k))
            if abs(k - kr) > 1e-6 or not (0 <= kr < self.shape[a]):
                raise GridError(f"{x} is not a grid node on axis {a}")
            idx.append(kr)
        return tuple(idx)


def _require_grid(dimension):
    if dimension == 3:
        raise GridError(
            "3d grids are not supported; dimension 3 enters only through "
            "radial ball ground energies"
        )


@dataclass(frozen=True)
class DomainMask:
    """Boolean occupancy over the grid nodes defining the open domain."""

    grid: GridSpec
    occupancy: np.ndarray

    def __post_init__(self):
        _require_grid(self.grid.dimension)
        occ = np.ascontiguousarray(self.occupancy, dtype=bool)
        occ.flags.writeable = False
        object.__setattr__(self, "occupancy", occ)
        if occ.shape != self.grid.shape:
            raise MaskError(f"occupancy shape {occ.shape} != grid {self.grid.shape}")
        if not occ.any():
            raise MaskError("mask is empty")
        for axis in range(occ.ndim):
            first = occ.take(0, axis=axis)
            last = occ.take(-1, axis=axis)
            if first.any() or last.any():
                raise MaskError("occupied node on the bounding-box boundary")

    @property
    def count(self) -> int:
        return int(self.occupancy.sum())

    @property
    def volume(self) -> float:
        return self.count * self.grid.spacing ** self.grid.dimension

    def contains(self, other: "DomainMask") -> bool:
        return self.grid == other.grid and bool(
            (other.occupancy <= self.occupancy).all()
        )


@dataclass(frozen=True)
class PotentialField:
    """Nonnegative absorption potential sampled at the grid nodes."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if vals.shape != self.grid.shape:
            raise MaskError(f"potential shape {vals.shape} != grid {self.grid.shape}")
        if np.isnan(vals).any() or (vals < 0).any():
            raise MaskError("potential must be nonnegative")

    @classmethod
    def zero(cls, grid: GridSpec) -> "PotentialField":
        return cls(grid, np.zeros(grid.shape))


def _membership(grid, shape, closed):
    coords = grid.node_coordinates()
    kind = shape.get("kind")
    if kind == "box":
        bounds = shape["bounds"]
        if len(bounds) != grid.dimension:
            raise MaskError("box shape needs one (lo, hi) pair per axis")
        inside = np.ones(grid.shape, dtype=bool)
        for (lo, hi), c in zip(bounds, coords):
            if closed:
                inside &= (c >= lo) & (c <= hi)
            else:
                inside &= (c > lo) & (c < hi)
        return inside
    if kind == "ball":
        center = np.asarray(shape["center"], dtype=float)
        radius = float(shape["radius"])
        if center.shape != (grid.dimension,):
            raise MaskError("ball center must match the grid dimension")
        d2 = sum((c - x0) ** 2 for c, x0 in zip(coords, center))
        return d2 <= radius**2 if closed else d2 < radius**2
    raise MaskError(f"unknown shape kind {kind!r}")


def build_mask(dimension, box, spacing, shapes) -> DomainMask:
    """Rasterize a constructive-geometry shape list into a domain mask.

    Each shape is a dict with ``op`` ("add" or "subtract") and ``kind``
    ("box" with per-axis ``bounds`` or "ball" with ``center``/``radius``).
    A node is occupied by "add" when it lies strictly inside the shape;
    "subtract" removes the closed shape.
    """
    _require_grid(dimension)
    grid = GridSpec(dimension, tuple(tuple(b) for b in box), spacing)
    occ = np.zeros(grid.shape, dtype=bool)
    if not shapes:
        raise MaskError("shape list is empty")
    for shape in shapes:
        op = shape.get("op", "add")
        if op == "add":
            occ |= _membership(grid, shape, closed=False)
        elif op == "subtract":
            occ &= ~_membership(grid, shape, closed=True)
        else:
            raise MaskError(f"unknown shape op {op!r}")
    if not occ.any():
        raise MaskError("shape list rasterizes to an empty mask")
    for axis in range(occ.ndim):
        if occ.take(0, axis=axis).any() or occ.take(-1, axis=axis).any():
            raise MaskError("shapes exceed the one-node boundary margin")
    return DomainMask(grid, occ)


def full_box_mask(grid: GridSpec) -> DomainMask:
    """Mask occupying every interior node of the bounding box."""
    occ = np.ones(grid.shape, dtype=bool)
    for axis in range(occ.ndim):
        idx = [slice(None)] * occ.ndim
        for edge in (0, -1):
            idx[axis] = edge
            occ[tuple(idx)] = False
    return DomainMask(grid, occ)


@dataclass(frozen=True)
class DiscreteOperator:
    """Symmetric finite-difference operator -Delta_h + V on the mask DOFs."""

    grid: GridSpec
    mask: DomainMask
    matrix: sp.csr_matrix
    dof_nodes: np.ndarray      # (ndof, d) integer node multi-indices
    node_to_dof: np.ndarray    # flat node index -> DOF index or -1
    potential_grid: np.ndarray
    potential_dof: np.ndarray

    @property
    def ndof(self) -> int:
        return self.matrix.shape[0]

    @property
    def dimension(self) -> int:
        return self.grid.dimension

    @property
    def spacing(self) -> float:
        return self.grid.spacing

    def dof_coordinates(self) -> np.ndarray:
        lows = np.array([lo for lo, _ in self.grid.box])
        return lows + self.grid.spacing * self.dof_nodes

    def dof_of_point(self, point) -> int:
        idx = self.grid.node_index(point)
        flat = int(np.ravel_multi_index(idx, self.grid.shape))
        dof = int(self.node_to_dof[flat])
        if dof < 0:
            raise MaskError(f"point {point} is not an occupied node")
        return dof


def assemble_operator(mask: DomainMask, potential: PotentialField) -> DiscreteOperator:
    """Assemble -Delta_h + V with Dirichlet-by-deletion on the mask."""
    if mask.grid != potential.grid:
        raise MaskError("mask and potential live on different grids")
    occ = mask.occupancy
    vals = potential.values
    if not np.isfinite(vals[occ]).all():
        raise MaskError("potential must be finite at every occupied node")
    grid = mask.grid
    d = grid.dimension
    h = grid.spacing
    flat_occ = occ.ravel()
    ndof = int(flat_occ.sum())
    node_to_dof = -np.ones(flat_occ.size, dtype=np.int64)
    node_to_dof[flat_occ] = np.arange(ndof)
    dof_nodes = np.argwhere(occ).astype(np.int64)

    diag = 2.0 * d / h**2 + vals.ravel()[flat_occ]
    rows = [np.arange(ndof)]
    cols = [np.arange(ndof)]
    data = [diag]
    dense_index = node_to_dof.reshape(grid.shape)
    for axis in range(d):
        lo_sl = [slice(None)] * d
        hi_sl = [slice(None)] * d
        lo_sl[axis] = slice(0, -1)
        hi_sl[axis] = slice(1, None)
        both = occ[tuple(lo_sl)] & occ[tuple(hi_sl)]
        i = dense_index[tuple(lo_sl)][both]
        j = dense_index[tuple(hi_sl)][both]
        off = np.full(i.shape, -1.0 / h**2)
        rows += [i, j]
        cols += [j, i]
        data += [off, off]
    matrix = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ndof, ndof),
    )
    matrix.sum_duplicates()
    return DiscreteOperator(
        grid=grid,
        mask=mask,
        matrix=matrix,
        dof_nodes=dof_nodes,
        node_to_dof=node_to_dof,
        potential_grid=vals,
        potential_dof=vals.ravel()[flat_occ],
    )


def restrict_to_open_set(op: DiscreteOperator, submask: DomainMask) -> DiscreteOperator:
    """Dirichlet restriction of op to a subdomain (rows/columns deleted)."""
    if submask.grid != op.grid:
        raise MaskError("submask lives on a different grid")
    if not op.mask.contains(submask):
        raise MaskError("submask is not contained in the operator mask")
    return assemble_operator(submask, PotentialField(op.grid, op.potential_grid))

"""Eigenpairs, ground energies, counting function, and grid norms.

Dense solves (LAPACK) are used up to DENSE_CUTOFF degrees of freedom and
return the full spectrum.  Larger operators use shift-invert Lanczos with a
deterministic start vector; a slice is certified complete below its cutoff
once the top Ritz value clears the requested threshold by a 10% buffer and
every residual passes the certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .core import DiscreteOperator

DENSE_CUTOFF = 3000
THRESHOLD_BUFFER = 1.1
RESIDUAL_TOL = 1e-8
CLUSTER_TOL = 1e-8


class SolverError(RuntimeError):
    pass


def _start_vector(n: int) -> np.ndarray:
    # all-ones plus a fixed perturbation: deterministic Lanczos runs
    rng = np.random.default_rng(2718281828)
    return np.ones(n) + 1e-3 * rng.standard_normal(n)


@dataclass(frozen=True)
class SpectrumSlice:
    """Ordered eigenpairs of an operator below a certified cutoff.

    ``vectors[:, k]`` is the k-th eigenvector normalized in the h^d-weighted
    l2 norm.  ``complete_below`` asserts every eigenvalue <= cutoff is present
    with multiplicity.
    """

    operator: DiscreteOperator
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    cutoff: float
    complete_below: bool

    def __len__(self) -> int:
        return self.eigenvalues.size

    @property
    def full(self) -> bool:
        return len(self) == self.operator.ndof

    def weighted_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        h = self.operator.spacing
        d = self.operator.dimension
        return float(np.dot(u, v)) * h**d


def _weyl_count_guess(op: DiscreteOperator, threshold: float) -> int:
    d = op.dimension
    vol = op.mask.volume
    omega = {1: 2.0, 2: np.pi}[d]
    n = omega * vol * max(threshold, 0.0) ** (d / 2) / (2 * np.pi) ** d
    return int(np.ceil(n)) + 8


def _certify(op, lam, vecs, residual_tol):
    a = op.matrix
    r = a @ vecs - vecs * lam[None, :]
    resid = np.sqrt((r * r).sum(axis=0))
    bound = residual_tol * np.maximum(1.0, np.abs(lam))
    if (resid > bound).any():
        k = int(np.argmax(resid / bound))
        raise SolverError(
            f"eigen residual {resid[k]:.3e} exceeds certificate "
            f"{bound[k]:.3e} at eigenvalue {lam[k]:.6g}"
        )
    return resid


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # deterministic orientation: largest-magnitude entry made positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs[None, :]


def _slice_from_raw(op, lam, vecs, cutoff, complete, residual_tol):
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    vecs = vecs[:, order]
    resid = _certify(op, lam, vecs, residual_tol)
    vecs = _fix_signs(vecs)
    # h^{d/2} weighting so grid_norm(vec, p=2) == 1
    w = op.spacing ** (op.dimension / 2.0)
    return SpectrumSlice(
        operator=op,
        eigenvalues=lam,
        vectors=vecs / w,
        residuals=resid,
        cutoff=float(cutoff),
        complete_below=complete,
    )


def _dense_full(op, residual_tol):
    a = op.matrix
    n = a.shape[0]
    if op.dimension == 1:
        main = a.diagonal().copy()
        off = a.diagonal(1).copy() if n > 1 else np.zeros(0)
        lam, vecs = sla.eigh_tridiagonal(main, off)
    else:
        lam, vecs = sla.eigh(a.toarray())
    return _slice_from_raw(op, lam, vecs, np.inf, True, residual_tol)


def _cluster_starts(lam: np.ndarray) -> np.ndarray:
    """Indices where a new eigenvalue cluster begins."""
    if lam.size == 0:
        return np.zeros(0, dtype=int)
    gaps = np.diff(lam) > CLUSTER_TOL * np.maximum(1.0, np.abs(lam[1:]))
    return np.concatenate([[0], np.nonzero(gaps)[0] + 1])


def _sparse_slice(op, threshold, min_count, residual_tol):
    a = op.matrix.tocsc()
    n = a.shape[0]
    v0 = _start_vector(n)
    target = threshold * THRESHOLD_BUFFER if threshold is not None else None
    k = max(16, min_count + 8)
    if threshold is not None:
        k = max(k, _weyl_count_guess(op, threshold * THRESHOLD_BUFFER))
    while True:
        k = min(k, n - 1)
        lam, vecs = spla.eigsh(a, k=k, sigma=0.0, which="LM", v0=v0)
        order = np.argsort(lam, kind="stable")
        lam = lam[order]
        vecs = vecs[:, order]
        # the trailing cluster may be truncated mid-multiplicity: drop it
        starts = _cluster_starts(lam)
        keep = starts[-1] if starts.size else 0
        if keep == 0 and k < n - 1:
            k = int(np.ceil(k * 1.6))
            continue
        top_kept = lam[keep - 1] if keep else -np.inf
        cutoff = lam[keep] * (1.0 - 1e-12) if keep < lam.size else lam[-1]
        enough_depth = target is None or top_kept > target or k >= n - 1
        enough_count = keep >= min_count
        if enough_depth and enough_count:
            lam = lam[:keep]
            vecs = vecs[:, :keep]
            break
        if k >= n - 1:
            raise SolverError(
                "Lanczos slice reached the full dimension without certifying "
                f"threshold {threshold}"
            )
        k = int(np.ceil(k * 1.6))
    return _slice_from_raw(op, lam, vecs, cutoff, True, residual_tol)


def eigensolve_lowest(
    op: DiscreteOperator,
    count: int | None = None,
    threshold: float | None = None,
    dense_cutoff: int = DENSE_CUTOFF,
    residual_tol: float = RESIDUAL_TOL,
) -> SpectrumSlice:
    """All eigenpairs below a cutoff, in count or threshold mode.

    count mode returns at least ``count`` pairs; threshold mode certifies
    completeness below ``threshold``.  Dense operators always return the
    full spectrum.
    """
    if (count is None) == (threshold is None):
        raise ValueError("specify exactly one of count / threshold")
    n = op.ndof
    if count is not None:
        if not (1 <= count <= n):
            raise ValueError(f"count must lie in [1, {n}]")
    if threshold is not None and not np.isfinite(threshold):
        raise ValueError("threshold must be finite")
    if n <= dense_cutoff:
        return _dense_full(op, residual_tol)
    return _sparse_slice(op, threshold, count or 1, residual_tol)


def counting_function(spectrum: SpectrumSlice, t: float) -> int:
    """Number of eigenvalues <= t, counted with multiplicity.

    Eigenvalues within the cluster tolerance are counted as one multiplet:
    a cluster is included when its smallest member is <= t.
    """
    if not spectrum.complete_below:
        raise SolverError("spectrum slice carries no completeness certificate")
    if t > spectrum.cutoff:
        raise SolverError(f"t={t} exceeds the certified cutoff {spectrum.cutoff}")
    lam = spectrum.eigenvalues
    starts = _cluster_starts(lam)
    total = 0
    for i, s in enumerate(starts):
        e = starts[i + 1] if i + 1 < starts.size else lam.size
        if lam[s] <= t:
            total += e - s
    return total


def grid_norm(phi: np.ndarray, spacing: float, dimension: int, p: float = 2) -> float:
    """(sum |phi_i|^p h^d)^(1/p) over the DOF set."""
    if p < 1:
        raise ValueError("p must be >= 1")
    phi = np.asarray(phi, dtype=float)
    return float((np.abs(phi) ** p).sum() * spacing**dimension) ** (1.0 / p)


def rayleigh_quotient(op: DiscreteOperator, v: np.ndarray) -> float:
    v = np.asarray(v, dtype=float)
    denom = float(np.dot(v, v))
    if denom == 0.0:
        raise ValueError("Rayleigh quotient of the zero vector")
    return float(v @ (op.matrix @ v)) / denom


def ground_energy(op: DiscreteOperator) -> float:
    """Bottom of the spectrum with a certified residual."""
    return float(eigensolve_lowest(op, count=1).eigenvalues[0])

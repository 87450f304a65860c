"""Free-space heat and resolvent kernels and off-diagonal resolvent bounds.

Closed forms are used where they exist (d = 1, 3); the d = 2 resolvent
kernel is a certified Laplace-transform quadrature.  The off-diagonal
l1 -> l1 estimates are evaluated exactly for half-spaces and 1d intervals
and cross-checked by geometric radial quadrature in d = 2, 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate


class QuadratureError(RuntimeError):
    pass


def free_heat_kernel(d: int, t: float, r: float) -> float:
    """Gaussian kernel (4 pi t)^{-d/2} exp(-r^2 / 4t)."""
    if t <= 0:
        raise ValueError("t must be positive")
    if r < 0:
        raise ValueError("r must be nonnegative")
    return (4.0 * math.pi * t) ** (-d / 2.0) * math.exp(-r * r / (4.0 * t))


def free_resolvent_kernel(d: int, mu: float, r: float, tol: float = 1e-9) -> float:
    """Kernel of (mu - Laplace)^{-1} at separation r.

    d=1 and d=3 are closed forms; d=2 integrates e^{-mu t} k_t(r) over t > 0
    with certified absolute error <= tol.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    s = math.sqrt(mu)
    if d == 1:
        if r < 0:
            raise ValueError("r must be nonnegative")
        return math.exp(-s * r) / (2.0 * s)
    if r <= 0:
        raise ValueError(f"r must be positive for d={d} (kernel diverges at 0)")
    if d == 3:
        return math.exp(-s * r) / (4.0 * math.pi * r)
    if d != 2:
        raise ValueError("d must be 1, 2 or 3")

    # substitute t = e^u; integrand exp(-mu e^u - r^2 e^{-u}/4) / (4 pi)
    def f(u):
        return math.exp(-mu * math.exp(u) - r * r * math.exp(-u) / 4.0)

    u_star = math.log(r / (2.0 * s))
    val, err = integrate.quad(f, u_star - 60.0, u_star + 60.0, epsabs=tol * 1e-2, epsrel=1e-12, limit=400)
    val /= 4.0 * math.pi
    err /= 4.0 * math.pi
    if err > tol:
        raise QuadratureError(f"d=2 resolvent quadrature error {err:.2e} > {tol:.2e}")
    return val


@dataclass(frozen=True)
class OffDiagonalSetup:
    """Separated set pair for the off-diagonal resolvent estimate.

    family "half_spaces": complementary half-spaces at distance r (any d).
    family "intervals": d=1 intervals, A of length a_length, at distance r.
    """

    dimension: int
    family: str
    mu: float
    r: float
    a_length: float | None = None

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.r < 0:
            raise ValueError("r must be nonnegative")
        if self.family not in ("half_spaces", "intervals"):
            raise ValueError(f"unsupported set family {self.family!r}")
        if self.family == "intervals":
            if self.dimension != 1:
                raise ValueError("interval family is 1d only")
            if self.a_length is None or self.a_length <= 0:
                raise ValueError("interval family needs a positive a_length")


def offdiag_resolvent_exact(setup: OffDiagonalSetup) -> float:
    """sup over x in B of the integral of the resolvent kernel over A."""
    s = math.sqrt(setup.mu)
    if setup.family == "half_spaces":
        # transverse directions marginalize to the 1d kernel, any d
        return math.exp(-s * setup.r) / (2.0 * setup.mu)
    a = setup.a_length
    return (math.exp(-s * setup.r) - math.exp(-s * (setup.r + a))) / (2.0 * setup.mu)


def offdiag_resolvent_quadrature(d: int, mu: float, r: float, tol: float = 1e-8) -> float:
    """Half-space value by radial quadrature around the supremum point.

    Integrates the radial kernel against the arc length (d=2) or spherical
    cap area (d=3) cut out by the far half-space, certifying the total
    quadrature error <= tol.  Independent of the closed-form route.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    s = math.sqrt(mu)
    horizon = r + 80.0 / s
    err_total = 0.0
    if d == 2:
        def f(rho):
            g = free_resolvent_kernel(2, mu, rho, tol=tol * 1e-4)
            return g * 2.0 * math.acos(min(1.0, r / rho)) * rho
    elif d == 3:
        def f(rho):
            g = free_resolvent_kernel(3, mu, rho)
            return g * 2.0 * math.pi * rho * (rho - r)
    else:
        raise ValueError("quadrature route covers d = 2 and 3")
    val, err = integrate.quad(f, r, horizon, epsabs=tol * 1e-2, epsrel=1e-12, limit=400)
    err_total += err
    # truncated tail: kernel <= e^{-s rho} / (2 s) marginal bound
    tail = math.exp(-s * horizon) / mu
    err_total += tail
    if err_total > tol:
        raise QuadratureError(f"off-diagonal quadrature error {err_total:.2e} > {tol:.2e}")
    return val


def prop35_bound(d: int, mu: float, theta: float, r: float) -> float:
    """(1 - theta^2)^{-d/2} (1/mu) exp(-theta sqrt(mu) r)."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if mu <= 0:
        raise ValueError("mu must be positive")
    if r < 0:
        raise ValueError("r must be nonnegative")
    return (1.0 - theta * theta) ** (-d / 2.0) / mu * math.exp(-theta * math.sqrt(mu) * r)


def remark36_bound(d: int, mu: float, r: float) -> float:
    """(2e/d + r sqrt(mu))^{d/2} (1/mu) exp(-r sqrt(mu)) for mu > (d/2r)^2.

    Realizes prop35 with theta = 1 - d/(2 r sqrt(mu)); the printed form is an
    upper estimate of that choice, not an identity.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if mu <= (d / (2.0 * r)) ** 2:
        raise ValueError("requires mu > (d / 2r)^2")
    a = r * math.sqrt(mu)
    return (2.0 * math.e / d + a) ** (d / 2.0) / mu * math.exp(-a)


def remark36_theta(d: int, mu: float, r: float) -> float:
    """The theta realized by the remark: 1 - d/(2 r sqrt(mu))."""
    if r <= 0 or mu <= (d / (2.0 * r)) ** 2:
        raise ValueError("requires r > 0 and mu > (d / 2r)^2")
    return 1.0 - d / (2.0 * r * math.sqrt(mu))


def prop35_optimal_theta(d: int, mu: float, r: float) -> float:
    """Near-optimal theta (1 - d/(r sqrt(mu)))^{1/2}, valid for mu > (d/r)^2."""
    if r <= 0 or mu <= (d / r) ** 2:
        raise ValueError("requires r > 0 and mu > (d / r)^2")
    return math.sqrt(1.0 - d / (r * math.sqrt(mu)))

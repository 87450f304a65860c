"""Explicit constants and right-hand sides of the verified inequalities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


def unit_ball_volume(d: int) -> float:
    """Volume of the d-dimensional Euclidean unit ball."""
    if d < 1:
        raise ValueError("d must be a positive integer")
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def sphere_surface(d: int) -> float:
    """Surface measure of the unit sphere boundary in R^d."""
    return d * unit_ball_volume(d)


def constant_c_d(d: int) -> float:
    """Dimensional constant 35^{d+1} d^{d/2} of the eigenfunction l1 bound."""
    if d < 1:
        raise ValueError("d must be a positive integer")
    return 35.0 ** (d + 1) * d ** (d / 2.0)


def constant_C_eps(eps: float) -> float:
    """eps^{-1/2} ln(3 + 3/eps)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return eps ** (-0.5) * math.log(3.0 + 3.0 / eps)


def thm11_rhs(d: int, lam: float, t: float, n_t: float) -> float:
    """c_d (t - lam)^{-d/2} ln(3t/(t - lam))^d N_t, the l1^2 upper envelope."""
    if not 0 < lam < t:
        raise ValueError("need 0 < lam < t")
    if n_t < 1:
        raise ValueError("counting value must be >= 1")
    gap = t - lam
    return constant_c_d(d) * gap ** (-d / 2.0) * math.log(3.0 * t / gap) ** d * n_t


def thm11_lower(d: int, lam: float) -> float:
    """(2 pi d / e)^{d/2} lam^{-d/2}, the l1^2 lower envelope."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    return (2.0 * math.pi * d / math.e) ** (d / 2.0) * lam ** (-d / 2.0)


def cor13_rhs(d: int, lam: float, eps: float, n_val: float) -> float:
    """c_d C_eps^d lam^{-d/2} N_{(1+eps) lam}."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if n_val < 1:
        raise ValueError("counting value must be >= 1")
    return constant_c_d(d) * constant_C_eps(eps) ** d * lam ** (-d / 2.0) * n_val


def hke_rhs(d: int, e0: float, t: float, r: float) -> float:
    """(e E0 / 2 pi d)^{d/2} exp(-E0 t - r^2/4t), valid for t >= d/(2 E0)."""
    if e0 <= 0 or t <= 0:
        raise ValueError("need E0 > 0 and t > 0")
    if t < d / (2.0 * e0):
        raise ValueError(f"t={t} is below the validity threshold d/(2 E0)")
    return (math.e * e0 / (2.0 * math.pi * d)) ** (d / 2.0) * math.exp(
        -e0 * t - r * r / (4.0 * t)
    )


def combined_hke_rhs(d: int, e0: float, t: float, r: float) -> float:
    """(4 pi t)^{-d/2} (1 + (2e/d) E0 t)^{d/2} exp(-E0 t - r^2/4t), all t > 0."""
    if e0 <= 0 or t <= 0:
        raise ValueError("need E0 > 0 and t > 0")
    return (
        (4.0 * math.pi * t) ** (-d / 2.0)
        * (1.0 + (2.0 * math.e / d) * e0 * t) ** (d / 2.0)
        * math.exp(-e0 * t - r * r / (4.0 * t))
    )


def thm17_rhs(d: int, eps: float, lam1: float, z_value: float) -> float:
    """c_d C_eps^d lam1^{-d/2} Z^2, the heat-content vs heat-trace envelope."""
    if lam1 <= 0:
        raise ValueError("lam1 must be positive")
    if z_value < 0:
        raise ValueError("trace value must be nonnegative")
    return constant_c_d(d) * constant_C_eps(eps) ** d * lam1 ** (-d / 2.0) * z_value**2


def lemma18_rhs(z_at_T: float, T: float, lam: float) -> float:
    """Z(T) e^{T lam}, the counting-function majorant."""
    if T <= 0 or lam <= 0:
        raise ValueError("need T > 0 and lam > 0")
    return z_at_T * math.exp(T * lam)


def liyau_default_Kd(d: int) -> float:
    """Berezin/Li-Yau counting constant (1 + 2/d)^{d/2} (2 pi)^{-d} omega_d.

    External default: the cited counting bound leaves the constant to the
    literature, so it stays a configuration value.
    """
    return (1.0 + 2.0 / d) ** (d / 2.0) * (2.0 * math.pi) ** (-d) * unit_ball_volume(d)


def liyau_rhs(d: int, vol: float, t: float, K_d: float | None = None) -> float:
    """K_d vol t^{d/2} counting-function bound (K_d configurable)."""
    if vol < 0 or t < 0:
        raise ValueError("need vol >= 0 and t >= 0")
    if K_d is None:
        K_d = liyau_default_Kd(d)
    return K_d * vol * t ** (d / 2.0)


@dataclass(frozen=True)
class ProofParameters:
    """Internal parameters of the localization argument behind the l1 bound.

    mu is the certified lower bound c^2 / r^2 for the shifted resolvent
    parameter; K_exact carries the exact rational value of K when delta and
    theta are rational.
    """

    d: int
    lam: float
    t: float
    E0d: float
    delta: float
    theta: float
    eps: float
    c: float
    r: float
    mu: float
    K: float
    C_delta: float
    r_squared_bound: float
    K_exact: Fraction | None


def proof_parameters(
    d: int,
    lam: float,
    t: float,
    E0d: float,
    delta=Fraction(16, 45),
    theta=Fraction(1, 2),
) -> ProofParameters:
    """Populate the localization parameters for eigenvalue lam at level t.

    Defaults delta = 16/45 and theta = 1/2 give K = 1/3 exactly and
    c = (d+1) ln(3t/(t-lam)) >= d+1.
    """
    if not 0 < lam < t:
        raise ValueError("need 0 < lam < t")
    if E0d <= 0:
        raise ValueError("E0d must be positive")
    if not (0 < float(delta) < 1 and 0 < float(theta) < 1):
        raise ValueError("delta and theta must lie in (0, 1)")
    K_exact = None
    if isinstance(delta, Fraction) and isinstance(theta, Fraction):
        K_exact = Fraction(5, 4) * delta * (1 - theta * theta)
    df = float(delta)
    tf = float(theta)
    K = 1.25 * df * (1.0 - tf * tf)
    gap = t - lam
    c = (d + 1) / (2.0 * tf) * math.log(t / (K * gap))
    r2 = (c * c + E0d) / ((1.0 - df) * gap)
    r2_bound = (7.0 / 4.0) * c * c / ((1.0 - df) * gap)
    eps = df * gap / t
    mu = c * c / r2
    return ProofParameters(
        d=d,
        lam=lam,
        t=t,
        E0d=E0d,
        delta=df,
        theta=tf,
        eps=eps,
        c=c,
        r=math.sqrt(r2),
        mu=mu,
        K=K,
        C_delta=math.sqrt(2.0 / (1.0 - df)) + 2.0,
        r_squared_bound=r2_bound,
        K_exact=K_exact,
    )

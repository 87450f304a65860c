"""Report record for one verified inequality."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class BoundReport:
    """One checked inequality: pass iff lhs <= rhs * slack + allowance."""

    suite: str
    label: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    margin: float | None
    params: dict = field(default_factory=dict)
    grid_meta: dict = field(default_factory=dict)
    wall_time_s: float = 0.0


def make_report(
    suite,
    label,
    lhs,
    rhs,
    slack=1.0,
    allowance=0.0,
    params=None,
    grid_meta=None,
    passed=None,
) -> BoundReport:
    lhs = float(lhs)
    rhs = float(rhs)
    if passed is None:
        passed = lhs <= rhs * slack + allowance
    if lhs > 0 and math.isfinite(rhs):
        margin = rhs / lhs
    else:
        margin = None
    return BoundReport(
        suite=suite,
        label=label,
        lhs=lhs,
        rhs=rhs,
        slack=float(slack),
        passed=bool(passed),
        margin=margin,
        params=dict(params or {}),
        grid_meta=dict(grid_meta or {}),
    )

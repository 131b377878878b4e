"""Indemnity functions, the retained-loss transform and objective evaluation.

Admissible indemnities satisfy I(0) = 0 and 0 <= I(x) - I(y) <= x - y, so
each contract is determined by its marginal coverage q = I' with values in
[0, 1].  All integral quantities of a contract reduce to survival-weighted
integrals of q:

    E[I(X)]            = int S_X(x) q(x) dx
    D_h(X - I(X))      = int h(S_X(x)) (1 - q(x)) dx
    Pi_h2(I(X))        = int h2(S_X(x)) q(x) dx

with quadrature split at every contract breakpoint (q is piecewise constant
for the parametric forms, so the weight factors out of each piece).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import Empirical, LossDistribution
from .errors import DomainError
from .measures import (
    ChoquetDeviation,
    DeviationMeasure,
    Distortion,
    PenaltyFunction,
    StandardDeviationMeasure,
    _empirical_cells,
)
from .quadrature import integrate


@dataclass(frozen=True)
class StopLoss:
    """I(x) = (x - d)_+; deductible may be infinite (no coverage)."""

    deductible: float

    def __post_init__(self):
        if self.deductible < 0.0 or math.isnan(self.deductible):
            raise DomainError(f"deductible must be non-negative, got {self.deductible!r}")

    def __call__(self, x: float) -> float:
        return max(x - self.deductible, 0.0)

    def marginal(self, x: float) -> float:
        return 1.0 if x > self.deductible else 0.0

    def breakpoints(self) -> tuple[float, ...]:
        return (self.deductible,)


@dataclass(frozen=True)
class DualTruncated:
    """I(x) = min(x, lower_limit) + (x - upper_deductible)_+.

    Full coverage of small losses up to ``lower_limit``, nothing in between,
    and full marginal coverage again beyond ``upper_deductible``.
    """

    lower_limit: float
    upper_deductible: float

    def __post_init__(self):
        if self.lower_limit < 0.0:
            raise DomainError(f"lower limit must be non-negative, got {self.lower_limit!r}")
        if self.upper_deductible < self.lower_limit:
            raise DomainError("upper deductible must be at least the lower limit")

    def __call__(self, x: float) -> float:
        return min(x, self.lower_limit) + max(x - self.upper_deductible, 0.0)

    def marginal(self, x: float) -> float:
        return 1.0 if (x < self.lower_limit or x > self.upper_deductible) else 0.0

    def breakpoints(self) -> tuple[float, ...]:
        return (self.lower_limit, self.upper_deductible)


@dataclass(frozen=True)
class ThreeThreshold:
    """I(x) = (x - d1)_+ ^ (d2 - d1) + (x - d3)_+ with d1 <= d2 <= d3.

    A coverage layer between d1 and d2 plus full tail coverage beyond d3.
    """

    d1: float
    d2: float
    d3: float

    def __post_init__(self):
        if self.d1 < 0.0:
            raise DomainError(f"thresholds must be non-negative, got d1={self.d1!r}")
        if not self.d1 <= self.d2 <= self.d3:
            raise DomainError(
                f"thresholds must be ordered d1 <= d2 <= d3, got ({self.d1!r}, {self.d2!r}, {self.d3!r})"
            )

    def __call__(self, x: float) -> float:
        layer = min(max(x - self.d1, 0.0), self.d2 - self.d1)
        return layer + max(x - self.d3, 0.0)

    def marginal(self, x: float) -> float:
        return 1.0 if (self.d1 < x < self.d2 or x > self.d3) else 0.0

    def breakpoints(self) -> tuple[float, ...]:
        return (self.d1, self.d2, self.d3)


@dataclass(frozen=True)
class GridMarginal:
    """Piecewise-constant marginal coverage on a grid of x-breakpoints.

    ``grid`` has n + 1 increasing nodes and ``slopes`` has n values in
    [0, 1]; the slope is zero outside the grid.  At a node the left-cell
    slope applies, matching the left-closed cell convention of the exact
    integral formulas.
    """

    grid: tuple[float, ...]
    slopes: tuple[float, ...]

    def __post_init__(self):
        grid = tuple(float(g) for g in self.grid)
        slopes = tuple(float(s) for s in self.slopes)
        if len(grid) < 2 or len(slopes) != len(grid) - 1:
            raise DomainError("grid needs n + 1 nodes and n cell slopes")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError("grid nodes must be strictly increasing")
        if grid[0] < 0.0:
            raise DomainError("grid must start at a non-negative node")
        if any(not 0.0 <= s <= 1.0 for s in slopes):
            raise DomainError("cell slopes must lie in [0, 1]")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "slopes", slopes)

    def __call__(self, x: float) -> float:
        total = 0.0
        for lo, hi, s in zip(self.grid, self.grid[1:], self.slopes):
            if x <= lo:
                break
            total += s * (min(x, hi) - lo)
        return total

    def marginal(self, x: float) -> float:
        idx = int(np.searchsorted(self.grid, x, side="left")) - 1
        if idx < 0 or idx >= len(self.slopes):
            return 0.0
        return self.slopes[idx]

    def breakpoints(self) -> tuple[float, ...]:
        return self.grid


Indemnity = StopLoss | DualTruncated | ThreeThreshold | GridMarginal


def apply(contract: Indemnity, x: float) -> float:
    """Indemnity payment I(x) for a realized loss x >= 0."""
    if x < 0.0 or math.isnan(x):
        raise DomainError(f"loss must be non-negative, got {x!r}")
    return contract(x)


# ---------------------------------------------------------------------------
# Serialization for CLI round trips
# ---------------------------------------------------------------------------

_FORM_TAGS = {
    StopLoss: "stop_loss",
    DualTruncated: "dual_truncated",
    ThreeThreshold: "three_threshold",
    GridMarginal: "grid_marginal",
}


def serialize_indemnity(contract: Indemnity) -> dict[str, str]:
    """Flat form-tag + parameter mapping, the CLI wire format of a contract."""
    if isinstance(contract, StopLoss):
        return {"form": "stop_loss", "deductible": repr(contract.deductible)}
    if isinstance(contract, DualTruncated):
        return {
            "form": "dual_truncated",
            "lower_limit": repr(contract.lower_limit),
            "upper_deductible": repr(contract.upper_deductible),
        }
    if isinstance(contract, ThreeThreshold):
        return {
            "form": "three_threshold",
            "d1": repr(contract.d1),
            "d2": repr(contract.d2),
            "d3": repr(contract.d3),
        }
    if isinstance(contract, GridMarginal):
        return {
            "form": "grid_marginal",
            "grid": ", ".join(repr(g) for g in contract.grid),
            "slopes": ", ".join(repr(s) for s in contract.slopes),
        }
    raise DomainError(f"unknown contract type {type(contract)!r}")


def parse_indemnity(fields: dict[str, str]) -> Indemnity:
    try:
        form = fields["form"]
        if form == "stop_loss":
            return StopLoss(float(fields["deductible"]))
        if form == "dual_truncated":
            return DualTruncated(float(fields["lower_limit"]), float(fields["upper_deductible"]))
        if form == "three_threshold":
            return ThreeThreshold(float(fields["d1"]), float(fields["d2"]), float(fields["d3"]))
        if form == "grid_marginal":
            grid = tuple(float(v) for v in fields["grid"].split(","))
            slopes = tuple(float(v) for v in fields["slopes"].split(","))
            return GridMarginal(grid, slopes)
    except KeyError as exc:
        raise DomainError(f"contract field missing: {exc}") from exc
    raise DomainError(f"unknown contract form {fields.get('form')!r}")


# ---------------------------------------------------------------------------
# Survival-weighted integrals
# ---------------------------------------------------------------------------


def marginal_weighted_integral(
    X: LossDistribution,
    transform,
    contract: Indemnity | None,
    *,
    complement: bool = False,
    extra_splits: tuple[float, ...] = (),
) -> float:
    """int_0^M transform(S_X(x)) w(x) dx with w = q, 1 - q or 1.

    The marginal coverage q is piecewise constant between contract
    breakpoints, so it factors out of each quadrature piece; on empirical
    losses the integral is an exact cell sum.
    """
    upper = X.upper_limit()
    contract_splits = contract.breakpoints() if contract is not None else ()
    splits = tuple(s for s in (*contract_splits, *extra_splits) if math.isfinite(s))

    def weight_at(x: float) -> float:
        if contract is None:
            return 1.0
        q = contract.marginal(x)
        return 1.0 - q if complement else q

    if isinstance(X, Empirical):
        return math.fsum(
            transform(s) * weight_at(0.5 * (lo + hi)) * (hi - lo)
            for lo, hi, s in _empirical_cells(X, splits)
        )
    nodes = sorted({0.0, upper, *(s for s in splits if 0.0 < s < upper)})
    total = 0.0
    for lo, hi in zip(nodes[:-1], nodes[1:]):
        w = weight_at(0.5 * (lo + hi))
        if w == 0.0:
            continue
        total += w * integrate(lambda x: transform(X.survival(x)), lo, hi, splits=X.breakpoints())
    return total


def expected_indemnity(X: LossDistribution, contract: Indemnity) -> float:
    """E[I(X)] = int S_X(x) q(x) dx."""
    return marginal_weighted_integral(X, lambda s: s, contract)


def retained_deviation(h: Distortion, X: LossDistribution, contract: Indemnity) -> float:
    """Choquet deviation of the retained loss, int h(S_X(x)) (1 - q(x)) dx."""
    if not h.is_deviation:
        raise DomainError("retained deviation requires a deviation-class distortion")
    return marginal_weighted_integral(
        X, h.fn, contract, complement=True, extra_splits=h.kink_locations(X)
    )


def ceded_deviation(h: Distortion, X: LossDistribution, contract: Indemnity) -> float:
    """Choquet deviation of the ceded part, int h(S_X(x)) q(x) dx."""
    if not h.is_deviation:
        raise DomainError("ceded deviation requires a deviation-class distortion")
    return marginal_weighted_integral(
        X, h.fn, contract, complement=False, extra_splits=h.kink_locations(X)
    )


def retained_sd(X: LossDistribution, d: float) -> float:
    """Standard deviation of the retained loss X ^ d under a stop-loss contract."""
    if d < 0.0 or math.isnan(d):
        raise DomainError(f"deductible must be non-negative, got {d!r}")
    w1, w2 = X.truncated_moments(d)
    return math.sqrt(max(w2 - w1 * w1, 0.0))


def objective(
    g: PenaltyFunction,
    D: DeviationMeasure,
    X: LossDistribution,
    contract: Indemnity,
    principle,
) -> float:
    """Risk position of the buyer: g(D(X - I(X))) + E[X] - E[I(X)] + Pi(I(X)).

    The standard-deviation objective is only defined for stop-loss contracts,
    where the retained loss is the capped loss X ^ d; arbitrary marginal
    contracts under SD are handled by the brute-force module instead.
    """
    from .premiums import premium  # local import to avoid a cycle

    if isinstance(D, StandardDeviationMeasure):
        if not isinstance(contract, StopLoss):
            raise DomainError("the SD objective is defined for stop-loss contracts only")
        dev = retained_sd(X, min(contract.deductible, X.ess_sup))
    elif isinstance(D, ChoquetDeviation):
        dev = retained_deviation(D.distortion, X, contract)
    else:
        raise DomainError(f"unknown deviation measure {D!r}")
    return g(dev) + X.mean() - expected_indemnity(X, contract) + premium(principle, X, contract)

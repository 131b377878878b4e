"""Distortion functions, penalty functions, deviation and risk measures.

A distortion h on [0, 1] defines the signed Choquet integral

    D_h(X) = int_0^M h(S_X(x)) dx = int_0^1 VaR_{1-t}(X) dh(t).

With h(0) = h(1) = 0 and h concave, D_h is a generalized deviation measure
(translation invariant, non-negative, positively homogeneous, sub-additive);
with h(0) = 0, h(1) = 1 and h increasing it is a distortion premium.  Both
integral forms are implemented and cross-checked in the test suite.

The mean-deviation functional combines a deviation measure D with an
increasing convex penalty g (g(0) = 0):  md_g(X) = g(D(X)) + E[X].
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .distributions import Empirical, LossDistribution
from .errors import DomainError, NumericError
from .quadrature import integrate

# ---------------------------------------------------------------------------
# Distortion functions
# ---------------------------------------------------------------------------


class EndpointClass(enum.Enum):
    """Endpoint behaviour of a distortion: deviation (0 -> 0) or premium (0 -> 1)."""

    DEVIATION = "deviation"
    PREMIUM = "premium"


# A derivative piece is (t_lo, t_hi, h') with h' smooth on the open interval.
DerivPiece = tuple[float, float, Callable[[float], float]]
# An atom is (t, jump) marking a jump of h used by the quantile-form integral.
Atom = tuple[float, float]


@dataclass(frozen=True)
class Distortion:
    """A distortion function h with the metadata the solvers need.

    ``second_derivative_at_zero`` drives the uniqueness flags of the solvers
    (strictly concave at 0 makes the optimal contract unique); custom
    distortions must supply it explicitly.
    """

    name: str
    endpoint_class: EndpointClass
    fn: Callable[[float], float]
    second_derivative_at_zero: float
    derivative_pieces: tuple[DerivPiece, ...] = ()
    atoms: tuple[Atom, ...] = ()
    breakpoints: tuple[float, ...] = ()
    level: float | None = None

    def __call__(self, t: float) -> float:
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"distortion argument must lie in [0, 1], got {t!r}")
        return self.fn(t)

    @property
    def is_deviation(self) -> bool:
        return self.endpoint_class is EndpointClass.DEVIATION

    def kink_locations(self, X: LossDistribution) -> tuple[float, ...]:
        """x-coordinates where h(S_X(x)) kinks, used as quadrature splits."""
        out = []
        for t in self.breakpoints:
            if 0.0 < t < 1.0:
                out.append(X.quantile(1.0 - t))
        return tuple(out)


def gini() -> Distortion:
    """Gini deviation, h(t) = t - t^2; equals E|X1 - X2| / 2 for iid copies."""
    return Distortion(
        name="gini",
        endpoint_class=EndpointClass.DEVIATION,
        fn=lambda t: t - t * t,
        second_derivative_at_zero=-2.0,
        derivative_pieces=((0.0, 1.0, lambda t: 1.0 - 2.0 * t),),
    )


def mean_absolute() -> Distortion:
    """Mean absolute deviation, h(t) = min(t, 1 - t); equals E|X - E[X]|."""
    return Distortion(
        name="mean_absolute",
        endpoint_class=EndpointClass.DEVIATION,
        fn=lambda t: min(t, 1.0 - t),
        second_derivative_at_zero=0.0,
        derivative_pieces=((0.0, 0.5, lambda t: 1.0), (0.5, 1.0, lambda t: -1.0)),
        breakpoints=(0.5,),
    )


def full_range() -> Distortion:
    """Range deviation, h = 1 on (0, 1); equals ess-sup - ess-inf (bounded only)."""
    return Distortion(
        name="range",
        endpoint_class=EndpointClass.DEVIATION,
        fn=lambda t: 1.0 if 0.0 < t < 1.0 else 0.0,
        second_derivative_at_zero=0.0,
        atoms=((0.0, 1.0), (1.0, -1.0)),
    )


def inter_es_range(alpha: float) -> Distortion:
    """Inter-ES range at level alpha: ES_alpha(X) + ES_alpha(-X)."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"inter-ES range level must lie in (0, 1), got {alpha!r}")
    c = 1.0 - alpha

    def h(t: float) -> float:
        return min(t / c, 1.0) + min((alpha - t) / c, 0.0)

    def dh(t: float) -> float:
        return (1.0 / c if t < c else 0.0) - (1.0 / c if t > alpha else 0.0)

    kinks = tuple(sorted({alpha, c}))
    pieces = []
    lo = 0.0
    for k in (*kinks, 1.0):
        pieces.append((lo, k, dh))
        lo = k
    return Distortion(
        name="inter_es_range",
        endpoint_class=EndpointClass.DEVIATION,
        fn=h,
        second_derivative_at_zero=0.0,
        derivative_pieces=tuple(pieces),
        breakpoints=kinks,
        level=alpha,
    )


def es_deviation(alpha: float) -> Distortion:
    """ES deviation at level alpha: ES_alpha(X) - E[X], h(t) = (alpha t / (1-alpha)) ^ (1-t)."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"ES deviation level must lie in (0, 1), got {alpha!r}")
    c = 1.0 - alpha
    return Distortion(
        name="es_deviation",
        endpoint_class=EndpointClass.DEVIATION,
        fn=lambda t: min(alpha * t / c, 1.0 - t),
        second_derivative_at_zero=0.0,
        derivative_pieces=((0.0, c, lambda t: alpha / c), (c, 1.0, lambda t: -1.0)),
        breakpoints=(c,),
        level=alpha,
    )


def es_premium(p: float) -> Distortion:
    """ES premium distortion at level p, h(t) = min(t / (1 - p), 1)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"ES premium level must lie in (0, 1), got {p!r}")
    c = 1.0 - p
    return Distortion(
        name="es_premium",
        endpoint_class=EndpointClass.PREMIUM,
        fn=lambda t: min(t / c, 1.0),
        second_derivative_at_zero=0.0,
        derivative_pieces=((0.0, c, lambda t: 1.0 / c), (c, 1.0, lambda t: 0.0)),
        breakpoints=(c,),
        level=p,
    )


def var_premium(p: float) -> Distortion:
    """VaR premium distortion at level p, h(t) = 1{t > 1 - p}.

    The function is a step, so values built on it are always evaluated from
    contract structure (pointwise at the quantile), never by quadrature of
    h(S_X(.)).
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"VaR premium level must lie in (0, 1), got {p!r}")
    c = 1.0 - p
    return Distortion(
        name="var_premium",
        endpoint_class=EndpointClass.PREMIUM,
        fn=lambda t: 1.0 if t > c else 0.0,
        second_derivative_at_zero=0.0,
        atoms=((c, 1.0),),
        level=p,
    )


def custom_distortion(
    fn: Callable[[float], float],
    *,
    endpoint_class: EndpointClass,
    second_derivative_at_zero: float,
    derivative_pieces: tuple[DerivPiece, ...] = (),
    breakpoints: tuple[float, ...] = (),
    atoms: tuple[Atom, ...] = (),
    name: str = "custom",
) -> Distortion:
    """Wrap a user-supplied distortion, validating its endpoint-class invariants."""
    h = Distortion(
        name=name,
        endpoint_class=endpoint_class,
        fn=fn,
        second_derivative_at_zero=second_derivative_at_zero,
        derivative_pieces=derivative_pieces,
        breakpoints=breakpoints,
        atoms=atoms,
    )
    validate_distortion(h)
    return h


def validate_distortion(h: Distortion, grid_points: int = 1000) -> None:
    """Check endpoint values plus midpoint concavity / monotonicity on a grid."""
    ts = np.linspace(0.0, 1.0, grid_points + 1)
    vals = np.array([h.fn(float(t)) for t in ts])
    tol = 1e-12
    if abs(vals[0]) > tol:
        raise DomainError(f"distortion must satisfy h(0) = 0, got {vals[0]!r}")
    if h.is_deviation:
        if abs(vals[-1]) > tol:
            raise DomainError(f"deviation distortion must satisfy h(1) = 0, got {vals[-1]!r}")
        if np.any(vals < -tol):
            raise DomainError("deviation distortion must be non-negative on [0, 1]")
        mid_gap = vals[1:-1] - 0.5 * (vals[:-2] + vals[2:])
        if np.any(mid_gap < -1e-9):
            raise DomainError("deviation distortion fails midpoint concavity on the check grid")
    else:
        if abs(vals[-1] - 1.0) > tol:
            raise DomainError(f"premium distortion must satisfy h(1) = 1, got {vals[-1]!r}")
        if np.any(np.diff(vals) < -1e-12):
            raise DomainError("premium distortion must be non-decreasing on [0, 1]")


# ---------------------------------------------------------------------------
# Penalty functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearQuadratic:
    """g(x) = alpha x + beta x^2 with alpha, beta >= 0, not both zero."""

    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if self.alpha < 0.0 or self.beta < 0.0:
            raise DomainError("penalty coefficients must be non-negative")
        if self.alpha == 0.0 and self.beta == 0.0:
            raise DomainError("penalty coefficients must not both be zero")

    def __call__(self, x: float) -> float:
        return self.alpha * x + self.beta * x * x

    def derivative(self, x: float) -> float:
        return self.alpha + 2.0 * self.beta * x


@dataclass(frozen=True)
class LogPenalty:
    """g(x) = x - log(1 + x); strictly increasing, convex, g'(0) = 0."""

    def __call__(self, x: float) -> float:
        return x - math.log1p(x)

    def derivative(self, x: float) -> float:
        return x / (1.0 + x)


@dataclass(frozen=True)
class CustomPenalty:
    fn: Callable[[float], float]
    dfn: Callable[[float], float]

    def __call__(self, x: float) -> float:
        return self.fn(x)

    def derivative(self, x: float) -> float:
        return self.dfn(x)


PenaltyFunction = LinearQuadratic | LogPenalty | CustomPenalty


def validate_penalty(g: PenaltyFunction, x_max: float = 10.0, grid_points: int = 1000) -> None:
    """Check g(0) = 0, monotonicity and midpoint convexity on [0, x_max]."""
    xs = np.linspace(0.0, x_max, grid_points + 1)
    vals = np.array([g(float(x)) for x in xs])
    if abs(vals[0]) > 1e-12:
        raise DomainError(f"penalty must satisfy g(0) = 0, got {vals[0]!r}")
    if np.any(np.diff(vals) < -1e-12):
        raise DomainError("penalty must be non-decreasing")
    mid_gap = vals[1:-1] - 0.5 * (vals[:-2] + vals[2:])
    if np.any(mid_gap > 1e-9):
        raise DomainError("penalty fails midpoint convexity on the check grid")


# ---------------------------------------------------------------------------
# Deviation measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChoquetDeviation:
    """Deviation measure D_h(X) = int h(S_X) for a deviation-class distortion."""

    distortion: Distortion

    def __post_init__(self):
        if not self.distortion.is_deviation:
            raise DomainError("Choquet deviation requires a deviation-class distortion")

    def evaluate(self, X: LossDistribution) -> float:
        return choquet(self.distortion, X)


@dataclass(frozen=True)
class StandardDeviationMeasure:
    """The standard deviation as a generalized deviation measure."""

    def evaluate(self, X: LossDistribution) -> float:
        return standard_deviation(X)


DeviationMeasure = ChoquetDeviation | StandardDeviationMeasure


# ---------------------------------------------------------------------------
# Choquet integrals (survival form and quantile form)
# ---------------------------------------------------------------------------


def _empirical_cells(X: Empirical, extra: tuple[float, ...] = ()) -> list[tuple[float, float, float]]:
    """Cells (lo, hi, S) on which the empirical survival function is constant."""
    upper = X.ess_sup
    nodes = sorted({0.0, *X.breakpoints(), *(s for s in extra if 0.0 < s < upper)})
    cells = []
    for lo, hi in zip(nodes, [*nodes[1:], upper]):
        if hi > lo:
            cells.append((lo, hi, X.survival(lo)))
    return cells


def choquet(h: Distortion, X: LossDistribution) -> float:
    """Signed Choquet integral int_0^M h(S_X(x)) dx.

    Empirical losses use the exact sum over order statistics; analytic losses
    use quadrature split at the kinks of h(S_X(.)).  Raises
    :class:`NumericError` when the integral provably diverges (range deviation
    on unbounded support).
    """
    if h.name == "var_premium":
        # Step distortion: the integral is the quantile itself.
        return X.quantile(h.level)
    if h.name == "range" and not math.isfinite(X.ess_sup):
        raise NumericError("range deviation diverges on unbounded support")
    if isinstance(X, Empirical):
        return math.fsum(h.fn(s) * (hi - lo) for lo, hi, s in _empirical_cells(X))
    splits = (*X.breakpoints(), *h.kink_locations(X))
    return integrate(lambda x: h.fn(X.survival(x)), 0.0, X.upper_limit(), splits=splits)


def choquet_quantile_form(h: Distortion, X: LossDistribution) -> float:
    """The same integral in quantile form, int_0^1 VaR_{1-t}(X) dh(t).

    Used as the cross-check partner of :func:`choquet`; smooth pieces of h
    integrate h'(t) VaR_{1-t}(X) and jumps contribute jump * VaR_{1-t}.
    """
    total = 0.0
    for t, jump in h.atoms:
        if t <= 0.0:
            v = X.ess_sup
            if not math.isfinite(v):
                raise NumericError("quantile-form integral diverges: jump at t = 0 with unbounded support")
        elif t >= 1.0:
            v = X.ess_inf
        else:
            v = X.quantile(1.0 - t)
        total += jump * v
    def quantile(p: float) -> float:
        return X.ess_inf if p <= 0.0 else X.quantile(p)

    t_floor = 0.0 if math.isfinite(X.ess_sup) else 1e-10
    for lo, hi, dfn in h.derivative_pieces:
        lo_eff = max(lo, t_floor)
        if hi <= lo_eff:
            continue
        if lo < lo_eff:
            # exact tail correction: int_0^eps h'(t) VaR_{1-t} dt with h'
            # constant over the tail sliver, via int_{1-eps}^1 VaR_s ds
            u = X.quantile(1.0 - t_floor)
            total += dfn(t_floor) * (X.stop_loss(u) + u * t_floor)
        total += integrate(lambda t, d=dfn: d(t) * quantile(1.0 - t), lo_eff, hi)
    return total


# ---------------------------------------------------------------------------
# Classical measures
# ---------------------------------------------------------------------------


def standard_deviation(X: LossDistribution) -> float:
    m = X.mean()
    var = X.second_moment() - m * m
    return math.sqrt(max(var, 0.0))


def var(X: LossDistribution, p: float) -> float:
    """Value at risk at level p in (0, 1): the left quantile."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"VaR level must lie in (0, 1), got {p!r}")
    return X.quantile(p)


def es(X: LossDistribution, p: float) -> float:
    """Expected shortfall (1 / (1-p)) int_p^1 VaR_s(X) ds.

    Evaluated through the identity ES_p = x_p + E[(X - x_p)_+] / (1 - p),
    which is exact for every distribution kind.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"ES level must lie in (0, 1), got {p!r}")
    xp = X.quantile(p)
    return xp + X.stop_loss(xp) / (1.0 - p)


def md_g(g: PenaltyFunction, D: DeviationMeasure, X: LossDistribution) -> float:
    """Mean-deviation value g(D(X)) + E[X]."""
    return g(D.evaluate(X)) + X.mean()


def check_monotonicity_constraint(
    g: LinearQuadratic, D: DeviationMeasure, X: LossDistribution
) -> bool:
    """Sufficient condition for monotonicity of the mean-deviation functional
    over admissible retained positions: alpha + 2 beta D(X) <= 1."""
    if not isinstance(g, LinearQuadratic):
        raise DomainError("monotonicity check is only defined for the linear-quadratic penalty")
    return g.alpha + 2.0 * g.beta * D.evaluate(X) <= 1.0

"""Closed-form-guided solvers for the optimal insurance problems.

Each solver implements the sup-set characterization of the optimal
thresholds for one premium/deviation regime:

* expected-value premium with a Choquet deviation: stop-loss with
  d* = sup{x : g'(int_0^x h(S)) h(S(x)) - theta S(x) <= 0},
* expected-value premium with the standard deviation: stop-loss with
  d* = sup{x : alpha (x - w1)/sqrt(w2 - w1^2) + 2 beta (x - w1) <= theta},
* VaR premium: dual truncated stop-loss with upper deductible at the
  pricing quantile and lower limit from its own sup-set,
* ES premium: dual truncated stop-loss with two coupled sup-sets solved by
  alternating (Gauss-Seidel) updates,
* premium budget cap: the expected-value problems bind the budget through
  the deductible; the VaR/ES problems gain a third threshold and a pair of
  KKT multipliers (lambda1, lambda2) solved by an outer bisection on
  lambda2 and an inner fixed point on lambda1.

All sup/inf-sets share one bracketing routine (coarse scan plus bisection),
because the condition functions can touch zero on sets of measure zero when
the distortion is not strictly concave at 0.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

from . import contracts as ct
from . import premiums as pm
from .distributions import LossDistribution
from .errors import DomainError, SolverError
from .measures import (
    ChoquetDeviation,
    DeviationMeasure,
    Distortion,
    LinearQuadratic,
    PenaltyFunction,
    StandardDeviationMeasure,
    choquet,
)
from .quadrature import CumulativeIntegral

# Unbounded supports are scanned up to quantile(1 - SCAN_TAIL); the condition
# still being non-positive at that edge is reported as the no-insurance
# sentinel d* = M, because the first-order condition vanishes at M.
SCAN_TAIL = 1e-8
SCAN_POINTS = 512
REFINE_FRACTION = 1e-10


@dataclass
class OptimalContract:
    """Solver output: contract, its value, and convergence diagnostics."""

    contract: ct.Indemnity
    objective_value: float
    premium: float
    multipliers: tuple[float, float] | None = None
    unique: bool = False
    diagnostics: dict[str, object] = field(default_factory=dict)


def sublevel_sup(
    condition: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    kinks: tuple[float, ...] = (),
    samples: int = SCAN_POINTS,
    open_right: bool = False,
) -> float:
    """sup{x in [lo, hi] : condition(x) <= 0}.

    A coarse scan locates the last non-positive point; bisection refines the
    following sign change to ``REFINE_FRACTION * (hi - lo)``.  Returns ``hi``
    when the sublevel set reaches the right edge and ``lo`` for an empty set
    (the convention sup of the empty set = left edge of the domain).  With
    ``open_right`` the exact right endpoint is excluded from the scan, which
    the boundary-degenerate conditions (vanishing at M) require.
    """
    if hi <= lo:
        return lo
    xs = sorted({lo, hi, *(k for k in kinks if lo < k < hi and math.isfinite(k))})
    grid: list[float] = []
    for a, b in zip(xs[:-1], xs[1:]):
        m = max(2, int(round(samples * (b - a) / (hi - lo))))
        grid.extend(a + (b - a) * i / m for i in range(m))
    grid.append(hi)
    if open_right:
        grid = grid[:-1]
    vals = [condition(x) for x in grid]
    last = None
    for i in range(len(grid) - 1, -1, -1):
        if vals[i] <= 0.0:
            last = i
            break
    if last is None:
        return lo
    if last == len(grid) - 1:
        return hi
    a, b = grid[last], grid[last + 1]
    tol = REFINE_FRACTION * (hi - lo)
    while b - a > tol:
        m = 0.5 * (a + b)
        if condition(m) <= 0.0:
            a = m
        else:
            b = m
    return a


def sublevel_inf(
    condition: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    kinks: tuple[float, ...] = (),
    samples: int = SCAN_POINTS,
) -> float:
    """inf{x in [lo, hi] : condition(x) <= 0}; empty set maps to ``hi``."""
    if hi <= lo:
        return hi
    xs = sorted({lo, hi, *(k for k in kinks if lo < k < hi and math.isfinite(k))})
    grid: list[float] = []
    for a, b in zip(xs[:-1], xs[1:]):
        m = max(2, int(round(samples * (b - a) / (hi - lo))))
        grid.extend(a + (b - a) * i / m for i in range(m))
    grid.append(hi)
    vals = [condition(x) for x in grid]
    first = None
    for i, v in enumerate(vals):
        if v <= 0.0:
            first = i
            break
    if first is None:
        return hi
    if first == 0:
        return lo
    a, b = grid[first - 1], grid[first]
    tol = REFINE_FRACTION * (hi - lo)
    while b - a > tol:
        m = 0.5 * (a + b)
        if condition(m) <= 0.0:
            b = m
        else:
            a = m
    return b


def _scan_edge(X: LossDistribution) -> float:
    m = X.ess_sup
    return m if math.isfinite(m) else X.quantile(1.0 - SCAN_TAIL)


def _h_cumulative(h: Distortion, X: LossDistribution) -> CumulativeIntegral:
    splits = (*X.breakpoints(), *h.kink_locations(X))
    return CumulativeIntegral(lambda x: h.fn(X.survival(x)), 0.0, splits=splits)


def _finish(
    contract: ct.Indemnity,
    g: PenaltyFunction,
    D: DeviationMeasure,
    X: LossDistribution,
    principle,
    *,
    multipliers=None,
    unique=False,
    diagnostics=None,
) -> OptimalContract:
    value = ct.objective(g, D, X, contract, principle)
    paid = pm.premium(principle, X, contract)
    return OptimalContract(
        contract=contract,
        objective_value=value,
        premium=paid,
        multipliers=multipliers,
        unique=unique,
        diagnostics=diagnostics or {},
    )


# ---------------------------------------------------------------------------
# Expected-value premium
# ---------------------------------------------------------------------------


def solve_evpp_choquet(
    g: PenaltyFunction, h: Distortion, X: LossDistribution, theta: float
) -> OptimalContract:
    """Optimal stop-loss deductible under the expected-value premium.

    The first-order function F'(x) = g'(int_0^x h(S)) h(S(x)) - theta S(x)
    starts at -theta and vanishes at M; the optimal deductible is the
    supremum of its sublevel set, with the set reaching the scan edge read
    as the no-insurance contract.
    """
    if not theta > 0.0:
        raise DomainError(f"safety loading must be positive, got {theta!r}")
    if not h.is_deviation:
        raise DomainError("the deviation must use a deviation-class distortion")
    edge = _scan_edge(X)
    cum = _h_cumulative(h, X)

    def fprime(x: float) -> float:
        s = X.survival(x)
        return g.derivative(cum(x)) * h.fn(s) - theta * s

    kinks = (*X.breakpoints(), *h.kink_locations(X))
    d = sublevel_sup(fprime, 0.0, edge, kinks=kinks, open_right=True)
    no_insurance = d >= edge
    d_star = X.ess_sup if no_insurance else d
    contract = ct.StopLoss(d_star)
    diagnostics = {
        "no_insurance": no_insurance,
        "residual": 0.0 if no_insurance else fprime(d),
        "scan_edge": edge,
    }
    return _finish(
        contract,
        g,
        ChoquetDeviation(h),
        X,
        pm.ExpectedValue(theta),
        unique=h.second_derivative_at_zero < 0.0,
        diagnostics=diagnostics,
    )


def _sd_condition(g: LinearQuadratic, X: LossDistribution, theta_eff: float) -> Callable[[float], float]:
    def cond(x: float) -> float:
        w1, w2 = X.truncated_moments(x)
        var = w2 - w1 * w1
        excess = x - w1
        if var <= 1e-30 or excess <= 0.0:
            return -theta_eff  # F'(0+) limit
        return g.alpha * excess / math.sqrt(var) + 2.0 * g.beta * excess - theta_eff

    return cond


def solve_evpp_sd(g: LinearQuadratic, X: LossDistribution, theta: float) -> OptimalContract:
    """Optimal stop-loss deductible for the standard-deviation objective."""
    if not isinstance(g, LinearQuadratic):
        raise DomainError("the SD solver requires the linear-quadratic penalty")
    if not theta > 0.0:
        raise DomainError(f"safety loading must be positive, got {theta!r}")
    X.second_moment()  # raises for infinite second moment
    edge = _scan_edge(X)
    cond = _sd_condition(g, X, theta)
    d = sublevel_sup(cond, 0.0, edge, kinks=X.breakpoints(), open_right=True)
    no_insurance = d >= edge
    d_star = X.ess_sup if no_insurance else d
    contract = ct.StopLoss(d_star)
    diagnostics = {
        "no_insurance": no_insurance,
        "residual": 0.0 if no_insurance else cond(d),
        "scan_edge": edge,
    }
    return _finish(
        contract,
        g,
        StandardDeviationMeasure(),
        X,
        pm.ExpectedValue(theta),
        unique=False,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# VaR and ES premium principles
# ---------------------------------------------------------------------------


def solve_var_premium(
    g: PenaltyFunction, h1: Distortion, X: LossDistribution, p: float
) -> OptimalContract:
    """Optimal contract when the insurer prices at VaR_p.

    The contract covers small losses up to a limit d* and everything beyond
    the pricing quantile x_p, with
    d* = sup{x <= x_p : 1 - S(x) - g'(int_x^{x_p} h1(S)) h1(S(x)) <= 0}.
    The retained loss is bounded by x_p - d*.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"premium level must lie in (0, 1), got {p!r}")
    if not h1.is_deviation:
        raise DomainError("the deviation must use a deviation-class distortion")
    xp = X.quantile(p)
    cum = _h_cumulative(h1, X)
    cum_xp = cum(xp)

    def cond(x: float) -> float:
        return 1.0 - X.survival(x) - g.derivative(cum_xp - cum(x)) * h1.fn(X.survival(x))

    kinks = (*X.breakpoints(), *h1.kink_locations(X))
    d = sublevel_sup(cond, 0.0, xp, kinks=kinks)
    contract = ct.DualTruncated(d, xp)
    diagnostics = {"residual": cond(d), "pricing_quantile": xp, "full_insurance": d >= xp}
    return _finish(
        contract,
        g,
        ChoquetDeviation(h1),
        X,
        pm.ValueAtRisk(p),
        unique=True,
        diagnostics=diagnostics,
    )


def solve_es_premium(
    g: PenaltyFunction, h1: Distortion, X: LossDistribution, p: float
) -> OptimalContract:
    """Optimal contract when the insurer prices at ES_p.

    The lower limit d2 <= x_p and upper deductible d1 > x_p satisfy coupled
    sup-set conditions; they are solved by alternating updates (fix one
    threshold, recompute the other) with 0.5 damping on oscillation.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"premium level must lie in (0, 1), got {p!r}")
    if not h1.is_deviation:
        raise DomainError("the deviation must use a deviation-class distortion")
    xp = X.quantile(p)
    edge = _scan_edge(X)
    cum = _h_cumulative(h1, X)
    ratio = p / (1.0 - p)
    kinks = (*X.breakpoints(), *h1.kink_locations(X))

    def cond_upper(x: float, d2: float) -> float:
        s = X.survival(x)
        return g.derivative(cum(x) - cum(d2)) * h1.fn(s) - ratio * s

    def cond_lower(x: float, d1: float) -> float:
        s = X.survival(x)
        return 1.0 - s - g.derivative(cum(d1) - cum(x)) * h1.fn(s)

    d2 = 0.0
    d1 = edge
    scale = max(edge, 1.0)
    prev_delta = None
    trace = []
    for iteration in range(200):
        d1_new = sublevel_sup(lambda x: cond_upper(x, d2), xp, edge, kinks=kinks, open_right=True)
        d2_new = sublevel_sup(lambda x: cond_lower(x, d1_new), 0.0, xp, kinks=kinks)
        delta = abs(d1_new - d1) + abs(d2_new - d2)
        trace.append((d1_new, d2_new, delta))
        if prev_delta is not None and delta > prev_delta:
            d1_new = 0.5 * (d1 + d1_new)
            d2_new = 0.5 * (d2 + d2_new)
            delta = abs(d1_new - d1) + abs(d2_new - d2)
        d1, d2 = d1_new, d2_new
        if delta <= 1e-9 * scale:
            break
        prev_delta = delta
    else:
        raise SolverError(f"coupled threshold iteration did not converge; trace tail: {trace[-5:]}")
    no_tail = d1 >= edge
    upper = X.ess_sup if no_tail else d1
    contract = ct.DualTruncated(d2, upper)
    diagnostics = {
        "iterations": iteration + 1,
        "pricing_quantile": xp,
        "no_tail_coverage": no_tail,
        "residuals": (cond_upper(min(d1, edge), d2), cond_lower(d2, min(d1, edge))),
    }
    return _finish(
        contract,
        g,
        ChoquetDeviation(h1),
        X,
        pm.ExpectedShortfall(p),
        unique=h1.second_derivative_at_zero < 0.0,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# Budget-constrained problems
# ---------------------------------------------------------------------------


def solve_budget_evpp(
    g: PenaltyFunction,
    deviation: DeviationMeasure,
    X: LossDistribution,
    theta: float,
    budget: float,
) -> OptimalContract:
    """Expected-value premium with a cap on the premium spend.

    When the cap is below the unconstrained optimal premium the constraint
    binds and the deductible solves (1 + theta) E[(X - d)_+] = budget; the
    reported multiplier lambda2 restores the first-order condition at the
    binding deductible.
    """
    if not budget > 0.0:
        raise DomainError(f"premium budget must be positive, got {budget!r}")
    if isinstance(deviation, StandardDeviationMeasure):
        unconstrained = solve_evpp_sd(g, X, theta)
    elif isinstance(deviation, ChoquetDeviation):
        unconstrained = solve_evpp_choquet(g, deviation.distortion, X, theta)
    else:
        raise DomainError(f"unknown deviation measure {deviation!r}")
    pi0 = unconstrained.premium
    if budget >= pi0 - 1e-12:
        unconstrained.diagnostics.update(binding=False, note="constraint not binding", budget=budget)
        unconstrained.multipliers = (None, 0.0)
        return unconstrained

    principle = pm.ExpectedValue(theta)
    edge = _scan_edge(X)

    def gap(d: float) -> float:
        return pm.premium(principle, X, ct.StopLoss(d)) - budget

    lo, hi = 0.0, edge
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo <= 0.0:
        # The budget covers full insurance, yet exceeded pi0: cannot happen for
        # a binding cap; guard against degenerate inputs.
        contract = ct.StopLoss(0.0)
        return _finish(
            contract, g, deviation, X, principle,
            diagnostics={"binding": False, "note": "budget covers full insurance", "budget": budget},
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = gap(mid)
        if abs(g_mid) <= 1e-9:
            lo = hi = mid
            break
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(edge, 1.0):
            break
    d_tilde = 0.5 * (lo + hi)

    s_d = X.survival(d_tilde)
    if isinstance(deviation, ChoquetDeviation):
        h = deviation.distortion
        cum = _h_cumulative(h, X)
        lambda1 = g.derivative(cum(d_tilde))
        foc = lambda1 * h.fn(s_d) - theta * s_d
    else:
        lambda1 = g.derivative(ct.retained_sd(X, d_tilde))
        foc = (_sd_condition(g, X, theta))(d_tilde) * s_d
    lambda2 = max(0.0, foc / ((1.0 + theta) * s_d)) if s_d > 0.0 else 0.0

    contract = ct.StopLoss(d_tilde)
    result = _finish(
        contract,
        g,
        deviation,
        X,
        principle,
        multipliers=(lambda1, lambda2),
        unique=unconstrained.unique,
        diagnostics={
            "binding": True,
            "budget": budget,
            "unconstrained_premium": pi0,
            "unconstrained_deductible": getattr(unconstrained.contract, "deductible", None),
        },
    )
    result.diagnostics["budget_residual"] = result.premium - budget
    return result


def solve_budget_var_es(
    g: PenaltyFunction,
    h1: Distortion,
    X: LossDistribution,
    p: float,
    budget: float,
    principle: Literal["var", "es"],
) -> OptimalContract:
    """VaR/ES premium with a cap on the premium spend.

    The optimal indemnity gains a third threshold: a coverage layer on
    [d1, d2] below the pricing quantile plus tail coverage beyond d3 (fixed
    at the quantile for VaR).  lambda2 >= 0 is found by bisection on the
    budget gap, which shrinks monotonically as lambda2 grows; for each
    lambda2 the multiplier lambda1 = g'(deviation of the retained loss) is a
    fixed point iterated to 1e-8.
    """
    if principle not in ("var", "es"):
        raise DomainError(f"premium principle must be 'var' or 'es', got {principle!r}")
    if not h1.is_deviation:
        raise DomainError("the deviation must use a deviation-class distortion")
    if not h1.second_derivative_at_zero < 0.0:
        raise DomainError("the budget solver requires a distortion strictly concave at zero")
    if not budget > 0.0:
        raise DomainError(f"premium budget must be positive, got {budget!r}")

    unconstrained = (
        solve_var_premium(g, h1, X, p) if principle == "var" else solve_es_premium(g, h1, X, p)
    )
    xp = X.quantile(p)
    edge = _scan_edge(X)
    cum = _h_cumulative(h1, X)
    kinks = (*X.breakpoints(), *h1.kink_locations(X))
    prem = pm.ValueAtRisk(p) if principle == "var" else pm.ExpectedShortfall(p)

    pi0 = unconstrained.premium
    if budget >= pi0 - 1e-12:
        old = unconstrained.contract
        contract = ct.ThreeThreshold(0.0, old.lower_limit, old.upper_deductible)
        dev = cum(old.lower_limit)  # retained deviation integral of the layer below xp
        lambda1 = g.derivative(
            cum(0.0) + cum(min(old.upper_deductible, edge)) - cum(old.lower_limit)
        )
        result = _finish(
            contract,
            g,
            ChoquetDeviation(h1),
            X,
            prem,
            multipliers=(lambda1, 0.0),
            unique=unconstrained.unique,
            diagnostics={"binding": False, "note": "constraint not binding", "budget": budget},
        )
        return result

    def thresholds(l1: float, l2: float) -> tuple[float, float, float]:
        def phi(x: float) -> float:
            s = X.survival(x)
            return 1.0 + l2 - s - l1 * h1.fn(s)

        d1 = sublevel_inf(phi, 0.0, xp, kinks=kinks)
        d2 = sublevel_sup(phi, d1, xp, kinks=kinks) if d1 < xp else xp
        if principle == "var":
            d3 = xp
        else:
            def tail(x: float) -> float:
                s = X.survival(x)
                return l1 * h1.fn(s) - (p + l2) / (1.0 - p) * s

            d3 = sublevel_sup(tail, xp, edge, kinks=kinks, open_right=True)
        return d1, d2, d3

    def solve_inner(l2: float, l1_start: float) -> tuple[float, tuple[float, float, float], int]:
        l1 = l1_start
        prev_step = None
        for inner in range(100):
            d1, d2, d3 = thresholds(l1, l2)
            dev = cum(d1) + cum(min(d3, edge)) - cum(d2)
            l1_next = g.derivative(dev)
            step = l1_next - l1
            if prev_step is not None and step * prev_step < 0.0:
                l1_next = l1 + 0.5 * step
                step = l1_next - l1
            if abs(step) <= 1e-8 * max(1.0, abs(l1)):
                return l1_next, thresholds(l1_next, l2), inner + 1
            l1, prev_step = l1_next, step
        raise SolverError(
            f"lambda1 fixed point did not converge at lambda2={l2!r}; last thresholds {thresholds(l1, l2)!r}"
        )

    def contract_for(l2: float, l1_start: float):
        l1, (d1, d2, d3), inner = solve_inner(l2, l1_start)
        tail_open = d3 >= edge
        d3_eff = X.ess_sup if tail_open else d3
        c = ct.ThreeThreshold(min(d1, d2), d2, max(d2, d3_eff))
        return l1, c, inner

    l1_warm = g.derivative(
        cum(0.0)
        + cum(min(getattr(unconstrained.contract, "upper_deductible", edge), edge))
        - cum(unconstrained.contract.lower_limit)
    )

    def budget_gap(l2: float, warm: float):
        l1, c, inner = contract_for(l2, warm)
        return pm.premium(prem, X, c) - budget, l1, c, inner

    gap0, l1_0, c0, _ = budget_gap(0.0, l1_warm)
    if gap0 <= 0.0:
        # Unconstrained spend already within budget at lambda2 = 0.
        result = _finish(
            c0, g, ChoquetDeviation(h1), X, prem,
            multipliers=(l1_0, 0.0), unique=True,
            diagnostics={"binding": False, "budget": budget},
        )
        return result
    lo, hi = 0.0, 1.0
    l1_hi = l1_0
    for _ in range(60):
        gap_hi, l1_hi, _, _ = budget_gap(hi, l1_hi)
        if gap_hi <= 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise SolverError("could not bracket the budget multiplier lambda2")

    l1_cur = l1_hi
    best = None
    outer = 0
    for outer in range(100):
        mid = 0.5 * (lo + hi)
        gap_mid, l1_cur, c_mid, inner = budget_gap(mid, l1_cur)
        if best is None or abs(gap_mid) < abs(best[0]):
            best = (gap_mid, mid, l1_cur, c_mid, inner)
        if abs(gap_mid) <= 1e-8:
            break
        if gap_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14:
            break
    gap_best, l2_star, l1_star, contract, inner = best
    if abs(gap_best) > 1e-6:
        raise SolverError(
            f"budget binding not reached: residual {gap_best!r} at lambda2={l2_star!r} "
            f"after {outer + 1} outer iterations"
        )
    result = _finish(
        contract,
        g,
        ChoquetDeviation(h1),
        X,
        prem,
        multipliers=(l1_star, l2_star),
        unique=True,
        diagnostics={
            "binding": True,
            "budget": budget,
            "budget_residual": gap_best,
            "outer_iterations": outer + 1,
            "inner_iterations": inner,
            "unconstrained_premium": pi0,
        },
    )
    return result

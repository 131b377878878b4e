"""Brute-force verification of solver optimality on a discretized contract space.

The objective of any admissible contract depends on the contract only through
its marginal coverage q, and on a fixed grid the survival-weighted integrals
are linear in the per-cell slopes.  Precomputing the per-cell weights

    int_cell S_X,   int_cell x S_X,   int_cell h(S_X),   int_cell h2(S_X)

therefore makes the discretized objective exact for piecewise-constant-slope
contracts, so threshold enumeration, random sampling and coordinate descent
search the same objective the solvers optimize (up to grid resolution).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import contracts as ct
from . import premiums as pm
from .distributions import LossDistribution
from .errors import DomainError, InconclusiveError
from .measures import ChoquetDeviation, DeviationMeasure, PenaltyFunction, StandardDeviationMeasure
from .quadrature import integrate

SEARCH_SEED = 0xC0FFEE


@dataclass
class DiscretizedProblem:
    """Grid partition of [0, M_trunc] with precomputed cell weights."""

    X: LossDistribution
    deviation: DeviationMeasure
    principle: pm.PremiumPrinciple
    nodes: np.ndarray          # n + 1 grid nodes, nodes[0] = 0
    s_weights: np.ndarray      # int_cell S_X
    xs_weights: np.ndarray     # int_cell x S_X
    h_weights: np.ndarray | None    # int_cell h1(S_X) for Choquet deviations
    h2_weights: np.ndarray | None   # int_cell h2(S_X) for distortion-type premiums
    quantile_index: int | None      # node index of the pricing quantile, if any

    @property
    def n_cells(self) -> int:
        return len(self.nodes) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @classmethod
    def build(
        cls,
        X: LossDistribution,
        deviation: DeviationMeasure,
        principle: pm.PremiumPrinciple,
        n: int = 64,
        extra_nodes: tuple[float, ...] = (),
    ) -> "DiscretizedProblem":
        upper = X.upper_limit()
        nodes = set(np.linspace(0.0, upper, n + 1))
        nodes.update(b for b in X.breakpoints() if 0.0 < b < upper)
        nodes.update(e for e in extra_nodes if 0.0 < e < upper)
        quantile = None
        if isinstance(principle, (pm.ValueAtRisk, pm.ExpectedShortfall)):
            quantile = X.quantile(principle.level)
            nodes.add(quantile)
        node_arr = np.array(sorted(nodes))

        splits = X.breakpoints()

        def cell_integrals(fn) -> np.ndarray:
            return np.array(
                [integrate(fn, a, b, splits=splits) for a, b in zip(node_arr[:-1], node_arr[1:])]
            )

        s_w = cell_integrals(lambda x: X.survival(x))
        xs_w = cell_integrals(lambda x: x * X.survival(x))
        h_w = None
        if isinstance(deviation, ChoquetDeviation):
            h1 = deviation.distortion
            ksplits = (*splits, *h1.kink_locations(X))
            h_w = np.array(
                [
                    integrate(lambda x: h1.fn(X.survival(x)), a, b, splits=ksplits)
                    for a, b in zip(node_arr[:-1], node_arr[1:])
                ]
            )
        h2_w = None
        if isinstance(principle, pm.ExpectedShortfall):
            c = 1.0 - principle.level
            h2_w = cell_integrals(lambda x: min(X.survival(x) / c, 1.0))
        elif isinstance(principle, pm.DistortionPremium) and principle.distortion.name != "var_premium":
            h2 = principle.distortion
            ksplits = (*splits, *h2.kink_locations(X))
            h2_w = np.array(
                [
                    integrate(lambda x: h2.fn(X.survival(x)), a, b, splits=ksplits)
                    for a, b in zip(node_arr[:-1], node_arr[1:])
                ]
            )
        q_idx = None
        if quantile is not None:
            q_idx = int(np.argmin(np.abs(node_arr - quantile)))
        return cls(
            X=X,
            deviation=deviation,
            principle=principle,
            nodes=node_arr,
            s_weights=s_w,
            xs_weights=xs_w,
            h_weights=h_w,
            h2_weights=h2_w,
            quantile_index=q_idx,
        )

    def indemnity_at_quantile(self, q: np.ndarray) -> np.ndarray:
        """I(x_p) for slope matrix q of shape (..., n_cells)."""
        if self.quantile_index is None:
            raise DomainError("the problem has no pricing quantile")
        w = self.widths[: self.quantile_index]
        return q[..., : self.quantile_index] @ w

    def premium_of(self, q: np.ndarray) -> np.ndarray:
        """Premium of slope vectors under the problem's principle (vectorized)."""
        principle = self.principle
        if isinstance(principle, pm.ExpectedValue):
            return (1.0 + principle.loading) * (q @ self.s_weights)
        if isinstance(principle, pm.ValueAtRisk):
            return self.indemnity_at_quantile(q)
        if isinstance(principle, pm.DistortionPremium) and principle.distortion.name == "var_premium":
            return self.indemnity_at_quantile(q)
        if self.h2_weights is None:
            raise DomainError(f"no premium weights for principle {principle!r}")
        return q @ self.h2_weights

    def retained_deviation_of(self, q: np.ndarray) -> np.ndarray:
        """Deviation of the retained loss for slope vectors (vectorized)."""
        if isinstance(self.deviation, ChoquetDeviation):
            return (1.0 - q) @ self.h_weights
        # Standard deviation: the retained loss is piecewise linear per cell,
        # R(x) = r_i + (1 - q_i)(x - x_i), and E[R^2] = 2 int R R' S.
        one_q = 1.0 - q
        seg = one_q * self.widths
        r_left = np.cumsum(seg, axis=-1) - seg  # retained value at each left node
        x_left = self.nodes[:-1]
        e_r = one_q @ self.s_weights
        e_r2 = 2.0 * np.sum(one_q * ((r_left - one_q * x_left) * self.s_weights + one_q * self.xs_weights), axis=-1)
        return np.sqrt(np.maximum(e_r2 - e_r * e_r, 0.0))


def discrete_objective(
    problem: DiscretizedProblem,
    g: PenaltyFunction,
    q: np.ndarray,
    principle: pm.PremiumPrinciple | None = None,
) -> float | np.ndarray:
    """Objective of piecewise-constant-slope contracts; exact on the grid.

    Accepts a single slope vector or a matrix of candidates (one per row).
    """
    if principle is not None and principle != problem.principle:
        raise DomainError("principle differs from the one the problem was built with")
    q = np.asarray(q, dtype=float)
    if np.any(q < -1e-12) or np.any(q > 1.0 + 1e-12):
        raise DomainError("cell slopes must lie in [0, 1]")
    dev = problem.retained_deviation_of(q)
    e_ind = q @ problem.s_weights
    pi = problem.premium_of(q)
    g_vals = np.vectorize(g, otypes=[float])(dev) if np.ndim(dev) else g(float(dev))
    out = g_vals + problem.X.mean() - e_ind + pi
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# Search strategies
# ---------------------------------------------------------------------------


def _threshold_candidates(problem: DiscretizedProblem, budget: float | None) -> np.ndarray:
    """Slope matrices of all stop-loss, dual-truncated and layered contracts."""
    n = problem.n_cells
    eye = np.tri(n + 1, n, k=-1, dtype=float)  # row i: ones on cells < i
    candidates = []
    # stop-loss at node i: coverage on cells >= i
    candidates.append(1.0 - eye)
    # dual truncated (i <= j): coverage below node i and beyond node j
    ii, jj = np.triu_indices(n + 1)
    candidates.append(eye[ii] + (1.0 - eye[jj]))
    if problem.quantile_index is not None:
        # layered contracts (i <= j <= k): layer on [i, j) plus tail beyond k
        idx = np.array([(i, j, k) for i in range(n + 1) for j in range(i, n + 1) for k in range(j, n + 1)])
        layered = (eye[idx[:, 1]] - eye[idx[:, 0]]) + (1.0 - eye[idx[:, 2]])
        candidates.append(layered)
    q = np.vstack(candidates)
    if budget is not None:
        q = q[problem.premium_of(q) <= budget + 1e-12]
    return q


def _random_candidates(problem: DiscretizedProblem, k: int, budget: float | None, rng) -> np.ndarray:
    q = rng.uniform(0.0, 1.0, size=(k, problem.n_cells))
    if budget is not None:
        paid = problem.premium_of(q)
        over = paid > budget
        # premiums are linear in q, so scaling restores feasibility exactly
        scale = np.ones_like(paid)
        scale[over] = budget / paid[over]
        q = q * scale[:, None]
    return q


def _coordinate_descent(
    problem: DiscretizedProblem,
    g: PenaltyFunction,
    restarts: int,
    budget: float | None,
    rng,
) -> tuple[np.ndarray, float]:
    n = problem.n_cells
    starts = [np.full(n, 0.5)]
    starts += [rng.uniform(0.0, 1.0, size=n) for _ in range(max(restarts - 1, 0))]
    gr = 0.5 * (math.sqrt(5.0) - 1.0)
    best_q, best_val = None, math.inf
    for q in starts:
        if budget is not None:
            paid = float(problem.premium_of(q))
            if paid > budget:
                q = q * (budget / paid)
        val = float(discrete_objective(problem, g, q))
        for _ in range(60):
            improved = False
            for i in range(n):
                base = q[i]
                lo, hi = 0.0, 1.0
                if budget is not None:
                    unit = float(problem.premium_of(np.eye(n)[i]))
                    if unit > 0.0:
                        paid = float(problem.premium_of(q))
                        hi = min(1.0, base + (budget - paid) / unit)

                def section(t: float) -> float:
                    q[i] = t
                    out = float(discrete_objective(problem, g, q))
                    q[i] = base
                    return out

                # golden-section on the convex 1-d section, then compare endpoints
                a, b = lo, hi
                c = b - gr * (b - a)
                d = a + gr * (b - a)
                fc, fd = section(c), section(d)
                for _ in range(40):
                    if fc < fd:
                        b, d, fd = d, c, fc
                        c = b - gr * (b - a)
                        fc = section(c)
                    else:
                        a, c, fc = c, d, fd
                        d = a + gr * (b - a)
                        fd = section(d)
                trials = [(section(t), t) for t in (lo, 0.5 * (a + b), hi)]
                f_best, t_best = min(trials)
                if f_best < val - 1e-13:
                    val = f_best
                    q[i] = t_best
                    improved = True
            if not improved:
                break
        if val < best_val:
            best_q, best_val = q.copy(), val
    return best_q, best_val


def search_contracts(
    problem: DiscretizedProblem,
    g: PenaltyFunction,
    principle: pm.PremiumPrinciple | None = None,
    strategy: str = "threshold_grid",
    *,
    samples: int = 10_000,
    restarts: int = 8,
    budget: float | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, float]:
    """Best contract found by the requested strategy: (slopes, objective)."""
    if principle is not None and principle != problem.principle:
        raise DomainError("principle differs from the one the problem was built with")
    rng = rng if rng is not None else np.random.default_rng(SEARCH_SEED)
    if strategy == "threshold_grid":
        q = _threshold_candidates(problem, budget)
    elif strategy == "random_lipschitz":
        q = _random_candidates(problem, samples, budget, rng)
    elif strategy == "coordinate_descent":
        return _coordinate_descent(problem, g, restarts, budget, rng)
    else:
        raise DomainError(f"unknown search strategy {strategy!r}")
    vals = discrete_objective(problem, g, q)
    best = int(np.argmin(vals))
    return q[best], float(vals[best])


def aligned_slopes(problem: DiscretizedProblem, contract: ct.Indemnity) -> np.ndarray:
    """Slope vector of a parametric contract evaluated at cell midpoints.

    Exact whenever the contract's breakpoints are grid nodes.
    """
    mids = 0.5 * (problem.nodes[:-1] + problem.nodes[1:])
    return np.array([contract.marginal(float(m)) for m in mids])


# ---------------------------------------------------------------------------
# Convex-order check
# ---------------------------------------------------------------------------


def convex_order_check(
    y1: np.ndarray,
    y2: np.ndarray,
    d_grid: np.ndarray,
    tolerance: float | None = None,
) -> bool:
    """Empirical stop-loss order test: E[(Y1 - d)_+] <= E[(Y2 - d)_+] on the grid.

    Requires the sample means to agree within three standard errors of their
    difference; otherwise the stop-loss order is not a convex-order proxy and
    the check raises :class:`InconclusiveError`.
    """
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    se = math.sqrt(y1.var(ddof=1) / y1.size + y2.var(ddof=1) / y2.size)
    if abs(y1.mean() - y2.mean()) > 3.0 * se:
        raise InconclusiveError(
            f"sample means differ by {abs(y1.mean() - y2.mean()):.4g} "
            f"(> 3 SE = {3.0 * se:.4g}); stop-loss order is inconclusive for convex order"
        )
    for d in np.asarray(d_grid, dtype=float):
        s1 = float(np.mean(np.clip(y1 - d, 0.0, None)))
        s2 = float(np.mean(np.clip(y2 - d, 0.0, None)))
        if tolerance is None:
            se1 = np.clip(y1 - d, 0.0, None).std(ddof=1) / math.sqrt(y1.size)
            se2 = np.clip(y2 - d, 0.0, None).std(ddof=1) / math.sqrt(y2.size)
            tol = 3.0 * math.hypot(se1, se2)
        else:
            tol = tolerance
        if s1 > s2 + tol:
            return False
    return True

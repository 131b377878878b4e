"""Loss distributions on [0, M] and the partial moments the solvers consume.

Every loss X >= 0 enters the optimization through four quantities: the
survival function S(x) = P(X > x), the left quantile, the stop-loss
transform E[(X - d)_+] = int_d^M S(x) dx, and the truncated moments

    w1(d) = int_0^d S(x) dx,        w2(d) = 2 int_0^d x S(x) dx,

which are the first and second moment of X ^ d.  The analytic families
(uniform, exponential, Pareto) use closed forms throughout; the empirical
family uses exact sums over the sorted sample.  Survival functions of the
analytic families are continuous and strictly decreasing on the support,
which the optimality conditions rely on.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UnboundedError

# Integrals over unbounded support are truncated at quantile(1 - TAIL_MASS):
# every integrand downstream contains S_X or h(S_X), so the neglected tail is
# below the quadrature tolerance.
TAIL_MASS = 1e-10


class LossDistribution(abc.ABC):
    """Non-negative loss with survival, quantile and partial-moment access."""

    @property
    @abc.abstractmethod
    def ess_sup(self) -> float:
        """Essential supremum M of the loss (may be ``math.inf``)."""

    @property
    def ess_inf(self) -> float:
        return 0.0

    @abc.abstractmethod
    def survival(self, x: float) -> float:
        """S(x) = P(X > x) for x >= 0."""

    @abc.abstractmethod
    def quantile(self, p: float) -> float:
        """Left quantile inf{x : P(X <= x) >= p} for p in (0, 1]."""

    @abc.abstractmethod
    def mean(self) -> float: ...

    @abc.abstractmethod
    def second_moment(self) -> float: ...

    @abc.abstractmethod
    def stop_loss(self, d: float) -> float:
        """E[(X - d)_+] for d >= 0."""

    @abc.abstractmethod
    def truncated_moments(self, d: float) -> tuple[float, float]:
        """(w1(d), w2(d)), the first and second moment of X ^ d."""

    def breakpoints(self) -> tuple[float, ...]:
        """Interior kinks of the survival function, declared to quadrature."""
        return ()

    def upper_limit(self) -> float:
        """Finite upper integration limit: M, or quantile(1 - TAIL_MASS)."""
        m = self.ess_sup
        return m if math.isfinite(m) else self.quantile(1.0 - TAIL_MASS)

    @staticmethod
    def _check_x(x: float) -> None:
        if x < 0.0 or math.isnan(x):
            raise DomainError(f"loss argument must be non-negative, got {x!r}")

    @staticmethod
    def _check_d(d: float) -> None:
        if d < 0.0 or math.isnan(d):
            raise DomainError(f"deductible must be non-negative, got {d!r}")

    def _check_p(self, p: float) -> float:
        if not 0.0 < p <= 1.0:
            raise DomainError(f"probability level must lie in (0, 1], got {p!r}")
        if p == 1.0 and not math.isfinite(self.ess_sup):
            raise UnboundedError("quantile(1) is infinite for unbounded support")
        return p


@dataclass(frozen=True)
class Uniform(LossDistribution):
    """Uniform loss on [a, b] with 0 <= a < b."""

    a: float
    b: float

    def __post_init__(self):
        if not (0.0 <= self.a < self.b):
            raise DomainError(f"uniform support requires 0 <= a < b, got a={self.a!r}, b={self.b!r}")

    @property
    def ess_sup(self) -> float:
        return self.b

    @property
    def ess_inf(self) -> float:
        return self.a

    def survival(self, x: float) -> float:
        self._check_x(x)
        if x <= self.a:
            return 1.0
        if x >= self.b:
            return 0.0
        return (self.b - x) / (self.b - self.a)

    def quantile(self, p: float) -> float:
        self._check_p(p)
        return self.a + p * (self.b - self.a)

    def mean(self) -> float:
        return 0.5 * (self.a + self.b)

    def second_moment(self) -> float:
        return (self.a * self.a + self.a * self.b + self.b * self.b) / 3.0

    def stop_loss(self, d: float) -> float:
        self._check_d(d)
        if d >= self.b:
            return 0.0
        if d <= self.a:
            return self.mean() - d
        return (self.b - d) ** 2 / (2.0 * (self.b - self.a))

    def truncated_moments(self, d: float) -> tuple[float, float]:
        self._check_d(d)
        a, b = self.a, self.b
        if d >= b:
            return self.mean(), self.second_moment()
        if d <= a:
            return d, d * d
        w1 = a + ((b - a) ** 2 - (b - d) ** 2) / (2.0 * (b - a))
        w2 = (d**3 - a**3) / (3.0 * (b - a)) + d * d * (b - d) / (b - a)
        return w1, w2

    def breakpoints(self) -> tuple[float, ...]:
        return (self.a,) if self.a > 0.0 else ()


@dataclass(frozen=True)
class Exponential(LossDistribution):
    """Exponential loss with rate lambda > 0 (mean 1/lambda)."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0.0:
            raise DomainError(f"exponential rate must be positive, got {self.rate!r}")

    @property
    def ess_sup(self) -> float:
        return math.inf

    def survival(self, x: float) -> float:
        self._check_x(x)
        return math.exp(-self.rate * x)

    def quantile(self, p: float) -> float:
        self._check_p(p)
        return -math.log1p(-p) / self.rate

    def mean(self) -> float:
        return 1.0 / self.rate

    def second_moment(self) -> float:
        return 2.0 / (self.rate * self.rate)

    def stop_loss(self, d: float) -> float:
        self._check_d(d)
        return math.exp(-self.rate * d) / self.rate

    def truncated_moments(self, d: float) -> tuple[float, float]:
        self._check_d(d)
        lam = self.rate
        if not math.isfinite(d):
            return self.mean(), self.second_moment()
        e = math.exp(-lam * d)
        w1 = (1.0 - e) / lam
        w2 = 2.0 / (lam * lam) * (1.0 - e) - 2.0 / lam * d * e
        return w1, w2


@dataclass(frozen=True)
class Pareto(LossDistribution):
    """Pareto (Lomax) loss with S(x) = (1 + x / scale)^(-tail).

    Any tail > 0 is accepted at construction so that the survival function is
    available for heavy tails; moments raise when they do not exist
    (mean needs tail > 1, second moment needs tail > 2).
    """

    tail: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.tail > 0.0:
            raise DomainError(f"pareto tail parameter must be positive, got {self.tail!r}")
        if not self.scale > 0.0:
            raise DomainError(f"pareto scale must be positive, got {self.scale!r}")

    @property
    def ess_sup(self) -> float:
        return math.inf

    def survival(self, x: float) -> float:
        self._check_x(x)
        return (1.0 + x / self.scale) ** (-self.tail)

    def quantile(self, p: float) -> float:
        self._check_p(p)
        return self.scale * ((1.0 - p) ** (-1.0 / self.tail) - 1.0)

    def mean(self) -> float:
        if self.tail <= 1.0:
            raise DomainError(f"pareto mean is infinite for tail={self.tail!r} <= 1")
        return self.scale / (self.tail - 1.0)

    def second_moment(self) -> float:
        if self.tail <= 2.0:
            raise DomainError(f"pareto second moment is infinite for tail={self.tail!r} <= 2")
        return 2.0 * self.scale**2 / ((self.tail - 1.0) * (self.tail - 2.0))

    def stop_loss(self, d: float) -> float:
        self._check_d(d)
        if self.tail <= 1.0:
            raise DomainError(f"pareto stop-loss transform is infinite for tail={self.tail!r} <= 1")
        return self.scale / (self.tail - 1.0) * (1.0 + d / self.scale) ** (1.0 - self.tail)

    def upper_limit(self) -> float:
        # The polynomial tail decays too slowly for the mass-based cut: push the
        # truncation point until the neglected stop-loss tail is below tolerance.
        u = self.quantile(1.0 - TAIL_MASS)
        if self.tail > 1.0:
            target = TAIL_MASS * (1.0 + self.mean())
            ratio = (self.mean() / target) ** (1.0 / (self.tail - 1.0))
            u = max(u, self.scale * (ratio - 1.0))
        return u

    def truncated_moments(self, d: float) -> tuple[float, float]:
        self._check_d(d)
        th, sc = self.tail, self.scale
        if not math.isfinite(d):
            return self.mean(), self.second_moment()
        u = 1.0 + d / sc
        if th == 1.0:
            w1 = sc * math.log(u)
        else:
            w1 = sc / (th - 1.0) * (1.0 - u ** (1.0 - th))
        if th == 1.0:
            inner = (u - 1.0) - math.log(u)
        elif th == 2.0:
            inner = math.log(u) + 1.0 / u - 1.0
        else:
            inner = (u ** (2.0 - th) - 1.0) / (2.0 - th) - (u ** (1.0 - th) - 1.0) / (1.0 - th)
        return w1, 2.0 * sc * sc * inner


@dataclass(frozen=True)
class Empirical(LossDistribution):
    """Empirical loss carried by a sorted sample of non-negative reals.

    The survival function is the right-continuous step complement of the
    empirical cdf, so every distributional quantity is an exact sample sum.
    """

    values: tuple[float, ...]
    _sorted: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size == 0:
            raise DomainError("empirical sample must be non-empty")
        if np.any(vals < 0.0) or np.any(~np.isfinite(vals)):
            raise DomainError("empirical sample must consist of finite non-negative reals")
        vals = np.sort(vals)
        object.__setattr__(self, "values", tuple(float(v) for v in vals))
        object.__setattr__(self, "_sorted", vals)

    @property
    def ess_sup(self) -> float:
        return float(self._sorted[-1])

    @property
    def ess_inf(self) -> float:
        return float(self._sorted[0])

    @property
    def size(self) -> int:
        return int(self._sorted.size)

    def survival(self, x: float) -> float:
        self._check_x(x)
        n = self._sorted.size
        return 1.0 - np.searchsorted(self._sorted, x, side="right") / n

    def quantile(self, p: float) -> float:
        self._check_p(p)
        n = self._sorted.size
        idx = max(int(math.ceil(n * p)) - 1, 0)
        return float(self._sorted[min(idx, n - 1)])

    def mean(self) -> float:
        return float(self._sorted.mean())

    def second_moment(self) -> float:
        return float(np.mean(self._sorted**2))

    def stop_loss(self, d: float) -> float:
        self._check_d(d)
        return float(np.mean(np.clip(self._sorted - d, 0.0, None)))

    def truncated_moments(self, d: float) -> tuple[float, float]:
        self._check_d(d)
        capped = np.minimum(self._sorted, d)
        return float(capped.mean()), float(np.mean(capped**2))

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(np.unique(self._sorted))

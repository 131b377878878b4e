"""Premium principles for pricing an indemnity I(X).

Four principles are supported: the expected-value principle
(1 + theta) E[I(X)], the VaR and ES principles at a level p, and the
general distortion premium int h2(S_{I(X)}(x)) dx.  Because admissible
indemnities are increasing and 1-Lipschitz, every distortion premium
reduces to a survival-weighted integral of the marginal coverage,

    Pi_h2(I(X)) = int h2(S_X(x)) q(x) dx,

and the VaR premium collapses to the pointwise value I(VaR_p(X)).
"""

from __future__ import annotations

from dataclasses import dataclass

from .contracts import Indemnity, apply, expected_indemnity, marginal_weighted_integral
from .distributions import LossDistribution
from .errors import DomainError
from .measures import Distortion, es_premium


@dataclass(frozen=True)
class ExpectedValue:
    """Expected-value principle with safety loading theta > 0."""

    loading: float

    def __post_init__(self):
        if not self.loading > 0.0:
            raise DomainError(f"safety loading must be positive, got {self.loading!r}")


@dataclass(frozen=True)
class ValueAtRisk:
    """VaR principle at level p in (0, 1)."""

    level: float

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise DomainError(f"VaR premium level must lie in (0, 1), got {self.level!r}")


@dataclass(frozen=True)
class ExpectedShortfall:
    """ES principle at level p in (0, 1)."""

    level: float

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise DomainError(f"ES premium level must lie in (0, 1), got {self.level!r}")


@dataclass(frozen=True)
class DistortionPremium:
    """General distortion premium with an increasing premium-class distortion."""

    distortion: Distortion

    def __post_init__(self):
        if self.distortion.is_deviation:
            raise DomainError("distortion premium requires a premium-class distortion")


PremiumPrinciple = ExpectedValue | ValueAtRisk | ExpectedShortfall | DistortionPremium


def premium(principle: PremiumPrinciple, X: LossDistribution, contract: Indemnity) -> float:
    """Premium Pi(I(X)) of a contract under the given principle."""
    if isinstance(principle, ExpectedValue):
        return (1.0 + principle.loading) * expected_indemnity(X, contract)
    if isinstance(principle, ValueAtRisk):
        # The contract is flat at the quantile on a set of measure zero, so the
        # premium is read off pointwise rather than via the step distortion.
        return apply(contract, X.quantile(principle.level))
    if isinstance(principle, ExpectedShortfall):
        h2 = es_premium(principle.level)
        return marginal_weighted_integral(X, h2.fn, contract, extra_splits=h2.kink_locations(X))
    if isinstance(principle, DistortionPremium):
        h2 = principle.distortion
        if h2.name == "var_premium":
            return apply(contract, X.quantile(h2.level))
        return marginal_weighted_integral(X, h2.fn, contract, extra_splits=h2.kink_locations(X))
    raise DomainError(f"unknown premium principle {principle!r}")

"""Betting-style e-value components for bounded means and one-sided risks.

Two concrete component families:

* two-sided bounded-mean bets ``1 + lam * (z - theta)`` for ``z in [0, 1]``
  against the null ``mean = theta``, with bets in ``(-c/(1-theta), c/theta)``;
* one-sided risk bets ``1 + lam * (loss - m0)`` against the null
  ``risk <= m0``, with bets in ``[0, c/m0)``.

The truncation level ``c`` is solved so the components' certified bounds
admit a target label budget: shrinking the bet range raises the lower
component bound ``1 - c``, which lowers the minimum collection
probability ``1 - a/b`` down to the budget.  Bets themselves come from
the aGRAPA plug-in, clamped strictly inside the truncated range.

All functions broadcast over numpy arrays, so a theta-grid (or a batch
of Monte Carlo replicas) is one call.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# aGRAPA prior: one pseudo-observation at the null with the worst-case
# variance of a [0, 1] variable.
PRIOR_VAR = 0.25

# Relative margin keeping clamped bets strictly inside the open bet range,
# hence components strictly positive.
CLAMP_REL = 1e-9


def mean_max_factor(theta):
    """max{theta/(1-theta), (1-theta)/theta}, the two-sided range factor."""
    theta = np.asarray(theta, dtype=float)
    out = np.maximum(theta / (1.0 - theta), (1.0 - theta) / theta)
    return out if out.ndim else float(out)


def mean_component(z, theta, lam):
    """Two-sided bounded-mean component ``1 + lam * (z - theta)``.

    ``lam`` must lie strictly inside the maximal range
    ``(-1/(1-theta), 1/theta)`` so the component stays positive.
    """
    z = np.asarray(z, dtype=float)
    theta = np.asarray(theta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(theta <= 0.0) or np.any(theta >= 1.0):
        raise ValueError("theta must lie in (0, 1)")
    if np.any(lam <= -1.0 / (1.0 - theta)) or np.any(lam >= 1.0 / theta):
        raise ValueError("bet outside the admissible range (-1/(1-theta), 1/theta)")
    out = 1.0 + lam * (z - theta)
    return out if out.ndim else float(out)


def mean_component_bounds(theta, c):
    """Certified bounds of the truncated mean component: (1-c, 1+c*max{...})."""
    theta = np.asarray(theta, dtype=float)
    c = np.asarray(c, dtype=float)
    lo = 1.0 - c
    hi = 1.0 + c * mean_max_factor(theta)
    if lo.ndim or hi.ndim:
        return np.broadcast_arrays(lo, hi)
    return float(lo), float(hi)


def solve_c_mean(theta, pi_inf):
    """Truncation level making the mean family's budget constraint tight.

    Solves ``1 - (1-c) / (1 + c*M) = pi_inf`` with
    ``M = max{theta/(1-theta), (1-theta)/theta}``, in closed form
    ``c = pi_inf / (1 + (1 - pi_inf) * M)``.
    """
    pi_inf = np.asarray(pi_inf, dtype=float)
    if np.any(pi_inf <= 0.0) or np.any(pi_inf > 1.0):
        raise ValueError("pi_inf must lie in (0, 1]")
    out = pi_inf / (1.0 + (1.0 - pi_inf) * mean_max_factor(theta))
    return out if out.ndim else float(out)


def risk_max_factor(m0):
    """max{1/m0 - 1, 0}, the one-sided component's upper range factor."""
    m0 = np.asarray(m0, dtype=float)
    out = np.maximum(1.0 / m0 - 1.0, 0.0)
    return out if out.ndim else float(out)


def risk_component(loss, m0, lam):
    """One-sided risk component ``1 + lam * (loss - m0)`` with lam in [0, 1/m0)."""
    loss = np.asarray(loss, dtype=float)
    m0 = np.asarray(m0, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(m0 <= 0.0) or np.any(m0 > 1.0):
        raise ValueError("m0 must lie in (0, 1]")
    if np.any(lam < 0.0) or np.any(lam >= 1.0 / m0):
        raise ValueError("bet outside the admissible range [0, 1/m0)")
    out = 1.0 + lam * (loss - m0)
    return out if out.ndim else float(out)


def risk_component_bounds(m0, c):
    """Certified bounds of the truncated risk component: (1-c, 1+c*max{1/m0-1, 0})."""
    m0 = np.asarray(m0, dtype=float)
    c = np.asarray(c, dtype=float)
    lo = 1.0 - c
    hi = 1.0 + c * risk_max_factor(m0)
    if lo.ndim or hi.ndim:
        return np.broadcast_arrays(lo, hi)
    return float(lo), float(hi)


def solve_c_risk(m0, pi_inf):
    """Truncation level making the risk family's budget constraint tight."""
    pi_inf = np.asarray(pi_inf, dtype=float)
    if np.any(pi_inf <= 0.0) or np.any(pi_inf > 1.0):
        raise ValueError("pi_inf must lie in (0, 1]")
    out = pi_inf / (1.0 + (1.0 - pi_inf) * risk_max_factor(m0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MeanBetConfig:
    """Truncated betting setup against the null mean ``theta``."""

    theta: float
    c: float
    pi_inf: float

    @classmethod
    def from_budget(cls, theta: float, pi_inf: float) -> "MeanBetConfig":
        return cls(theta=theta, c=solve_c_mean(theta, pi_inf), pi_inf=pi_inf)

    @property
    def bet_range(self) -> tuple[float, float]:
        return (-self.c / (1.0 - self.theta), self.c / self.theta)

    @property
    def component_bounds(self) -> tuple[float, float]:
        return mean_component_bounds(self.theta, self.c)


@dataclass(frozen=True)
class RiskBetConfig:
    """Truncated one-sided betting setup against ``risk <= m0``."""

    m0: float
    c: float
    pi_inf: float

    @classmethod
    def from_budget(cls, m0: float, pi_inf: float) -> "RiskBetConfig":
        return cls(m0=m0, c=solve_c_risk(m0, pi_inf), pi_inf=pi_inf)

    @property
    def bet_range(self) -> tuple[float, float]:
        return (0.0, self.c / self.m0)

    @property
    def component_bounds(self) -> tuple[float, float]:
        return risk_component_bounds(self.m0, self.c)


@dataclass(frozen=True)
class BetState:
    """Sufficient statistics behind aGRAPA bets (Welford form).

    ``m2`` is the sum of squared deviations, so the tracked variance is
    ``m2 / count``.  Fields may be numpy arrays: a whole theta-grid (or a
    batch of replicas) updates as one state.
    """

    count: int | np.ndarray
    mean: float | np.ndarray
    m2: float | np.ndarray

    @classmethod
    def with_prior(cls, theta) -> "BetState":
        """One pseudo-observation at the null with variance ``PRIOR_VAR``."""
        theta = np.asarray(theta, dtype=float)
        mean = theta if theta.ndim else float(theta)
        m2 = np.full_like(theta, PRIOR_VAR) if theta.ndim else PRIOR_VAR
        return cls(count=1, mean=mean, m2=m2)

    def update(self, z) -> "BetState":
        count = self.count + 1
        delta = z - self.mean
        mean = self.mean + delta / count
        m2 = self.m2 + delta * (z - mean)
        return replace(self, count=count, mean=mean, m2=m2)

    @property
    def variance(self):
        return self.m2 / self.count


def agrapa_bet(state: BetState, theta, lo, hi):
    """aGRAPA plug-in bet, clamped strictly inside ``(lo, hi)``.

    ``lam = (mean - theta) / (variance + (mean - theta)^2)``, the
    approximate log-optimal bet for the tracked first two moments.
    """
    theta = np.asarray(theta, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo >= hi):
        raise ValueError("bet range must satisfy lo < hi")
    gap = np.asarray(state.mean, dtype=float) - theta
    denom = state.variance + gap * gap
    with np.errstate(invalid="ignore", divide="ignore"):
        lam = np.where(denom > 0.0, gap / denom, 0.0)
    delta = CLAMP_REL * (hi - lo)
    out = np.clip(lam, lo + delta, hi - delta)
    return out if out.ndim else float(out)

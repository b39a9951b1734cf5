"""Confidence sequences by e-value inversion over a theta-grid.

Each grid point carries its own truncated betting e-process against the
null ``mean = theta``; the level-alpha confidence set at time n is
``{theta : E(theta) < 1/alpha}``, and intersecting these sets over time
tightens them without losing anytime validity.

One datum produces one collection coin shared by the whole grid: a real
label, once bought, serves every null simultaneously.  The per-theta
truncation levels are solved for a common budget, so the grid-wide
policy floor equals that budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from . import betting
from .betting import CLAMP_REL, BetState, agrapa_bet, mean_component
from .evalue import EPS_FLOOR, ppi_component
from .rng import RngState, substream, uniform

GRID_SIZE = 512
GRID_LO = 0.001
GRID_HI = 0.999

MODES = ("ppi", "labels_only", "imputation")


@dataclass(frozen=True)
class ThetaGrid:
    """Sorted nulls in (0, 1) with per-theta truncation and bounds."""

    points: np.ndarray
    c: np.ndarray
    pi_inf: float

    @classmethod
    def regular(cls, size: int = GRID_SIZE, lo: float = GRID_LO, hi: float = GRID_HI,
                pi_inf: float = 1.0, include: Iterable[float] = ()) -> "ThetaGrid":
        """Uniform grid; any ``include`` value replaces its nearest point."""
        points = np.linspace(lo, hi, size)
        for value in include:
            if not (lo <= value <= hi):
                raise ValueError(f"required grid point {value} outside [{lo}, {hi}]")
            points[np.argmin(np.abs(points - value))] = value
        points = np.unique(points)
        return cls(points=points, c=betting.solve_c_mean(points, pi_inf), pi_inf=pi_inf)

    def __post_init__(self):
        if np.any(self.points <= 0.0) or np.any(self.points >= 1.0):
            raise ValueError("grid points must lie in (0, 1)")
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("grid points must be strictly increasing")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def bet_lo(self) -> np.ndarray:
        return -self.c / (1.0 - self.points)

    @property
    def bet_hi(self) -> np.ndarray:
        return self.c / self.points

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Certified component bounds under the strict bet clamp.

        Bets are clamped ``delta`` inside the open range, so realized
        components sit strictly inside the nominal bounds; certifying the
        tightened range keeps the lower bound positive even at c = 1.
        """
        nominal_lo, nominal_hi = betting.mean_component_bounds(self.points, self.c)
        delta = CLAMP_REL * (self.bet_hi - self.bet_lo)
        near = np.minimum(self.points, 1.0 - self.points)
        far = np.maximum(self.points, 1.0 - self.points)
        return nominal_lo + delta * near, nominal_hi - delta * far

    @property
    def pi_floor(self) -> float:
        """Grid-wide collection floor: max over theta, plus the strict margin."""
        a, b = self.bounds
        return float(min(1.0, np.max(1.0 - a / b) + EPS_FLOOR))

    def index_of(self, theta: float) -> int:
        idx = int(np.argmin(np.abs(self.points - theta)))
        if not math.isclose(self.points[idx], theta, rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"{theta} is not a grid point")
        return idx


@dataclass(frozen=True)
class PLandscape:
    """Per-theta e-process states advanced by one shared coin per datum.

    ``mode`` selects what multiplies into the processes: the corrected
    prediction-powered component ("ppi"), the raw labeled component on
    collected steps only ("labels_only"), or the raw imputed component
    ("imputation" -- the invalid baseline).  All entries share ``n``,
    ``labels_used`` and the rng, which is the shared-coin invariant.
    """

    grid: ThetaGrid
    mode: str
    log_e: np.ndarray
    bets: BetState
    n: int = 0
    labels_used: int = 0
    rng: RngState = RngState(key=0, counter=0)

    @classmethod
    def fresh(cls, grid: ThetaGrid, seed: int | str, mode: str = "ppi",
              coin: str = "coin") -> "PLandscape":
        if mode not in MODES:
            raise ValueError(f"unknown landscape mode: {mode!r}")
        return cls(
            grid=grid,
            mode=mode,
            log_e=np.zeros(len(grid)),
            bets=BetState.with_prior(grid.points),
            rng=substream(seed, coin),
        )

    @property
    def e_values(self) -> np.ndarray:
        # distant nulls legitimately overflow to inf in the linear domain
        with np.errstate(over="ignore"):
            return np.exp(self.log_e)


def update_landscape(landscape: PLandscape, x, maybe_y, policy, predictor) -> PLandscape:
    """Advance every theta entry by one datum under one shared coin.

    ``policy`` maps features to a collection probability (clamped up to
    the grid's floor in ppi mode); ``predictor`` supplies the imputed
    outcome value.  Collected outcomes must be present: ``maybe_y`` may
    be None only if the coin comes up 0, otherwise it is a hard fault.
    """
    grid = landscape.grid
    pi = float(policy(x))
    if landscape.mode == "ppi":
        pi = max(pi, grid.pi_floor)
    u, rng = uniform(landscape.rng)
    xi = int(u < pi)
    if xi and maybe_y is None:
        raise ValueError("label collected but no outcome available")

    z_mu = float(predictor.predict(x))
    lam = agrapa_bet(landscape.bets, grid.points, grid.bet_lo, grid.bet_hi)

    if landscape.mode == "labels_only":
        if xi:
            log_e = landscape.log_e + np.log(mean_component(maybe_y, grid.points, lam))
            bets = landscape.bets.update(float(maybe_y))
        else:
            log_e = landscape.log_e
            bets = landscape.bets
    elif landscape.mode == "imputation":
        log_e = landscape.log_e + np.log(mean_component(z_mu, grid.points, lam))
        bets = landscape.bets.update(z_mu)
    else:
        a, b = grid.bounds
        e_mu = np.clip(mean_component(z_mu, grid.points, lam), a, b)
        e_y = np.clip(mean_component(maybe_y, grid.points, lam), a, b) if xi else None
        comp = ppi_component(e_mu, e_y, xi, pi, (a, b))
        if np.any(comp <= 0.0):
            raise FloatingPointError("ppi component hit zero; policy floor violated")
        log_e = landscape.log_e + np.log(comp)
        bets = landscape.bets.update(float(maybe_y) if xi else z_mu)

    return replace(
        landscape,
        log_e=log_e,
        bets=bets,
        n=landscape.n + 1,
        labels_used=landscape.labels_used + xi,
        rng=rng,
    )


def invert(landscape: PLandscape, alpha: float) -> np.ndarray:
    """Level-alpha confidence set as a boolean mask: ``E(theta) < 1/alpha``."""
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    return landscape.log_e < -math.log(alpha)


def running_intersection(sets: Iterable[np.ndarray]) -> np.ndarray:
    """Elementwise intersection of confidence-set masks over time."""
    out = None
    for mask in sets:
        out = np.array(mask, dtype=bool) if out is None else out & np.asarray(mask, dtype=bool)
    if out is None:
        raise ValueError("need at least one set")
    return out


def landscape_rows(landscape: PLandscape) -> list[tuple[float, float, float]]:
    """(theta, e_value, p_landscape) rows; p_landscape = min(1, 1/e)."""
    e = landscape.e_values
    with np.errstate(divide="ignore", over="ignore"):
        p = np.minimum(1.0, 1.0 / e)
    return list(zip(landscape.grid.points.tolist(), e.tolist(), p.tolist()))

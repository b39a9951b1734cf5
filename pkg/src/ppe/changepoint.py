"""Change-point detection atop confidence sequences.

A confidence sequence is started at every time step (thinned to a
bounded set of active starts); a change is declared the first time two
active starts carry disjoint running-intersection confidence sets, since
no single parameter value can then explain both segments.  The declared
location is the midpoint of the closest such pair of start indices.

The significance level is split evenly across the ``max_active`` starts,
so each start's sequence runs at level ``alpha / max_active`` and a
union bound controls false alarms.

The detector state holds every active start's theta-grid e-processes as
stacked float32 arrays with a leading replica axis, so one state object
advances hundreds of Monte Carlo replicas per step at numpy speed; the
single-stream API is the one-replica special case.  (float32 is ample:
log e-processes here move by ~1e-4 per step against thresholds of ~5,
and detection is a coarse threshold crossing.)

Two equivalences keep the hot loop lean:

* a theta stays in the running-intersection set iff the running maximum
  of its log e-process never reached the threshold, so only that maximum
  is tracked and masks are materialized at detection checks;
* bets only need to be predictable, so the aGRAPA coefficients are
  refreshed every few steps (and on every collection) rather than every
  step, and the imputed component is cached between refreshes -- it is
  exact in between because the imputation value moves only on
  collections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .betting import CLAMP_REL, PRIOR_VAR
from .confseq import ThetaGrid
from .rng import RngState, substream, uniforms

_LAM_REFRESH = 4


def cp_start_schedule(n: int, max_active: int) -> np.ndarray:
    """Start indices (1-based) to keep at time ``n``: geometric ages.

    Ages 1, ceil(rho), ceil(rho^2), ... with rho chosen so at most
    ``max_active`` distinct ages fit in [1, n]; collisions bump upward.
    Always keeps the newest (age 1) and oldest (age n) starts.
    """
    if max_active < 2:
        raise ValueError("max_active must be at least 2")
    if n <= max_active:
        return np.arange(1, n + 1)
    rho = n ** (1.0 / (max_active - 1))
    ages = []
    prev = 0
    for k in range(max_active):
        age = min(max(math.ceil(rho**k), prev + 1), n)
        ages.append(age)
        prev = age
        if age == n:
            break
    ages[-1] = n
    starts = n - np.array(sorted(set(ages)), dtype=int) + 1
    return np.sort(starts)


@dataclass
class ChangePointConfig:
    grid: ThetaGrid
    pi: float
    max_active: int = 10
    mode: str = "ppi"  # "ppi" | "labels_only"
    mu_init: float = 0.5
    mu_gain: float = 0.2  # EWMA gain per collected outcome for the imputation value
    check_stride: int = 1

    def __post_init__(self):
        if self.mode not in ("ppi", "labels_only"):
            raise ValueError(f"unknown detector mode: {self.mode!r}")
        if not (0.0 < self.pi <= 1.0):
            raise ValueError("pi must lie in (0, 1]")


class ChangePointState:
    """Active-start confidence sequences plus detection bookkeeping.

    Mutable accumulator: ``cp_step`` advances it in place and returns it.
    Once a replica's detection fires its verdict is frozen; stepping a
    fully fired single-replica state is an error.
    """

    def __init__(self, config: ChangePointConfig, seed: int | str, n_replicas: int = 1,
                 coin: str = "cp-coin"):
        self.config = config
        grid = config.grid
        n_slots = config.max_active + 1
        shape = (n_replicas, n_slots, len(grid))
        self.n = 0
        self.n_replicas = n_replicas
        self.rng: RngState = substream(seed, coin)
        # grid constants, cached once (float32 copies for the hot loop); the
        # bet-clamp margin must be visible at float32 resolution, else bets
        # land exactly on the open range edge and components can hit zero
        margin = max(CLAMP_REL, 1e-6)
        self.theta = grid.points.astype(np.float32)
        self.lam_lo = (grid.bet_lo + margin * (grid.bet_hi - grid.bet_lo)).astype(np.float32)
        self.lam_hi = (grid.bet_hi - margin * (grid.bet_hi - grid.bet_lo)).astype(np.float32)
        a, b = grid.bounds
        self.bound_lo = a.astype(np.float32)
        self.bound_hi = b.astype(np.float32)
        self.pi_eff = max(config.pi, grid.pi_floor) if config.mode == "ppi" else config.pi
        # Exact-arithmetic lower bound of the corrected component, per theta.
        # float32 values below it are rounding error and are clamped up to it.
        self.comp_floor = np.maximum(
            (a - (1.0 - self.pi_eff) * b) / self.pi_eff, 1e-12
        ).astype(np.float32)

        self.log_e = np.zeros(shape, dtype=np.float32)
        self.max_log_e = np.zeros(shape, dtype=np.float32)
        self.bet_mean = np.broadcast_to(self.theta, shape).astype(np.float32).copy()
        self.bet_m2 = np.full(shape, PRIOR_VAR, dtype=np.float32)
        self.bet_count = np.ones((n_replicas, n_slots, 1), dtype=np.float32)
        # cached predictable bets and imputed components (see module docstring)
        self.lam = np.zeros(shape, dtype=np.float32)
        self.e_mu = np.ones(shape, dtype=np.float32)
        self.log_e_mu = np.zeros(shape, dtype=np.float32)
        self.slot_start = np.full(n_slots, -1, dtype=int)  # -1 = free slot
        self.mu = np.full(n_replicas, config.mu_init, dtype=np.float32)
        self.labels_used = np.zeros(n_replicas, dtype=int)
        self.detected = np.zeros(n_replicas, dtype=bool)
        self.detected_at = np.full(n_replicas, -1, dtype=int)
        self.declared = np.full(n_replicas, -1.0)
        self._schedule_cache: tuple[int, np.ndarray] | None = None

    @property
    def active_starts(self) -> np.ndarray:
        return np.sort(self.slot_start[self.slot_start > 0])

    def intersection_mask(self, slot: int, alpha: float) -> np.ndarray:
        """Running-intersection confidence set of one start, per replica."""
        threshold = -math.log(alpha / self.config.max_active)
        return self.max_log_e[:, slot, :] < np.float32(threshold)

    def _spawn(self, start: int) -> None:
        slot = int(np.argmin(self.slot_start))  # a free (-1) slot always exists
        if self.slot_start[slot] > 0:
            raise RuntimeError("no free start slot")
        self.slot_start[slot] = start
        self.log_e[:, slot, :] = 0.0
        self.max_log_e[:, slot, :] = 0.0
        self.bet_mean[:, slot, :] = self.theta
        self.bet_m2[:, slot, :] = PRIOR_VAR
        self.bet_count[:, slot, :] = 1.0
        self.lam[:, slot, :] = 0.0
        self.e_mu[:, slot, :] = 1.0
        self.log_e_mu[:, slot, :] = 0.0

    def _thin(self) -> None:
        # The geometric template drifts slowly; a slightly stale, shifted copy
        # is fine once n is large (the oldest start is always kept).
        if self._schedule_cache is None or self.n - self._schedule_cache[0] >= 16 or self.n < 64:
            self._schedule_cache = (self.n, cp_start_schedule(self.n, self.config.max_active))
        shift = self.n - self._schedule_cache[0]
        targets = self._schedule_cache[1] + shift
        if shift:
            targets[0] = 1  # starts are sorted ascending: first is the oldest
        extant = [s for s in self.slot_start if s > 0]
        keep: set[int] = set()
        for target in targets:
            candidates = sorted((abs(s - target), s) for s in extant if s not in keep)
            if candidates:
                keep.add(candidates[0][1])
        for slot, start in enumerate(self.slot_start):
            if start > 0 and start not in keep:
                self.slot_start[slot] = -1

    def _refresh_bets(self, rows=None) -> None:
        sel = slice(None) if rows is None else rows
        gap = self.bet_mean[sel] - self.theta
        denom = self.bet_m2[sel] / self.bet_count[sel]
        denom += gap * gap
        lam = np.divide(gap, denom, out=denom)
        np.maximum(lam, self.lam_lo, out=lam)
        np.minimum(lam, self.lam_hi, out=lam)
        self.lam[sel] = lam
        if self.config.mode == "ppi":
            e_mu = lam * (self.mu[sel, None, None] - self.theta)
            e_mu += np.float32(1.0)
            np.maximum(e_mu, self.bound_lo, out=e_mu)
            np.minimum(e_mu, self.bound_hi, out=e_mu)
            self.e_mu[sel] = e_mu
            self.log_e_mu[sel] = np.log(e_mu)


def _welford(state: ChangePointState, z_bet_col: np.ndarray, rows=None) -> None:
    if rows is None:
        state.bet_count += np.float32(1.0)
        diff = z_bet_col - state.bet_mean
        state.bet_mean += diff / state.bet_count
        state.bet_m2 += diff * (z_bet_col - state.bet_mean)
    else:
        count = state.bet_count[rows] + np.float32(1.0)
        diff = z_bet_col - state.bet_mean[rows]
        mean = state.bet_mean[rows] + diff / count
        state.bet_m2[rows] += diff * (z_bet_col - mean)
        state.bet_mean[rows] = mean
        state.bet_count[rows] = count


def _advance(state: ChangePointState, z: np.ndarray, alpha: float) -> None:
    """One shared-coin step of every active start's grid, all replicas."""
    cfg = state.config
    state.n += 1
    state._spawn(state.n)

    pi = state.pi_eff
    u, state.rng = uniforms(state.rng, state.n_replicas)
    xi = u < pi
    state.labels_used += xi
    rows = np.nonzero(xi)[0]
    z32 = z.astype(np.float32)

    if state.n % _LAM_REFRESH == 1:
        state._refresh_bets()

    if cfg.mode == "ppi":
        state.log_e += state.log_e_mu
        if rows.size:
            e_y = state.lam[rows] * (z32[rows, None, None] - state.theta)
            e_y += np.float32(1.0)
            np.maximum(e_y, state.bound_lo, out=e_y)
            np.minimum(e_y, state.bound_hi, out=e_y)
            e_y -= np.float32(1.0 - pi) * state.e_mu[rows]
            e_y *= np.float32(1.0 / pi)
            np.maximum(e_y, state.comp_floor, out=e_y)
            # replace the imputed contribution with the corrected one
            state.log_e[rows] += np.log(e_y) - state.log_e_mu[rows]
        np.maximum(state.max_log_e, state.log_e, out=state.max_log_e)
        z_bet = np.where(xi, z32, state.mu).astype(np.float32)
        _welford(state, z_bet[:, None, None])
    else:
        # labels-only: nothing moves on uncollected steps
        if rows.size:
            e_y = state.lam[rows] * (z32[rows, None, None] - state.theta)
            e_y += np.float32(1.0)
            # exact arithmetic keeps clamped components strictly positive;
            # anything at or below zero here is float32 rounding
            np.maximum(e_y, np.float32(1e-10), out=e_y)
            np.log(e_y, out=e_y)
            state.log_e[rows] += e_y
            np.maximum(state.max_log_e[rows], state.log_e[rows],
                       out=e_y)
            state.max_log_e[rows] = e_y
            _welford(state, z32[rows, None, None], rows=rows)

    # Imputation value updates only from collected outcomes, after use;
    # clipped away from 0/1 so imputed components stay off the bound corners.
    # The moved rows' cached bets/components refresh for the next step.
    if rows.size:
        state.mu[rows] += np.float32(cfg.mu_gain) * (z32[rows] - state.mu[rows])
        np.clip(state.mu, 0.01, 0.99, out=state.mu)
        state._refresh_bets(rows=rows)

    state._thin()


def _check_detection(state: ChangePointState, alpha: float) -> None:
    """Fire detection for replicas where two active starts' sets are disjoint."""
    undetected = ~state.detected
    if not np.any(undetected):
        return
    threshold = np.float32(-math.log(alpha / state.config.max_active))
    slots = [slot for slot, start in enumerate(state.slot_start) if start > 0]
    masks = {slot: state.max_log_e[:, slot, :] < threshold for slot in slots}
    pairs = []
    for i_pos, si in enumerate(slots):
        for sj in slots[i_pos + 1:]:
            lo, hi = sorted((state.slot_start[si], state.slot_start[sj]))
            pairs.append((hi - lo, lo, hi, si, sj))
    pairs.sort()
    for _, lo, hi, si, sj in pairs:
        disjoint = ~np.any(masks[si] & masks[sj], axis=-1)
        fire = disjoint & undetected
        if np.any(fire):
            state.detected[fire] = True
            state.detected_at[fire] = state.n
            state.declared[fire] = (lo + hi) / 2.0
            undetected = undetected & ~fire
            if not np.any(undetected):
                return


def cp_step(state: ChangePointState, datum, alpha: float) -> ChangePointState:
    """Advance the detector by one outcome value in [0, 1].

    ``datum`` is a scalar for single-replica states or an array with one
    value per replica.  Raises once every replica has fired.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    if np.all(state.detected):
        raise ValueError("detection already fired; state is frozen")
    z = np.broadcast_to(np.asarray(datum, dtype=float), (state.n_replicas,))
    _advance(state, z, alpha)
    if state.n % state.config.check_stride == 0:
        _check_detection(state, alpha)
    return state

"""Core prediction-powered e-process machinery.

A product e-value multiplies predictably bounded per-step components
``e_i(y) in [a, b]`` with ``a > 0``.  When the outcome ``y`` is expensive,
each step instead uses an imputed component from a predictor and, with
probability ``pi >= 1 - a/b``, collects the real outcome and applies an
inverse-propensity correction:

    xi = 0:  e_mu
    xi = 1:  (e_y - (1 - pi) * e_mu) / pi

The correction has conditional mean ``E[e(Y)]`` and stays nonnegative as
long as ``pi`` respects the bound, so the running product remains a valid
e-process while consuming only a ``pi`` fraction of the labels.
Accumulation happens in the log domain; e-processes routinely span many
orders of magnitude.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from .rng import RngState, substream, uniform

# Collection probabilities must sit strictly above 1 - a/b by this margin
# before a stream will accept them: it keeps the xi=1 branch strictly
# positive, so the log never overflows.
EPS_FLOOR = 1e-9

# Components are clamped into [a, b] after evaluation; clamps larger than
# this (relative) are counted as warnings since they indicate the caller's
# certified bounds are wrong, not floating-point drift.
CLAMP_WARN_REL = 1e-9

_STATE_VERSION = 1


@dataclass
class EComponentSpec:
    """A per-step e-value component with certified bounds.

    ``eval`` maps an outcome value to a component value that must lie in
    ``[a, b]`` with ``0 < a <= b``.  Evaluations are clamped into the
    certified range; clamps beyond ``CLAMP_WARN_REL`` relative are counted
    in ``clamp_warnings`` because they break the validity precondition.
    """

    eval: Callable[[Any], float]
    a: float
    b: float
    clamp_warnings: int = field(default=0, compare=False)

    def __post_init__(self):
        if not (0.0 < self.a <= self.b):
            raise ValueError(f"component bounds must satisfy 0 < a <= b, got ({self.a}, {self.b})")

    def evaluate(self, y) -> float:
        value = float(self.eval(y))
        clipped = min(max(value, self.a), self.b)
        excess = abs(value - clipped)
        if excess > CLAMP_WARN_REL * max(1.0, abs(value)):
            self.clamp_warnings += 1
        return clipped


@dataclass(frozen=True)
class Observation:
    """One datum of the augmented stream: features, optional outcome, coin."""

    x: Any
    y: Any
    xi: int
    pi: float

    def __post_init__(self):
        if self.xi not in (0, 1):
            raise ValueError(f"xi must be 0 or 1, got {self.xi}")
        if self.xi == 1 and self.y is None:
            raise ValueError("xi=1 requires the collected outcome y")
        if not (0.0 <= self.pi <= 1.0):
            raise ValueError(f"pi must lie in [0, 1], got {self.pi}")


@dataclass(frozen=True)
class PPIStream:
    """Accumulator state of one prediction-powered e-process.

    A pure value: ``step`` returns a new state.  ``log_e`` is the running
    log of the e-process, ``labels_used`` counts collected outcomes, and
    ``rng`` is the stream's private coin for collection decisions.
    """

    log_e: float = 0.0
    n: int = 0
    labels_used: int = 0
    rng: RngState = RngState(key=0, counter=0)

    @classmethod
    def fresh(cls, seed: int | str, name: str = "stream") -> "PPIStream":
        return cls(rng=substream(seed, name))

    @property
    def e_value(self) -> float:
        return math.exp(self.log_e)


def min_collection_prob(a: float, b: float) -> float:
    """Smallest admissible collection probability, ``1 - a/b``."""
    if not (0.0 < a <= b):
        raise ValueError(f"bounds must satisfy 0 < a <= b, got ({a}, {b})")
    return 1.0 - a / b


def pi_floor(a, b):
    """Collection probability actually demanded of callers.

    ``min_collection_prob`` plus the strict-interior margin, capped at 1.
    Works elementwise on arrays of bounds.
    """
    return np.minimum(1.0, (1.0 - np.asarray(a) / np.asarray(b)) + EPS_FLOOR)


def ppi_component(e_mu, e_y, xi, pi, bounds):
    """Prediction-powered component: imputed value or corrected collection.

    Vectorized over any broadcastable combination of arguments.  ``e_y``
    may be None (or NaN entries) wherever ``xi`` is 0.  Raises on inputs
    outside the certified bounds or on collection probabilities below
    ``1 - a/b``; both indicate caller misconfiguration rather than data.
    """
    a, b = bounds
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(a > b):
        raise ValueError("bounds must satisfy 0 < a <= b")
    e_mu = np.asarray(e_mu, dtype=float)
    xi = np.asarray(xi)
    pi = np.asarray(pi, dtype=float)

    tol = 1e-9
    if not np.all(np.isfinite(e_mu)):
        raise ValueError("imputed component must be finite")
    if np.any(e_mu < a * (1 - tol)) or np.any(e_mu > b * (1 + tol)):
        raise ValueError("imputed component outside certified bounds [a, b]")
    if np.any(pi > 1.0 + tol) or np.any(pi <= 0.0):
        raise ValueError("pi must lie in (0, 1]")
    floor = 1.0 - a / b
    if np.any(pi < floor - tol):
        raise ValueError("pi below 1 - a/b: label budget incompatible with component bounds")

    e_y_arr = np.asarray(np.nan if e_y is None else e_y, dtype=float)
    e_mu, e_y_arr, xi, pi, a, b = np.broadcast_arrays(e_mu, e_y_arr, xi, pi, a, b)
    collected = xi == 1
    if np.any(collected):
        vals = e_y_arr[collected]
        if np.any(np.isnan(vals)):
            raise ValueError("xi=1 requires the collected component e_y")
        lo, hi = a[collected], b[collected]
        if np.any(vals < lo * (1 - tol)) or np.any(vals > hi * (1 + tol)):
            raise ValueError("collected component outside certified bounds [a, b]")

    with np.errstate(invalid="ignore"):
        corrected = (e_y_arr - (1.0 - pi) * e_mu) / pi
    out = np.where(collected, corrected, e_mu)
    # Guard against sign flips from rounding when pi sits at the bound.
    if np.any(out < -tol * b):
        raise ValueError("negative component: admissibility preconditions violated")
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def draw_xi(pi: float, rng: RngState) -> tuple[int, RngState]:
    """Bernoulli(pi) collection indicator, deterministic given the state."""
    if not (0.0 <= pi <= 1.0):
        raise ValueError(f"pi must lie in [0, 1], got {pi}")
    u, rng = uniform(rng)
    return int(u < pi), rng


def step(stream: PPIStream, obs: Observation, spec: EComponentSpec, predictor_value) -> PPIStream:
    """Advance the e-process by one observation.

    The imputed component comes from ``spec`` applied to the predictor's
    value; the collected component (when ``obs.xi == 1``) from the true
    outcome.  A component of exactly zero is a hard fault: it can only
    happen when the caller ignored the strict-interior policy floor.
    """
    e_mu = spec.evaluate(predictor_value)
    e_y = spec.evaluate(obs.y) if obs.xi == 1 else None
    comp = ppi_component(e_mu, e_y, obs.xi, obs.pi, (spec.a, spec.b))
    if comp <= 0.0:
        raise FloatingPointError(
            "ppi component hit zero; collection probability must exceed 1 - a/b + EPS_FLOOR"
        )
    return replace(
        stream,
        log_e=stream.log_e + math.log(comp),
        n=stream.n + 1,
        labels_used=stream.labels_used + obs.xi,
    )


def advance(stream: PPIStream, x, y, pi: float, spec: EComponentSpec, predictor_value) -> PPIStream:
    """Draw the collection coin from the stream's own rng, then step."""
    xi, rng = draw_xi(pi, stream.rng)
    obs = Observation(x=x, y=y if xi else None, xi=xi, pi=pi)
    return step(replace(stream, rng=rng), obs, spec, predictor_value)


def to_record(stream: PPIStream) -> dict:
    """Versioned checkpoint record for a stream state."""
    return {
        "version": _STATE_VERSION,
        "log_e": stream.log_e,
        "n": stream.n,
        "labels_used": stream.labels_used,
        "rng_key": stream.rng.key,
        "rng_counter": stream.rng.counter,
    }


def from_record(record: dict) -> PPIStream:
    if record.get("version") != _STATE_VERSION:
        raise ValueError(f"unsupported stream record version: {record.get('version')!r}")
    return PPIStream(
        log_e=float(record["log_e"]),
        n=int(record["n"]),
        labels_used=int(record["labels_used"]),
        rng=RngState(key=int(record["rng_key"]), counter=int(record["rng_counter"])),
    )


def dumps(stream: PPIStream) -> str:
    return json.dumps(to_record(stream), sort_keys=True)


def loads(payload: str) -> PPIStream:
    return from_record(json.loads(payload))

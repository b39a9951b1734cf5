"""p-to-e calibration with clipping and budget-driven rescaling.

Any valid p-value becomes a valid e-value through the calibrator

    PToE(p) = (1 - p + p*log(p)) / (p * log(p)^2),

which integrates to exactly 1 over (0, 1], is nonincreasing, and is
continuously extended by PToE(1) = 1/2.  To give calibrated components
certified bounds, p-values are clipped to ``[P_FLOOR, 1]`` before
calibration (clipping preserves validity), and the output is rescaled by

    rescale_eta(e) = eta * (e - 1) + 1,

with ``eta`` solved so the rescaled bounds admit a target label budget.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

P_FLOOR = 1e-7

# Below this distance from p = 1 the direct formula loses all precision to
# cancellation; a second-order series in q = 1 - p takes over (error O(q^3)).
_SERIES_CUTOFF = 1e-6


def ptoe(p):
    """Calibrate a p-value into an e-value; vectorized, >= 1/2 everywhere."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p > 1.0):
        raise ValueError("p must lie in (0, 1]")
    out = np.empty_like(p)
    near_one = p > 1.0 - _SERIES_CUTOFF
    q = 1.0 - p[near_one]
    out[near_one] = 0.5 + q / 6.0 + q * q * 0.125
    rest = ~near_one
    pr = p[rest]
    log_p = np.log(pr)
    out[rest] = (1.0 - pr + pr * log_p) / (pr * log_p * log_p)
    return out if out.ndim else float(out)


def clip_p(p):
    """Clip p-values up to ``P_FLOOR`` so calibrated values stay bounded."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("p must lie in [0, 1]")
    out = np.maximum(p, P_FLOOR)
    return out if out.ndim else float(out)


def rescale(e, eta):
    """Affine shrink toward 1: ``eta * (e - 1) + 1``; fixes e = 1 for any eta."""
    e = np.asarray(e, dtype=float)
    if np.any(e < 0.0):
        raise ValueError("e must be nonnegative")
    out = eta * (e - 1.0) + 1.0
    return out if out.ndim else float(out)


def solve_eta_for_budget(e_min: float, e_max: float, pi_inf: float) -> float:
    """Rescaling level at which the calibrated family meets the label budget.

    The rescaled bounds are ``a = 1 - eta*(1 - e_min)`` and
    ``b = 1 + eta*(e_max - 1)``; solving ``1 - a/b = pi_inf`` gives

        eta = pi_inf / ((1 - e_min) + (1 - pi_inf) * (e_max - 1)).

    A budget so lax that eta would exceed 1 clamps to 1 with a warning.
    """
    if not (0.0 < e_min < 1.0 < e_max):
        raise ValueError("need e_min < 1 < e_max")
    if not (0.0 < pi_inf <= 1.0):
        raise ValueError("pi_inf must lie in (0, 1]")
    eta = pi_inf / ((1.0 - e_min) + (1.0 - pi_inf) * (e_max - 1.0))
    if eta > 1.0:
        warnings.warn("label budget admits untruncated calibration; clamping eta to 1")
        return 1.0
    return eta


@dataclass(frozen=True)
class CalibratorConfig:
    """Clip/calibrate/rescale pipeline with its certified bounds."""

    eta: float
    p_floor: float = P_FLOOR
    e_min: float = 0.5
    e_max: float = ptoe(P_FLOOR)

    @classmethod
    def from_budget(cls, pi_inf: float) -> "CalibratorConfig":
        e_min = ptoe(1.0)
        e_max = ptoe(P_FLOOR)
        return cls(eta=solve_eta_for_budget(e_min, e_max, pi_inf), e_min=e_min, e_max=e_max)

    @property
    def bounds(self) -> tuple[float, float]:
        return (1.0 - self.eta * (1.0 - self.e_min), 1.0 + self.eta * (self.e_max - 1.0))

    def component(self, p):
        """Full pipeline: rescale(ptoe(clip_p(p)), eta)."""
        return rescale(ptoe(clip_p(p)), self.eta)

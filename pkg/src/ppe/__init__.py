"""Prediction-powered e-processes under a label-collection budget.

Turns any predictably bounded product e-value into one that consumes
only a fraction of the expensive outcomes, and builds hypothesis tests,
confidence sequences, change-point detection and constraint-based causal
discovery on top.
"""

__version__ = "0.1.0"

from .betting import BetState, MeanBetConfig, RiskBetConfig, agrapa_bet, solve_c_mean, solve_c_risk
from .calibrate import CalibratorConfig, clip_p, ptoe, rescale, solve_eta_for_budget
from .confseq import PLandscape, ThetaGrid, invert, running_intersection, update_landscape
from .evalue import (
    EComponentSpec,
    Observation,
    PPIStream,
    draw_xi,
    min_collection_prob,
    ppi_component,
    step,
)

__all__ = [
    "BetState",
    "CalibratorConfig",
    "EComponentSpec",
    "MeanBetConfig",
    "Observation",
    "PLandscape",
    "PPIStream",
    "RiskBetConfig",
    "ThetaGrid",
    "agrapa_bet",
    "clip_p",
    "draw_xi",
    "invert",
    "min_collection_prob",
    "ppi_component",
    "ptoe",
    "rescale",
    "running_intersection",
    "solve_c_mean",
    "solve_c_risk",
    "solve_eta_for_budget",
    "step",
    "update_landscape",
]

"""Case-study drivers: mean estimation, risk monitoring, change-point
detection, and causal discovery, at desk scale.

Every driver runs its comparison arms on one shared stream and one shared
collection coin per seed, writes plot-ready CSV/DOT artifacts plus a JSON
summary stamped with the resolved config and its hash, and is
byte-reproducible for a fixed seed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import datasets
from .betting import (
    BetState,
    CLAMP_REL,
    RiskBetConfig,
    agrapa_bet,
    mean_component,
    risk_component,
)
from .calibrate import CalibratorConfig
from .causal import (
    Batch,
    RidgePredictor,
    pc_search,
    skeleton_metrics,
    synth_scm,
    to_dot,
)
from .changepoint import ChangePointConfig, ChangePointState, cp_step
from .confseq import PLandscape, ThetaGrid, invert, landscape_rows, update_landscape
from .evalue import EPS_FLOOR, ppi_component
from .policies import approx_optimal_pi, taylor_coeffs
from .predictors import EwmaMean, OnlineLogistic
from .rng import substream, uniforms

EPS_TOL = 0.05  # risk-monitoring tolerance added to the validation loss

CASE_DEFAULTS = {
    "mean": {"n": 5000, "pi_inf": 0.01, "theta": 0.3, "grid_size": 512},
    "risk": {"n": 10_000, "pi_inf": 0.005},
    "changepoint": {"n": 150_000, "pi_inf": 0.005, "grid_size": 25, "max_active": 10},
    "causal": {"n_batches": 200, "batch_size": 100, "pi_inf": 0.10,
               "edge_prob": 0.4, "max_cond_size": 2},
}

MEAN_ARMS = ("labels_only", "ppi", "active", "imputation")


@dataclass
class StreamConfig:
    case: str
    out_dir: str = "out"
    seed: int = 0
    n: int | None = None
    alpha: float = 0.05
    pi_inf: float | None = None
    policy: str = "constant"
    arms: tuple = ()
    dataset: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path, **overrides) -> "StreamConfig":
        with open(path) as fh:
            raw = json.load(fh)
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)

    def resolved(self) -> dict:
        out = asdict(self)
        defaults = CASE_DEFAULTS.get(self.case, {})
        if out["n"] is None:
            out["n"] = defaults.get("n")
        if out["pi_inf"] is None:
            out["pi_inf"] = defaults.get("pi_inf")
        merged = dict(defaults)
        merged.update(out["options"])
        out["options"] = merged
        out["arms"] = list(out["arms"]) or list(MEAN_ARMS)
        return out

    def validate(self) -> dict:
        if self.case not in CASE_DEFAULTS:
            raise ValueError(f"unknown case {self.case!r}; expected one of {sorted(CASE_DEFAULTS)}")
        out = self.resolved()
        if not (0.0 < out["alpha"] < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if not (0.0 < out["pi_inf"] <= 1.0):
            raise ValueError("budget pi_inf must lie in (0, 1]")
        if self.case != "causal" and (out["n"] is None or out["n"] < 10):
            raise ValueError("n must be at least 10")
        if self.policy not in ("constant", "active"):
            raise ValueError("policy must be 'constant' or 'active'")
        unknown = [a for a in out["arms"] if a not in MEAN_ARMS]
        if unknown:
            raise ValueError(f"unknown arms {unknown}; expected among {MEAN_ARMS}")
        return out


def config_hash(resolved: dict) -> str:
    """Hash of the experiment definition (the output path is not part of it)."""
    payload = {k: v for k, v in resolved.items() if k != "out_dir"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _write_summary(path: Path, resolved: dict, payload: dict) -> None:
    payload = dict(payload)
    payload["config"] = resolved
    payload["config_hash"] = config_hash(resolved)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _mask_intervals(grid: ThetaGrid, mask: np.ndarray) -> list:
    """Contiguous [lo, hi] theta segments of a confidence-set mask."""
    out = []
    points = grid.points
    run = None
    for k, keep in enumerate(mask):
        if keep and run is None:
            run = k
        elif not keep and run is not None:
            out.append([float(points[run]), float(points[k - 1])])
            run = None
    if run is not None:
        out.append([float(points[run]), float(points[-1])])
    return out


# ---------------------------------------------------------------------------
# Mean estimation


def run_case_mean(config: StreamConfig) -> dict:
    """Four-arm prevalence estimation on a shared stream and coin."""
    res = config.validate()
    opts, seed, alpha = res["options"], res["seed"], res["alpha"]
    n, pi_inf = res["n"], res["pi_inf"]
    out_dir = Path(res["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    if res["dataset"].get("csv"):
        ds = res["dataset"]
        feats, ys = datasets.ingest_csv(ds["csv"], ds["feature_cols"], ds["label_col"],
                                        label_domain=(0.0, 1.0), shuffle_seed=seed)
        if len(ys) < n:
            n = len(ys)
        theta_star = None
    else:
        theta_star = opts["theta"]
        feats, ys = datasets.bernoulli_mean_stream(theta_star, n, seed)

    include = [theta_star] if theta_star is not None else []
    grids = {
        "ppi": ThetaGrid.regular(size=opts["grid_size"], pi_inf=pi_inf, include=include),
        "free": ThetaGrid.regular(size=opts["grid_size"], pi_inf=1.0, include=include),
    }
    arms = [a for a in res["arms"] if a in MEAN_ARMS]
    active_arms = {"active"} | ({"ppi"} if res["policy"] == "active" else set())
    landscapes = {}
    for arm in arms:
        grid = grids["ppi"] if arm in ("ppi", "active") else grids["free"]
        mode = {"labels_only": "labels_only", "imputation": "imputation"}.get(arm, "ppi")
        landscapes[arm] = PLandscape.fresh(grid, seed=seed, mode=mode, coin="mean-coin")
    predictors = {arm: OnlineLogistic(feats.shape[1]) for arm in arms}
    inter = {arm: np.ones(len(landscapes[arm].grid), dtype=bool) for arm in arms}
    coeffs = taylor_coeffs(1.5)
    ref_mean = EwmaMean(init=0.5, gain=0.1)  # collected-label mean, drives theta_ref

    def active_pi(ls: PLandscape, predictor, x) -> float:
        # component ratio evaluated at the grid point nearest the running
        # labeled-mean estimate; any predictable reference is admissible
        grid = ls.grid
        ref = int(np.argmin(np.abs(grid.points - ref_mean.value)))
        theta_ref = float(grid.points[ref])
        lam_ref = float(agrapa_bet(ls.bets, grid.points, grid.bet_lo, grid.bet_hi)[ref])
        p1 = min(max(predictor.predict(x), 0.0), 1.0)
        numer = p1 * mean_component(1.0, theta_ref, lam_ref) \
            + (1.0 - p1) * mean_component(0.0, theta_ref, lam_ref)
        e_mu = mean_component(p1, theta_ref, lam_ref)
        return approx_optimal_pi(numer / e_mu, coeffs, pi_inf)

    trajectory = []
    for i in range(n):
        x, y = feats[i], float(ys[i])
        for arm in arms:
            ls = landscapes[arm]
            pi_here = active_pi(ls, predictors[arm], x) if arm in active_arms else pi_inf
            before = ls.labels_used
            ls = update_landscape(ls, x, y, lambda _x, _p=pi_here: _p, predictors[arm])
            if ls.labels_used > before:
                predictors[arm].update(x, y)
                if arm == arms[0]:
                    ref_mean.update(x, y)
            landscapes[arm] = ls
            inter[arm] &= invert(ls, alpha)
        if theta_star is not None and (i + 1) % max(1, n // 500) == 0:
            row = [i + 1]
            with np.errstate(over="ignore"):  # inf renders fine in the CSV
                for arm in arms:
                    idx = landscapes[arm].grid.index_of(theta_star)
                    row.append(float(np.exp(landscapes[arm].log_e[idx])))
            trajectory.append(row)

    summary_arms = {}
    for arm in arms:
        ls = landscapes[arm]
        _write_csv(out_dir / f"landscape_{arm}.csv", ["theta", "e_value", "p_landscape"],
                   landscape_rows(ls))
        entry = {
            "labels_used": int(ls.labels_used),
            "confidence_set": _mask_intervals(ls.grid, invert(ls, alpha)),
            "running_intersection": _mask_intervals(ls.grid, inter[arm]),
        }
        if theta_star is not None:
            idx = ls.grid.index_of(theta_star)
            entry["covers_truth"] = bool(inter[arm][idx])
        summary_arms[arm] = entry
    if trajectory and theta_star is not None:
        _write_csv(out_dir / "trajectory.csv", ["n"] + [f"e_{a}" for a in arms], trajectory)
    _write_summary(out_dir / "summary.json", res,
                   {"case": "mean", "theta_star": theta_star, "arms": summary_arms})
    return {"arms": summary_arms, "out_dir": str(out_dir)}


# ---------------------------------------------------------------------------
# Risk monitoring


def _risk_bounds(cfg: RiskBetConfig) -> tuple[float, float]:
    # certified bounds under the strict bet clamp (see ThetaGrid.bounds)
    lo, hi = cfg.bet_range
    delta = CLAMP_REL * (hi - lo)
    a, b = cfg.component_bounds
    return a + delta * cfg.m0, b - delta * (1.0 - cfg.m0)


class _RiskArm:
    """Scalar risk e-process for one arm of the monitoring case."""

    def __init__(self, mode: str, m0: float, pi_inf: float):
        self.mode = mode
        self.m0 = m0
        self.cfg = RiskBetConfig.from_budget(m0, 1.0 if mode in ("labels_only", "imputation")
                                             else pi_inf)
        a, b = _risk_bounds(self.cfg)
        self.bounds = (a, b)
        self.pi = max(pi_inf, min(1.0, 1.0 - a / b + EPS_FLOOR)) if mode in ("ppi", "active") \
            else pi_inf
        self.bets = BetState.with_prior(m0)
        self.log_e = 0.0
        self.max_log_e = 0.0
        self.labels_used = 0
        self.rejected_at: int | None = None

    def _lam(self) -> float:
        lo, hi = self.cfg.bet_range
        delta = CLAMP_REL * (hi - lo)
        return float(np.clip(agrapa_bet(self.bets, self.m0, lo, hi), 0.0, hi - delta))

    def step(self, i: int, xi: int, loss: float | None, mu_loss: float, alpha: float,
             pi_used: float | None = None) -> None:
        lam = self._lam()
        if self.mode == "labels_only":
            if xi:
                self.log_e += math.log(risk_component(loss, self.m0, lam))
                self.bets = self.bets.update(loss)
        elif self.mode == "imputation":
            self.log_e += math.log(risk_component(mu_loss, self.m0, lam))
            self.bets = self.bets.update(mu_loss)
        else:
            a, b = self.bounds
            pi = self.pi if pi_used is None else pi_used
            e_mu = float(np.clip(risk_component(mu_loss, self.m0, lam), a, b))
            e_y = float(np.clip(risk_component(loss, self.m0, lam), a, b)) if xi else None
            comp = ppi_component(e_mu, e_y, xi, pi, (a, b))
            if comp <= 0.0:
                raise FloatingPointError("risk ppi component hit zero; policy floor violated")
            self.log_e += math.log(comp)
            self.bets = self.bets.update(loss if xi else mu_loss)
        self.labels_used += xi
        self.max_log_e = max(self.max_log_e, self.log_e)
        if self.rejected_at is None and self.max_log_e >= math.log(1.0 / alpha):
            self.rejected_at = i


def run_case_risk(config: StreamConfig) -> dict:
    """Anytime-valid monitoring of a frozen model on clean and drifting streams."""
    res = config.validate()
    seed, alpha, n, pi_inf = res["seed"], res["alpha"], res["n"], res["pi_inf"]
    out_dir = Path(res["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    monitored_model = datasets.train_monitored_model(seed)
    m0 = monitored_model.val_risk + EPS_TOL
    arms = [a for a in res["arms"] if a in MEAN_ARMS]
    summary = {"val_risk": monitored_model.val_risk, "m0": m0, "streams": {}}

    for stream_name, schedule in (("clean", None), ("poisoned", datasets.flip_prob_risk)):
        feats, losses = datasets.poisoned_loss_stream(
            monitored_model, n, seed, schedule=schedule, name=f"risk-{stream_name}")
        coin, _ = uniforms(substream(seed, "risk-coin"), n)
        arm_state = {arm: _RiskArm(arm, m0, pi_inf) for arm in arms}
        # feature-blind loss predictor: at a sub-1% budget the drift signal
        # lives in the loss rate, not the features, and an EWMA anchored at
        # the known validation risk adapts within a handful of collections
        loss_predictor = {arm: EwmaMean(init=monitored_model.val_risk, gain=0.2)
                          for arm in arms}
        coeffs = taylor_coeffs(1.5)
        # one collection probability for every constant-policy arm, so the
        # shared coin yields identical label sets across those arms
        pi_shared = _RiskArm("ppi", m0, pi_inf).pi
        rows = []
        stride = max(1, n // 1000)
        for i in range(n):
            x, loss = feats[i], float(losses[i])
            for arm in arms:
                state = arm_state[arm]
                mu_loss = min(max(loss_predictor[arm].predict(x), 0.0), 1.0)
                if arm == "active":
                    lam = state._lam()
                    numer = mu_loss * risk_component(1.0, m0, lam) \
                        + (1.0 - mu_loss) * risk_component(0.0, m0, lam)
                    r = numer / risk_component(mu_loss, m0, lam)
                    pi_here = max(approx_optimal_pi(r, coeffs, pi_inf), state.pi)
                else:
                    pi_here = pi_shared
                xi = int(coin[i] < pi_here)
                state.step(i + 1, xi, loss if xi else None, mu_loss, alpha, pi_used=pi_here)
                if xi:
                    loss_predictor[arm].update(x, loss)
            if (i + 1) % stride == 0:
                rows.append([i + 1] + [float(np.exp(min(arm_state[a].log_e, 700))) for a in arms])
        _write_csv(out_dir / f"trajectory_{stream_name}.csv",
                   ["n"] + [f"e_{a}" for a in arms], rows)
        summary["streams"][stream_name] = {
            arm: {"rejected_at": arm_state[arm].rejected_at,
                  "labels_used": arm_state[arm].labels_used,
                  "final_log_e": arm_state[arm].log_e}
            for arm in arms
        }
    _write_summary(out_dir / "summary.json", res, {"case": "risk", **summary})
    return summary


# ---------------------------------------------------------------------------
# Change-point detection


def run_case_changepoint(config: StreamConfig) -> dict:
    """Detect the onset of label poisoning in the monitored loss stream."""
    res = config.validate()
    seed, alpha, n, pi_inf = res["seed"], res["alpha"], res["n"], res["pi_inf"]
    opts = res["options"]
    out_dir = Path(res["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    monitored_model = datasets.train_monitored_model(seed)
    feats, losses = datasets.poisoned_loss_stream(
        monitored_model, n, seed, schedule=datasets.flip_prob_changepoint, name="cp-stream")

    # both arms run the same budget-truncated confidence-sequence family;
    # they differ only in which data advances it (corrected components on
    # every step vs collected outcomes alone)
    grid = ThetaGrid.regular(size=opts["grid_size"], lo=0.01, hi=0.99, pi_inf=pi_inf)
    detectors = {}
    for mode in ("ppi", "labels_only"):
        cfg = ChangePointConfig(grid=grid, pi=pi_inf, max_active=opts["max_active"],
                                mode=mode, mu_init=monitored_model.val_risk,
                                check_stride=50)
        detectors[mode] = ChangePointState(cfg, seed=seed, coin="cp-coin")

    ema = 0.0
    ema_gain = 0.005
    rows = []
    stride = max(1, n // 2000)
    for i in range(n):
        z = float(losses[i])
        ema += ema_gain * (z - ema)
        collected = 0
        for mode, det in detectors.items():
            if not det.detected[0]:
                before = int(det.labels_used[0])
                cp_step(det, z, alpha)
                if mode == "ppi":
                    collected = int(det.labels_used[0]) - before
        if (i + 1) % stride == 0 or collected:
            rows.append([i + 1, ema, z, collected])
    _write_csv(out_dir / "trace.csv", ["n", "ema", "loss", "collected"], rows)

    change_at = int(math.ceil(0.3 * n))
    summary = {"change_at": change_at, "detectors": {}}
    for mode, det in detectors.items():
        summary["detectors"][mode] = {
            "detected": bool(det.detected[0]),
            "detected_at": int(det.detected_at[0]),
            "declared_location": float(det.declared[0]),
            "labels_used": int(det.labels_used[0]),
        }
    _write_summary(out_dir / "summary.json", res, {"case": "changepoint", **summary})
    return summary


# ---------------------------------------------------------------------------
# Causal discovery


def run_case_causal(config: StreamConfig) -> dict:
    """PC under labels-only / prediction-powered / full-data label access."""
    res = config.validate()
    seed, alpha, pi_inf = res["seed"], res["alpha"], res["pi_inf"]
    opts = res["options"]
    out_dir = Path(res["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    dag, sampler = synth_scm(edge_prob=opts["edge_prob"], seed=seed)
    calib = CalibratorConfig.from_budget(pi_inf)
    a, b = calib.bounds
    pi = max(pi_inf, min(1.0, 1.0 - a / b + EPS_FLOOR))
    n_batches, batch_size = opts["n_batches"], opts["batch_size"]

    rows_rng = substream(seed, "causal-rows")
    coin, _ = uniforms(substream(seed, "causal-coin"), n_batches)
    all_rows = []
    for k in range(n_batches):
        rows, rows_rng = sampler.draw(batch_size, rows_rng)
        all_rows.append(rows)

    (out_dir / "graph_true.dot").write_text(to_dot(dag) + "\n")
    metrics = {}
    for mode in ("labels_only", "ppi", "full_data"):
        batches = []
        for k, rows in enumerate(all_rows):
            xi = 1 if mode == "full_data" else int(coin[k] < pi)
            batches.append(Batch(cheap=rows[:, :3], costly=rows[:, 3:] if xi else None,
                                 xi=xi, pi=pi))
        predictor = RidgePredictor(n_cheap=3, n_costly=3)
        pdag, _tasks = pc_search(batches, dag.n_nodes, alpha, opts["max_cond_size"],
                                 mode, calib, predictor)
        (out_dir / f"graph_{mode}.dot").write_text(to_dot(pdag, costly=dag.costly) + "\n")
        entry = skeleton_metrics(dag, pdag)
        entry["labels_used"] = sum(b.xi for b in batches)
        metrics[mode] = entry

    _write_summary(out_dir / "metrics.json", res, {"case": "causal", "modes": metrics})
    return {"modes": metrics, "out_dir": str(out_dir)}


RUNNERS = {
    "mean": run_case_mean,
    "risk": run_case_risk,
    "changepoint": run_case_changepoint,
    "causal": run_case_causal,
}

"""Monte Carlo acceptance suite.

Twelve numbered checks covering validity (type-I control, coverage,
nonnegativity, calibrator admissibility), exactness (unbiasedness,
budget-constraint tightness, growth decomposition), and the qualitative
power orderings of the four case studies.  Each check returns a
:class:`CriterionResult`; the CLI ``validate`` subcommand and the
acceptance test module both run them.

Replica-heavy checks vectorize across replicas with the same component
arithmetic the streaming API uses; tolerances are three Monte Carlo
standard errors unless the check is exact.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import datasets
from .betting import CLAMP_REL, mean_component_bounds, mean_max_factor, risk_max_factor, \
    solve_c_mean, solve_c_risk
from .calibrate import CalibratorConfig, ptoe, rescale, solve_eta_for_budget
from .causal import (
    Batch,
    CITask,
    Dag,
    LinearGaussianSampler,
    RidgePredictor,
    ci_e_step,
    pc_search,
    skeleton_metrics,
    synth_scm,
)
from .changepoint import ChangePointConfig, ChangePointState, cp_step
from .confseq import PLandscape, ThetaGrid, invert, update_landscape
from .evalue import EPS_FLOOR, ppi_component
from .predictors import EwmaMean
from .rng import substream, uniforms


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    observed: dict = field(default_factory=dict)
    seconds: float = 0.0

    def __post_init__(self):
        self.passed = bool(self.passed)

    def as_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "observed": self.observed, "seconds": round(self.seconds, 2)}

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        details = ", ".join(f"{k}={v}" for k, v in self.observed.items())
        return f"[{verdict}] criterion {self.number}: {self.name} ({details}) [{self.seconds:.1f}s]"


def _se(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


# ---------------------------------------------------------------------------
# Vectorized mean-family machinery (replicas on the leading axis)


class _MeanFamily:
    """Truncated bounded-mean component family at a single null."""

    def __init__(self, theta: float, pi_inf: float):
        self.theta = theta
        self.c = solve_c_mean(theta, pi_inf)
        lo = -self.c / (1.0 - theta)
        hi = self.c / theta
        delta = CLAMP_REL * (hi - lo)
        self.lam_lo, self.lam_hi = lo + delta, hi - delta
        a, b = mean_component_bounds(theta, self.c)
        self.a = a + delta * min(theta, 1.0 - theta)
        self.b = b - delta * max(theta, 1.0 - theta)
        self.pi = max(pi_inf, min(1.0, 1.0 - self.a / self.b + EPS_FLOOR))


def _run_mean_replicas(mode: str, theta: float, pi_inf: float, ys: np.ndarray,
                       coin: np.ndarray, predictor_bias: float = 0.0,
                       collect_pi: float | None = None) -> dict:
    """Advance R parallel single-null streams for n steps.

    ``mode`` is "ppi" or "imputation".  The predictor is the running mean
    of collected outcomes (one pseudo-observation at 1/2), shifted by
    ``predictor_bias`` and clipped to [0, 1].  ``collect_pi`` decouples
    the collection coin from the family's truncation budget (imputation
    bets untruncated while still training on budget-rate labels).
    Returns running-max and final log e-values plus label counts.
    """
    fam = _MeanFamily(theta, pi_inf)
    if collect_pi is not None:
        fam.pi = collect_pi
    reps, n = ys.shape
    log_e = np.zeros(reps)
    max_log_e = np.zeros(reps)
    labels = np.zeros(reps)
    lab_sum = np.full(reps, 0.5)
    lab_cnt = np.ones(reps)
    bet_mean = np.full(reps, theta)
    bet_m2 = np.full(reps, 0.25)
    bet_cnt = 1.0
    for i in range(n):
        y = ys[:, i]
        xi = coin[:, i] < fam.pi
        mu = np.clip(lab_sum / lab_cnt + predictor_bias, 0.0, 1.0)
        gap = bet_mean - theta
        lam = np.clip(gap / (bet_m2 / bet_cnt + gap * gap), fam.lam_lo, fam.lam_hi)
        e_mu = np.clip(1.0 + lam * (mu - theta), fam.a, fam.b)
        if mode == "imputation":
            comp = e_mu
            z_bet = mu
        else:
            e_y = np.clip(1.0 + lam * (y - theta), fam.a, fam.b)
            comp = np.where(xi, (e_y - (1.0 - fam.pi) * e_mu) / fam.pi, e_mu)
            z_bet = np.where(xi, y, mu)
        log_e += np.log(comp)
        np.maximum(max_log_e, log_e, out=max_log_e)
        bet_cnt += 1.0
        diff = z_bet - bet_mean
        bet_mean = bet_mean + diff / bet_cnt
        bet_m2 = bet_m2 + diff * (z_bet - bet_mean)
        labels += xi
        lab_sum += np.where(xi, y, 0.0)
        lab_cnt += xi
    return {"log_e": log_e, "max_log_e": max_log_e, "labels": labels}


class _RiskFamily:
    """Truncated one-sided risk component family."""

    def __init__(self, m0: float, pi_inf: float):
        self.m0 = m0
        self.c = solve_c_risk(m0, pi_inf)
        hi = self.c / m0
        delta = CLAMP_REL * hi
        self.lam_lo, self.lam_hi = 0.0, hi - delta
        self.a = (1.0 - self.c) + delta * m0
        self.b = 1.0 + self.c * risk_max_factor(m0) - delta * (1.0 - m0)
        self.pi = max(pi_inf, min(1.0, 1.0 - self.a / self.b + EPS_FLOOR))


def _run_risk_replicas(mode: str, m0: float, pi_inf: float, losses: np.ndarray,
                       coin: np.ndarray, alpha: float = 0.05,
                       mu_init: float = 0.5) -> np.ndarray:
    """Rejection step (or +inf) of R parallel risk e-processes.

    ``mode`` "ppi" uses the truncated family with inverse-propensity
    corrections; "labels_only" bets on collected losses with the
    untruncated one-sided range.
    """
    reps, n = losses.shape
    if mode == "ppi":
        fam = _RiskFamily(m0, pi_inf)
        pi = fam.pi
        lam_lo, lam_hi = fam.lam_lo, fam.lam_hi
    else:
        hi = 1.0 / m0
        delta = CLAMP_REL * hi
        lam_lo, lam_hi = 0.0, hi - delta
        pi = pi_inf
    threshold = math.log(1.0 / alpha)
    log_e = np.zeros(reps)
    rejected_at = np.full(reps, np.inf)
    mu = np.full(reps, mu_init)
    bet_mean = np.full(reps, m0)
    bet_m2 = np.full(reps, 0.25)
    bet_cnt = np.ones(reps)
    for i in range(n):
        loss = losses[:, i]
        xi = coin[:, i] < pi
        gap = bet_mean - m0
        lam = np.clip(gap / (bet_m2 / bet_cnt + gap * gap), lam_lo, lam_hi)
        if mode == "ppi":
            e_mu = np.clip(1.0 + lam * (mu - m0), fam.a, fam.b)
            e_y = np.clip(1.0 + lam * (loss - m0), fam.a, fam.b)
            comp = np.where(xi, (e_y - (1.0 - pi) * e_mu) / pi, e_mu)
            log_e += np.log(comp)
            z_bet = np.where(xi, loss, mu)
            bet_cnt = bet_cnt + 1.0
        else:
            comp = np.where(xi, 1.0 + lam * (loss - m0), 1.0)
            log_e += np.log(comp)
            z_bet = loss
            bet_cnt = bet_cnt + xi
        upd = 1.0 if mode == "ppi" else xi.astype(float)
        diff = (z_bet - bet_mean) * upd
        bet_mean = bet_mean + diff / bet_cnt
        bet_m2 = bet_m2 + diff * (z_bet - bet_mean)
        newly = (log_e >= threshold) & np.isinf(rejected_at)
        if np.any(newly):
            rejected_at[newly] = i + 1
        mu = np.where(xi, np.clip(mu + 0.2 * (loss - mu), 0.01, 0.99), mu)
    return rejected_at


# ---------------------------------------------------------------------------
# Criteria 1-7: exact identities and core validity


def criterion_1() -> CriterionResult:
    """Unbiasedness: enumeration over (y, xi) recovers the labeled mean."""
    t0 = time.time()
    rng = substream(1001, "unbias")
    worst = 0.0
    for _ in range(1000):
        u, rng = uniforms(rng, 12)
        a = 0.05 + 1.5 * u[0]
        b = a * (1.0 + 8.0 * u[1])
        k = 2 + int(4 * u[2])
        probs = u[3:3 + k] / u[3:3 + k].sum()
        e_vals = a + (b - a) * u[7:7 + k]
        e_mu = a + (b - a) * u[11]
        floor = 1.0 - a / b
        pi = min(1.0, floor + (1.0 - floor) * max(u[2], 1e-3) + EPS_FLOOR)
        expected = float(probs @ e_vals)
        got = sum(
            p * (pi * ppi_component(e_mu, e_y, 1, pi, (a, b))
                 + (1 - pi) * ppi_component(e_mu, None, 0, pi, (a, b)))
            for p, e_y in zip(probs, e_vals)
        )
        worst = max(worst, abs(got - expected))
    return CriterionResult(1, "unbiasedness identity", worst <= 1e-12,
                           {"worst_abs_err": f"{worst:.2e}", "configs": 1000},
                           time.time() - t0)


def criterion_2(replicas: int = 2000, n: int = 1000) -> CriterionResult:
    """Type-I control of the bounded-mean test at the true mean."""
    t0 = time.time()
    theta = 0.3
    rng = substream(1002, "type1")
    u, rng = uniforms(rng, replicas * n)
    ys = (u.reshape(replicas, n) < theta).astype(float)
    coin, rng = uniforms(rng, replicas * n)
    out = _run_mean_replicas("ppi", theta, 0.01, ys, coin.reshape(replicas, n))
    rate = float(np.mean(out["max_log_e"] >= math.log(20.0)))
    bound = 0.05 + 3 * _se(0.05, replicas)
    return CriterionResult(2, "anytime type-I control", rate <= bound,
                           {"rejection_rate": round(rate, 4), "bound": round(bound, 4)},
                           time.time() - t0)


def criterion_3(replicas: int = 2000, n: int = 1000, grid_size: int = 512) -> CriterionResult:
    """Simultaneous coverage of the running-intersection confidence sequence."""
    t0 = time.time()
    theta_star = 0.3
    grid = ThetaGrid.regular(size=grid_size, pi_inf=0.01, include=[theta_star])
    idx = grid.index_of(theta_star)
    covered = 0
    for rep in range(replicas):
        u, _ = uniforms(substream(rep, "cov-ys"), n)
        ys = (u < theta_star).astype(float)
        ls = PLandscape.fresh(grid, seed=rep, mode="ppi", coin="cov-coin")
        predictor = EwmaMean(init=0.5, gain=0.2)
        ok = True
        for i in range(n):
            before = ls.labels_used
            ls = update_landscape(ls, None, float(ys[i]), lambda x: 0.01, predictor)
            if ls.labels_used > before:
                predictor.update(None, ys[i])
            if not invert(ls, 0.05)[idx]:
                ok = False
                break
        covered += ok
    rate = covered / replicas
    return CriterionResult(3, "confidence-sequence coverage", rate >= 0.935,
                           {"coverage": round(rate, 4), "bound": 0.935,
                            "grid": grid_size, "replicas": replicas},
                           time.time() - t0)


def criterion_4() -> CriterionResult:
    """Nonnegativity of the corrected component over random admissible inputs."""
    t0 = time.time()
    rng = substream(1004, "nonneg")
    n = 100_000
    u, rng = uniforms(rng, 6 * n)
    u = u.reshape(6, n)
    a = 0.05 + 1.5 * u[0]
    b = a * (1.0 + 10.0 * u[1])
    floor = 1.0 - a / b
    pi = np.maximum(floor + (1.0 - floor) * u[2], 1e-12)
    e_mu = a + (b - a) * u[3]
    e_y = a + (b - a) * u[4]
    xi = (u[5] > 0.5).astype(int)
    out = ppi_component(e_mu, e_y, xi, pi, (a, b))
    violations = int(np.sum(out < 0.0))
    return CriterionResult(4, "component nonnegativity", violations == 0,
                           {"violations": violations, "inputs": n}, time.time() - t0)


def criterion_5(n: int = 10_000) -> CriterionResult:
    """Empirical log growth equals the two-term decomposition (3 SEs)."""
    t0 = time.time()
    pi, theta, lam, z_mu = 0.3, 0.4, 0.3, 0.52
    rng = substream(1005, "growth")
    u, rng = uniforms(rng, 2 * n)
    ys = (u[:n] < 0.55).astype(float)
    xis = (u[n:] < pi).astype(int)
    e_mu = 1.0 + lam * (z_mu - theta)
    e_ys = 1.0 + lam * (ys - theta)
    bounds = (1.0 - lam * theta, 1.0 + lam * (1.0 - theta))
    lhs = np.log(ppi_component(np.full(n, e_mu), e_ys, xis, pi, bounds))
    rhs = (1 - pi) * math.log(e_mu) + pi * np.log(e_mu + (e_ys - e_mu) / pi)
    diff = lhs - rhs
    se = float(diff.std(ddof=1) / math.sqrt(n))
    gap = abs(float(diff.mean()))
    return CriterionResult(5, "growth-rate decomposition", gap <= 3 * se,
                           {"abs_gap": f"{gap:.2e}", "three_se": f"{3 * se:.2e}"},
                           time.time() - t0)


def criterion_6() -> CriterionResult:
    """Calibrator admissibility and exact values."""
    t0 = time.time()
    eps = 1e-10
    integral = quad(ptoe, eps, 1e-3, limit=200)[0] + quad(ptoe, 1e-3, 1.0, limit=200)[0]
    tail = 1.0 / abs(math.log(eps))
    total = integral + tail
    ok_int = total <= 1.0 + 1e-3
    ok_e = abs(ptoe(math.exp(-1.0)) - (math.e - 2.0)) <= 1e-12
    ok_one = abs(ptoe(1.0) - 0.5) <= 1e-9
    return CriterionResult(6, "calibrator validity", ok_int and ok_e and ok_one,
                           {"integral_bound": round(total, 6),
                            "ptoe_inv_e_err": f"{abs(ptoe(math.exp(-1.0)) - (math.e - 2.0)):.1e}",
                            "ptoe_one_err": f"{abs(ptoe(1.0) - 0.5):.1e}"},
                           time.time() - t0)


def criterion_7() -> CriterionResult:
    """Budget solvers back-substitute into their constraints exactly."""
    t0 = time.time()
    rng = substream(1007, "tight")
    u, _ = uniforms(rng, 5 * 1000)
    u = u.reshape(5, -1)
    theta = 0.02 + 0.96 * u[0]
    m0 = 0.02 + 0.98 * u[1]
    pi_inf = np.maximum(u[2], 1e-4)
    c_mean = solve_c_mean(theta, pi_inf)
    worst = float(np.max(np.abs(
        1.0 - (1.0 - c_mean) / (1.0 + c_mean * mean_max_factor(theta)) - pi_inf)))
    c_risk = solve_c_risk(m0, pi_inf)
    worst = max(worst, float(np.max(np.abs(
        1.0 - (1.0 - c_risk) / (1.0 + c_risk * risk_max_factor(m0)) - pi_inf))))
    e_min = 0.05 + 0.9 * u[3]
    e_max = 1.5 + 2000.0 * u[4]
    small_pi = np.maximum(u[2] * 0.2, 1e-4)
    for lo, hi, p in zip(e_min, e_max, small_pi):
        eta = solve_eta_for_budget(float(lo), float(hi), float(p))
        worst = max(worst, abs(1.0 - rescale(lo, eta) / rescale(hi, eta) - p))
    return CriterionResult(7, "budget-constraint tightness", worst <= 1e-12,
                           {"worst_abs_err": f"{worst:.2e}", "configs": 3000},
                           time.time() - t0)


# ---------------------------------------------------------------------------
# Criteria 8-12: case-study orderings


def criterion_8(replicas: int = 200, n: int = 10_000) -> CriterionResult:
    """Poisoned risk stream: the corrected arm rejects before labels-only."""
    t0 = time.time()
    model = datasets.train_monitored_model(7)
    m0 = model.val_risk + 0.05
    losses = np.empty((replicas, n))
    for rep in range(replicas):
        _, ls = datasets.poisoned_loss_stream(model, n, seed=rep,
                                              schedule=datasets.flip_prob_risk,
                                              name="c8-stream")
        losses[rep] = ls
    coin, _ = uniforms(substream(1008, "coin"), replicas * n)
    coin = coin.reshape(replicas, n)
    ppi_t = _run_risk_replicas("ppi", m0, 0.01, losses, coin, mu_init=model.val_risk)
    lab_t = _run_risk_replicas("labels_only", m0, 0.01, losses, coin, mu_init=model.val_risk)
    med_ppi = float(np.median(ppi_t))
    med_lab = float(np.median(lab_t))
    return CriterionResult(8, "power ordering under drift", med_ppi < med_lab,
                           {"median_ppi": med_ppi, "median_labels_only": med_lab,
                            "val_risk": round(model.val_risk, 4)},
                           time.time() - t0)


def criterion_9(replicas: int = 500, n: int = 5000) -> CriterionResult:
    """Biased imputation miscovers the truth while the corrected arm covers."""
    t0 = time.time()
    theta_star = 0.3
    rng = substream(1009, "imp")
    u, rng = uniforms(rng, replicas * n)
    ys = (u.reshape(replicas, n) < theta_star).astype(float)
    coin, rng = uniforms(rng, replicas * n)
    coin = coin.reshape(replicas, n)
    # imputation arm: untruncated bets, labels collected at the shared 1%
    # budget only to train the (biased) predictor
    imp = _run_mean_replicas("imputation", theta_star, 1.0, ys, coin,
                             predictor_bias=0.15, collect_pi=0.01)
    ppi = _run_mean_replicas("ppi", theta_star, 0.01, ys, coin, predictor_bias=0.15)
    threshold = math.log(20.0)
    miscover = float(np.mean(imp["log_e"] >= threshold))
    cover = float(np.mean(ppi["max_log_e"] < threshold))
    ok = miscover >= 0.50 and cover >= 0.935
    return CriterionResult(9, "imputation failure vs corrected coverage", ok,
                           {"imputation_miscoverage": round(miscover, 4),
                            "ppi_coverage": round(cover, 4)},
                           time.time() - t0)


def _changepoint_state(reps: int, pi_inf: float = 0.005, seed: int = 1010,
                       grid_size: int = 25, max_active: int = 10) -> ChangePointState:
    grid = ThetaGrid.regular(size=grid_size, lo=0.01, hi=0.99, pi_inf=pi_inf)
    cfg = ChangePointConfig(grid=grid, pi=pi_inf, max_active=max_active,
                            mode="ppi", check_stride=25)
    return ChangePointState(cfg, seed=seed, n_replicas=reps)


def criterion_10(fa_replicas: int = 500, det_replicas: int = 200,
                 n: int = 150_000) -> CriterionResult:
    """Change-point detector: false-alarm control and detection power."""
    t0 = time.time()
    clean_loss = 0.02
    alpha = 0.05

    state = _changepoint_state(fa_replicas, seed=1010)
    rng = substream(1010, "fa-stream")
    for _ in range(n):
        u, rng = uniforms(rng, fa_replicas)
        cp_step(state, (u < clean_loss).astype(float), alpha)
    fa_rate = float(state.detected.mean())
    fa_bound = 0.05 + 3 * _se(0.05, fa_replicas)

    det = _changepoint_state(det_replicas, seed=1011)
    rng = substream(1011, "det-stream")
    t_grid = np.arange(1, n + 1) / n
    q = datasets.flip_prob_changepoint(t_grid)
    rate_t = clean_loss * (1 - q) + (1 - clean_loss) * q
    change = int(np.argmax(q > 0)) + 1
    for i in range(n):
        u, rng = uniforms(rng, det_replicas)
        cp_step(det, (u < rate_t[i]).astype(float), alpha)
        if np.all(det.detected):
            break
    detected_after = det.detected & (det.detected_at > change)
    power = float(detected_after.mean())
    ok = fa_rate <= fa_bound and power >= 0.80
    return CriterionResult(10, "change-point detection", ok,
                           {"false_alarm": round(fa_rate, 4), "fa_bound": round(fa_bound, 4),
                            "detection_after_change": round(power, 4), "n": n},
                           time.time() - t0)


def criterion_11(seeds: int = 50) -> CriterionResult:
    """Causal discovery: corrected recall dominates labels-only on every seed."""
    t0 = time.time()
    pi_inf, batch_size, n_batches, alpha = 0.10, 100, 200, 0.05
    calib = CalibratorConfig.from_budget(pi_inf)
    a, b = calib.bounds
    pi = max(pi_inf, min(1.0, 1.0 - a / b + EPS_FLOOR))
    dominated = 0
    matches_full = 0
    labels_empty = 0
    recalls = {"labels_only": [], "ppi": [], "full_data": []}
    for seed in range(seeds):
        dag, sampler = synth_scm(edge_prob=0.4, seed=seed)
        rows_rng = substream(seed, "c11-rows")
        coin, _ = uniforms(substream(seed, "c11-coin"), n_batches)
        all_rows = []
        for k in range(n_batches):
            rows, rows_rng = sampler.draw(batch_size, rows_rng)
            all_rows.append(rows)
        per_mode = {}
        for mode in ("labels_only", "ppi", "full_data"):
            batches = [
                Batch(cheap=rows[:, :3],
                      costly=rows[:, 3:] if (mode == "full_data" or coin[k] < pi) else None,
                      xi=1 if (mode == "full_data" or coin[k] < pi) else 0, pi=pi)
                for k, rows in enumerate(all_rows)
            ]
            predictor = RidgePredictor(n_cheap=3, n_costly=3)
            pdag, _ = pc_search(batches, 6, alpha, 2, mode, calib, predictor)
            per_mode[mode] = skeleton_metrics(dag, pdag)
            recalls[mode].append(per_mode[mode]["recall"])
        dominated += per_mode["ppi"]["recall"] >= per_mode["labels_only"]["recall"]
        matches_full += per_mode["ppi"]["found_edges"] == per_mode["full_data"]["found_edges"]
        labels_empty += per_mode["labels_only"]["found_edges"] == 0
    ok = dominated == seeds
    return CriterionResult(11, "causal discovery recall ordering", ok,
                           {"ppi_dominates": f"{dominated}/{seeds}",
                            "ppi_matches_full_data": f"{matches_full}/{seeds}",
                            "labels_only_empty": f"{labels_empty}/{seeds}",
                            "mean_recall_ppi": round(float(np.mean(recalls["ppi"])), 3),
                            "mean_recall_full": round(float(np.mean(recalls["full_data"])), 3)},
                           time.time() - t0)


def _null_chain_scm() -> tuple[Dag, LinearGaussianSampler]:
    """Fixed 6-node chain 0 -> 1 -> 3 (3 costly): 0 ind 3 | {1} holds."""
    dag = Dag(n_nodes=6, edges=frozenset({(0, 1), (1, 3)}), costly=frozenset({3, 4, 5}))
    weights = {(0, 1): 0.9, (1, 3): 0.9}
    return dag, LinearGaussianSampler(dag=dag, weights=weights,
                                      biases=(0.0,) * 6, noise_sd=0.4,
                                      order=(0, 1, 2, 4, 5, 3))


def criterion_12(replicas: int = 400, n_batches: int = 200) -> CriterionResult:
    """Type-I control of the batched CI e-process on a true null."""
    t0 = time.time()
    pi_inf, alpha = 0.10, 0.05
    calib = CalibratorConfig.from_budget(pi_inf)
    a, b = calib.bounds
    pi = max(pi_inf, min(1.0, 1.0 - a / b + EPS_FLOOR))
    _, sampler = _null_chain_scm()
    rejections = 0
    for rep in range(replicas):
        rows_rng = substream(rep, "c12-rows")
        coin, _ = uniforms(substream(rep, "c12-coin"), n_batches)
        task = CITask(a=0, b=3, cond=(1,))
        predictor = RidgePredictor(n_cheap=3, n_costly=3)
        for k in range(n_batches):
            rows, rows_rng = sampler.draw(100, rows_rng)
            xi = int(coin[k] < pi)
            batch = Batch(cheap=rows[:, :3], costly=rows[:, 3:] if xi else None, xi=xi, pi=pi)
            task = ci_e_step(task, batch, predictor, calib, alpha)
            if xi:
                predictor.update(batch.cheap, batch.costly)
            if task.decision == "dependent":
                break
        rejections += task.decision == "dependent"
    rate = rejections / replicas
    bound = 0.05 + 3 * _se(0.05, replicas)
    return CriterionResult(12, "CI e-process calibration", rate <= bound,
                           {"rejection_rate": round(rate, 4), "bound": round(bound, 4)},
                           time.time() - t0)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
}


def run_criteria(only=None, verbose: bool = False) -> list[CriterionResult]:
    numbers = sorted(CRITERIA) if only is None else [k for k in sorted(only) if k in CRITERIA]
    results = []
    for number in numbers:
        result = CRITERIA[number]()
        results.append(result)
        if verbose:
            print(result.line(), flush=True)
    return results

"""Constraint-based causal discovery with calibrated batched e-processes.

Data arrives in batches; each batch yields a Fisher-z partial-correlation
p-value per conditional-independence hypothesis ``A ind B | C``, which is
clipped, calibrated to an e-value and rescaled to meet the label budget
(see :mod:`ppe.calibrate`).  Costly columns are observed only when the
batch's single collection coin comes up, and are otherwise replaced by
ridge predictions from the cheap columns; the prediction-powered
correction keeps every hypothesis's e-process valid.

A hypothesis is declared dependent the first time its e-process reaches
``1/alpha``; one that never does within the horizon is treated as
independent.  The PC search prunes a skeleton level by level from these
decisions, orients v-structures from separating sets, and closes under
the Meek rules.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .calibrate import CalibratorConfig
from .evalue import ppi_component
from .rng import RngState, normals, permutation, substream, uniform, uniforms

PC_MODES = ("ppi", "labels_only", "full_data")

# Linear mechanism coefficients are sampled from +-[WEIGHT_LO, WEIGHT_HI]:
# bounding them away from zero avoids near-unfaithful graphs.
WEIGHT_LO = 0.3
WEIGHT_HI = 1.0
DEFAULT_EDGE_PROB = 0.4
DEFAULT_NOISE_SD = 0.4


# ---------------------------------------------------------------------------
# Graphs


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph with a designated costly-node subset."""

    n_nodes: int
    edges: frozenset
    costly: frozenset

    def __post_init__(self):
        order = self.topological_order()
        if order is None:
            raise ValueError("graph has a cycle")

    def topological_order(self) -> list[int] | None:
        indeg = {v: 0 for v in range(self.n_nodes)}
        for _, child in self.edges:
            indeg[child] += 1
        frontier = sorted(v for v, d in indeg.items() if d == 0)
        order = []
        while frontier:
            v = frontier.pop(0)
            order.append(v)
            for parent, child in sorted(self.edges):
                if parent == v:
                    indeg[child] -= 1
                    if indeg[child] == 0:
                        frontier.append(child)
            frontier.sort()
        return order if len(order) == self.n_nodes else None

    def parents(self, v: int) -> list[int]:
        return sorted(p for p, c in self.edges if c == v)

    @property
    def skeleton(self) -> frozenset:
        return frozenset(frozenset(e) for e in self.edges)


@dataclass
class Pdag:
    """Partially directed graph: PC output."""

    n_nodes: int
    directed: set = field(default_factory=set)
    undirected: set = field(default_factory=set)

    def adjacent(self, i: int, j: int) -> bool:
        return (frozenset((i, j)) in self.undirected
                or (i, j) in self.directed or (j, i) in self.directed)

    def neighbors(self, i: int) -> list[int]:
        return sorted(j for j in range(self.n_nodes) if j != i and self.adjacent(i, j))

    @property
    def skeleton(self) -> frozenset:
        return frozenset({frozenset(e) for e in self.directed} | set(self.undirected))

    def orient(self, i: int, j: int) -> bool:
        """Direct i -> j; on conflict leave the edge undirected with a warning."""
        if (j, i) in self.directed:
            warnings.warn(f"contradictory orientation for edge {i}-{j}; leaving undirected")
            self.directed.discard((j, i))
            self.undirected.add(frozenset((i, j)))
            return False
        self.undirected.discard(frozenset((i, j)))
        self.directed.add((i, j))
        return True


def to_dot(graph: Dag | Pdag, costly=(), name: str = "g") -> str:
    """DOT rendering; costly nodes are shaded."""
    costly = set(costly) or (set(graph.costly) if isinstance(graph, Dag) else set())
    lines = [f"digraph {name} {{"]
    for v in range(graph.n_nodes):
        style = ' [style=filled, fillcolor=lightgray]' if v in costly else ""
        lines.append(f"  x{v}{style};")
    if isinstance(graph, Dag):
        for i, j in sorted(graph.edges):
            lines.append(f"  x{i} -> x{j};")
    else:
        for i, j in sorted(graph.directed):
            lines.append(f"  x{i} -> x{j};")
        for e in sorted(map(sorted, graph.undirected)):
            lines.append(f"  x{e[0]} -> x{e[1]} [dir=none];")
    lines.append("}")
    return "\n".join(lines)


def skeleton_metrics(true_dag: Dag, found: Pdag) -> dict:
    """Adjacency precision/recall of a recovered graph against the truth."""
    truth = true_dag.skeleton
    guess = found.skeleton
    tp = len(truth & guess)
    precision = tp / len(guess) if guess else 1.0
    recall = tp / len(truth) if truth else 1.0
    return {
        "true_edges": len(truth),
        "found_edges": len(guess),
        "true_positives": tp,
        "precision": precision,
        "recall": recall,
    }


# ---------------------------------------------------------------------------
# Synthetic structural causal model


@dataclass(frozen=True)
class LinearGaussianSampler:
    """Linear mechanisms with additive Gaussian noise over a DAG."""

    dag: Dag
    weights: dict
    biases: tuple
    noise_sd: float
    order: tuple

    def draw(self, n_rows: int, rng: RngState) -> tuple[np.ndarray, RngState]:
        noise, rng = normals(rng, n_rows * self.dag.n_nodes)
        noise = noise.reshape(n_rows, self.dag.n_nodes) * self.noise_sd
        data = np.zeros((n_rows, self.dag.n_nodes))
        for v in self.order:
            data[:, v] = self.biases[v] + noise[:, v]
            for p in self.dag.parents(v):
                data[:, v] += self.weights[(p, v)] * data[:, p]
        return data, rng


def _signed_uniform(state: RngState, size: int) -> tuple[np.ndarray, RngState]:
    u, state = uniforms(state, 2 * size)
    magnitude = WEIGHT_LO + (WEIGHT_HI - WEIGHT_LO) * u[:size]
    sign = np.where(u[size:] < 0.5, -1.0, 1.0)
    return sign * magnitude, state


def synth_scm(node_count: int = 6, edge_prob: float = DEFAULT_EDGE_PROB,
              noise_sd: float = DEFAULT_NOISE_SD, n_costly: int = 3,
              seed: int | str = 0) -> tuple[Dag, LinearGaussianSampler]:
    """Random linear-Gaussian SCM; the last ``n_costly`` nodes are costly.

    Edges follow an Erdos-Renyi draw over a random topological order;
    weights and biases are uniform on +-[0.3, 1].
    """
    rng = substream(seed, "scm")
    order, rng = permutation(rng, node_count)
    order = tuple(int(v) for v in order)
    edges = set()
    for i_pos in range(node_count):
        for j_pos in range(i_pos + 1, node_count):
            u, rng = uniform(rng)
            if u < edge_prob:
                edges.add((order[i_pos], order[j_pos]))
    weights_flat, rng = _signed_uniform(rng, max(len(edges), 1))
    weights = {edge: float(w) for edge, w in zip(sorted(edges), weights_flat)}
    biases, rng = _signed_uniform(rng, node_count)
    costly = frozenset(range(node_count - n_costly, node_count))
    dag = Dag(n_nodes=node_count, edges=frozenset(edges), costly=costly)
    sampler = LinearGaussianSampler(
        dag=dag, weights=weights, biases=tuple(float(b) for b in biases),
        noise_sd=noise_sd, order=order,
    )
    return dag, sampler


# ---------------------------------------------------------------------------
# Conditional-independence e-processes


def _fisher_z_from_corr(corr: np.ndarray, n_rows: int, i: int, j: int, cond: tuple) -> float:
    idx = (i, j) + cond
    sub = corr[np.ix_(idx, idx)]
    if not np.all(np.isfinite(sub)):
        warnings.warn("degenerate columns in CI test; returning p = 1")
        return 1.0
    inv = np.linalg.pinv(sub)
    denom = inv[0, 0] * inv[1, 1]
    if denom <= 0.0 or abs(inv[0, 1]) > 1e12:
        warnings.warn("singular correlation matrix in CI test; returning p = 1")
        return 1.0
    r = float(np.clip(-inv[0, 1] / math.sqrt(denom), -1.0 + 1e-15, 1.0 - 1e-15))
    stat = math.sqrt(n_rows - len(cond) - 3) * abs(math.atanh(r))
    # 2 * (1 - Phi(stat)), written via erfc for speed and tail precision
    return float(math.erfc(stat / math.sqrt(2.0)))


class CorrBatch:
    """A batch's correlation matrix, computed once and shared by all tasks."""

    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=float)
        self.n_rows = data.shape[0]
        with np.errstate(invalid="ignore", divide="ignore"):
            self.corr = np.corrcoef(data.T)

    def pvalue(self, i: int, j: int, cond: tuple) -> float:
        if self.n_rows < len(cond) + 4:
            raise ValueError("need at least |cond| + 4 rows")
        return _fisher_z_from_corr(self.corr, self.n_rows, i, j, cond)


def fisher_z_pvalue(data: np.ndarray, i: int, j: int, cond=()) -> float:
    """Fisher-z partial-correlation p-value for ``i ind j | cond``.

    Partial correlation r via correlation-matrix inversion; the statistic
    ``sqrt(n - |cond| - 3) * |atanh(r)|`` is compared against a standard
    normal.  A singular correlation submatrix carries no evidence and
    returns p = 1 with a warning.
    """
    return CorrBatch(data).pvalue(i, j, tuple(cond))


def batch_e_component(p: float, eta: float) -> float:
    """Calibrated, rescaled e-value component of one batch's p-value."""
    return CalibratorConfig(eta=eta).component(p)


@dataclass(frozen=True)
class Batch:
    """One unit of data: cheap columns always, costly columns iff collected."""

    cheap: np.ndarray
    costly: np.ndarray | None
    xi: int
    pi: float

    def __post_init__(self):
        if self.xi == 1 and self.costly is None:
            raise ValueError("collected batch is missing costly columns")


@dataclass(frozen=True)
class CITask:
    """A conditional-independence hypothesis and its e-process."""

    a: int
    b: int
    cond: tuple
    log_e: float = 0.0
    max_log_e: float = 0.0
    n_batches: int = 0
    decision: str = "undecided"  # "undecided" | "dependent"

    def __post_init__(self):
        if self.a == self.b or self.a in self.cond or self.b in self.cond:
            raise ValueError("A, B must be distinct and disjoint from C")


def _pval(source, a: int, b: int, cond: tuple) -> float:
    if isinstance(source, CorrBatch):
        return source.pvalue(a, b, cond)
    return fisher_z_pvalue(source, a, b, cond)


def _advance_task(task: CITask, imputed, full, xi: int, pi: float,
                  calib: CalibratorConfig, alpha: float, mode: str = "ppi") -> CITask:
    """Advance one hypothesis's e-process with one batch's matrices.

    ``imputed``/``full`` may be raw row matrices or precomputed
    :class:`CorrBatch` objects.
    """
    if task.decision == "dependent":
        return replace(task, n_batches=task.n_batches + 1)
    bounds = calib.bounds
    if mode == "labels_only":
        if not xi:
            return replace(task, n_batches=task.n_batches + 1)
        comp = calib.component(_pval(full, task.a, task.b, task.cond))
    elif xi and pi >= 1.0:
        # fully observed: the correction reduces to the labeled component
        comp = calib.component(_pval(full, task.a, task.b, task.cond))
    else:
        e_mu = calib.component(_pval(imputed, task.a, task.b, task.cond))
        e_y = calib.component(_pval(full, task.a, task.b, task.cond)) if xi else None
        comp = ppi_component(e_mu, e_y, xi, pi, bounds)
        if comp <= 0.0:
            raise FloatingPointError("calibrated ppi component hit zero")
    log_e = task.log_e + math.log(comp)
    max_log_e = max(task.max_log_e, log_e)
    decision = "dependent" if max_log_e >= math.log(1.0 / alpha) else task.decision
    return replace(task, log_e=log_e, max_log_e=max_log_e,
                   n_batches=task.n_batches + 1, decision=decision)


def ci_e_step(task: CITask, batch: Batch, predictor, calib: CalibratorConfig,
              alpha: float, mode: str = "ppi") -> CITask:
    """Advance a hypothesis by one batch, imputing costly columns.

    The imputed matrix replaces costly columns with the predictor's
    output; the true matrix is available only when the batch was
    collected.  The decision flips to "dependent" the first time the
    running e-process maximum reaches ``1/alpha`` and then sticks.
    """
    imputed = np.hstack([batch.cheap, predictor.predict_batch(batch.cheap)])
    full = np.hstack([batch.cheap, batch.costly]) if batch.xi else None
    return _advance_task(task, imputed, full, batch.xi, batch.pi, calib, alpha, mode=mode)


class RidgePredictor:
    """Stochastic regression imputation of the costly columns.

    Per-costly-node ridge regression on the cheap columns, refit after
    each collected batch, plus Gaussian noise matched to the estimated
    residual variance.  The noise keeps imputed batches distributionally
    faithful -- a noiseless fit would hand the CI tests degenerate
    correlations.  Draws come from the predictor's own substream, so
    imputations are predictable and replayable.
    """

    def __init__(self, n_cheap: int, n_costly: int, ridge: float = 1e-3,
                 seed: int | str = 0):
        self.ridge = ridge
        self.n_cheap = n_cheap
        self.n_costly = n_costly
        self.xtx = np.zeros((n_cheap + 1, n_cheap + 1))
        self.xty = np.zeros((n_cheap + 1, n_costly))
        self.yty = np.zeros(n_costly)
        self.count = 0
        self.coef = np.zeros((n_cheap + 1, n_costly))
        self.resid_sd = np.zeros(n_costly)
        self.rng = substream(seed, "imputation-noise")

    def update(self, cheap: np.ndarray, costly: np.ndarray) -> None:
        design = np.hstack([cheap, np.ones((cheap.shape[0], 1))])
        self.xtx += design.T @ design
        self.xty += design.T @ costly
        self.yty += np.sum(costly * costly, axis=0)
        self.count += cheap.shape[0]
        self.coef = np.linalg.solve(self.xtx + self.ridge * np.eye(design.shape[1]), self.xty)
        rss = self.yty - 2.0 * np.sum(self.coef * self.xty, axis=0) \
            + np.sum(self.coef * (self.xtx @ self.coef), axis=0)
        self.resid_sd = np.sqrt(np.maximum(rss, 0.0) / max(self.count, 1))

    def predict_batch(self, cheap: np.ndarray) -> np.ndarray:
        design = np.hstack([cheap, np.ones((cheap.shape[0], 1))])
        out = design @ self.coef
        if self.count:
            noise, self.rng = normals(self.rng, out.size)
            out = out + noise.reshape(out.shape) * self.resid_sd
        return out


# ---------------------------------------------------------------------------
# PC search


def all_ci_tasks(n_nodes: int, max_cond_size: int) -> dict:
    """Every hypothesis the PC search might query, keyed by (a, b, cond)."""
    tasks = {}
    for a, b in combinations(range(n_nodes), 2):
        others = [v for v in range(n_nodes) if v not in (a, b)]
        for size in range(min(max_cond_size, len(others)) + 1):
            for cond in combinations(others, size):
                tasks[(a, b, cond)] = CITask(a=a, b=b, cond=cond)
    return tasks


def run_ci_tasks(tasks: dict, batches, predictor, calib: CalibratorConfig,
                 alpha: float, mode: str = "ppi") -> dict:
    """Stream batches through every hypothesis, sharing each batch's coin."""
    for batch in batches:
        full = None
        if batch.costly is not None:
            full = CorrBatch(np.hstack([batch.cheap, batch.costly]))
        if mode == "full_data" and full is None:
            raise ValueError("full_data mode requires every batch's costly columns")
        imputed = None
        if mode == "ppi":
            imputed = CorrBatch(np.hstack([batch.cheap, predictor.predict_batch(batch.cheap)]))
        for key in sorted(tasks):
            if mode == "full_data":
                tasks[key] = _advance_task(tasks[key], full, full, 1, 1.0, calib, alpha)
            else:
                tasks[key] = _advance_task(tasks[key], imputed, full if batch.xi else None,
                                           batch.xi, batch.pi, calib, alpha, mode=mode)
        if batch.xi and batch.costly is not None:
            predictor.update(batch.cheap, batch.costly)
    return tasks


def _meek_closure(pdag: Pdag) -> None:
    changed = True
    while changed:
        changed = False
        for a in range(pdag.n_nodes):
            for b in range(pdag.n_nodes):
                if frozenset((a, b)) not in pdag.undirected:
                    continue
                # R1: c -> a, a - b, c and b nonadjacent  =>  a -> b
                for c in range(pdag.n_nodes):
                    if (c, a) in pdag.directed and not pdag.adjacent(c, b) and c != b:
                        changed |= pdag.orient(a, b)
                        break
                if frozenset((a, b)) not in pdag.undirected:
                    continue
                # R2: a -> c -> b with a - b  =>  a -> b
                for c in range(pdag.n_nodes):
                    if (a, c) in pdag.directed and (c, b) in pdag.directed:
                        changed |= pdag.orient(a, b)
                        break
                if frozenset((a, b)) not in pdag.undirected:
                    continue
                # R3: a - c -> b, a - d -> b, c and d nonadjacent  =>  a -> b
                spokes = [c for c in range(pdag.n_nodes)
                          if frozenset((a, c)) in pdag.undirected and (c, b) in pdag.directed]
                if any(not pdag.adjacent(c, d) for c, d in combinations(spokes, 2)):
                    changed |= pdag.orient(a, b)


def pc_from_decisions(n_nodes: int, dependent, max_cond_size: int) -> Pdag:
    """Standard PC given a decision oracle ``dependent(a, b, cond) -> bool``.

    Level-wise skeleton pruning, v-structure orientation from separating
    sets, Meek closure.  Deterministic: all iteration is in sorted order.
    """
    pdag = Pdag(n_nodes=n_nodes,
                undirected={frozenset(p) for p in combinations(range(n_nodes), 2)})
    sepsets = {}
    for level in range(max_cond_size + 1):
        for a, b in combinations(range(n_nodes), 2):
            if not pdag.adjacent(a, b):
                continue
            pool = sorted(set(pdag.neighbors(a) + pdag.neighbors(b)) - {a, b})
            for cond in combinations(pool, level):
                if not dependent(a, b, cond):
                    pdag.undirected.discard(frozenset((a, b)))
                    sepsets[frozenset((a, b))] = set(cond)
                    break
    for a, b in combinations(range(n_nodes), 2):
        if pdag.adjacent(a, b):
            continue
        for k in sorted(set(pdag.neighbors(a)) & set(pdag.neighbors(b))):
            if k not in sepsets.get(frozenset((a, b)), set()):
                pdag.orient(a, k)
                pdag.orient(b, k)
    _meek_closure(pdag)
    return pdag


def pc_search(batches, n_nodes: int, alpha: float, max_cond_size: int,
              mode: str, calib: CalibratorConfig, predictor) -> tuple[Pdag, dict]:
    """Run every CI e-process over the batch stream, then search.

    ``mode`` is one of "ppi" (prediction-powered corrections),
    "labels_only" (collected batches only) or "full_data" (every batch
    observed).  A hypothesis that never reaches ``1/alpha`` within the
    horizon counts as independent.  Returns the graph and the final
    decision table.
    """
    if mode not in PC_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {PC_MODES}")
    if max_cond_size > n_nodes - 2:
        raise ValueError("max_cond_size must be at most n_nodes - 2")
    tasks = all_ci_tasks(n_nodes, max_cond_size)
    tasks = run_ci_tasks(tasks, batches, predictor, calib, alpha, mode=mode)

    def dependent(a, b, cond):
        return tasks[(a, b, tuple(sorted(cond)))].decision == "dependent"

    return pc_from_decisions(n_nodes, dependent, max_cond_size), tasks

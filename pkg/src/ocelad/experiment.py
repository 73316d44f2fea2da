"""Experiment runner: trial orchestration, checkpoint metrics, CSV output.

A trial is a pure function of (scenario, algorithm, trial index): it draws
the dataset and constraint stream from seed + trial index, runs the
algorithm to get the per-step estimate sequence, and scores checkpoints
every ``eval_every`` steps (leave-one-out kNN error and k-means NMI in the
current embedding of the full rotated dataset, windowed mean loss, and
cumulative regret against the ground-truth comparator). Trials may run in
parallel; rows are merged in trial order so output bytes never depend on
scheduling.
"""

from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import BaselineSpec, run_baseline
from .combiner import CombinerOutput, WeightTable, ocelad_step
from .evaluation import embed, kmeans_nmi, knn_error, margin_comparator
from .metric import (
    Constraint,
    InvalidInputError,
    LossParams,
    MetricState,
    margin_loss,
    operator_norm,
)
from .rice import DyadicInterval, RiceEnsemble
from .synthdata import Dataset, ScenarioConfig, StreamStep, generate_dataset, stream_steps

ALGORITHM_KINDS = ("rice_ocelad", "comid_fixed", "saol_random")

CSV_HEADER = "t,trial,knn_error,nmi,loss,regret_cum"


@dataclass(frozen=True)
class AlgorithmSpec:
    """One algorithm entry of an experiment: adaptive pipeline or baseline."""

    name: str
    kind: str
    eta0: float = 1.0
    i0: int = 1
    eta: float = 0.0
    lam: float = 0.0
    regularizer: str = "nuclear"
    norm_cap: float = 0.0
    max_level: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ALGORITHM_KINDS:
            raise InvalidInputError(
                f"algorithm kind must be one of {ALGORITHM_KINDS}, got {self.kind!r}"
            )
        if self.kind == "comid_fixed" and not self.eta > 0:
            raise InvalidInputError(f"algorithm {self.name!r}: comid_fixed needs eta > 0")

    def loss_params(self) -> LossParams:
        return LossParams(self.lam, self.regularizer)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    algorithms: tuple[AlgorithmSpec, ...]
    trials: int = 1
    eval_every: int = 50
    outputs: str = "out"
    knn_k: int = 5

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidInputError(f"trials must be >= 1, got {self.trials}")
        if self.eval_every < 1:
            raise InvalidInputError(f"eval_every must be >= 1, got {self.eval_every}")
        if not self.algorithms:
            raise InvalidInputError("at least one algorithm is required")
        names = [a.name for a in self.algorithms]
        if len(set(names)) != len(names):
            raise InvalidInputError("algorithm names must be unique")


@dataclass
class TrialDetail:
    """Per-step byproducts kept for analysis runs (bound checks, envelopes)."""

    alg_losses: np.ndarray
    comp_losses: np.ndarray
    comp_path_inc: np.ndarray  # ||M*_{t+1} - M*_t||_F, length T - 1
    max_u_sq: float
    max_member_opnorm: float
    alpha: dict[str, float]
    mu_star: dict[str, float]
    member_losses: dict[DyadicInterval, np.ndarray] = field(default_factory=dict)
    member_regrets: dict[DyadicInterval, np.ndarray] = field(default_factory=dict)
    member_probs: dict[DyadicInterval, np.ndarray] = field(default_factory=dict)


@dataclass
class TrialResult:
    trial: int
    rows: list[tuple]
    detail: TrialDetail | None = None


def trial_seed(master_seed: int, trial: int) -> int:
    return master_seed + trial


def _estimate_sequence(
    algo: AlgorithmSpec,
    constraints: list[Constraint],
    dim: int,
    track_member_norms: bool = False,
    trial: int = 0,
) -> tuple[list[MetricState], list[CombinerOutput] | None, float]:
    """Run the algorithm; estimates are pre-update states, per the online protocol."""
    lp = algo.loss_params()
    member_norm = 0.0
    if algo.kind == "rice_ocelad":
        ens = RiceEnsemble(
            dim=dim,
            eta0=algo.eta0,
            i0=algo.i0,
            norm_cap=algo.norm_cap,
            max_level=algo.max_level,
        )
        weights: WeightTable = {}
        outputs = []
        for c in constraints:
            ens, weights, out = ocelad_step(ens, weights, c, lp)
            outputs.append(out)
            if track_member_norms:
                for slot in ens.slots.values():
                    member_norm = max(member_norm, operator_norm(slot.state.m))
        return [o.theta_hat for o in outputs], outputs, member_norm
    base = BaselineSpec(
        kind=algo.kind,
        eta=algo.eta,
        seed=algo.seed + trial,  # distinct selection stream per trial
        eta0=algo.eta0,
        i0=algo.i0,
        norm_cap=algo.norm_cap,
        max_level=algo.max_level,
    )
    estimates = run_baseline(base, constraints, lp)
    if track_member_norms:
        member_norm = max(operator_norm(est.m) for est in estimates)
    return estimates, None, member_norm


def _comparator_losses(
    steps: list[StreamStep],
    data: Dataset,
    scenario: ScenarioConfig,
    alpha: dict[str, float],
    mu_star: dict[str, float],
) -> np.ndarray:
    """Hinge losses of the drifting ground-truth metric (rotation cancels)."""
    out = np.empty(len(steps))
    for idx, step in enumerate(steps):
        block = scenario.subspace(step.partition)
        u = data.points[step.i, block] - data.points[step.j, block]
        val = alpha[step.partition] * float(u @ u)
        v = step.constraint.y * (mu_star[step.partition] - val)
        out[idx] = max(0.0, 1.0 - v)
    return out


def _comparator_path_increments(
    steps: list[StreamStep], scenario: ScenarioConfig, alpha: dict[str, float]
) -> np.ndarray:
    """Frobenius steps of M*_t = alpha_p D_t P_p D_t^T along the run."""

    def gt_matrix(step: StreamStep) -> np.ndarray:
        cols = step.rotation[:, scenario.subspace(step.partition)]
        return alpha[step.partition] * (cols @ cols.T)

    out = np.empty(len(steps) - 1)
    prev = gt_matrix(steps[0])
    for idx in range(1, len(steps)):
        cur = gt_matrix(steps[idx])
        out[idx - 1] = np.linalg.norm(cur - prev)
        prev = cur
    return out


def _collect_member_series(
    outputs: list[CombinerOutput],
) -> tuple[dict, dict, dict]:
    losses: dict[DyadicInterval, list] = {}
    regrets: dict[DyadicInterval, list] = {}
    probs: dict[DyadicInterval, list] = {}
    for out in outputs:
        for iv, val in out.per_learner_losses.items():
            losses.setdefault(iv, []).append(val)
            regrets.setdefault(iv, []).append(out.regrets[iv])
            probs.setdefault(iv, []).append(out.probs[iv])
    as_arrays = lambda d: {iv: np.asarray(v) for iv, v in d.items()}
    return as_arrays(losses), as_arrays(regrets), as_arrays(probs)


def run_trial(
    scenario: ScenarioConfig,
    algo: AlgorithmSpec,
    trial: int,
    eval_every: int,
    knn_k: int = 5,
    keep_detail: bool = False,
) -> TrialResult:
    """One (algorithm, trial) run: deterministic in (scenario, algo, trial)."""
    rng = np.random.default_rng(trial_seed(scenario.seed, trial))
    data = generate_dataset(scenario, rng)
    steps = list(stream_steps(scenario, data, rng))
    constraints = [s.constraint for s in steps]
    estimates, outputs, member_norm = _estimate_sequence(
        algo, constraints, scenario.ambient_dim, track_member_norms=keep_detail, trial=trial
    )

    alpha, mu_star = {}, {}
    for part in ("A", "B"):
        a, m = margin_comparator(data.points[:, scenario.subspace(part)], data.labels_for(part))
        alpha[part], mu_star[part] = a, m

    alg_losses = np.array([margin_loss(est, c) for est, c in zip(estimates, constraints)])
    comp_losses = _comparator_losses(steps, data, scenario, alpha, mu_star)

    rows = []
    regret_cum = 0.0
    window_loss = 0.0
    window_len = 0
    eval_rng_root = trial_seed(scenario.seed, trial)
    for idx, step in enumerate(steps):
        regret_cum += alg_losses[idx] - comp_losses[idx]
        window_loss += alg_losses[idx]
        window_len += 1
        t = step.constraint.t
        if t % eval_every == 0:
            est = estimates[idx]
            rotated = data.points @ step.rotation.T
            embedded = embed(est, rotated)
            labels = data.labels_for(step.partition)
            eval_rng = np.random.default_rng([eval_rng_root, t])
            knn = knn_error(embedded, labels, knn_k)
            score = kmeans_nmi(embedded, labels, scenario.n_clusters, eval_rng)
            rows.append((t, trial, knn, score, window_loss / window_len, regret_cum))
            window_loss, window_len = 0.0, 0

    detail = None
    if keep_detail:
        max_u = max(float(np.sum((c.x - c.z) ** 2)) for c in constraints)
        detail = TrialDetail(
            alg_losses=alg_losses,
            comp_losses=comp_losses,
            comp_path_inc=_comparator_path_increments(steps, scenario, alpha),
            max_u_sq=max_u,
            max_member_opnorm=member_norm,
            alpha=alpha,
            mu_star=mu_star,
        )
        if outputs is not None:
            detail.member_losses, detail.member_regrets, detail.member_probs = (
                _collect_member_series(outputs)
            )
    return TrialResult(trial=trial, rows=rows, detail=detail)


def _run_task(args) -> tuple[int, int, TrialResult]:
    algo_idx, trial, scenario, algo, eval_every, knn_k = args
    return algo_idx, trial, run_trial(scenario, algo, trial, eval_every, knn_k)


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("OCELAD_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError as exc:
            raise InvalidInputError(f"OCELAD_THREADS must be an integer, got {cap!r}") from exc
    return max(1, min(limit, n_tasks))


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None) -> dict[str, list[tuple]]:
    """Run every algorithm x trial, write one metrics CSV per algorithm.

    Returns the rows per algorithm name. Rows are ordered by (trial, t)
    regardless of how many workers executed the tasks.
    """
    out_dir = out_dir or cfg.outputs
    tasks = [
        (ai, trial, cfg.scenario, algo, cfg.eval_every, cfg.knn_k)
        for ai, algo in enumerate(cfg.algorithms)
        for trial in range(cfg.trials)
    ]
    results: dict[tuple[int, int], TrialResult] = {}
    workers = worker_count(len(tasks))
    if workers == 1:
        for task in tasks:
            ai, trial, res = _run_task(task)
            results[(ai, trial)] = res
    else:
        # spawned workers: forking a BLAS-threaded parent can deadlock
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            for ai, trial, res in pool.map(_run_task, tasks):
                results[(ai, trial)] = res
    os.makedirs(out_dir, exist_ok=True)
    by_name: dict[str, list[tuple]] = {}
    for ai, algo in enumerate(cfg.algorithms):
        rows = []
        for trial in range(cfg.trials):
            rows.extend(results[(ai, trial)].rows)
        by_name[algo.name] = rows
        write_metrics_csv(os.path.join(out_dir, f"{algo.name}.csv"), rows)
    return by_name


def write_metrics_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for t, trial, knn, score, loss, regret in rows:
            fh.write(
                f"{t},{trial},{repr(float(knn))},{repr(float(score))},"
                f"{repr(float(loss))},{repr(float(regret))}\n"
            )


def read_metrics_csv(path) -> list[tuple]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise InvalidInputError(f"unexpected metrics header in {path}: {header!r}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.strip().split(",")
            if len(parts) != 6:
                raise InvalidInputError(f"{path}:{lineno}: expected 6 fields")
            rows.append(
                (int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3]),
                 float(parts[4]), float(parts[5]))
            )
    return rows

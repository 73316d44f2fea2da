"""Convex weight fusion over an ensemble of interval learners.

Weights over the active learners are updated multiplicatively from each
learner's estimated regret: the weighted-average ensemble loss minus the
learner's own loss, rescaled by the step's largest magnitude so the factors
stay in [1 - eta_I, 1 + eta_I] with eta_I = min(1/2, 1/sqrt(|I|)). The
per-step estimate is the weight-normalized convex combination of the
learners' states, which is well-founded because the hinge loss is convex.
The same weight table also drives a random-selection baseline that picks a
single member instead of mixing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metric import Constraint, InvalidInputError, LossParams, MetricState, margin_loss
from .rice import DyadicInterval, RiceEnsemble, rice_advance, rice_step, spawn_weight

__all__ = [
    "WeightTable",
    "CombinerOutput",
    "spawn_weight",
    "combine",
    "update_weights",
    "ocelad_step",
    "saol_select",
    "run_rice_ocelad",
]

# Positive weights keyed by interval; normalization happens inside each operation.
WeightTable = dict[DyadicInterval, float]


@dataclass(frozen=True)
class CombinerOutput:
    """Per-step record: the combined estimate plus the losses, estimated regrets,
    and normalized weights of every active learner (all keyed by interval)."""

    theta_hat: MetricState
    per_learner_losses: dict[DyadicInterval, float]
    regrets: dict[DyadicInterval, float]
    probs: dict[DyadicInterval, float]


def _check_keys(weights: WeightTable, other: dict, what: str) -> None:
    if not weights:
        raise InvalidInputError("empty ensemble")
    if set(weights) != set(other):
        raise InvalidInputError(f"weight/{what} key sets differ")


def normalized(weights: WeightTable) -> dict[DyadicInterval, float]:
    total = sum(weights.values())
    if not total > 0:
        raise InvalidInputError(f"weights must have positive total, got {total}")
    return {iv: w / total for iv, w in weights.items()}


def combine(weights: WeightTable, states: dict[DyadicInterval, MetricState]) -> MetricState:
    """Weight-normalized convex combination of member states (matrix and margin)."""
    _check_keys(weights, states, "state")
    probs = normalized(weights)
    m_hat = None
    mu_hat = 0.0
    for iv, p in probs.items():
        s = states[iv]
        m_hat = p * s.m if m_hat is None else m_hat + p * s.m
        mu_hat += p * s.mu
    # mu_hat >= 1 mathematically; the max() only absorbs last-bit rounding.
    return MetricState(m_hat, max(1.0, mu_hat))


def update_weights(
    weights: WeightTable, losses: dict[DyadicInterval, float]
) -> tuple[WeightTable, dict[DyadicInterval, float]]:
    """Multiplicative weight update from rescaled estimated regrets.

    r(I) = (sum_J p_J loss_J) - loss(I). Each weight is multiplied by
    1 + eta_I * r(I) / max|r|; when all losses are equal the rescaling is
    undefined and the update is skipped (all regrets zero, weights unchanged).
    """
    _check_keys(weights, losses, "loss")
    vals = np.fromiter((losses[iv] for iv in weights), dtype=float, count=len(weights))
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError("losses must be finite")
    probs = normalized(weights)
    mean_loss = sum(probs[iv] * losses[iv] for iv in weights)
    regrets = {iv: mean_loss - losses[iv] for iv in weights}
    max_abs = max(abs(r) for r in regrets.values())
    if max_abs == 0.0:
        return dict(weights), regrets
    rho = 1.0 / max_abs
    new_weights = {
        iv: w * (1.0 + spawn_weight(iv) * rho * regrets[iv]) for iv, w in weights.items()
    }
    return new_weights, regrets


def saol_select(
    weights: WeightTable,
    states: dict[DyadicInterval, MetricState],
    rng: np.random.Generator,
) -> MetricState:
    """Random-selection combiner: sample one member with probability w(I)/sum(w)."""
    _check_keys(weights, states, "state")
    intervals = sorted(weights, key=lambda iv: iv.level)
    probs = normalized(weights)
    p = np.array([probs[iv] for iv in intervals])
    idx = int(rng.choice(len(intervals), p=p))
    return states[intervals[idx]]


def ocelad_step(
    ens: RiceEnsemble,
    weights: WeightTable,
    c: Constraint,
    lp: LossParams,
) -> tuple[RiceEnsemble, WeightTable, CombinerOutput]:
    """One full step of the adaptive pipeline at time t = c.t.

    Order of operations: (1) spawn/retire learners for time t, new learners
    entering at spawn_weight; (2) score every active learner on the incoming
    constraint; (3) emit the convex combination of the current states as the
    step's estimate; (4) update the learners; (5) update the weights from the
    step-(2) losses. The estimate therefore never depends on the constraint
    it is scored against.
    """
    if c.t != ens.t + 1:
        raise InvalidInputError(f"constraint time {c.t} != next ensemble time {ens.t + 1}")
    rice_advance(ens, c.t)
    table: WeightTable = {}
    for slot in ens.slots.values():
        carried = weights.get(slot.interval)
        if carried is not None:
            slot.weight = carried
        table[slot.interval] = slot.weight
    if not table:
        # Before the first interval starts (only possible when i0 > 1).
        out = CombinerOutput(MetricState.identity(ens.dim), {}, {}, {})
        return ens, table, out
    states = ens.active_states()
    losses = {iv: margin_loss(states[iv], c) for iv in table}
    theta_hat = combine(table, states)
    probs = normalized(table)
    rice_step(ens, c, lp)
    new_weights, regrets = update_weights(table, losses)
    for slot in ens.slots.values():
        slot.weight = new_weights[slot.interval]
    out = CombinerOutput(theta_hat, losses, regrets, probs)
    return ens, new_weights, out


def run_rice_ocelad(
    stream,
    dim: int,
    lp: LossParams = LossParams(),
    eta0: float = 1.0,
    i0: int = 1,
    norm_cap: float = 0.0,
    max_level: int = 20,
) -> list[CombinerOutput]:
    """Run the full pipeline over a constraint stream and collect per-step records."""
    ens = RiceEnsemble(dim=dim, eta0=eta0, i0=i0, norm_cap=norm_cap, max_level=max_level)
    weights: WeightTable = {}
    outputs = []
    for c in stream:
        ens, weights, out = ocelad_step(ens, weights, c, lp)
        outputs.append(out)
    return outputs

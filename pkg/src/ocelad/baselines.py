"""Comparison learners: fixed-rate single learners and a random-selection combiner.

``comid_fixed`` is one learner with a constant rate over the whole stream.
``saol_random`` keeps the same multiplicative weights as the adaptive
pipeline but outputs a randomly selected member instead of the convex
combination, and spawns new learners cold (at the identity metric) instead
of warm-starting them, isolating the two ingredients the adaptive method
adds: mixing and retro-initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .comid import ComidConfig, comid_step
from .combiner import WeightTable, saol_select, update_weights
from .metric import Constraint, InvalidInputError, LossParams, MetricState, margin_loss
from .rice import RiceEnsemble, rice_advance, rice_step

BASELINE_KINDS = ("comid_fixed", "saol_random")


@dataclass(frozen=True)
class BaselineSpec:
    """Which baseline to run; ``eta`` is the fixed rate (comid_fixed only),
    ``seed`` drives the random selection (saol_random only)."""

    kind: str
    eta: float = 0.0
    seed: int = 0
    eta0: float = 1.0
    i0: int = 1
    norm_cap: float = 0.0
    max_level: int = 20

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise InvalidInputError(f"kind must be one of {BASELINE_KINDS}, got {self.kind!r}")
        if self.kind == "comid_fixed" and not self.eta > 0:
            raise InvalidInputError("comid_fixed needs a positive eta")


def run_baseline(spec: BaselineSpec, stream, lp: LossParams) -> list[MetricState]:
    """Per-step estimate sequence of the baseline over the stream.

    Estimates follow the same protocol as the adaptive pipeline: the state
    reported for step t is the one in hand before the learner sees the
    step-t constraint.
    """
    stream = list(stream)
    if not stream:
        raise InvalidInputError("empty constraint stream")
    dim = stream[0].dim
    if spec.kind == "comid_fixed":
        cfg = ComidConfig(eta=spec.eta, loss=lp, norm_cap=spec.norm_cap)
        state = MetricState.identity(dim)
        estimates = []
        for c in stream:
            estimates.append(state)
            state = comid_step(state, c, cfg)
        return estimates
    return _run_saol(spec, stream, lp, dim)


def _run_saol(spec: BaselineSpec, stream, lp: LossParams, dim: int) -> list[MetricState]:
    ens = RiceEnsemble(
        dim=dim,
        eta0=spec.eta0,
        i0=spec.i0,
        norm_cap=spec.norm_cap,
        max_level=spec.max_level,
        retro_init=False,
    )
    rng = np.random.default_rng(spec.seed)
    estimates = []
    for c in stream:
        rice_advance(ens, c.t)
        table: WeightTable = ens.weight_table()
        if not table:
            estimates.append(MetricState.identity(dim))
            continue
        states = ens.active_states()
        losses = {iv: margin_loss(states[iv], c) for iv in table}
        estimates.append(saol_select(table, states, rng))
        rice_step(ens, c, lp)
        new_weights, _ = update_weights(table, losses)
        for slot in ens.slots.values():
            slot.weight = new_weights[slot.interval]
    return estimates

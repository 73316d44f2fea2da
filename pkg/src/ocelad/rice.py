"""Ensemble of COMID learners on the dyadic interval set.

Intervals at level j have length I0 * 2^j; the level-j tier starts at
t = I0 * 2^j and tiles the time axis from there, so at time t exactly one
interval per eligible level contains t and floor(log2(t / I0)) + 1 learners
are active. Each learner runs at the scale-matched constant rate
eta0 / sqrt(|I|). When an interval ends, its learner's final state is kept
for one generation so the next learner of the next-longer scale (and the
successor at the same scale for level 0) can warm-start from it, which is
what lets long-scale learners enter their interval already converged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .comid import ComidConfig, comid_step, default_norm_cap
from .metric import Constraint, InvalidInputError, LossParams, MetricState


@dataclass(frozen=True)
class DyadicInterval:
    """One interval [start, end] of the dyadic set, at scale ``level``."""

    level: int
    start: int
    end: int

    def __post_init__(self):
        if self.level < 0 or self.start < 1 or self.end < self.start:
            raise InvalidInputError(
                f"bad interval: level={self.level} [{self.start}, {self.end}]"
            )

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def __contains__(self, t: int) -> bool:
        return self.start <= t <= self.end

    def __repr__(self):
        return f"[{self.start},{self.end}]"


def is_dyadic(interval: DyadicInterval, i0: int = 1) -> bool:
    """Whether the interval belongs to the dyadic set with base length i0."""
    length = i0 * (1 << interval.level)
    return interval.length == length and interval.start % length == 0 and interval.start >= length


def spawn_weight(interval: DyadicInterval) -> float:
    """Initial combiner weight of an interval learner: min(1/2, 1/sqrt(|I|)).

    The same quantity is the interval's weight-update step size.
    """
    return min(0.5, 1.0 / math.sqrt(interval.length))


def active_intervals(t: int, i0: int = 1) -> list[DyadicInterval]:
    """All dyadic intervals containing time t, one per eligible level, shortest first."""
    if i0 < 1:
        raise InvalidInputError(f"base interval length must be >= 1, got {i0}")
    if t < i0:
        raise InvalidInputError(f"time {t} precedes the first interval start {i0}")
    out = []
    level, length = 0, i0
    while length <= t:
        start = (t // length) * length
        out.append(DyadicInterval(level, start, start + length - 1))
        level += 1
        length *= 2
    return out


def active_count(t: int, i0: int = 1) -> int:
    return int(math.floor(math.log2(t / i0))) + 1


@dataclass
class LearnerSlot:
    """One live ensemble member: its interval, learning rate, state, and combiner weight."""

    interval: DyadicInterval
    eta: float
    state: MetricState
    weight: float


@dataclass
class RiceEnsemble:
    """Mutable ensemble: active slots keyed by level plus one retired state per level.

    ``finished[level]`` holds (end_time, state) of the most recently retired
    learner at that level, which is exactly what the next spawn at level + 1
    (or the next level-0 learner) warm-starts from.
    """

    dim: int
    eta0: float = 1.0
    i0: int = 1
    norm_cap: float = 0.0
    max_level: int = 20
    retro_init: bool = True
    t: int = 0
    slots: dict[int, LearnerSlot] = field(default_factory=dict)
    finished: dict[int, tuple[int, MetricState]] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1 or self.i0 < 1 or not self.eta0 > 0 or self.max_level < 0:
            raise InvalidInputError("bad ensemble parameters")
        if self.norm_cap == 0.0:
            self.norm_cap = default_norm_cap(self.dim)

    def active_states(self) -> dict[DyadicInterval, MetricState]:
        return {slot.interval: slot.state for slot in self.slots.values()}

    def weight_table(self) -> dict[DyadicInterval, float]:
        return {slot.interval: slot.weight for slot in self.slots.values()}


def _spawn_state(ens: RiceEnsemble, interval: DyadicInterval) -> MetricState:
    if not ens.retro_init:
        return MetricState.identity(ens.dim)
    source_level = interval.level - 1 if interval.level > 0 else 0
    prev = ens.finished.get(source_level)
    if prev is None:
        if interval.level == 0 and interval.start == ens.i0:
            return MetricState.identity(ens.dim)  # very first learner
        raise RuntimeError(
            f"missing predecessor state for spawn of {interval} (level {interval.level})"
        )
    end, state = prev
    if end != interval.start - 1:
        raise RuntimeError(
            f"stale predecessor for {interval}: have end={end}, need {interval.start - 1}"
        )
    return state


def rice_advance(ens: RiceEnsemble, t: int) -> RiceEnsemble:
    """Move the ensemble to time t: retire ended learners, then spawn new ones.

    Spawns copy their predecessor's final state bit-for-bit (level j from the
    level j-1 learner ending at t-1, level 0 from the previous level-0
    learner); with retro-initialization disabled every spawn starts at the
    identity metric. New slots get weight spawn_weight(I).
    """
    if t != ens.t + 1:
        raise InvalidInputError(f"advance must be by one step: ensemble at {ens.t}, got {t}")
    for level in list(ens.slots):
        slot = ens.slots[level]
        if slot.interval.end == t - 1:
            ens.finished[level] = (t - 1, slot.state)
            del ens.slots[level]
    if t >= ens.i0:
        for interval in active_intervals(t, ens.i0):
            if interval.level > ens.max_level or interval.level in ens.slots:
                continue
            if interval.start != t:  # pragma: no cover - schedule violation
                raise RuntimeError(f"missed spawn of {interval} before time {t}")
            ens.slots[interval.level] = LearnerSlot(
                interval=interval,
                eta=ens.eta0 / math.sqrt(interval.length),
                state=_spawn_state(ens, interval),
                weight=spawn_weight(interval),
            )
    ens.t = t
    return ens


def rice_step(ens: RiceEnsemble, c: Constraint, lp: LossParams) -> RiceEnsemble:
    """Advance every active learner's state by one COMID step at its own rate."""
    if c.t != ens.t:
        raise InvalidInputError(f"constraint time {c.t} != ensemble time {ens.t}")
    for slot in ens.slots.values():
        cfg = ComidConfig(eta=slot.eta, loss=lp, norm_cap=ens.norm_cap)
        slot.state = comid_step(slot.state, c, cfg)
    return ens

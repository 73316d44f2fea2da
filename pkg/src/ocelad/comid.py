"""Composite-objective mirror descent step for one metric learner.

Each step takes a plain subgradient step on the hinge loss and then applies
the proximal operator of eta * lambda * r(.) restricted to the PSD cone. With
the squared-Frobenius Bregman generator both supported regularizers have
closed-form proximal maps via a single symmetric eigendecomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metric import (
    Constraint,
    InvalidInputError,
    LossParams,
    MetricState,
    NumericalError,
    margin_subgradient,
)


def default_norm_cap(dim: int) -> float:
    """Spectral-norm cap on learned metrics; wide enough to be inactive unless a run diverges."""
    return 1e6 * dim


@dataclass(frozen=True)
class ComidConfig:
    """Learning rate, loss/regularizer parameters, norm cap, and Bregman generator choice."""

    eta: float
    loss: LossParams = LossParams()
    norm_cap: float = 0.0  # 0 means "use default_norm_cap(dim)"
    psi: str = "frobenius"

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidInputError(f"learning rate must be positive, got {self.eta}")
        if self.norm_cap < 0:
            raise InvalidInputError(f"norm cap must be positive, got {self.norm_cap}")
        if self.psi != "frobenius":
            raise InvalidInputError(f"unsupported Bregman generator {self.psi!r}")

    def cap_for(self, dim: int) -> float:
        return self.norm_cap if self.norm_cap > 0 else default_norm_cap(dim)


def _eigh_checked(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if not np.all(np.isfinite(m)):
        raise NumericalError("eigendecomposition failed: matrix has non-finite entries")
    try:
        return np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh rarely fails on finite input
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc


def _rebuild(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    m = (u * w) @ u.T
    return (m + m.T) / 2.0


def prox_nuclear_psd(m_in, tau: float) -> np.ndarray:
    """argmin over PSD X of 0.5 ||X - M||_F^2 + tau ||X||_*.

    Eigenvalues are shifted down by tau and clamped at zero, which jointly
    realizes the nuclear-norm shrinkage and the PSD projection.
    """
    m_in = np.asarray(m_in, dtype=float)
    if tau < 0:
        raise InvalidInputError(f"prox parameter must be >= 0, got {tau}")
    w, u = _eigh_checked((m_in + m_in.T) / 2.0)
    return _rebuild(u, np.maximum(w - tau, 0.0))


def prox_l1(m_in, tau: float) -> np.ndarray:
    """Elementwise soft-threshold by tau followed by projection onto the PSD cone."""
    m_in = np.asarray(m_in, dtype=float)
    if tau < 0:
        raise InvalidInputError(f"prox parameter must be >= 0, got {tau}")
    soft = np.sign(m_in) * np.maximum(np.abs(m_in) - tau, 0.0)
    w, u = _eigh_checked((soft + soft.T) / 2.0)
    return _rebuild(u, np.maximum(w, 0.0))


def _prox_with_top(m_in: np.ndarray, tau: float, regularizer: str) -> tuple[np.ndarray, float]:
    """Proximal step returning (matrix, largest eigenvalue) with one eigh call."""
    if regularizer == "nuclear":
        w, u = _eigh_checked(m_in)
        w = np.maximum(w - tau, 0.0)
    else:
        soft = np.sign(m_in) * np.maximum(np.abs(m_in) - tau, 0.0)
        w, u = _eigh_checked((soft + soft.T) / 2.0)
        w = np.maximum(w, 0.0)
    return _rebuild(u, w), float(w[-1])


def comid_step(state: MetricState, c: Constraint, cfg: ComidConfig) -> MetricState:
    """One online update of (M, mu).

    M moves against the loss subgradient, then through the regularizer's
    proximal map, then is radially rescaled if its spectral norm exceeds the
    cap. mu moves against its subgradient and is clamped at 1. The input
    state is never mutated; a satisfied margin with lambda = 0 is an exact
    no-op and returns the input state itself.
    """
    grad_m, grad_mu = margin_subgradient(state, c)
    violated = grad_mu != 0.0
    tau = cfg.eta * cfg.loss.lam
    if not violated and tau == 0.0:
        return state
    target = state.m - cfg.eta * grad_m if violated else state.m
    m_next, top = _prox_with_top(target, tau, cfg.loss.regularizer)
    cap = cfg.cap_for(state.dim)
    if top > cap:
        m_next = m_next * (cap / top)
    mu_next = max(1.0, state.mu - cfg.eta * grad_mu)
    return MetricState(m_next, mu_next)


def static_regret(losses_alg, losses_best_fixed) -> float:
    """Total loss of the algorithm minus total loss of the best fixed comparator."""
    a = np.asarray(losses_alg, dtype=float)
    b = np.asarray(losses_best_fixed, dtype=float)
    if a.shape != b.shape:
        raise InvalidInputError(f"loss sequences differ in length: {a.shape} vs {b.shape}")
    return float(a.sum() - b.sum())

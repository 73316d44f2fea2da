"""Core types for online Mahalanobis metric learning from pairwise constraints.

A metric is a symmetric PSD matrix M together with a margin threshold mu >= 1.
Similar pairs (y = +1) should satisfy d_M^2(x, z) <= mu - 1 and dissimilar
pairs (y = -1) should satisfy d_M^2(x, z) >= mu + 1; violations are penalized
with a hinge loss. Everything in this module is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Numerical slack for "eigenvalue >= 0" assertions (double-precision eigensolvers).
PSD_SLACK = 1e-10


class InvalidInputError(ValueError):
    """An operation received structurally invalid input (shape/value contract)."""


class NumericalError(RuntimeError):
    """A linear-algebra step failed (non-finite entries or no convergence)."""


@dataclass(frozen=True, eq=False)
class MetricState:
    """Symmetric PSD matrix ``m`` plus margin threshold ``mu`` (>= 1).

    The matrix is re-symmetrized on construction, so ``m == m.T`` holds
    bitwise. Instances are treated as immutable values: update steps return
    fresh states and never write into ``m``.
    """

    m: np.ndarray
    mu: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInputError(f"metric matrix must be square, got shape {m.shape}")
        # (a + a.T) / 2 is exactly symmetric in IEEE arithmetic.
        object.__setattr__(self, "m", (m + m.T) / 2.0)
        object.__setattr__(self, "mu", float(self.mu))
        if not np.isfinite(self.mu) or self.mu < 1.0:
            raise InvalidInputError(f"margin threshold must be >= 1, got {self.mu}")

    @property
    def dim(self) -> int:
        return self.m.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "MetricState":
        """Plain Euclidean distance with the smallest admissible margin."""
        return cls(np.eye(dim), 1.0)


@dataclass(frozen=True, eq=False)
class Constraint:
    """One streamed pairwise constraint: points x, z with similarity label y at time t."""

    x: np.ndarray
    z: np.ndarray
    y: int
    t: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if x.ndim != 1 or z.ndim != 1 or x.shape != z.shape:
            raise InvalidInputError(
                f"constraint points must be equal-length vectors, got {x.shape} and {z.shape}"
            )
        if self.y not in (1, -1):
            raise InvalidInputError(f"label must be +1 or -1, got {self.y}")
        if self.t < 0:
            raise InvalidInputError(f"time index must be nonnegative, got {self.t}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "y", int(self.y))
        object.__setattr__(self, "t", int(self.t))

    @property
    def dim(self) -> int:
        return self.x.shape[0]


REGULARIZERS = ("nuclear", "l1")


@dataclass(frozen=True)
class LossParams:
    """Regularization weight and choice of regularizer (nuclear or elementwise L1)."""

    lam: float = 0.0
    regularizer: str = "nuclear"

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidInputError(f"regularization weight must be >= 0, got {self.lam}")
        if self.regularizer not in REGULARIZERS:
            raise InvalidInputError(
                f"regularizer must be one of {REGULARIZERS}, got {self.regularizer!r}"
            )


def _check_dims(state: MetricState, x: np.ndarray, z: np.ndarray) -> None:
    if x.shape != (state.dim,) or z.shape != (state.dim,):
        raise InvalidInputError(
            f"dimension mismatch: metric is {state.dim}-dimensional, "
            f"points have shapes {x.shape} and {z.shape}"
        )


def mahalanobis_sq(state: MetricState, x, z) -> float:
    """Squared Mahalanobis distance (x - z)^T M (x - z), clamped at 0."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_dims(state, x, z)
    u = x - z
    val = float(u @ state.m @ u)
    return val if val > 0.0 else 0.0


def margin_value(state: MetricState, c: Constraint) -> float:
    """Signed margin v = y * (mu - u^T M u) with u = x - z. Violation iff v < 1."""
    _check_dims(state, c.x, c.z)
    u = c.x - c.z
    return c.y * (state.mu - float(u @ state.m @ u))


def margin_loss(state: MetricState, c: Constraint) -> float:
    """Hinge penalty max(0, 1 - v) on the signed margin.

    The regularizer term lambda * r(M) is deliberately not included here: the
    proximal step of the learner handles it, and combiner weights compare
    data-fit losses only.
    """
    v = margin_value(state, c)
    return max(0.0, 1.0 - v)


def margin_subgradient(state: MetricState, c: Constraint) -> tuple[np.ndarray, float]:
    """Subgradient of the hinge loss w.r.t. (M, mu).

    Returns (y * u u^T, -y) when the margin is violated (v < 1) and zeros
    otherwise; at the kink v == 1 the zero subgradient is chosen so that
    exactly-satisfied constraints leave the state stationary.
    """
    v = margin_value(state, c)
    if v >= 1.0:
        return np.zeros((state.dim, state.dim)), 0.0
    u = c.x - c.z
    return float(c.y) * np.outer(u, u), -float(c.y)


def regularizer_value(m, p: LossParams) -> float:
    """r(M): nuclear norm (sum of |eigenvalues| for symmetric M) or elementwise L1."""
    m = np.asarray(m, dtype=float)
    if p.regularizer == "nuclear":
        return float(np.abs(np.linalg.eigvalsh(m)).sum())
    return float(np.abs(m).sum())


def smallest_eigenvalue(m) -> float:
    return float(np.linalg.eigvalsh(np.asarray(m, dtype=float))[0])


def operator_norm(m) -> float:
    """Spectral norm of a symmetric matrix."""
    w = np.linalg.eigvalsh(np.asarray(m, dtype=float))
    return float(max(abs(w[0]), abs(w[-1])))

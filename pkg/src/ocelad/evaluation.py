"""Evaluation: embeddings, kNN error, k-means NMI, regret accounting, bound checks.

The learned metric is evaluated by factoring M = L^T L and mapping points
through L, after which Euclidean distance in the image equals the learned
distance. Clustering quality is scored as normalized mutual information of a
k-means run in that embedding against the ground-truth labels.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from .metric import InvalidInputError, MetricState, NumericalError, mahalanobis_sq
from .rice import DyadicInterval

KMEANS_RESTARTS = 10


def embed(state: MetricState, points) -> np.ndarray:
    """Map points so squared Euclidean distance in the image equals d_M^2."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != state.dim:
        raise InvalidInputError(
            f"points must be (n, {state.dim}), got {points.shape}"
        )
    if not np.all(np.isfinite(state.m)):
        raise NumericalError("metric matrix has non-finite entries")
    w, u = np.linalg.eigh(state.m)
    return points @ (u * np.sqrt(np.maximum(w, 0.0)))


def knn_error(embedded, labels, k: int = 5) -> float:
    """Leave-one-out k-nearest-neighbor majority-vote error rate.

    Euclidean distance; distance ties break toward the lower index, vote
    ties toward the smallest label.
    """
    pts = np.asarray(embedded, dtype=float)
    labels = np.asarray(labels)
    n = pts.shape[0]
    if not 1 <= k < n:
        raise InvalidInputError(f"need 1 <= k < n_points, got k={k}, n={n}")
    sq = np.sum(pts**2, axis=1)
    dists = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.fill_diagonal(dists, np.inf)
    order = np.argsort(dists, axis=1, kind="stable")[:, :k]
    neighbor_labels = labels[order]
    uniq = np.unique(labels)
    counts = np.stack([(neighbor_labels == lab).sum(axis=1) for lab in uniq], axis=1)
    predicted = uniq[np.argmax(counts, axis=1)]  # argmax takes the first = smallest label
    return float(np.mean(predicted != labels))


def mutual_information(labels_a, labels_b) -> float:
    """Plug-in mutual information (nats) of two labelings."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise InvalidInputError("labelings must be equal-length nonempty vectors")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    pxy = table / a.size
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    return float(np.sum(pxy[nz] * np.log(pxy[nz] / (px @ py)[nz])))


def _entropy(labels) -> float:
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(labels_a, labels_b) -> float:
    """Mutual information normalized by the geometric mean of entropies; 0/0 -> 0."""
    ha, hb = _entropy(labels_a), _entropy(labels_b)
    if ha == 0.0 or hb == 0.0:
        return 0.0
    val = mutual_information(labels_a, labels_b) / math.sqrt(ha * hb)
    return min(1.0, max(0.0, val))


def kmeans_nmi(embedded, true_labels, k: int, rng: np.random.Generator) -> float:
    """NMI of a k-means clustering of the embedded points against true labels.

    k-means++ seeding, best inertia over KMEANS_RESTARTS restarts, seeded
    from ``rng``. Degenerate input (all points identical) scores 0 with a
    warning.
    """
    pts = np.asarray(embedded, dtype=float)
    if k < 2:
        raise InvalidInputError(f"need k >= 2 clusters, got {k}")
    if np.allclose(pts, pts[0], atol=1e-12):
        warnings.warn("all embedded points identical; clustering is undefined")
        return 0.0
    seed = int(rng.integers(2**32))
    km = KMeans(n_clusters=k, init="k-means++", n_init=KMEANS_RESTARTS, random_state=seed)
    found = km.fit_predict(pts)
    return nmi(found, np.asarray(true_labels))


def nmi_exceedance(trials, threshold: float) -> float:
    """Fraction of trial NMI values strictly above the threshold."""
    vals = np.asarray(trials, dtype=float)
    if vals.size == 0:
        raise InvalidInputError("need at least one trial value")
    return float(np.mean(vals > threshold))


def margin_comparator(points_sub, labels) -> tuple[float, float]:
    """Scale and margin (alpha, mu_star) for the ground-truth comparator metric.

    Chosen from the empirical pair-distance distribution in the relevant
    subspace so that alpha * d^2 <= mu - 1 for the bulk (95%) of same-label
    pairs and alpha * d^2 >= mu + 1 for the bulk of different-label pairs.
    The comparator metric at time t is then alpha * D_t P D_t^T where P
    projects onto the subspace.
    """
    pts = np.asarray(points_sub, dtype=float)
    labels = np.asarray(labels)
    if pts.ndim != 2 or pts.shape[0] != labels.shape[0] or pts.shape[0] < 2:
        raise InvalidInputError("need matching points and labels, at least two points")
    sq = np.sum(pts**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    iu = np.triu_indices(pts.shape[0], k=1)
    same_mask = (labels[:, None] == labels[None, :])[iu]
    pair_d2 = np.maximum(d2[iu], 0.0)
    if not same_mask.any() or same_mask.all():
        raise InvalidInputError("need both same-label and different-label pairs")
    d_same = float(np.percentile(pair_d2[same_mask], 95))
    d_diff = float(np.percentile(pair_d2[~same_mask], 5))
    if d_diff > d_same:
        alpha = 2.0 / (d_diff - d_same)
    else:
        alpha = 2.0 / max(d_same, 1.0)  # overlapping classes: degenerate but defined
    return alpha, 1.0 + alpha * d_same


# ---------------------------------------------------------------------------
# Regret accounting

def dynamic_regret(alg_losses, comparator_losses, interval: tuple[int, int]) -> float:
    """Sum over t in [q, s] of alg loss minus comparator loss (sequences are 1-indexed)."""
    a = np.asarray(alg_losses, dtype=float)
    b = np.asarray(comparator_losses, dtype=float)
    q, s = interval
    if a.shape != b.shape:
        raise InvalidInputError("loss sequences differ in length")
    if not 1 <= q <= s <= a.size:
        raise InvalidInputError(f"interval [{q}, {s}] not covered by {a.size} losses")
    return float(a[q - 1 : s].sum() - b[q - 1 : s].sum())


def path_length(states, interval: tuple[int, int] | None = None) -> float:
    """Total variation of the matrix part: sum of Frobenius norms of successive diffs.

    With an interval [q, s], sums ||M_{t+1} - M_t||_F for t = q .. min(s, T-1)
    where the state list is 1-indexed in t. The margin threshold is excluded.
    """
    mats = [s.m for s in states]
    if len(mats) < 2:
        raise InvalidInputError("need at least two states")
    if interval is None:
        q, s = 1, len(mats) - 1
    else:
        q, s = interval
        if not 1 <= q <= s <= len(mats):
            raise InvalidInputError(f"interval [{q}, {s}] not covered by {len(mats)} states")
    hi = min(s, len(mats) - 1)
    return float(sum(np.linalg.norm(mats[idx] - mats[idx - 1]) for idx in range(q, hi + 1)))


@dataclass(frozen=True)
class BoundConstants:
    """Constants of the dynamic-regret envelope for hinge-loss metric learning.

    g_ell bounds the loss gradient, phi_max = c sqrt(n) bounds half the
    generator gradient, d_max = 2 c sqrt(n) bounds the Bregman diameter,
    sigma is the generator's strong convexity (1 for squared Frobenius), and
    c caps the spectral norm of any metric involved.
    """

    g_ell: float
    phi_max: float
    d_max: float
    sigma: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        for name in ("g_ell", "phi_max", "d_max", "sigma", "c"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")


def hinge_bound_constants(max_u_sq: float, lam: float, c: float, dim: int) -> BoundConstants:
    """Envelope constants computed from run data: the largest pair distance
    max ||x - z||^2, the regularization weight, the norm cap c actually
    attained, and the dimension."""
    root = c * math.sqrt(dim)
    return BoundConstants(g_ell=max_u_sq + lam, phi_max=root, d_max=2.0 * root, sigma=1.0, c=c)


def corollary1_bound(constants: BoundConstants, gamma: float, horizon: int, eta0: float) -> float:
    """sqrt(T) * ((d_max + 4 phi_max gamma) / eta0 + eta0 g_ell^2 / (2 sigma))."""
    if horizon < 1 or not eta0 > 0 or gamma < 0:
        raise InvalidInputError("horizon must be >= 1, eta0 > 0, gamma >= 0")
    k = constants
    return math.sqrt(horizon) * (
        (k.d_max + 4.0 * k.phi_max * gamma) / eta0 + eta0 * k.g_ell**2 / (2.0 * k.sigma)
    )


@dataclass(frozen=True)
class RegretReport:
    interval: tuple[int, int]
    regret: float
    path_length: float
    bound_value: float

    def __post_init__(self):
        if self.path_length < 0:
            raise InvalidInputError("path length must be >= 0")


# ---------------------------------------------------------------------------
# Partition of an arbitrary interval into dyadic pieces

def _dyadic_lengths_at(a: int, i0: int, limit: int) -> list[int]:
    """Lengths of dyadic intervals starting at a and ending by `limit`, longest first."""
    out = []
    length = i0
    while length <= limit - a + 1:
        if a % length == 0:
            out.append(length)
        length *= 2
    return out[::-1]


def lemma5_partition(
    q: int, s: int, i0: int = 1
) -> tuple[list[DyadicInterval], list[DyadicInterval]]:
    """Split [q, s] into consecutive dyadic intervals with a ramp-up/ramp-down shape.

    Returns (left, right): left lengths at least double step over step, right
    lengths at most halve after its first element, and the concatenation
    tiles [q, s] exactly. Found by longest-first search with backtracking;
    a valid split always exists for the dyadic set.
    """
    if not 1 <= i0 <= q <= s:
        raise InvalidInputError(f"need 1 <= i0 <= q <= s, got i0={i0}, q={q}, s={s}")
    if q % i0 or (s + 1) % i0:
        raise InvalidInputError(f"[{q}, {s}] is not tiled by intervals of base length {i0}")

    dead: set[tuple[int, bool, int]] = set()

    def search(a: int, on_left: bool, prev: int) -> list[tuple[int, int, bool]] | None:
        if a > s:
            return []
        key = (a, on_left, prev)
        if key in dead:
            return None
        for length in _dyadic_lengths_at(a, i0, s):
            if on_left:
                # continue the ascending run, or make this the first right element
                if prev == 0 or length >= 2 * prev:
                    rest = search(a + length, True, length)
                    if rest is not None:
                        return [(a, length, True)] + rest
                if prev > 0:  # the left sequence may not be empty
                    rest = search(a + length, False, length)
                    if rest is not None:
                        return [(a, length, False)] + rest
            elif 2 * length <= prev:
                rest = search(a + length, False, length)
                if rest is not None:
                    return [(a, length, False)] + rest
        dead.add(key)
        return None

    placed = search(q, True, 0)
    if placed is None:  # pragma: no cover - the dyadic set always admits a split
        raise NumericalError(f"no dyadic split of [{q}, {s}] found")
    left, right = [], []
    for a, length, is_left in placed:
        iv = DyadicInterval(int(math.log2(length // i0)), a, a + length - 1)
        (left if is_left else right).append(iv)
    return left, right


def lemma5_check(
    q: int, s: int, left: list[DyadicInterval], right: list[DyadicInterval], i0: int = 1
) -> bool:
    """Exact validation of a dyadic split: membership, tiling, and length ratios."""
    from .rice import is_dyadic

    pieces = list(left) + list(right)
    if not pieces or not left:
        return False
    if any(not is_dyadic(iv, i0) for iv in pieces):
        return False
    if pieces[0].start != q or pieces[-1].end != s:
        return False
    if any(nxt.start != cur.end + 1 for cur, nxt in zip(pieces, pieces[1:])):
        return False
    if any(2 * cur.length > nxt.length for cur, nxt in zip(left, left[1:])):
        return False
    if any(2 * nxt.length > cur.length for cur, nxt in zip(right, right[1:])):
        return False
    return True

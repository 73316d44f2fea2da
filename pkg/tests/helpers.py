"""Independent oracles used by the tests.

Everything here recomputes expected values through a different route than
the library (finite differences, iterative optimization, brute-force
enumeration) so that agreement is evidence, not tautology.
"""

from __future__ import annotations

import math

import numpy as np


def hinge_loss_raw(m, mu, u, y):
    """Direct hinge evaluation on raw arrays (tolerates asymmetric matrices)."""
    return max(0.0, 1.0 - y * (mu - float(u @ m @ u)))


def fd_subgradient(m, mu, u, y, h=1e-6):
    """Central finite differences of the hinge loss in every matrix entry and in mu."""
    n = m.shape[0]
    gm = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            mp, mm = m.copy(), m.copy()
            mp[i, j] += h
            mm[i, j] -= h
            gm[i, j] = (hinge_loss_raw(mp, mu, u, y) - hinge_loss_raw(mm, mu, u, y)) / (2 * h)
    gmu = (hinge_loss_raw(m, mu + h, u, y) - hinge_loss_raw(m, mu - h, u, y)) / (2 * h)
    return gm, gmu


def project_psd(m):
    w, u = np.linalg.eigh((m + m.T) / 2.0)
    return (u * np.maximum(w, 0.0)) @ u.T


def minimize_comid_objective(m_hat, grad, eta, lam, tol=1e-8, max_iter=200000):
    """Projected gradient descent on the per-step objective over the PSD cone.

    F(X) = 0.5 ||X - m_hat||_F^2 + eta <grad, X - m_hat> + eta lam ||X||_*
    where the nuclear norm equals the trace on PSD matrices.
    """
    n = m_hat.shape[0]
    x = project_psd(m_hat.copy())
    step = 0.5
    for _ in range(max_iter):
        g = (x - m_hat) + eta * grad + eta * lam * np.eye(n)
        x_new = project_psd(x - step * g)
        if np.linalg.norm(x_new - x) < tol * step:
            return x_new
        x = x_new
    return x


def comid_objective(x, m_hat, grad, eta, lam):
    nuc = np.abs(np.linalg.eigvalsh((x + x.T) / 2.0)).sum()
    return (
        0.5 * np.linalg.norm(x - m_hat) ** 2
        + eta * np.sum(grad * (x - m_hat))
        + eta * lam * nuc
    )


def enumerate_dyadic_levels(t_max, i0=1):
    """Per level: (level, length, array of interval starts) covering [1, t_max]."""
    out = []
    level, length = 0, i0
    while length <= t_max:
        out.append((level, length, np.arange(length, t_max + 1, length)))
        level += 1
        length *= 2
    return out


def oracle_active_set(t, levels):
    """Active intervals at t by scanning the full enumeration (slow, independent)."""
    found = set()
    for level, length, starts in levels:
        if length > t:
            continue
        idx = np.searchsorted(starts, t, side="right") - 1
        st = int(starts[idx])
        assert st <= t <= st + length - 1
        found.add((level, st, st + length - 1))
    return found


def eta_interval(length):
    return min(0.5, 1.0 / math.sqrt(length))


def shadow_weight_sums(outputs):
    """Reconstruct the prefactor-free, never-deactivated weight total per step.

    Every interval enters at 1 when it first appears, is multiplied by
    (1 + eta_I * rho_t * r_t(I)) while active, and is frozen afterwards.
    Returns the running total after each step.
    """
    tilde: dict = {}
    sums = []
    for out in outputs:
        regrets = out.regrets
        for iv in regrets:
            tilde.setdefault(iv, 1.0)
        mx = max((abs(r) for r in regrets.values()), default=0.0)
        if mx > 0.0:
            rho = 1.0 / mx
            for iv, r in regrets.items():
                tilde[iv] *= 1.0 + eta_interval(iv.length) * rho * r
        sums.append(math.fsum(tilde.values()))
    return np.asarray(sums)


def rho_regret_interval_sums(outputs):
    """Per interval: running sum of rho_t * r_t(I) over the steps it was active."""
    sums: dict = {}
    for out in outputs:
        if not out.regrets:
            continue
        mx = max(abs(r) for r in out.regrets.values())
        rho = 1.0 / mx if mx > 0.0 else 0.0
        for iv, r in out.regrets.items():
            sums[iv] = sums.get(iv, 0.0) + rho * r
    return sums


def exhaustive_dyadic_tilings(q, s, i0=1):
    """All tilings of [q, s] by dyadic intervals, as length sequences (brute force)."""
    results = []

    def lengths_at(a):
        out = []
        length = i0
        while a + length - 1 <= s:
            if a % length == 0:
                out.append(length)
            length *= 2
        return out

    def rec(a, acc):
        if a > s:
            results.append(tuple(acc))
            return
        for length in lengths_at(a):
            rec(a + length, acc + [length])

    rec(q, [])
    return results


def valid_ramp_shape(lengths):
    """Whether a length sequence admits the ascending/descending split."""
    n = len(lengths)
    for split in range(1, n + 1):  # left = lengths[:split] (nonempty), right = rest
        left, right = lengths[:split], lengths[split:]
        if any(2 * a > b for a, b in zip(left, left[1:])):
            continue
        if any(2 * b > a for a, b in zip(right, right[1:])):
            continue
        return True
    return False

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocelad.combiner import (
    CombinerOutput,
    combine,
    ocelad_step,
    run_rice_ocelad,
    saol_select,
    spawn_weight,
    update_weights,
)
from ocelad.metric import (
    Constraint,
    InvalidInputError,
    LossParams,
    MetricState,
    margin_loss,
    smallest_eigenvalue,
)
from ocelad.rice import DyadicInterval, RiceEnsemble

from helpers import eta_interval, rho_regret_interval_sums, shadow_weight_sums

IV1 = DyadicInterval(0, 7, 7)
IV2 = DyadicInterval(1, 6, 7)
IV16 = DyadicInterval(4, 16, 31)


def state(diag, mu=1.0):
    return MetricState(np.diag(np.asarray(diag, dtype=float)), mu)


class TestCombine:
    def test_single_passthrough(self):
        s = state([2.0, 1.0], 1.5)
        out = combine({IV1: 0.4}, {IV1: s})
        assert np.allclose(out.m, s.m, atol=0) and out.mu == 1.5

    def test_equal_weights_mean(self):
        out = combine({IV1: 0.3, IV2: 0.3}, {IV1: state([2, 0], 1.0), IV2: state([0, 4], 3.0)})
        assert np.allclose(out.m, np.diag([1.0, 2.0]), atol=1e-15)
        assert out.mu == pytest.approx(2.0, abs=1e-15)

    def test_one_three_weighting(self):
        a, b = state([4, 0], 1.0), state([0, 8], 5.0)
        out = combine({IV1: 1.0, IV2: 3.0}, {IV1: a, IV2: b})
        assert np.allclose(out.m, 0.25 * a.m + 0.75 * b.m, atol=1e-15)
        assert out.mu == pytest.approx(0.25 * 1.0 + 0.75 * 5.0, abs=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            combine({}, {})

    def test_key_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            combine({IV1: 1.0}, {IV2: state([1, 1])})

    def test_output_valid_state(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            states, weights = {}, {}
            for lvl in range(3):
                iv = DyadicInterval(lvl, 8, 8 * (1 << lvl) // (1 << lvl) + (1 << lvl) - 1)
                a = rng.normal(size=(3, 3))
                states[iv] = MetricState(a @ a.T, 1.0 + rng.uniform(0, 3))
                weights[iv] = rng.uniform(0.01, 1.0)
            out = combine(weights, states)
            assert smallest_eigenvalue(out.m) >= -1e-10
            assert out.mu >= 1.0


class TestUpdateWeights:
    def test_single_learner_unchanged(self):
        w, r = update_weights({IV1: 0.5}, {IV1: 3.0})
        assert w == {IV1: 0.5} and r == {IV1: 0.0}

    def test_equal_losses_unchanged(self):
        w, r = update_weights({IV1: 0.5, IV2: 0.25}, {IV1: 2.0, IV2: 2.0})
        assert w == {IV1: 0.5, IV2: 0.25}
        assert r == {IV1: 0.0, IV2: 0.0}

    def test_two_learner_hand_case(self):
        # equal weights, losses (0, 1): mean = 0.5, r = (+0.5, -0.5), rho = 2
        w, r = update_weights({IV1: 0.5, IV2: 0.5}, {IV1: 0.0, IV2: 1.0})
        assert r[IV1] == pytest.approx(0.5) and r[IV2] == pytest.approx(-0.5)
        eta1, eta2 = eta_interval(1), eta_interval(2)
        assert w[IV1] == pytest.approx(0.5 * (1 + eta1))
        assert w[IV2] == pytest.approx(0.5 * (1 - eta2))

    def test_nonfinite_loss_rejected(self):
        with pytest.raises(InvalidInputError):
            update_weights({IV1: 0.5, IV2: 0.5}, {IV1: np.nan, IV2: 0.0})

    @given(
        st.lists(st.floats(min_value=0.0, max_value=100.0), min_size=2, max_size=6),
        st.lists(st.floats(min_value=1e-3, max_value=10.0), min_size=6, max_size=6),
    )
    @settings(max_examples=200, deadline=None)
    def test_invariants_random(self, losses, weights):
        ivs = [DyadicInterval(k, 1 << k, (1 << (k + 1)) - 1) for k in range(len(losses))]
        table = {iv: w for iv, w in zip(ivs, weights)}
        loss_map = {iv: l for iv, l in zip(ivs, losses)}
        new, regrets = update_weights(table, loss_map)
        # positivity
        assert all(v > 0 for v in new.values())
        # zero-sum of probability-weighted regrets
        total = sum(table.values())
        zs = math.fsum(table[iv] / total * regrets[iv] for iv in table)
        assert abs(zs) < 1e-12 * max(1.0, max(losses))
        # factors stay within [1/2, 3/2]
        for iv in table:
            factor = new[iv] / table[iv]
            assert 0.5 - 1e-12 <= factor <= 1.5 + 1e-12


class TestSpawnWeight:
    @pytest.mark.parametrize("length,expected", [(1, 0.5), (4, 0.5), (16, 0.25)])
    def test_values(self, length, expected):
        level = int(math.log2(length))
        iv = DyadicInterval(level, length, 2 * length - 1)
        assert spawn_weight(iv) == expected


class TestSaolSelect:
    def test_single_member(self):
        s = state([1, 2])
        rng = np.random.default_rng(0)
        assert saol_select({IV1: 0.3}, {IV1: s}, rng) is s

    def test_seeded_reproducible(self):
        states = {IV1: state([1, 0]), IV2: state([0, 1])}
        weights = {IV1: 1.0, IV2: 1.0}
        picks1 = [saol_select(weights, states, np.random.default_rng(42)) for _ in range(5)]
        picks2 = [saol_select(weights, states, np.random.default_rng(42)) for _ in range(5)]
        assert all(a is b for a, b in zip(picks1, picks2))

    def test_frequency(self):
        states = {IV1: state([1, 0]), IV2: state([0, 1])}
        weights = {IV1: 0.9, IV2: 0.1}
        rng = np.random.default_rng(7)
        hits = sum(saol_select(weights, states, rng) is states[IV1] for _ in range(10**4))
        assert hits / 10**4 == pytest.approx(0.9, abs=0.02)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            saol_select({}, {}, np.random.default_rng(0))


def sim_constraint(rng, t, dim=2):
    return Constraint(
        rng.normal(size=dim), rng.normal(size=dim), 1 if rng.uniform() < 0.4 else -1, t
    )


class TestOceladStep:
    def test_first_step_passthrough(self):
        ens = RiceEnsemble(dim=2)
        c = Constraint(np.array([0.5, 0.0]), np.zeros(2), 1, 1)
        ens, weights, out = ocelad_step(ens, {}, c, LossParams())
        assert np.array_equal(out.theta_hat.m, np.eye(2))
        assert out.theta_hat.mu == 1.0
        assert list(out.probs.values()) == [1.0]

    def test_stationary_estimates_constant(self):
        ens = RiceEnsemble(dim=2)
        weights = {}
        lp = LossParams()
        c_template = np.array([3.0, 0.0])  # dissimilar satisfied under identity
        for t in range(1, 30):
            c = Constraint(c_template, np.zeros(2), -1, t)
            ens, weights, out = ocelad_step(ens, weights, c, lp)
            assert np.allclose(out.theta_hat.m, np.eye(2), atol=1e-12)
            assert out.theta_hat.mu == 1.0

    def test_three_step_scripted_oracle(self):
        """Replays the per-step protocol with independent hand-written arithmetic."""
        rng = np.random.default_rng(99)
        constraints = [sim_constraint(rng, t) for t in (1, 2, 3)]
        lp = LossParams(0.1, "nuclear")
        eta0 = 0.5
        got = run_rice_ocelad(constraints, 2, lp, eta0=eta0)

        # -- independent script ------------------------------------------------
        def hinge(m, mu, c):
            u = c.x - c.z
            return max(0.0, 1.0 - c.y * (mu - float(u @ m @ u)))

        def step_learner(m, mu, c, eta):
            u = c.x - c.z
            v = c.y * (mu - float(u @ m @ u))
            if v < 1.0:
                m = m - eta * c.y * np.outer(u, u)
                mu = max(1.0, mu + eta * c.y)
            w, q = np.linalg.eigh((m + m.T) / 2)
            m = (q * np.maximum(w - eta * lp.lam, 0.0)) @ q.T
            return m, mu

        # t=1: only [1,1], identity start
        m11, mu11 = np.eye(2), 1.0
        exp1 = (m11.copy(), mu11)
        l11 = hinge(m11, mu11, constraints[0])
        m11, mu11 = step_learner(m11, mu11, constraints[0], eta0 / 1.0)
        # single learner: weights unchanged (r = 0)

        # t=2: [1,1] retires; [2,2] and [2,3] spawn from its final state
        m22, mu22 = m11.copy(), mu11
        m23, mu23 = m11.copy(), mu11
        w22, w23 = 0.5, min(0.5, 1 / math.sqrt(2))
        p22 = w22 / (w22 + w23)
        exp2 = (p22 * m22 + (1 - p22) * m23, p22 * mu22 + (1 - p22) * mu23)
        l22 = hinge(m22, mu22, constraints[1])
        l23 = hinge(m23, mu23, constraints[1])
        m22, mu22 = step_learner(m22, mu22, constraints[1], eta0 / 1.0)
        m23, mu23 = step_learner(m23, mu23, constraints[1], eta0 / math.sqrt(2))
        mean_loss = p22 * l22 + (1 - p22) * l23
        r22, r23 = mean_loss - l22, mean_loss - l23
        mx = max(abs(r22), abs(r23))
        if mx > 0:
            w22 *= 1 + 0.5 * r22 / mx
            w23 *= 1 + min(0.5, 1 / math.sqrt(2)) * r23 / mx

        # t=3: [2,2] retires, [3,3] spawns from it; [2,3] continues
        m33, mu33 = m22.copy(), mu22
        w33 = 0.5
        p33 = w33 / (w33 + w23)
        exp3 = (p33 * m33 + (1 - p33) * m23, p33 * mu33 + (1 - p33) * mu23)

        for expected, out in zip((exp1, exp2, exp3), got):
            assert np.allclose(out.theta_hat.m, expected[0], atol=1e-12)
            assert out.theta_hat.mu == pytest.approx(expected[1], abs=1e-12)

    def test_jensen_and_zero_sum_every_step(self):
        rng = np.random.default_rng(5)
        ens = RiceEnsemble(dim=3, eta0=0.8)
        weights = {}
        lp = LossParams(0.02, "nuclear")
        for t in range(1, 400):
            c = sim_constraint(rng, t, dim=3)
            states_before = ens.active_states()
            ens, weights, out = ocelad_step(ens, weights, c, lp)
            assert all(w > 0 for w in weights.values())
            combined_loss = margin_loss(out.theta_hat, c)
            mixture = math.fsum(out.probs[iv] * out.per_learner_losses[iv] for iv in out.probs)
            assert combined_loss <= mixture + 1e-12
            zs = math.fsum(out.probs[iv] * out.regrets[iv] for iv in out.probs)
            assert abs(zs) <= 1e-12 * max(1.0, *out.per_learner_losses.values())

    def test_envelopes_random_run(self):
        rng = np.random.default_rng(17)
        constraints = [sim_constraint(rng, t, dim=3) for t in range(1, 2001)]
        outs = run_rice_ocelad(constraints, 3, LossParams(), eta0=0.6)
        sums = shadow_weight_sums(outs)
        ts = np.arange(1, len(sums) + 1)
        assert np.all(sums <= ts * (np.log2(ts) + 1.0) + 1e-9)
        per_interval = rho_regret_interval_sums(outs)
        for iv, total in per_interval.items():
            if iv.end <= len(constraints):  # completed intervals only
                assert total <= 5.0 * math.log(iv.end + 1) * math.sqrt(iv.length) + 1e-9

    def test_time_mismatch_rejected(self):
        ens = RiceEnsemble(dim=2)
        with pytest.raises(InvalidInputError):
            ocelad_step(ens, {}, Constraint(np.ones(2), np.zeros(2), 1, 5), LossParams())

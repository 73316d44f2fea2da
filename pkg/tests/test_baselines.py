import numpy as np
import pytest

from ocelad.baselines import BaselineSpec, run_baseline
from ocelad.comid import ComidConfig, comid_step
from ocelad.combiner import run_rice_ocelad
from ocelad.metric import Constraint, InvalidInputError, LossParams, MetricState, margin_loss
from ocelad.synthdata import (
    ScenarioConfig,
    Segment,
    constraint_stream,
    generate_dataset,
    preset_scenario,
)


def random_stream(rng, horizon, dim=3, start=1):
    out = []
    for t in range(start, start + horizon):
        out.append(
            Constraint(rng.normal(size=dim), rng.normal(size=dim),
                       1 if rng.uniform() < 0.4 else -1, t)
        )
    return out


class TestComidFixed:
    def test_equals_direct_composition(self):
        rng = np.random.default_rng(50)
        stream = random_stream(rng, 60)
        lp = LossParams(0.05, "nuclear")
        spec = BaselineSpec(kind="comid_fixed", eta=0.2)
        estimates = run_baseline(spec, stream, lp)

        state = MetricState.identity(3)
        cfg = ComidConfig(eta=0.2, loss=lp)
        for est, c in zip(estimates, stream):
            assert np.array_equal(est.m, state.m) and est.mu == state.mu
            state = comid_step(state, c, cfg)

    def test_eta_required(self):
        with pytest.raises(InvalidInputError):
            BaselineSpec(kind="comid_fixed")

    def test_single_scale_pipeline_equivalence(self):
        # stream confined to [i0, 2*i0 - 1]: exactly one ensemble scale ever exists,
        # so the adaptive pipeline degenerates to one fixed-rate learner
        rng = np.random.default_rng(51)
        i0 = 8
        stream = random_stream(rng, i0, dim=2, start=i0)
        lp = LossParams(0.1, "nuclear")
        eta0 = 0.7
        outs = run_rice_ocelad(
            iter([Constraint(np.zeros(2), np.zeros(2), -1, t) for t in range(1, i0)]
                 + stream),
            2, lp, eta0=eta0, i0=i0,
        )
        fixed = run_baseline(
            BaselineSpec(kind="comid_fixed", eta=eta0 / np.sqrt(i0)), stream, lp
        )
        for out, est in zip(outs[i0 - 1:], fixed):
            assert np.allclose(out.theta_hat.m, est.m, atol=0)
            assert out.theta_hat.mu == est.mu


class TestSaolRandom:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(52)
        stream = random_stream(rng, 50)
        lp = LossParams()
        spec = BaselineSpec(kind="saol_random", seed=9, eta0=0.5)
        a = run_baseline(spec, stream, lp)
        b = run_baseline(spec, stream, lp)
        for x, y in zip(a, b):
            assert np.array_equal(x.m, y.m) and x.mu == y.mu

    def test_output_is_always_a_member(self):
        # members diverge quickly; every estimate must equal one member exactly
        rng = np.random.default_rng(53)
        stream = random_stream(rng, 40)
        lp = LossParams()
        spec = BaselineSpec(kind="saol_random", seed=3, eta0=1.0)

        from ocelad.combiner import update_weights, saol_select
        from ocelad.rice import RiceEnsemble, rice_advance, rice_step

        ens = RiceEnsemble(dim=3, eta0=1.0, retro_init=False)
        rng_sel = np.random.default_rng(3)
        estimates = run_baseline(spec, stream, lp)
        for c, est in zip(stream, estimates):
            rice_advance(ens, c.t)
            states = ens.active_states()
            member_ms = [s.m for s in states.values()]
            assert any(np.array_equal(est.m, m) for m in member_ms)
            table = ens.weight_table()
            losses = {iv: margin_loss(states[iv], c) for iv in table}
            saol_select(table, states, rng_sel)
            rice_step(ens, c, lp)
            new_w, _ = update_weights(table, losses)
            for slot in ens.slots.values():
                slot.weight = new_w[slot.interval]

    def test_no_retro_initialization(self):
        # right after a spawn, a freshly created learner is exactly the identity;
        # with retro-init it would carry its predecessor's learned state
        rng = np.random.default_rng(54)
        stream = random_stream(rng, 16, dim=2)
        lp = LossParams()

        from ocelad.rice import RiceEnsemble, rice_advance, rice_step

        ens = RiceEnsemble(dim=2, eta0=1.0, retro_init=False)
        for c in stream:
            rice_advance(ens, c.t)
            spawned = [s for s in ens.slots.values() if s.interval.start == c.t]
            for slot in spawned:
                assert np.array_equal(slot.state.m, np.eye(2))
                assert slot.state.mu == 1.0
            rice_step(ens, c, lp)

    def test_empty_stream_rejected(self):
        with pytest.raises(InvalidInputError):
            run_baseline(BaselineSpec(kind="saol_random"), [], LossParams())


class TestRateOrdering:
    """Desk-scale reproduction of the rate tradeoff: the rate tuned for a stationary
    stream wins there, while a faster rate copes better with a clustering switch
    followed by drift."""

    ETA_LOW = 0.001  # best on a long stationary tail
    ETA_HIGH = 0.005  # best on the post-switch drifting window

    def mean_losses(self, segments, horizon, eta, window):
        base = preset_scenario("paper-fig-scaled")
        vals = []
        for seed in (9, 10, 11):
            cfg = ScenarioConfig(
                n_points=base.n_points,
                ambient_dim=base.ambient_dim,
                cluster_dim=base.cluster_dim,
                noise_sigma=base.noise_sigma,
                blob_max_separation=base.blob_max_separation,
                segments=segments,
                horizon=horizon,
                seed=seed,
            )
            rng = np.random.default_rng(seed)
            data = generate_dataset(cfg, rng)
            stream = constraint_stream(cfg, data, rng)
            est = run_baseline(BaselineSpec(kind="comid_fixed", eta=eta), stream, LossParams())
            lo, hi = window
            vals.append(
                np.mean([margin_loss(e, c) for e, c in zip(est[lo:hi], stream[lo:hi])])
            )
        return float(np.mean(vals))

    def test_low_rate_wins_on_stationary_stream(self):
        segments = (Segment(3000, 0.0, "A"),)
        low = self.mean_losses(segments, 3000, self.ETA_LOW, (1500, 3000))
        high = self.mean_losses(segments, 3000, self.ETA_HIGH, (1500, 3000))
        assert low < high

    def test_high_rate_wins_after_switch_with_drift(self):
        segments = (Segment(500, 0.0, "A"), Segment(1000, 0.005, "B"))
        low = self.mean_losses(segments, 1500, self.ETA_LOW, (600, 1500))
        high = self.mean_losses(segments, 1500, self.ETA_HIGH, (600, 1500))
        assert high < low

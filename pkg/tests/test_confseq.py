import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swfalloc.confseq import ConfState, fixed_policy_cs, lift_cs, lift_state
from swfalloc.oracle import solve
from swfalloc.welfare import Family, WelfareSpec, eval_welfare


def boundary_radius(m, n, delta, sigma=1.0, two_sided=False):
    # independent arithmetic for the stated boundary
    b = 2 * n if two_sided else n
    loglog = max(0.0, math.log(math.log(2 * m)))
    return 1.7 * sigma * math.sqrt((math.log(5.2 * b / delta) + loglog) / m)


class TestUpdate:
    def test_two_observations_match_stated_formula(self):
        state = ConfState(1, 0.05)
        state.update(0, 0.5)
        state.update(0, 0.7)
        assert state.mean[0] == pytest.approx(0.6)
        r = 1.7 * math.sqrt((math.log(104.0) + math.log(math.log(4.0))) / 2.0)
        assert r == pytest.approx(2.6801, abs=1e-4)
        assert state.hi[0] == pytest.approx(0.6 + r, rel=1e-12)
        assert state.lo[0] == pytest.approx(0.6 - r, rel=1e-12)

    def test_first_radius_clamps_loglog(self):
        state = ConfState(3, 0.1)
        # log log 2 < 0 is clamped away
        assert state.radius(1) == pytest.approx(
            1.7 * math.sqrt(math.log(5.2 * 3 / 0.1)))

    def test_constant_stream_keeps_mean(self):
        state = ConfState(2, 0.1)
        for _ in range(25):
            state.update(1, 0.37)
        assert state.mean[1] == pytest.approx(0.37)
        assert state.count[1] == 25
        assert state.count[0] == 0

    def test_sentinels_until_first_observation(self):
        state = ConfState(2, 0.1)
        assert state.lo[0] == -np.inf and state.hi[0] == np.inf
        assert not state.initialized
        state.update(0, 0.4)
        state.update(1, 0.5)
        assert state.initialized

    def test_two_sided_budget_widens_radius(self):
        one = ConfState(4, 0.1, two_sided=False)
        two = ConfState(4, 0.1, two_sided=True)
        assert two.radius(5) > one.radius(5)
        assert two.radius(5) == pytest.approx(
            boundary_radius(5, 4, 0.1, two_sided=True))

    def test_support_clamp(self):
        state = ConfState(1, 0.1, support=(0.1, 1.0))
        state.update(0, 0.6)
        assert state.lo[0] == 0.1
        assert state.hi[0] == 1.0

    def test_radius_strictly_decreasing(self):
        state = ConfState(5, 0.1)
        for m in range(1, 200):
            assert state.radius(m + 1) < state.radius(m)

    @given(seed=st.integers(0, 2**32 - 1), n_obs=st.integers(2, 60))
    @settings(max_examples=60, deadline=None)
    def test_running_intersection_bands_monotone(self, seed, n_obs):
        rng = np.random.default_rng(seed)
        state = ConfState(1, 0.1, sigma=0.5)
        prev_lo, prev_hi = -np.inf, np.inf
        for _ in range(n_obs):
            state.update(0, float(rng.uniform(0.0, 1.0)))
            assert state.lo[0] >= prev_lo - 1e-15
            assert state.hi[0] <= prev_hi + 1e-15
            prev_lo, prev_hi = state.lo[0], state.hi[0]

    def test_width_shrinks_like_loglog_over_m(self):
        m = 10**4
        state = ConfState(5, 0.1, sigma=1.0)
        width = 2 * state.radius(m)
        c = 6.0 * 1.7 * math.sqrt(math.log(5.2 * 5 / 0.1))
        assert width <= c * math.sqrt(math.log(math.log(m)) / m)


class TestLift:
    def test_degenerate_band_recovers_optimum(self):
        spec = WelfareSpec.egalitarian(3)
        mu = np.array([0.3, 0.6, 0.9])
        band = lift_cs(spec, mu, mu, 2)
        opt = eval_welfare(spec, mu * solve(spec, mu, 2).p)
        assert band.w_lo == pytest.approx(opt)
        assert band.w_hi == pytest.approx(opt)

    def test_egalitarian_example_sandwich(self):
        spec = WelfareSpec.egalitarian(2)
        band = lift_cs(spec, [0.5, 1.0], [1.0, 2.0], 1)
        assert band.w_lo == pytest.approx(1 / 3, abs=1e-12)
        assert band.w_hi == pytest.approx(2 / 3, abs=1e-12)
        mu = np.array([0.75, 1.5])
        opt = eval_welfare(spec, mu * solve(spec, mu, 1).p)
        assert opt == pytest.approx(0.5)
        assert band.w_lo <= opt <= band.w_hi

    def test_widening_hi_never_decreases_upper(self):
        spec = WelfareSpec(Family.GINI, [0.7, 0.5, 0.1])
        lo = np.array([0.2, 0.3, 0.4])
        hi = np.array([0.4, 0.5, 0.6])
        base = lift_cs(spec, lo, hi, 2)
        wider = lift_cs(spec, lo, hi + 0.3, 2)
        assert wider.w_hi >= base.w_hi - 1e-12

    def test_sandwich_with_planted_truth(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            n = int(rng.integers(2, 6))
            k = int(rng.integers(1, n + 1))
            mu = rng.uniform(0.1, 1.0, n)
            lo = mu - rng.uniform(0.0, 0.5, n)
            lo = np.maximum(lo, 0.01)
            hi = mu + rng.uniform(0.0, 0.5, n)
            fam = [Family.WPM, Family.KOLM, Family.GINI][int(rng.integers(3))]
            if fam is Family.GINI:
                spec = WelfareSpec(fam, np.sort(rng.uniform(0, 1, n))[::-1])
            else:
                w = rng.dirichlet(np.ones(n)) + 0.02
                w /= w.sum()
                qs = [-2.0, -1.0, 0.0] + ([0.5, 1.0] if fam is Family.WPM else [])
                spec = WelfareSpec(fam, w, qs[int(rng.integers(len(qs)))])
            band = lift_cs(spec, lo, hi, k)
            opt = eval_welfare(spec, mu * solve(spec, mu, k).p)
            assert band.w_lo <= opt + 1e-10
            assert band.w_hi >= opt - 1e-10

    def test_sentinels_rejected(self):
        spec = WelfareSpec.egalitarian(2)
        state = ConfState(2, 0.1)
        state.update(0, 0.5)
        with pytest.raises(ValueError):
            lift_state(spec, state, 1)

    def test_nonpositive_lower_bound_rejected(self):
        spec = WelfareSpec.egalitarian(2)
        with pytest.raises(ValueError):
            lift_cs(spec, [0.0, 0.5], [1.0, 1.0], 1)


class TestFixedPolicy:
    def test_degenerate_band_at_optimum(self):
        spec = WelfareSpec.egalitarian(2)
        mu = np.array([0.75, 1.5])
        p_star = solve(spec, mu, 1)
        w_lo, w_hi = fixed_policy_cs(spec, mu, mu, p_star)
        opt = eval_welfare(spec, mu * p_star.p)
        assert w_lo == pytest.approx(opt) and w_hi == pytest.approx(opt)

    def test_egalitarian_uniform_policy(self):
        spec = WelfareSpec.egalitarian(2)
        w_lo, w_hi = fixed_policy_cs(spec, [0.5, 1.0], [1.0, 2.0], [0.5, 0.5])
        assert w_lo == pytest.approx(0.25)
        assert w_hi == pytest.approx(0.5)

    def test_nesting_as_band_widens(self):
        spec = WelfareSpec(Family.KOLM, [0.4, 0.6], -1.0)
        p = np.array([0.7, 0.3])
        inner = fixed_policy_cs(spec, [0.4, 0.5], [0.6, 0.7], p)
        outer = fixed_policy_cs(spec, [0.3, 0.4], [0.7, 0.8], p)
        assert outer[0] <= inner[0] and inner[1] <= outer[1]

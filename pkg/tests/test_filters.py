"""Tests for the NLMS/PNLMS/ZA-PNLMS/RZA-PNLMS steps and the run driver."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparsefilt.filters import (
    DIVERGENCE_LIMIT,
    Algorithm,
    FilterConfig,
    FilterState,
    nlms_step,
    pnlms_step,
    record_mask,
    run_filter,
    rzapnlms_step,
    simulate,
    step,
    zapnlms_step,
)
from sparsefilt.gain import GainParams
from sparsefilt.signals import SignalBuffer, gen_sparse_system, gen_white_gaussian, system_output


def state(*w):
    return FilterState(np.array(w, dtype=float))


NLMS = FilterConfig(Algorithm.NLMS, mu=1.0, delta_p=0.0)
PNLMS = FilterConfig(Algorithm.PNLMS, mu=1.0, delta_p=0.0, gain_params=GainParams(0.01, 0.001))


def random_problem(seed, L=16, n=1000):
    rng = np.random.default_rng(seed)
    w_opt = np.where(rng.random(L) < 0.3, rng.standard_normal(L), 0.0)
    x = rng.standard_normal(n)
    d = np.convolve(x, w_opt)[:n] + 0.05 * rng.standard_normal(n)
    return SignalBuffer(x, 1.0), SignalBuffer(d)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"mu": 0.0}, {"mu": -1.0}, {"delta_p": -1e-3}, {"rho": -1e-4}, {"epsilon": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            FilterConfig(**kw)

    @pytest.mark.parametrize("name", ["ZA-PNLMS", "za_pnlms", " Za-Pnlms "])
    def test_algorithm_parse(self, name):
        assert Algorithm.parse(name) is Algorithm.ZA_PNLMS

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError, match="unknown algorithm"):
            Algorithm.parse("rls")

    def test_defaults(self):
        cfg = FilterConfig()
        assert (cfg.mu, cfg.rho, cfg.delta_p) == (0.7, 1e-4, 0.01)
        assert cfg.gain_params == GainParams(0.01, 0.001)


class TestNLMS:
    def test_one_shot_projection(self):
        s = nlms_step(state(0, 0), [1, 0], 1.0, NLMS)
        assert s.last_error == 1.0
        np.testing.assert_array_equal(s.w, [1, 0])

    def test_zero_regressor_keeps_weights(self):
        s = nlms_step(state(1, 0), [0, 0], 5.0, NLMS.with_(delta_p=0.01))
        np.testing.assert_array_equal(s.w, [1, 0])

    def test_hand_example(self):
        s = nlms_step(state(0, 0), [1, 1], 2.0, NLMS.with_(mu=0.5))
        assert s.last_error == 2.0
        np.testing.assert_allclose(s.w, [0.5, 0.5], rtol=1e-15)

    def test_wrong_algorithm(self):
        with pytest.raises(ValueError, match="NLMS step"):
            nlms_step(state(0, 0), [1, 0], 1.0, PNLMS)

    @pytest.mark.parametrize("x,d", [([np.nan, 0], 1.0), ([1, 0], np.inf)])
    def test_non_finite_input(self, x, d):
        with pytest.raises(ValueError, match="non-finite"):
            nlms_step(state(0, 0), x, d, NLMS)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            nlms_step(state(0, 0), [1, 0, 0], 1.0, NLMS)


class TestPNLMS:
    def test_hand_example(self):
        s = pnlms_step(state(1, 0), [1, 1], 2.0, PNLMS)
        assert s.last_error == 1.0
        np.testing.assert_allclose(s.w, [1 + 1 / 1.01, 0.01 / 1.01], rtol=1e-14)
        np.testing.assert_allclose(s.w, [1.990099, 0.009901], atol=1e-6)

    def test_zero_error_keeps_weights(self):
        s = pnlms_step(state(0.5, 0.25), [1.0, 2.0], 1.0, PNLMS)
        assert s.last_error == 0.0
        np.testing.assert_array_equal(s.w, [0.5, 0.25])

    def test_first_step_matches_nlms_with_scaled_regulariser(self, rng):
        L = 8
        x, d = rng.standard_normal(L), 0.7
        cfg = PNLMS.with_(mu=0.6, delta_p=0.01)
        p = pnlms_step(FilterState.zeros(L), x, d, cfg)
        n = nlms_step(FilterState.zeros(L), x, d, NLMS.with_(mu=0.6, delta_p=0.01 * L))
        np.testing.assert_array_equal(p.w, n.w)

    def test_gain_override(self):
        g = np.array([0.5, 0.5])
        s = pnlms_step(state(1, 0), [1, 1], 2.0, PNLMS, gain=g)
        np.testing.assert_allclose(s.w, [1.5, 0.5])

    def test_iteration_counter(self):
        s = pnlms_step(state(0, 0), [1, 1], 1.0, PNLMS)
        assert pnlms_step(s, [1, 1], 1.0, PNLMS).n == 2


class TestZA:
    CFG = PNLMS.with_(algorithm=Algorithm.ZA_PNLMS, rho=1e-4)

    def test_hand_example(self):
        s = zapnlms_step(state(1, 0), [1, 1], 2.0, self.CFG)
        p = pnlms_step(state(1, 0), [1, 1], 2.0, PNLMS)
        np.testing.assert_allclose(s.w, p.w - [1e-4, 0], rtol=1e-15)
        np.testing.assert_allclose(s.w, [1.989999, 0.009901], atol=1e-6)

    def test_pure_shrinkage(self):
        cfg = self.CFG.with_(rho=0.01, delta_p=0.01)
        s = zapnlms_step(state(-0.5, 0.5), [0, 0], 0.0, cfg)
        np.testing.assert_allclose(s.w, [-0.49, 0.49], rtol=1e-15)

    def test_zero_tap_not_attracted(self):
        cfg = self.CFG.with_(rho=0.01, delta_p=0.01)
        s = zapnlms_step(state(0.0, 0.5), [0, 0], 0.0, cfg)
        assert s.w[0] == 0.0

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_rho_zero_is_pnlms(self, seed):
        rng = np.random.default_rng(seed)
        w, x, d = rng.standard_normal(6), rng.standard_normal(6), float(rng.standard_normal())
        a = zapnlms_step(FilterState(w), x, d, self.CFG.with_(rho=0.0))
        b = pnlms_step(FilterState(w), x, d, PNLMS)
        assert np.array_equal(a.w, b.w)

    def test_clamp_crossing(self):
        cfg = self.CFG.with_(rho=0.01, delta_p=0.01, clamp_crossing=True)
        s = zapnlms_step(state(0.004, -0.5), [0, 0], 0.0, cfg)
        np.testing.assert_allclose(s.w, [0.0, -0.49])
        free = zapnlms_step(state(0.004, -0.5), [0, 0], 0.0, cfg.with_(clamp_crossing=False))
        assert free.w[0] == pytest.approx(-0.006)


class TestRZA:
    CFG = PNLMS.with_(algorithm=Algorithm.RZA_PNLMS, rho=0.011, epsilon=10.0, delta_p=0.01)

    def test_attractor_magnitude(self):
        s = rzapnlms_step(state(1.0, 0.0), [0, 0], 0.0, self.CFG)
        assert 1.0 - s.w[0] == pytest.approx(0.001, rel=1e-12)

    def test_zero_tap(self):
        s = rzapnlms_step(state(0.0, 1.0), [0, 0], 0.0, self.CFG.with_(rho=5.0, epsilon=0.1))
        assert s.w[0] == 0.0

    def test_selective_shrinkage(self):
        s = rzapnlms_step(state(0.01, 1.0), [0, 0], 0.0, self.CFG.with_(rho=1e-3))
        small, large = 0.01 - s.w[0], 1.0 - s.w[1]
        assert small > 5 * large

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_eps_zero_is_za(self, seed):
        rng = np.random.default_rng(seed)
        w, x, d = rng.standard_normal(6), rng.standard_normal(6), float(rng.standard_normal())
        a = rzapnlms_step(FilterState(w), x, d, self.CFG.with_(epsilon=0.0))
        b = zapnlms_step(FilterState(w), x, d, self.CFG.with_(algorithm=Algorithm.ZA_PNLMS))
        assert np.array_equal(a.w, b.w)


class TestShrinkageProperty:
    @settings(max_examples=100, deadline=None)
    @given(
        w=arrays(np.float64, 8, elements=st.floats(-10, 10, allow_subnormal=False)),
        rho=st.floats(1e-6, 1e-2),
        alg=st.sampled_from([Algorithm.ZA_PNLMS, Algorithm.RZA_PNLMS]),
    )
    def test_zero_regressor_never_grows_taps(self, w, rho, alg):
        cfg = FilterConfig(alg, rho=rho, epsilon=3.0)
        out = step(FilterState(w), np.zeros(8), 0.0, cfg).w
        # |w+| <= |w| unless the attractor overshoots through zero.
        crossed = np.sign(out) * np.sign(w) < 0
        ok = (np.abs(out) <= np.abs(w)) | crossed
        assert ok.all()
        assert np.all(out[w == 0] == 0)
        assert np.all(out[w != 0] != w[w != 0])


class TestRunFilter:
    def test_empty_input(self):
        run = run_filter(FilterConfig(), 4, SignalBuffer([]), SignalBuffer([]))
        assert run.errors.size == 0
        np.testing.assert_array_equal(run.final.w, np.zeros(4))
        assert not run.diverged

    def test_noiseless_two_tap_nlms(self):
        s = gen_sparse_system(2, [(0, 0.8), (1, -0.3)])
        x = gen_white_gaussian(200, 1.0, 4)
        d = system_output(s, x, SignalBuffer(np.zeros(200)))
        run = run_filter(NLMS.with_(delta_p=1e-12), 2, x, d)
        assert np.max(np.abs(run.errors[50:])) < 1e-8

    def test_determinism(self):
        x, d = random_problem(3)
        a = run_filter(FilterConfig(), 16, x, d)
        b = run_filter(FilterConfig(), 16, x, d)
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.errors, b.errors)

    def test_matches_step_loop(self):
        x, d = random_problem(4, L=8, n=300)
        cfg = FilterConfig(Algorithm.RZA_PNLMS, rho=1e-3)
        run = run_filter(cfg, 8, x, d)
        st_ = FilterState.zeros(8)
        regs = np.concatenate([np.zeros(7), x.samples])
        for n in range(300):
            st_ = step(st_, regs[n:n + 8][::-1], d.samples[n], cfg)
            assert st_.last_error == run.errors[n]
        assert np.array_equal(st_.w, run.final.w)
        assert np.array_equal(run.weights[-1], run.final.w)

    def test_error_uses_pre_update_weights(self):
        x, d = random_problem(5, L=4, n=10)
        run = run_filter(FilterConfig(), 4, x, d)
        regs = np.concatenate([np.zeros(3), x.samples])
        for n in range(10):
            xn = regs[n:n + 4][::-1]
            assert run.errors[n] == pytest.approx(d.samples[n] - run.weights[n] @ xn, abs=1e-14)

    @pytest.mark.parametrize("record,count", [("all", 101), ("final", 1), (10, 11), (7, 15)])
    def test_record_policy(self, record, count):
        x, d = random_problem(6, L=4, n=100)
        run = run_filter(FilterConfig(), 4, x, d, record=record)
        assert run.weights.shape == (count, 4)
        assert run.times.size == count

    def test_bad_stride(self):
        with pytest.raises(ValueError):
            record_mask(10, 0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            run_filter(FilterConfig(), 4, SignalBuffer([1.0, 2.0]), SignalBuffer([1.0]))

    def test_divergence_flagged(self):
        x, d = random_problem(7, L=8, n=2000)
        run = run_filter(FilterConfig(Algorithm.NLMS, mu=4.0, delta_p=0.0), 8, x, d)
        assert run.diverged
        assert run.errors.size == run.diverged_at + 1
        assert np.all(np.isnan(run.final.w))

    def test_gain_tracking_stays_on_simplex(self):
        x, d = random_problem(8, L=32, n=2000)
        run = run_filter(FilterConfig(), 32, x, d, record="final", track_gain=True)
        assert run.gain_sum_dev.max() <= 1e-12
        assert run.gain_min.min() > 0


class TestReductionChain:
    @pytest.mark.parametrize("L", [4, 64])
    def test_za_rho0_is_pnlms(self, L):
        x, d = random_problem(L, L=L)
        base = FilterConfig(Algorithm.PNLMS, mu=0.5)
        a = run_filter(base, L, x, d)
        b = run_filter(base.with_(algorithm=Algorithm.ZA_PNLMS, rho=0.0), L, x, d)
        assert np.array_equal(a.weights, b.weights)

    @pytest.mark.parametrize("L", [4, 64])
    def test_rza_eps0_is_za(self, L):
        x, d = random_problem(L + 1, L=L)
        base = FilterConfig(Algorithm.ZA_PNLMS, mu=0.5, rho=1e-3)
        a = run_filter(base, L, x, d)
        b = run_filter(base.with_(algorithm=Algorithm.RZA_PNLMS, epsilon=0.0), L, x, d)
        assert np.array_equal(a.weights, b.weights)

    @pytest.mark.parametrize("L", [4, 64])
    def test_uniform_gain_pnlms_is_nlms(self, L):
        x, d = random_problem(L + 2, L=L, n=500)
        cp = FilterConfig(Algorithm.PNLMS, mu=0.5, delta_p=0.01)
        cn = FilterConfig(Algorithm.NLMS, mu=0.5, delta_p=0.01 * L)
        sp, sn = FilterState.zeros(L), FilterState.zeros(L)
        regs = np.concatenate([np.zeros(L - 1), x.samples])
        g = np.full(L, 1.0 / L)
        for n in range(500):
            xn = regs[n:n + L][::-1]
            sp = pnlms_step(sp, xn, d.samples[n], cp, gain=g)
            sn = nlms_step(sn, xn, d.samples[n], cn)
            assert np.array_equal(sp.w, sn.w)


class TestSimulate:
    def test_single_trial_matches_run_filter(self):
        x, d = random_problem(9, L=8, n=500)
        br = simulate(FilterConfig(), x.samples[None], d.samples[None], 8, record=1)
        run = run_filter(FilterConfig(), 8, x, d, record=1)
        assert np.array_equal(br.mean_weights, run.weights)

    def test_batch_mean_equals_mean_of_runs(self):
        runs, X, D = [], [], []
        for t in range(3):
            x, d = random_problem(20 + t, L=8, n=300)
            X.append(x.samples)
            D.append(d.samples)
            runs.append(run_filter(FilterConfig(), 8, x, d, record=10).weights)
        br = simulate(FilterConfig(), np.array(X), np.array(D), 8, record=10)
        np.testing.assert_allclose(br.mean_weights, np.mean(runs, axis=0), rtol=1e-13, atol=1e-15)

    def test_diverged_trial_dropped(self):
        x0, d0 = random_problem(30, L=8, n=400)
        # A tiny input against an O(1) desired signal drives |w| past the limit.
        X = np.stack([x0.samples, 1e-20 * x0.samples])
        D = np.stack([d0.samples, d0.samples])
        br = simulate(FilterConfig(Algorithm.NLMS, mu=0.5, delta_p=0.0), X, D, 8, record=1)
        assert br.diverged.tolist() == [False, True]
        ok = run_filter(FilterConfig(Algorithm.NLMS, mu=0.5, delta_p=0.0), 8, x0, d0)
        after = br.diverged_at[1] + 2
        assert np.array_equal(br.mean_weights[after:], ok.weights[after:])
        assert np.all(np.isnan(br.errors[1, br.diverged_at[1] + 1:]))

    def test_divergence_limit_value(self):
        assert DIVERGENCE_LIMIT == 1e12

    def test_tail_gain_and_sign(self):
        x, d = random_problem(31, L=8, n=400)
        br = simulate(FilterConfig(), x.samples[None], d.samples[None], 8, gain_tail_start=200)
        assert br.mean_gain.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.abs(br.mean_sign) <= 1)

    def test_nlms_tail_gain_is_uniform(self):
        x, d = random_problem(32, L=8, n=100)
        br = simulate(FilterConfig(Algorithm.NLMS), x.samples[None], d.samples[None], 8, gain_tail_start=50)
        np.testing.assert_array_equal(br.mean_gain, np.full(8, 1 / 8))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            simulate(FilterConfig(), np.zeros((2, 10)), np.zeros((2, 9)), 4)

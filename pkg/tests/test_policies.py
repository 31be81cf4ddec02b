import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import diag_spec, random_stable_spec
from oracles import find_cycle, replay_bonus_gaps
from lgdsbandit.config import POLICY_IDS
from lgdsbandit.errors import ParameterError
from lgdsbandit.filtering import KalmanState, OracleKalmanState, kf_init, kf_update
from lgdsbandit.harness import run_episode
from lgdsbandit.numerics import riccati_map, solve_dare_single
from lgdsbandit.policies import (BaselineState, OfulState, Rexp3State, argmax_lowest, default_params,
                                 exp3_probabilities, idea_bonus, idea_select, kalman_oracle_select,
                                 kalman_ucb_bonus, kalman_ucb_select, kode_select, make_policy,
                                 optimism_evaluator, optimistic_select, oful_select, random_select,
                                 rexp3_select, rexp3_update, sw_ucb_select, ucb_select)


def kf(zhat, P):
    return KalmanState(np.asarray(zhat, float), np.asarray(P, float))


def lowest_argmax(scores, tol=1e-12):
    best = max(scores)
    if not np.isfinite(best):
        return scores.index(best)
    scale = max(abs(s) for s in scores if np.isfinite(s))
    return min(i for i, s in enumerate(scores) if s >= best - tol * scale)


class TestTieRule:
    @given(st.lists(st.integers(-3, 3), min_size=1, max_size=12))
    def test_lowest_index(self, scores):
        assert argmax_lowest(scores) == min(i for i, s in enumerate(scores) if s == max(scores))

    def test_nan_never_wins(self):
        assert argmax_lowest([np.nan, 0.0]) == 1

    def test_roundoff_counts_as_tie(self):
        assert argmax_lowest([1.0, 1.0 + 1e-15, 0.5]) == 0
        assert argmax_lowest([1.0, 1.0 + 1e-9]) == 1

    def test_infinite_scores(self):
        assert argmax_lowest([1.0, np.inf, np.inf]) == 1


class TestIdea:
    def test_identity_example(self, rng):
        A = rng.standard_normal((4, 3))
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        spec = diag_spec(np.eye(3), np.eye(3), 1.0, A)
        d = idea_select(kf(np.zeros(3), np.eye(3)), spec)
        np.testing.assert_allclose(d.scores, np.sqrt(0.5))
        assert d.action_index == 0

    def test_gamma_zero_is_greedy(self, rng):
        spec = random_stable_spec(rng, 3, 5).replace(gamma=np.zeros((3, 3)))
        state = kf(rng.standard_normal(3), spec.sigma0)
        np.testing.assert_array_equal(idea_select(state, spec).scores, kode_select(state, spec).scores)

    def test_scalar(self):
        spec = diag_spec(2.0, 1.0, 1.0, [[1.0]])
        assert idea_bonus(np.eye(1), spec)[0] == pytest.approx(math.sqrt(2.0))

    @given(st.integers(0, 10_000))
    def test_trace_form(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_stable_spec(rng, 3, 4)
        P = spec.sigma0
        for i, a in enumerate(spec.actions):
            M = spec.gamma @ P @ np.outer(a, a) @ P @ spec.gamma.T
            expected = math.sqrt(np.trace(M) / (a @ P @ a + spec.sigma2))
            assert idea_bonus(P, spec)[i] == pytest.approx(expected, rel=1e-10)


class TestKalmanUcb:
    def test_identity_tie(self, rng):
        A = rng.standard_normal((4, 3))
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        spec = diag_spec(np.eye(3), np.eye(3), 1.0, A)
        assert kalman_ucb_select(kf(np.zeros(3), np.eye(3)), spec, 0.3).action_index == 0

    def test_analytic(self):
        spec = diag_spec(0.5 * np.eye(2), np.eye(2), 1.0, np.eye(2))
        d = kalman_ucb_select(kf([0, 0], np.diag([4.0, 1.0])), spec)
        np.testing.assert_allclose(d.scores, [2.0, 1.0])
        assert d.action_index == 0
        d = kalman_ucb_select(kf([0, 3], np.diag([4.0, 1.0])), spec)
        np.testing.assert_allclose(d.scores, [2.0, 4.0])
        assert d.action_index == 1

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.5, 2.0])
    def test_bad_delta(self, delta):
        spec = diag_spec(0.5, 1.0, 1.0, [[1.0]])
        with pytest.raises(ParameterError):
            kalman_ucb_select(kf_init(spec), spec, delta)

    def test_delta_scaling(self, rng):
        spec = random_stable_spec(rng, 3, 4)
        base = kalman_ucb_bonus(spec.sigma0, spec)
        np.testing.assert_allclose(kalman_ucb_bonus(spec.sigma0, spec, math.exp(-4)), 2 * base)


class TestKode:
    def test_simple(self):
        spec = diag_spec(0.5 * np.eye(2), np.eye(2), 1.0, np.eye(2))
        assert kode_select(kf([1, 0], np.eye(2)), spec).action_index == 0
        assert kode_select(kf([0, 0], np.eye(2)), spec).action_index == 0

    @given(st.integers(0, 10_000))
    def test_matches_scan(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_stable_spec(rng, 4, 10)
        z = rng.standard_normal(4)
        assert kode_select(kf(z, spec.sigma0), spec).action_index == lowest_argmax([float(a @ z) for a in spec.actions])

    @given(st.integers(0, 10_000))
    def test_zero_bonus_reduces_to_kode(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_stable_spec(rng, 3, 6)
        state = kf(rng.standard_normal(3), spec.sigma0)
        d = optimistic_select(state, spec, np.zeros(6))
        ref = kode_select(state, spec)
        assert d.action_index == ref.action_index
        np.testing.assert_array_equal(d.scores, ref.scores)


class TestOracleSelect:
    def test_simple(self):
        spec = diag_spec(0.5 * np.eye(2), np.eye(2), 1.0, np.eye(2))
        okf = OracleKalmanState(np.array([1.0, 0.0]), np.zeros((2, 2)), np.eye(2))
        assert kalman_oracle_select(okf, spec).action_index == 0

    def test_equals_kode_on_same_estimate(self, rng):
        spec = random_stable_spec(rng, 3, 7)
        z = rng.standard_normal(3)
        okf = OracleKalmanState(z, np.zeros((3, 7)), np.eye(3))
        assert kalman_oracle_select(okf, spec).action_index == kode_select(kf(z, np.eye(3)), spec).action_index

    def test_single_action_zero_regret(self, rng):
        spec = random_stable_spec(rng, 3, 1)
        assert run_episode(spec, "kalman_oracle", 50, 1).total_regret == 0.0


class TestUcb:
    def test_initialization_order(self):
        bs = BaselineState.empty(3)
        seen = []
        for t in range(1, 4):
            i = ucb_select(bs, t, 0.1, 1.0).action_index
            seen.append(i)
            bs.record(t, i, 0.0)
        assert seen == [0, 1, 2]

    def test_analytic(self):
        bs = BaselineState.empty(2)
        bs.record(1, 0, 1.0)
        bs.record(2, 1, 0.0)
        d = ucb_select(bs, 3, math.exp(-1), 1.0)
        np.testing.assert_allclose(d.scores, [1 + math.sqrt(2), math.sqrt(2)])
        assert d.action_index == 0

    def test_frozen_instance_converges(self):
        # static state: arm 0 pays 1, arm 1 pays 0
        spec = diag_spec(np.eye(2), np.zeros((2, 2)), 0.1, np.eye(2), sigma0=np.zeros((2, 2)))
        bs = BaselineState.empty(2)
        rng = np.random.default_rng(0)
        z = np.array([1.0, 0.0])
        picks = []
        for t in range(1, 5001):
            i = ucb_select(bs, t, 0.05, 1.0).action_index
            bs.record(t, i, float(z[i] + 0.1 * rng.standard_normal()))
            picks.append(i)
        assert np.mean(np.array(picks[-1000:]) == 1) < 0.02

    def test_bad_params(self):
        with pytest.raises(ParameterError):
            ucb_select(BaselineState.empty(2), 1, 0.1, 0.0)


class TestSlidingWindow:
    def _history(self, rng, k=3, n=60):
        bs = BaselineState.empty(k)
        for t in range(1, n + 1):
            bs.record(t, int(rng.integers(k)), float(rng.standard_normal()))
        return bs

    def test_full_window_equals_ucb(self, rng):
        bs = self._history(rng)
        a = sw_ucb_select(bs, 61, 0.1, 1.0, 100)
        b = ucb_select(bs, 61, 0.1, 1.0)
        assert a.action_index == b.action_index
        np.testing.assert_allclose(a.scores, b.scores)

    def test_window_one(self, rng):
        bs = self._history(rng)
        last = bs.visits
        d = sw_ucb_select(bs, 61, 0.1, 1.0, 1)
        played = [i for i, h in enumerate(last) if h and h[-1][0] == 60][0]
        assert np.isfinite(d.scores[played])
        assert np.sum(np.isinf(d.scores)) == 2

    def test_policy_matches_naive(self, rng):
        spec = random_stable_spec(rng, 3, 4)
        n = 300
        p = make_policy("sw_ucb", spec, n, rng, window=17)
        bs = BaselineState.empty(4)
        for t in range(1, n + 1):
            d = p.select(t)
            ref = sw_ucb_select(bs, t, p.delta, p.R, 17)
            assert d.action_index == ref.action_index
            x = float(rng.standard_normal())
            p.update(t, d.action_index, x)
            bs.record(t, d.action_index, x)

    def test_bad_window(self):
        with pytest.raises(ParameterError):
            sw_ucb_select(BaselineState.empty(2), 1, 0.1, 1.0, 0)


class TestRexp3:
    def test_fresh_batch_uniform(self, rng):
        s = Rexp3State(np.zeros(4), 10, 0.2)
        d = rexp3_select(s, 1, rng)
        np.testing.assert_allclose(d.probabilities, 0.25)

    def test_full_exploration_uniform(self):
        np.testing.assert_allclose(exp3_probabilities(np.array([5.0, 0.0, -3.0]), 1.0), 1 / 3)

    def test_reset_at_batch_boundary(self, rng):
        s = Rexp3State(np.zeros(3), 5, 0.3)
        for t in range(1, 6):
            d = rexp3_select(s, t, rng)
            rexp3_update(s, d.action_index, 1.0)
        assert np.any(s.log_weights != 0)
        d = rexp3_select(s, 6, rng)
        np.testing.assert_allclose(d.probabilities, 1 / 3)

    def test_reproducible(self):
        def seq(seed):
            s = Rexp3State(np.zeros(3), 7, 0.3)
            r = np.random.default_rng(seed)
            out = []
            for t in range(1, 40):
                d = rexp3_select(s, t, r)
                rexp3_update(s, d.action_index, 0.5)
                out.append(d.action_index)
            return out
        assert seq(3) == seq(3)

    def test_probabilities_sum_to_one(self):
        p = exp3_probabilities(np.array([700.0, 0.0, -700.0]), 0.1)
        assert p.sum() == pytest.approx(1.0) and np.all(p > 0)


class TestOful:
    def test_initial_tie(self, rng):
        spec = random_stable_spec(rng, 3, 5)
        d = oful_select(OfulState(np.eye(3), np.zeros(3)), spec, 1.0, 2.0)
        np.testing.assert_allclose(d.scores, 2.0)
        assert d.action_index == 0

    def test_consistent_on_static_state(self):
        z = np.array([0.6, -0.8])
        A = np.array([[1.0, 0.0], [0.0, 1.0], [np.sqrt(0.5), np.sqrt(0.5)]])
        spec = diag_spec(np.eye(2), np.zeros((2, 2)), 0.5, A)
        p = make_policy("oful", spec, 4000, np.random.default_rng(0))
        rng = np.random.default_rng(1)
        for t in range(1, 4001):
            # force round-robin so every direction keeps being sampled
            i = t % 3
            p.update(t, i, float(A[i] @ z + 0.5 * rng.standard_normal()))
        theta = np.linalg.solve(p.state.V, p.state.b)
        np.testing.assert_allclose(theta, z, atol=0.05)

    def test_bad_lambda(self, rng):
        spec = random_stable_spec(rng, 2, 2)
        with pytest.raises(ParameterError):
            oful_select(OfulState(np.eye(2), np.zeros(2)), spec, 0.0, 1.0)


class TestRandom:
    def test_single(self, rng):
        assert random_select(1, rng).action_index == 0

    def test_uniform(self):
        rng = np.random.default_rng(0)
        counts = np.bincount([random_select(10, rng).action_index for _ in range(100_000)], minlength=10)
        assert np.all((counts / 1e5 >= 0.09) & (counts / 1e5 <= 0.11))


class TestFactory:
    @pytest.mark.parametrize("name", POLICY_IDS)
    def test_every_policy_runs(self, name, rng):
        spec = random_stable_spec(rng, 3, 4)
        rec = run_episode(spec, name, 30, 5)
        assert rec.actions.shape == (30,)
        assert np.all(rec.inst_regret >= -1e-12)

    def test_unknown(self, rng):
        spec = random_stable_spec(rng, 2, 2)
        with pytest.raises(ParameterError):
            make_policy("nope", spec, 10, rng)
        with pytest.raises(ParameterError):
            make_policy("idea", spec, 10, rng, delta=0.5)
        with pytest.raises(ParameterError):
            optimism_evaluator("ucb")

    def test_defaults(self, rng):
        spec = random_stable_spec(rng, 3, 4)
        assert default_params("kalman_ucb", spec, 100)["delta"] == pytest.approx(math.exp(-1))
        assert default_params("sw_ucb", spec, 1000)["window"] == 32
        assert default_params("rexp3", spec, 1000)["batch_size"] >= 1

    @pytest.mark.parametrize("name", POLICY_IDS)
    def test_decisions_use_lowest_index(self, name, rng):
        spec = random_stable_spec(rng, 2, 3)
        p = make_policy(name, spec, 40, rng)
        for t in range(1, 41):
            d = p.select(t)
            assert d.action_index == lowest_argmax(list(d.scores))
            p.update(t, d.action_index, float(rng.standard_normal()), rng.standard_normal(3))


def periodicity_fixture():
    """Two orthogonal actions on a symmetric system: measuring one action
    leaves the other direction more uncertain than itself."""
    return diag_spec(0.9 * np.eye(2), np.eye(2), 1.0, np.eye(2))


class TestPureExplorationPeriodic:
    def test_fixture_condition(self):
        spec = periodicity_fixture()
        a1, a2 = spec.actions
        P1 = solve_dare_single(spec.gamma, a1, spec.Q, spec.sigma2)
        P2 = solve_dare_single(spec.gamma, a2, spec.Q, spec.sigma2)
        assert a1 @ P1 @ a1 < a2 @ P1 @ a2
        assert a2 @ P2 @ a2 < a1 @ P2 @ a1

    def test_periodic(self):
        spec = periodicity_fixture()
        P = spec.sigma0
        seq = []
        for _ in range(500):
            i = argmax_lowest([math.sqrt(a @ P @ a) for a in spec.actions])
            seq.append(i)
            P = riccati_map(P, spec.actions[i], spec.gamma, spec.Q, spec.sigma2)
        cyc = find_cycle(seq)
        assert cyc is not None and cyc[1] >= 2


@pytest.mark.parametrize("name", ["idea", "kalman_ucb"])
@pytest.mark.parametrize("seed", range(4))
def test_regret_bounded_by_bonus_gap_and_error(name, seed):
    spec = random_stable_spec(np.random.default_rng(seed), 3, 5)
    rec = run_episode(spec, name, 200, seed)
    r, gap, err = replay_bonus_gaps(spec, rec, optimism_evaluator(name))
    assert np.all(r <= gap + 2 * err + 1e-9)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import diag_spec, random_stable_spec
from lgdsbandit.config import DISTRIBUTIONS
from lgdsbandit.environment import (EnvState, LgdsSpec, generate_spec, init_state, load_spec, observe,
                                    observe_all, oracle_action, save_spec, simulate_path, spec_from_dict,
                                    spec_to_dict, step, validate_spec)
from lgdsbandit.errors import DimensionError, ParameterError
from lgdsbandit.numerics import spectral_radius, stationary_covariance


class TestGenerate:
    def test_gaussian_example(self):
        spec = generate_spec("gaussian", 10, 10, 0.9, 7)
        assert spectral_radius(spec.gamma) == pytest.approx(0.9, abs=1e-8)
        np.testing.assert_allclose(np.linalg.norm(spec.actions, axis=1), 1.0, atol=1e-12)
        assert validate_spec(spec).ok

    def test_deterministic(self):
        assert generate_spec("cauchy", 4, 3, 0.9, 11).identical(generate_spec("cauchy", 4, 3, 0.9, 11))
        assert not generate_spec("cauchy", 4, 3, 0.9, 11).identical(generate_spec("cauchy", 4, 3, 0.9, 12))

    def test_single_action(self):
        spec = generate_spec("bernoulli", 2, 1, 0.5, 3)
        assert spec.k == 1 and spec.d == 2

    @pytest.mark.parametrize("dist", DISTRIBUTIONS)
    @given(seed=st.integers(0, 2**31))
    def test_invariants(self, dist, seed):
        spec = generate_spec(dist, 5, 4, 0.9, seed)
        assert spectral_radius(spec.gamma) == pytest.approx(0.9, rel=1e-8)
        np.testing.assert_allclose(np.linalg.norm(spec.actions, axis=1), 1.0, atol=1e-12)
        assert spec.sigma > 0
        assert np.all(np.linalg.eigvalsh(spec.Q) >= -1e-9 * np.abs(spec.Q).max())
        Z = stationary_covariance(spec.gamma, spec.Q)
        np.testing.assert_allclose(spec.sigma0, Z)

    def test_bernoulli_entries_binary_before_scaling(self):
        spec = generate_spec("bernoulli", 6, 6, 0.9, 1)
        # each action is a normalized 0/1 vector, so its nonzero entries are equal
        for a in spec.actions:
            nz = a[a != 0]
            np.testing.assert_allclose(nz, nz[0])

    def test_bad_arguments(self):
        with pytest.raises(ParameterError):
            generate_spec("poisson", 2, 2, 0.9, 0)
        with pytest.raises(ParameterError):
            generate_spec("gaussian", 0, 2, 0.9, 0)
        with pytest.raises(ParameterError):
            generate_spec("gaussian", 2, 2, 0.0, 0)


class TestSpecType:
    def test_shape_checks(self):
        with pytest.raises(DimensionError):
            LgdsSpec(np.eye(2), np.ones((1, 3)), np.eye(2), 1.0, np.eye(2))
        with pytest.raises(ParameterError):
            LgdsSpec(np.eye(2), np.ones((1, 2)), np.eye(2), -1.0, np.eye(2))
        with pytest.raises(ParameterError):
            LgdsSpec(np.eye(2) * np.nan, np.ones((1, 2)), np.eye(2), 1.0, np.eye(2))

    def test_arrays_are_readonly(self):
        spec = diag_spec(0.5, 1.0, 1.0, [[1.0]])
        with pytest.raises(ValueError):
            spec.gamma[0, 0] = 2.0

    def test_round_trip(self, tmp_path):
        spec = generate_spec("exponential", 3, 4, 0.9, 5)
        assert spec_from_dict(spec_to_dict(spec)).identical(spec)
        save_spec(spec, tmp_path / "s.json")
        assert load_spec(tmp_path / "s.json").identical(spec)

    def test_declared_shape_mismatch(self):
        doc = spec_to_dict(generate_spec("gaussian", 2, 2, 0.9, 0))
        doc["k"] = 5
        with pytest.raises(DimensionError):
            spec_from_dict(doc)


class TestValidate:
    def test_full_rank_q(self):
        r = validate_spec(diag_spec(0.5 * np.eye(2), np.eye(2), 1.0, np.eye(2)))
        assert r.ok and r.controllable and r.controllability_rank == 2

    def test_zero_q(self):
        r = validate_spec(diag_spec(0.5 * np.eye(2), np.zeros((2, 2)), 1.0, np.eye(2)))
        assert not r.controllable and not r.ok

    def test_norm_violation(self):
        r = validate_spec(diag_spec(0.5 * np.eye(2), np.eye(2), 1.0, [[2.0, 0.0], [0.0, 1.0]]))
        assert r.max_norm_deviation == pytest.approx(1.0)
        assert not r.ok
        assert r.to_dict()["ok"] is False


class TestInitAndStep:
    def test_zero_sigma0(self):
        spec = diag_spec(0.5 * np.eye(2), np.eye(2), 1.0, np.eye(2), sigma0=np.zeros((2, 2)))
        np.testing.assert_array_equal(init_state(spec, 0).z, np.zeros(2))

    def test_seeded(self):
        spec = generate_spec("gaussian", 3, 2, 0.9, 1)
        np.testing.assert_array_equal(init_state(spec, 4, 50).z, init_state(spec, 4, 50).z)

    def test_warmup_covariance(self):
        # warm-started states should follow the stationary law, even from sigma0 = 0
        rng = np.random.default_rng(2)
        spec = random_stable_spec(rng, 3, 2, rho=0.9).replace(sigma0=np.zeros((3, 3)))
        Z = stationary_covariance(spec.gamma, spec.Q)
        zs = np.array([init_state(spec, s, 10_000).z for s in range(1000)])
        emp = zs.T @ zs / len(zs)
        assert np.linalg.norm(emp - Z) <= 0.15 * np.linalg.norm(Z)

    def test_negative_warmup(self):
        with pytest.raises(ParameterError):
            init_state(generate_spec("gaussian", 2, 2, 0.9, 0), 0, -1)

    def test_identity_no_noise(self):
        spec = diag_spec(np.eye(2), np.zeros((2, 2)), 1.0, np.eye(2))
        s = step(EnvState(np.array([1.0, 2.0]), 0, np.random.default_rng(0)), spec)
        np.testing.assert_array_equal(s.z, [1.0, 2.0])
        assert s.t == 1

    def test_contraction_no_noise(self):
        spec = diag_spec(0.5 * np.eye(2), np.zeros((2, 2)), 1.0, np.eye(2))
        s = step(EnvState(np.array([1.0, 0.0]), 0, np.random.default_rng(0)), spec)
        np.testing.assert_array_equal(s.z, [0.5, 0.0])

    def test_pure_noise_covariance(self):
        spec = diag_spec(np.zeros((2, 2)), np.eye(2), 1.0, np.eye(2))
        st_ = EnvState(np.zeros(2), 0, np.random.default_rng(1))
        path = simulate_path(st_, spec, 100_001)[1:]
        np.testing.assert_allclose(np.cov(path.T), np.eye(2), atol=0.05)

    def test_simulate_path_matches_recursion(self):
        spec = generate_spec("gaussian", 3, 2, 0.9, 3)
        s = init_state(spec, 0)
        z0 = s.z.copy()
        path = simulate_path(s, spec, 5)
        np.testing.assert_array_equal(path[0], z0)
        assert s.t == 5


class TestObserve:
    def test_noiseless(self):
        spec = diag_spec(np.eye(2), np.eye(2), 0.0, [[1.0, 0.0], [0.0, 1.0]])
        s = EnvState(np.array([1.0, 0.0]), 0, np.random.default_rng(0))
        assert observe(s, spec, 0) == 1.0
        np.testing.assert_array_equal(observe_all(s, spec), [1.0, 0.0])

    def test_basis_returns_state(self):
        spec = diag_spec(np.eye(3), np.eye(3), 0.0, np.eye(3))
        z = np.array([0.3, -1.2, 4.0])
        np.testing.assert_array_equal(observe_all(EnvState(z, 0, np.random.default_rng(0)), spec), z)

    def test_single_action_matches_observe(self):
        spec = generate_spec("gaussian", 3, 1, 0.9, 0)
        s1, s2 = init_state(spec, 9), init_state(spec, 9)
        assert observe_all(s1, spec)[0] == observe(s2, spec, 0)

    def test_reproducible(self):
        spec = generate_spec("gaussian", 3, 2, 0.9, 0)
        a, b = init_state(spec, 9), init_state(spec, 9)
        assert [observe(a, spec, 1) for _ in range(5)] == [observe(b, spec, 1) for _ in range(5)]

    def test_bad_index(self):
        spec = generate_spec("gaussian", 3, 2, 0.9, 0)
        with pytest.raises(IndexError):
            observe(init_state(spec, 0), spec, 2)


class TestOracleAction:
    def test_simple(self):
        spec = diag_spec(np.eye(2), np.eye(2), 1.0, np.eye(2))
        assert oracle_action(np.array([1.0, 0.0]), spec) == 0

    def test_tie(self):
        spec = diag_spec(np.eye(2), np.eye(2), 1.0, np.eye(2))
        assert oracle_action(np.array([1.0, 1.0]) / np.sqrt(2), spec) == 0

    @given(st.integers(0, 10_000))
    def test_matches_scan(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_stable_spec(rng, 4, 10)
        z = rng.standard_normal(4)
        best, val = 0, -np.inf
        for i, a in enumerate(spec.actions):
            if float(a @ z) > val:
                best, val = i, float(a @ z)
        assert oracle_action(z, spec) == best

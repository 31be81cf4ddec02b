"""The LGDS bandit environment: generation, validation, simulation, observation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .config import DISTRIBUTIONS, TOL
from .errors import DimensionError, ParameterError, SpecGenerationError
from .numerics import (
    gaussian_factor,
    is_psd,
    numerical_rank,
    psd_sqrt,
    spectral_radius,
    stationary_covariance,
    symmetrize,
)


def _frozen(x):
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LgdsSpec:
    """A fully known environment z' = gamma z + xi, X = <a, z> + eta.

    ``actions`` holds the k action vectors as rows (the observation matrix
    of the all-rewards oracle). ``sigma`` is the measurement-noise standard
    deviation; zero is tolerated so tests can switch the noise off.
    """

    gamma: np.ndarray
    actions: np.ndarray
    Q: np.ndarray
    sigma: float
    sigma0: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        gamma = _frozen(self.gamma)
        actions = _frozen(np.atleast_2d(self.actions))
        Q = _frozen(self.Q)
        sigma0 = _frozen(self.sigma0)
        d = gamma.shape[0]
        if gamma.shape != (d, d) or d < 1:
            raise DimensionError(f"gamma must be square, got {gamma.shape}")
        if actions.shape[1] != d or actions.shape[0] < 1:
            raise DimensionError(f"actions must be k x {d}, got {actions.shape}")
        if Q.shape != (d, d) or sigma0.shape != (d, d):
            raise DimensionError("Q and sigma0 must be d x d")
        for name, arr in (("gamma", gamma), ("actions", actions), ("Q", Q), ("sigma0", sigma0)):
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"{name} has non-finite entries")
        sigma = float(self.sigma)
        if not (np.isfinite(sigma) and sigma >= 0):
            raise ParameterError(f"sigma must be finite and >= 0, got {sigma}")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "sigma0", sigma0)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def d(self) -> int:
        return self.gamma.shape[0]

    @property
    def k(self) -> int:
        return self.actions.shape[0]

    @property
    def sigma2(self) -> float:
        return self.sigma * self.sigma

    def replace(self, **changes) -> "LgdsSpec":
        fields = dict(
            gamma=self.gamma,
            actions=self.actions,
            Q=self.Q,
            sigma=self.sigma,
            sigma0=self.sigma0,
            meta=self.meta,
        )
        fields.update(changes)
        return LgdsSpec(**fields)

    def identical(self, other: "LgdsSpec") -> bool:
        """Bitwise equality of every numeric field."""
        return (
            self.sigma == other.sigma
            and all(
                np.array_equal(getattr(self, n), getattr(other, n))
                for n in ("gamma", "actions", "Q", "sigma0")
            )
        )


# -- generation --------------------------------------------------------------

def _sampler(dist: str, rng: np.random.Generator):
    if dist == "gaussian":
        return lambda shape: rng.standard_normal(shape)
    if dist == "uniform":
        return lambda shape: rng.random(shape)
    if dist == "exponential":
        return lambda shape: rng.exponential(1.0, shape)
    if dist == "cauchy":
        return lambda shape: rng.standard_normal(shape) / rng.standard_normal(shape)
    if dist == "bernoulli":
        return lambda shape: rng.integers(0, 2, shape).astype(float)
    raise ParameterError(f"unknown distribution {dist!r}; expected one of {DISTRIBUTIONS}")


def generate_spec(dist: str, d: int, k: int, rho: float, seed) -> LgdsSpec:
    """Random environment with every raw entry drawn i.i.d. from ``dist``.

    gamma is T rescaled to spectral radius ``rho``; Q = R R^T; sigma = |r|;
    actions are raw draws normalized to unit length. The initial covariance
    is the stationary covariance when gamma is stable, else Q.
    """
    if d < 1 or k < 1:
        raise ParameterError("d and k must be >= 1")
    if not rho > 0:
        raise ParameterError("rho must be positive")
    rng = np.random.default_rng(seed)
    draw = _sampler(dist, rng)

    for _ in range(100):
        T = draw((d, d))
        if np.all(np.isfinite(T)):
            rT = spectral_radius(T)
            if rT > 0 and np.isfinite(rT):
                break
    else:
        raise SpecGenerationError("could not draw T with nonzero spectral radius")
    gamma = (rho / rT) * T

    for _ in range(100):
        R = draw((d, d))
        if np.all(np.isfinite(R)):
            break
    else:
        raise SpecGenerationError("could not draw finite R")
    Q = symmetrize(R @ R.T)

    for _ in range(100):
        r = float(draw(()))
        if np.isfinite(r) and r != 0.0:
            break
    else:
        raise SpecGenerationError("could not draw nonzero r")
    sigma = abs(r)

    actions = np.empty((k, d))
    for i in range(k):
        for _ in range(100):
            v = draw(d)
            n = np.linalg.norm(v)
            if np.isfinite(n) and n > 0:
                actions[i] = v / n
                break
        else:
            raise SpecGenerationError(f"could not draw nonzero action {i}")

    if spectral_radius(gamma) < 1.0:
        sigma0 = stationary_covariance(gamma, Q)
    else:
        sigma0 = Q.copy()
    meta = {"dist": dist, "seed": int(seed) if np.isscalar(seed) else None, "rho_target": float(rho)}
    return LgdsSpec(gamma=gamma, actions=actions, Q=Q, sigma=sigma, sigma0=sigma0, meta=meta)


# -- validation --------------------------------------------------------------

@dataclass
class ValidationReport:
    norm_deviation: np.ndarray
    q_psd: bool
    sigma0_psd: bool
    sigma_positive: bool
    controllability_rank: int
    controllable: bool
    spectral_radius: float

    @property
    def max_norm_deviation(self) -> float:
        return float(np.max(self.norm_deviation))

    @property
    def ok(self) -> bool:
        return (
            self.max_norm_deviation <= 1e-10
            and self.q_psd
            and self.sigma0_psd
            and self.sigma_positive
            and self.controllable
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "max_norm_deviation": self.max_norm_deviation,
            "norm_deviation": [float(x) for x in self.norm_deviation],
            "q_psd": self.q_psd,
            "sigma0_psd": self.sigma0_psd,
            "sigma_positive": self.sigma_positive,
            "controllability_rank": self.controllability_rank,
            "controllable": self.controllable,
            "spectral_radius": self.spectral_radius,
        }


def controllability_matrix(gamma, B):
    blocks = [B]
    for _ in range(gamma.shape[0] - 1):
        blocks.append(gamma @ blocks[-1])
    return np.hstack(blocks)


def validate_spec(spec: LgdsSpec) -> ValidationReport:
    """Report-only check of the unit-sphere and controllability assumptions."""
    dev = np.abs(np.linalg.norm(spec.actions, axis=1) - 1.0)
    q_psd = is_psd(spec.Q)
    if q_psd:
        Bq = psd_sqrt(spec.Q)
        rank = numerical_rank(controllability_matrix(spec.gamma, Bq))
    else:
        rank = 0
    return ValidationReport(
        norm_deviation=dev,
        q_psd=q_psd,
        sigma0_psd=is_psd(spec.sigma0),
        sigma_positive=spec.sigma > 0,
        controllability_rank=rank,
        controllable=q_psd and rank == spec.d,
        spectral_radius=spectral_radius(spec.gamma),
    )


# -- simulation --------------------------------------------------------------

@dataclass
class EnvState:
    z: np.ndarray
    t: int
    rng: np.random.Generator


_BLOCK = 128


def _advance(z, gamma, L, steps, rng):
    """Run ``steps`` noise-only transitions, batching noise in blocks."""
    d = z.shape[0]
    if steps >= _BLOCK:
        powers = [np.eye(d)]
        for _ in range(_BLOCK - 1):
            powers.append(gamma @ powers[-1])
        gB = gamma @ powers[-1]
        # column block j multiplies the noise of step j within the block
        M = np.hstack([p @ L for p in reversed(powers)])
        while steps >= _BLOCK:
            w = rng.standard_normal(_BLOCK * d)
            z = gB @ z + M @ w
            steps -= _BLOCK
    for _ in range(steps):
        z = gamma @ z + L @ rng.standard_normal(d)
    return z


def init_state(spec: LgdsSpec, seed, warmup: int = 0) -> EnvState:
    """z0 ~ N(0, sigma0) advanced ``warmup`` transitions; round counter at 0."""
    if warmup < 0:
        raise ParameterError("warmup must be >= 0")
    rng = np.random.default_rng(seed)
    z = gaussian_factor(spec.sigma0) @ rng.standard_normal(spec.d)
    if warmup:
        z = _advance(z, spec.gamma, gaussian_factor(spec.Q), warmup, rng)
    return EnvState(z=z, t=0, rng=rng)


def step(state: EnvState, spec: LgdsSpec) -> EnvState:
    xi = gaussian_factor(spec.Q) @ state.rng.standard_normal(spec.d)
    return EnvState(z=spec.gamma @ state.z + xi, t=state.t + 1, rng=state.rng)


def simulate_path(state: EnvState, spec: LgdsSpec, n: int):
    """States z_t, z_{t+1}, ..., z_{t+n-1} as an n x d array; advances ``state``."""
    L = gaussian_factor(spec.Q)
    out = np.empty((n, spec.d))
    z = state.z
    gamma = spec.gamma
    noise = state.rng.standard_normal((n, spec.d)) @ L.T
    for t in range(n):
        out[t] = z
        z = gamma @ z + noise[t]
    state.z = z
    state.t += n
    return out


def _check_index(spec, i):
    if not 0 <= int(i) < spec.k:
        raise IndexError(f"action index {i} out of range for k={spec.k}")
    return int(i)


def observe(state: EnvState, spec: LgdsSpec, action_index: int, noise=None) -> float:
    """Reward <a_i, z> + eta; ``noise`` overrides the standard-normal draw."""
    i = _check_index(spec, action_index)
    w = state.rng.standard_normal() if noise is None else noise
    return float(spec.actions[i] @ state.z + spec.sigma * w)


def observe_all(state: EnvState, spec: LgdsSpec, noise=None):
    """All k rewards at once, with independent measurement noise."""
    w = state.rng.standard_normal(spec.k) if noise is None else np.asarray(noise, dtype=float)
    if w.shape != (spec.k,):
        raise DimensionError(f"noise must have length {spec.k}")
    return spec.actions @ state.z + spec.sigma * w


def oracle_action(z, spec: LgdsSpec) -> int:
    """Index of the action best aligned with the true state (lowest index on ties)."""
    if isinstance(z, EnvState):
        z = z.z
    return int(np.argmax(spec.actions @ z))


# -- serialization -----------------------------------------------------------

def _hex_matrix(M):
    return [[float(x).hex() for x in row] for row in np.asarray(M)]


def _read_float(x) -> float:
    if isinstance(x, str):
        return float.fromhex(x)
    return float(x)


def _read_matrix(rows):
    return np.array([[_read_float(x) for x in row] for row in rows], dtype=float)


def spec_to_dict(spec: LgdsSpec) -> dict[str, Any]:
    """JSON-ready document; floats are hex strings so round trips are exact."""
    return {
        "d": spec.d,
        "k": spec.k,
        "gamma": _hex_matrix(spec.gamma),
        "actions": _hex_matrix(spec.actions),
        "q": _hex_matrix(spec.Q),
        "sigma": float(spec.sigma).hex(),
        "sigma0": _hex_matrix(spec.sigma0),
        "meta": dict(spec.meta),
    }


def spec_from_dict(doc: dict[str, Any]) -> LgdsSpec:
    spec = LgdsSpec(
        gamma=_read_matrix(doc["gamma"]),
        actions=_read_matrix(doc["actions"]),
        Q=_read_matrix(doc["q"]),
        sigma=_read_float(doc["sigma"]),
        sigma0=_read_matrix(doc["sigma0"]),
        meta=doc.get("meta", {}),
    )
    if spec.d != int(doc["d"]) or spec.k != int(doc["k"]):
        raise DimensionError("declared d/k do not match matrix shapes")
    return spec


def save_spec(spec: LgdsSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=1) + "\n", encoding="utf-8")


def load_spec(path) -> LgdsSpec:
    return spec_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

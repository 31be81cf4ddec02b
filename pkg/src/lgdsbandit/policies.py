"""Action-selection rules.

Filter-based rules (IDEA, Kalman-UCB, KODE, Kalman Oracle) are pure functions
of a filter state. The classical baselines keep per-episode statistics. Every
rule returns a :class:`PolicyDecision` whose ``action_index`` is the lowest
index attaining ``max(scores)``; sampling policies report a one-hot score
vector for the drawn index and expose the sampling distribution separately.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import POLICY_IDS, TOL
from .environment import LgdsSpec
from .errors import ParameterError
from .filtering import (
    KalmanState,
    OracleKalmanState,
    kf_init,
    kf_update,
    oracle_kf_init,
    oracle_kf_update,
)
from .numerics import spectral_radius, stationary_covariance

DEFAULT_KUCB_DELTA = math.exp(-1.0)
DEFAULT_UCB_DELTA = 0.05
DEFAULT_OFUL_DELTA = 0.05


@dataclass
class PolicyDecision:
    action_index: int
    scores: np.ndarray
    probabilities: np.ndarray | None = None


def argmax_lowest(scores, tol: float = TOL.tie) -> int:
    """Lowest index whose score equals the maximum up to roundoff.

    Scores within ``tol * max|score|`` of the best are treated as tied, so
    analytically equal scores computed along different paths still resolve
    to the lowest index. NaN never wins.
    """
    s = np.asarray(scores, dtype=float)
    s = np.where(np.isnan(s), -np.inf, s)
    best = float(np.max(s))
    if not np.isfinite(best):
        return int(np.argmax(s))
    scale = float(np.max(np.abs(s[np.isfinite(s)])))
    return int(np.flatnonzero(s >= best - tol * scale)[0])


def _decide(scores, probabilities=None) -> PolicyDecision:
    return PolicyDecision(argmax_lowest(scores), scores, probabilities)


def _one_hot(k, i):
    s = np.zeros(k)
    s[i] = 1.0
    return s


# -- optimism terms ------------------------------------------------------------

def idea_bonus(P, spec: LgdsSpec):
    """sqrt(tr(G P a a^T P G^T) / (a^T P a + sigma^2)) for every action a.

    The trace of the rank-one matrix is ||G P a||^2.
    """
    PA = P @ spec.actions.T
    s = np.einsum("ij,ji->i", spec.actions, PA) + spec.sigma2
    num = np.einsum("ij,ij->j", spec.gamma @ PA, spec.gamma @ PA)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sqrt(np.clip(num / s, 0.0, None))
    return np.where(s > 0, out, 0.0)


def kalman_ucb_bonus(P, spec: LgdsSpec, delta: float = DEFAULT_KUCB_DELTA):
    """sqrt(a^T P a * log(1/delta)) for every action a."""
    check_delta(delta)
    aPa = np.einsum("ij,jk,ik->i", spec.actions, P, spec.actions)
    return np.sqrt(np.clip(aPa, 0.0, None) * math.log(1.0 / delta))


def kode_bonus(P, spec: LgdsSpec):
    return np.zeros(spec.k)


def optimism_evaluator(policy: str, delta: float = DEFAULT_KUCB_DELTA) -> Callable:
    """u(. | P) as a function ``(P, spec) -> k-vector`` for the named rule."""
    if policy == "idea":
        return idea_bonus
    if policy == "kalman_ucb":
        check_delta(delta)
        return lambda P, spec: kalman_ucb_bonus(P, spec, delta)
    if policy == "kode":
        return kode_bonus
    raise ParameterError(f"no optimism term defined for {policy!r}")


def check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")


# -- filter-based selection rules ---------------------------------------------

def optimistic_select(kf: KalmanState, spec: LgdsSpec, bonus) -> PolicyDecision:
    """argmax_a <a, zhat> + u(a | P); ``bonus`` is a k-vector or ``f(P, spec)``."""
    u = bonus(kf.P, spec) if callable(bonus) else np.asarray(bonus, dtype=float)
    return _decide(spec.actions @ kf.zhat + u)


def idea_select(kf: KalmanState, spec: LgdsSpec) -> PolicyDecision:
    return optimistic_select(kf, spec, idea_bonus)


def kalman_ucb_select(kf: KalmanState, spec: LgdsSpec, delta: float = DEFAULT_KUCB_DELTA) -> PolicyDecision:
    return optimistic_select(kf, spec, kalman_ucb_bonus(kf.P, spec, delta))


def kode_select(kf: KalmanState, spec: LgdsSpec) -> PolicyDecision:
    return _decide(spec.actions @ kf.zhat)


def kalman_oracle_select(okf: OracleKalmanState, spec: LgdsSpec) -> PolicyDecision:
    return _decide(spec.actions @ okf.ztilde)


# -- classical baselines ------------------------------------------------------

@dataclass
class BaselineState:
    """Per-action visit statistics plus the full (round, reward) history."""

    counts: np.ndarray
    sums: np.ndarray
    means: np.ndarray
    visits: list[list[tuple[int, float]]]

    @classmethod
    def empty(cls, k: int) -> "BaselineState":
        return cls(np.zeros(k, dtype=int), np.zeros(k), np.zeros(k), [[] for _ in range(k)])

    def record(self, t: int, i: int, reward: float) -> None:
        self.counts[i] += 1
        self.sums[i] += reward
        self.means[i] = self.sums[i] / self.counts[i]
        self.visits[i].append((t, float(reward)))


def _check_ucb(delta, R):
    check_delta(delta)
    if not R > 0:
        raise ParameterError(f"R must be positive, got {R}")


def ucb_scores(counts, means, delta, R):
    counts = np.asarray(counts, dtype=float)
    with np.errstate(divide="ignore"):
        bonus = np.sqrt(2.0 * R * R * math.log(1.0 / delta) / counts)
    return np.where(counts > 0, np.asarray(means, dtype=float) + bonus, np.inf)


def ucb_select(bs: BaselineState, t: int, delta: float, R: float) -> PolicyDecision:
    """Unvisited actions score +inf, so the first k rounds go in index order."""
    _check_ucb(delta, R)
    return _decide(ucb_scores(bs.counts, bs.means, delta, R))


def sw_ucb_select(bs: BaselineState, t: int, delta: float, R: float, window: int) -> PolicyDecision:
    """UCB on statistics rebuilt from visits in the last ``window`` rounds (t-window <= tau < t)."""
    _check_ucb(delta, R)
    if window < 1:
        raise ParameterError("window must be >= 1")
    k = len(bs.visits)
    counts = np.zeros(k)
    sums = np.zeros(k)
    for i, hist in enumerate(bs.visits):
        for tau, x in hist:
            if t - window <= tau < t:
                counts[i] += 1
                sums[i] += x
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / counts, 0.0)
    return _decide(ucb_scores(counts, means, delta, R))


def exp3_probabilities(log_weights, gamma_exp):
    k = log_weights.shape[0]
    w = np.exp(log_weights - np.max(log_weights))
    return (1.0 - gamma_exp) * w / w.sum() + gamma_exp / k


@dataclass
class Rexp3State:
    log_weights: np.ndarray
    batch_size: int
    gamma_exp: float
    batch_start: int = 1
    probabilities: np.ndarray | None = None


def rexp3_select(state: Rexp3State, t: int, rng: np.random.Generator) -> PolicyDecision:
    """Exp3 draw; weights restart at the beginning of every batch of rounds."""
    if state.batch_size < 1:
        raise ParameterError("batch size must be >= 1")
    if not 0.0 < state.gamma_exp <= 1.0:
        raise ParameterError("exploration rate must lie in (0, 1]")
    if t - state.batch_start >= state.batch_size:
        state.log_weights[:] = 0.0
        state.batch_start = t
    p = exp3_probabilities(state.log_weights, state.gamma_exp)
    state.probabilities = p
    k = p.shape[0]
    i = int(rng.choice(k, p=p))
    return PolicyDecision(i, _one_hot(k, i), p)


def rexp3_update(state: Rexp3State, i: int, scaled_reward: float) -> None:
    p = state.probabilities
    k = p.shape[0]
    state.log_weights[i] += state.gamma_exp * (scaled_reward / p[i]) / k


@dataclass
class OfulState:
    V: np.ndarray
    b: np.ndarray
    n_obs: int = 0


def oful_beta(t: int, d: int, lam: float, noise_scale: float, delta: float) -> float:
    return math.sqrt(lam) + noise_scale * math.sqrt(
        2.0 * math.log(1.0 / delta) + d * math.log(1.0 + t / (lam * d))
    )


def oful_select(state: OfulState, spec: LgdsSpec, lam: float, beta: float) -> PolicyDecision:
    """Ridge estimate plus ellipsoidal bonus, treating the state as static."""
    if not lam > 0:
        raise ParameterError("regularization must be positive")
    A = spec.actions
    Vinv_At = np.linalg.solve(state.V, A.T)
    theta = np.linalg.solve(state.V, state.b)
    width = np.sqrt(np.clip(np.einsum("ij,ji->i", A, Vinv_At), 0.0, None))
    return _decide(A @ theta + beta * width)


def random_select(k: int, rng: np.random.Generator) -> PolicyDecision:
    if k < 1:
        raise ParameterError("k must be >= 1")
    i = int(rng.integers(k))
    return PolicyDecision(i, _one_hot(k, i), np.full(k, 1.0 / k))


# -- stateful wrappers used by the episode loop ------------------------------

def reward_scale(spec: LgdsSpec) -> float:
    """sqrt(max_a a^T Z a + sigma^2) with Z the stationary (else initial) covariance."""
    Z = spec.sigma0
    if spectral_radius(spec.gamma) < 1.0:
        Z = stationary_covariance(spec.gamma, spec.Q)
    worst = float(np.max(np.einsum("ij,jk,ik->i", spec.actions, Z, spec.actions)))
    R = math.sqrt(max(worst, 0.0) + spec.sigma2)
    return R if R > 0 else 1.0


class Policy:
    name = "base"
    needs_all_rewards = False
    filter_based = False

    def select(self, t: int) -> PolicyDecision:
        raise NotImplementedError

    def update(self, t: int, action: int, reward: float, all_rewards=None) -> None:
        raise NotImplementedError

    def estimate(self):
        """Current state prediction for filter-based rules, else None."""
        return None


class FilterPolicy(Policy):
    filter_based = True

    def __init__(self, name, spec: LgdsSpec, bonus):
        self.name = name
        self.spec = spec
        self.bonus = bonus
        self.kf = kf_init(spec)
        self.last_bonus = None

    def select(self, t):
        self.last_bonus = self.bonus(self.kf.P, self.spec)
        return optimistic_select(self.kf, self.spec, self.last_bonus)

    def update(self, t, action, reward, all_rewards=None):
        self.kf = kf_update(self.kf, action, reward, self.spec)

    def estimate(self):
        return self.kf.zhat


class KalmanOraclePolicy(Policy):
    name = "kalman_oracle"
    needs_all_rewards = True
    filter_based = True

    def __init__(self, spec: LgdsSpec):
        self.spec = spec
        self.okf = oracle_kf_init(spec)

    def select(self, t):
        return kalman_oracle_select(self.okf, self.spec)

    def update(self, t, action, reward, all_rewards=None):
        self.okf = oracle_kf_update(self.okf, all_rewards, self.spec)

    def estimate(self):
        return self.okf.ztilde


class UCBPolicy(Policy):
    name = "ucb"

    def __init__(self, k, delta, R):
        _check_ucb(delta, R)
        self.bs = BaselineState.empty(k)
        self.delta, self.R = delta, R

    def select(self, t):
        return ucb_select(self.bs, t, self.delta, self.R)

    def update(self, t, action, reward, all_rewards=None):
        self.bs.record(t, action, reward)


class SWUCBPolicy(Policy):
    """Sliding-window UCB with a ring buffer of the last ``window`` rounds.

    Window sums are recomputed in chronological order each round, which
    reproduces the naive full-history recomputation bit for bit.
    """

    name = "sw_ucb"

    def __init__(self, k, delta, R, window):
        _check_ucb(delta, R)
        if window < 1:
            raise ParameterError("window must be >= 1")
        self.k, self.delta, self.R, self.window = k, delta, R, int(window)
        self.recent: deque[tuple[int, int, float]] = deque()

    def select(self, t):
        while self.recent and self.recent[0][0] < t - self.window:
            self.recent.popleft()
        counts = np.zeros(self.k)
        sums = np.zeros(self.k)
        for _, i, x in self.recent:
            counts[i] += 1
            sums[i] += x
        with np.errstate(invalid="ignore", divide="ignore"):
            means = np.where(counts > 0, sums / counts, 0.0)
        return _decide(ucb_scores(counts, means, self.delta, self.R))

    def update(self, t, action, reward, all_rewards=None):
        self.recent.append((t, int(action), float(reward)))


class Rexp3Policy(Policy):
    name = "rexp3"

    def __init__(self, k, batch_size, gamma_exp, R, rng):
        self.state = Rexp3State(np.zeros(k), int(batch_size), float(gamma_exp))
        self.R = R
        self.rng = rng

    def select(self, t):
        return rexp3_select(self.state, t, self.rng)

    def update(self, t, action, reward, all_rewards=None):
        # map the unbounded reward into [0, 1] using +-3 reward scales
        y = min(1.0, max(0.0, 0.5 + reward / (6.0 * self.R)))
        rexp3_update(self.state, action, y)


class OfulPolicy(Policy):
    name = "oful"

    def __init__(self, spec: LgdsSpec, lam, delta):
        if not lam > 0:
            raise ParameterError("regularization must be positive")
        check_delta(delta)
        self.spec, self.lam, self.delta = spec, lam, delta
        self.state = OfulState(lam * np.eye(spec.d), np.zeros(spec.d))

    def select(self, t):
        beta = oful_beta(self.state.n_obs, self.spec.d, self.lam, self.spec.sigma, self.delta)
        return oful_select(self.state, self.spec, self.lam, beta)

    def update(self, t, action, reward, all_rewards=None):
        a = self.spec.actions[action]
        self.state.V += np.outer(a, a)
        self.state.b += reward * a
        self.state.n_obs += 1


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, k, rng):
        self.k, self.rng = k, rng

    def select(self, t):
        return random_select(self.k, self.rng)

    def update(self, t, action, reward, all_rewards=None):
        pass


def default_params(name: str, spec: LgdsSpec, horizon: int) -> dict:
    """Hyperparameters used when the caller does not override them."""
    k = spec.k
    if name == "kalman_ucb":
        return {"delta": DEFAULT_KUCB_DELTA}
    if name == "ucb":
        return {"delta": DEFAULT_UCB_DELTA, "R": reward_scale(spec)}
    if name == "sw_ucb":
        return {
            "delta": DEFAULT_UCB_DELTA,
            "R": reward_scale(spec),
            "window": math.ceil(math.sqrt(horizon)),
        }
    if name == "rexp3":
        klogk = k * math.log(k)
        batch = max(1, math.ceil(klogk ** (1 / 3) * horizon ** (2 / 3)))
        gamma_exp = 1.0 if k == 1 else min(1.0, math.sqrt(klogk / ((math.e - 1) * batch)))
        return {"batch_size": batch, "gamma_exp": gamma_exp, "R": reward_scale(spec)}
    if name == "oful":
        return {"lam": 1.0, "delta": DEFAULT_OFUL_DELTA}
    if name in POLICY_IDS:
        return {}
    raise ParameterError(f"unknown policy {name!r}")


def make_policy(
    name: str,
    true_spec: LgdsSpec,
    horizon: int,
    rng: np.random.Generator,
    perceived: LgdsSpec | None = None,
    **overrides,
) -> Policy:
    """Build a policy. Filter-based learners use ``perceived`` when given;
    the Kalman Oracle and the model-free baselines always see ``true_spec``."""
    model = perceived if perceived is not None else true_spec
    params = default_params(name, true_spec, horizon)
    unknown = set(overrides) - set(params)
    if unknown:
        raise ParameterError(f"unknown parameters {sorted(unknown)} for {name!r}")
    params.update(overrides)
    k = true_spec.k
    if name == "idea":
        return FilterPolicy("idea", model, idea_bonus)
    if name == "kalman_ucb":
        check_delta(params["delta"])
        delta = params["delta"]
        return FilterPolicy("kalman_ucb", model, lambda P, s: kalman_ucb_bonus(P, s, delta))
    if name == "kode":
        return FilterPolicy("kode", model, kode_bonus)
    if name == "kalman_oracle":
        return KalmanOraclePolicy(true_spec)
    if name == "ucb":
        return UCBPolicy(k, params["delta"], params["R"])
    if name == "sw_ucb":
        return SWUCBPolicy(k, params["delta"], params["R"], params["window"])
    if name == "rexp3":
        return Rexp3Policy(k, params["batch_size"], params["gamma_exp"], params["R"], rng)
    if name == "oful":
        return OfulPolicy(true_spec, params["lam"], params["delta"])
    if name == "random":
        return RandomPolicy(k, rng)
    raise ParameterError(f"unknown policy {name!r}")

"""Seeded episode execution, batch benchmarks, robustness sweeps and the
interval-metric pipeline.

Every random stream is derived from ``(master seed, env id, run id, tag)``
through :class:`numpy.random.SeedSequence`, so results do not depend on the
order episodes run in, on the worker count, or on which other policies are
in the list.
"""

from __future__ import annotations

import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import normalized_regret, phi_intervals
from .config import TOL, ExperimentConfig
from .environment import LgdsSpec, generate_spec, init_state, simulate_path
from .errors import DareDivergenceError, NotPSDError, ParameterError, PerturbationError, SpecGenerationError
from .numerics import symmetrize
from .policies import make_policy, optimism_evaluator
from .stats import CellStats, summarize

log = logging.getLogger(__name__)

NUMERICAL_FAILURES = (
    DareDivergenceError,
    NotPSDError,
    SpecGenerationError,
    PerturbationError,
    np.linalg.LinAlgError,
    FloatingPointError,
)

ROBUST_POLICIES = ("kode", "idea", "kalman_ucb")
ROBUST_TARGETS = ("gamma", "actions", "q")
ROBUST_NUS = (0.1, 1.0, 10.0)


def _tag(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def derive_seed(master: int, *keys) -> int:
    """Deterministic 63-bit seed for a (master, key...) tuple; string keys are hashed."""
    spawn = tuple(_tag(k) if isinstance(k, str) else int(k) for k in keys)
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=spawn)
    return int(ss.generate_state(2, dtype=np.uint32) @ np.array([1, 2**31], dtype=np.uint64) % (2**63))


# -- single episode ----------------------------------------------------------------


@dataclass
class EpisodeNoise:
    """Shared randomness of one (environment, run): the state path and one
    standard-normal measurement draw per round per action."""

    states: np.ndarray
    eta: np.ndarray


def draw_episode_noise(spec: LgdsSpec, n: int, seed: int, warmup: int = 0) -> EpisodeNoise:
    state = init_state(spec, derive_seed(seed, "state"), warmup)
    states = simulate_path(state, spec, n)
    eta = np.random.default_rng(derive_seed(seed, "measurement")).standard_normal((n, spec.k))
    return EpisodeNoise(states, eta)


@dataclass
class RunRecord:
    env: int
    run: int
    policy: str
    actions: np.ndarray
    rewards: np.ndarray
    oracle_actions: np.ndarray
    inst_regret: np.ndarray
    err_norm: np.ndarray

    @property
    def total_regret(self) -> float:
        return float(np.sum(self.inst_regret))

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.inst_regret)

    def same_as(self, other: "RunRecord") -> bool:
        return (self.env, self.run, self.policy) == (other.env, other.run, other.policy) and all(
            np.array_equal(getattr(self, f), getattr(other, f), equal_nan=True)
            for f in ("actions", "rewards", "oracle_actions", "inst_regret", "err_norm")
        )


def run_episode(
    spec: LgdsSpec,
    policy: str,
    n: int,
    seed: int,
    warmup: int = 0,
    params: dict | None = None,
    perceived: LgdsSpec | None = None,
    noise: EpisodeNoise | None = None,
    env: int = 0,
    run: int = 0,
) -> RunRecord:
    """select -> observe -> update for ``n`` rounds.

    The state path and measurement noise come from ``seed`` alone, so every
    policy run with the same (spec, seed) faces the same trajectory.
    Filter-based learners plan with ``perceived`` (defaults to ``spec``).
    """
    if n < 1:
        raise ParameterError("horizon must be >= 1")
    pol = make_policy(policy, spec, n, np.random.default_rng(derive_seed(seed, "policy", policy)),
                      perceived=perceived, **(params or {}))
    if noise is None:
        noise = draw_episode_noise(spec, n, seed, warmup)
    A = spec.actions
    sigma = spec.sigma
    values = noise.states @ A.T
    oracle = np.argmax(values, axis=1)
    actions = np.empty(n, dtype=int)
    rewards = np.empty(n)
    err = np.full(n, np.nan)
    for t in range(n):
        i = pol.select(t + 1).action_index
        z = noise.states[t]
        x = values[t, i] + sigma * noise.eta[t, i]
        est = pol.estimate()
        if est is not None:
            err[t] = np.linalg.norm(z - est)
        allr = values[t] + sigma * noise.eta[t] if pol.needs_all_rewards else None
        pol.update(t + 1, i, x, allr)
        actions[t] = i
        rewards[t] = x
    rows = np.arange(n)
    inst = values[rows, oracle] - values[rows, actions]
    if not (np.all(np.isfinite(inst)) and np.all(np.isfinite(rewards))):
        raise FloatingPointError("non-finite values in episode")
    return RunRecord(env, run, policy, actions, rewards, oracle, inst, err)


# -- benchmark ------------------------------------------------------------------


@dataclass
class EpisodeResult:
    env: int
    run: int
    policy: str
    regret: float
    normalized: float
    status: str = "ok"
    group: str = ""
    record: RunRecord | None = None


@dataclass
class BenchmarkResult:
    config: ExperimentConfig
    episodes: list[EpisodeResult]
    summary: dict[str, CellStats]

    @property
    def excluded(self) -> int:
        return sum(e.status != "ok" for e in self.episodes)

    @property
    def excluded_fraction(self) -> float:
        return self.excluded / max(1, len(self.episodes))

    def normalized(self, policy: str, group: str = "") -> np.ndarray:
        return np.array(
            [e.normalized for e in self.episodes if e.policy == policy and e.group == group and e.status == "ok"]
        )

    def per_env(self, policy: str, group: str = "") -> dict[int, float]:
        """Median over runs of each environment's normalized regret."""
        vals: dict[int, list[float]] = {}
        for e in self.episodes:
            if e.policy == policy and e.group == group and e.status == "ok" and math.isfinite(e.normalized):
                vals.setdefault(e.env, []).append(e.normalized)
        return {env: float(np.median(v)) for env, v in sorted(vals.items())}


def env_spec(cfg: ExperimentConfig, env_id: int) -> LgdsSpec:
    return generate_spec(cfg.dist, cfg.d, cfg.k, cfg.rho, derive_seed(cfg.seed, env_id, "spec"))


def _failed(env, run, policies, group, exc):
    log.warning("env %d run %d excluded: %s: %s", env, run, type(exc).__name__, exc)
    return [EpisodeResult(env, run, p, math.nan, math.nan, status=f"failed:{type(exc).__name__}", group=group)
            for p in policies]


def _run_group(spec, cfg, env_id, run_id, policies, group, noise, perceived=None, oracle_regret=None):
    """Episodes of several policies on one shared noise realization."""
    out = []
    seed = derive_seed(cfg.seed, env_id, run_id, "episode")
    for p in policies:
        try:
            rec = run_episode(spec, p, cfg.horizon, seed, params=cfg.policy_params.get(p),
                              perceived=perceived if p != "kalman_oracle" else None,
                              noise=noise, env=env_id, run=run_id)
        except NUMERICAL_FAILURES as exc:
            out.extend(_failed(env_id, run_id, [p], group, exc))
            continue
        out.append(EpisodeResult(env_id, run_id, p, rec.total_regret, math.nan, group=group,
                                 record=rec if cfg.per_round else None))
    ref = oracle_regret
    if ref is None:
        for e in out:
            if e.policy == "kalman_oracle" and e.status == "ok":
                ref = e.regret
    if ref is not None:
        for e in out:
            if e.status == "ok":
                e.normalized = normalized_regret(e.regret, ref)
    return out


def _oracle_needed(policies):
    return ["kalman_oracle"] + [p for p in policies if p != "kalman_oracle"]


def _benchmark_env(args):
    cfg, env_id = args
    try:
        spec = env_spec(cfg, env_id)
    except NUMERICAL_FAILURES as exc:
        return [e for r in range(cfg.runs) for e in _failed(env_id, r, cfg.policies, "", exc)]
    results = []
    for run_id in range(cfg.runs):
        seed = derive_seed(cfg.seed, env_id, run_id, "episode")
        try:
            noise = draw_episode_noise(spec, cfg.horizon, seed, cfg.warmup)
        except NUMERICAL_FAILURES as exc:
            results.extend(_failed(env_id, run_id, cfg.policies, "", exc))
            continue
        policies = cfg.policies
        if "kalman_oracle" not in policies:
            # the reference run is needed for normalization but not reported
            group = _run_group(spec, cfg, env_id, run_id, _oracle_needed(policies), "", noise)
            ref = [e for e in group if e.policy == "kalman_oracle"]
            group = [e for e in group if e.policy != "kalman_oracle"]
            if ref and ref[0].status != "ok":
                for e in group:
                    e.normalized = math.nan
        else:
            group = _run_group(spec, cfg, env_id, run_id, policies, "", noise)
        results.extend(group)
    return results


def _map(fn, tasks, jobs):
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def summary_by_policy(episodes, policies, group=""):
    out = {}
    for p in policies:
        cell = [e for e in episodes if e.policy == p and e.group == group]
        out[p] = summarize([e.normalized for e in cell if e.status == "ok"],
                           excluded=sum(e.status != "ok" for e in cell))
    return out


def run_benchmark(cfg: ExperimentConfig) -> BenchmarkResult:
    """All environments x runs x policies for one distribution, with
    normalized regret against the Kalman Oracle on the same (env, run)."""
    cfg.validate()
    chunks = _map(_benchmark_env, [(cfg, e) for e in range(cfg.envs)], cfg.jobs)
    episodes = [e for chunk in chunks for e in chunk]
    return BenchmarkResult(cfg, episodes, summary_by_policy(episodes, cfg.policies))


# -- robustness -------------------------------------------------------------------


def similarity_transform(d: int, nu: float, rng: np.random.Generator):
    """T = I + nu * Xi with Xi Gaussian, normalized to unit Frobenius norm."""
    for _ in range(100):
        xi = rng.standard_normal((d, d))
        xi /= np.linalg.norm(xi)
        T = np.eye(d) + nu * xi
        if np.linalg.cond(T) <= TOL.max_condition:
            return T, xi
    raise PerturbationError("could not draw a well-conditioned similarity transform")


def perturb_spec(spec: LgdsSpec, nu: float, seed, targets=ROBUST_TARGETS):
    """Return ``(perceived, true)``.

    The perceived model replaces each targeted matrix M by T^-1 M T; the true
    spec is returned unchanged. A perturbed Q is re-symmetrized. Perturbing
    the action matrix needs k == d.
    """
    unknown = set(targets) - set(ROBUST_TARGETS)
    if unknown:
        raise ParameterError(f"unknown perturbation targets {sorted(unknown)}")
    if nu == 0:
        return spec, spec
    if nu < 0:
        raise ParameterError("nu must be >= 0")
    T, _ = similarity_transform(spec.d, nu, np.random.default_rng(seed))
    Tinv = np.linalg.inv(T)
    changes = {}
    if "gamma" in targets:
        changes["gamma"] = Tinv @ spec.gamma @ T
    if "q" in targets:
        changes["Q"] = symmetrize(Tinv @ spec.Q @ T)
    if "actions" in targets:
        if spec.k != spec.d:
            raise ParameterError("perturbing actions by T^-1 C T needs k == d")
        changes["actions"] = Tinv @ spec.actions @ T
    meta = dict(spec.meta, perturbation={"nu": float(nu), "targets": sorted(targets)})
    return spec.replace(meta=meta, **changes), spec


@dataclass
class RobustnessResult:
    config: ExperimentConfig
    nus: tuple
    targets: tuple
    episodes: list[EpisodeResult]
    summary: dict[str, dict[str, CellStats]]

    def median(self, group: str, policy: str) -> float:
        return self.summary[group][policy].median

    def degradation(self, target: str, nu: float, policy: str) -> float:
        """Relative change of the median normalized regret against the
        unperturbed run."""
        base = self.median("base", policy)
        return (self.median(group_name(target, nu), policy) - base) / abs(base)


def group_name(target: str, nu: float) -> str:
    return f"{target}@{nu:g}"


def _robust_env(args):
    cfg, env_id, nus, targets, policies = args
    groups = ["base"] + [group_name(t, nu) for t in targets for nu in nus]
    try:
        spec = env_spec(cfg, env_id)
    except NUMERICAL_FAILURES as exc:
        return [e for r in range(cfg.runs) for g in groups for e in _failed(env_id, r, policies, g, exc)]
    perceived = {}
    for t in targets:
        for nu in nus:
            try:
                perceived[group_name(t, nu)] = perturb_spec(spec, nu, derive_seed(cfg.seed, env_id, "perturb", t), (t,))[0]
            except NUMERICAL_FAILURES as exc:
                perceived[group_name(t, nu)] = exc
    results = []
    for run_id in range(cfg.runs):
        seed = derive_seed(cfg.seed, env_id, run_id, "episode")
        try:
            noise = draw_episode_noise(spec, cfg.horizon, seed, cfg.warmup)
            ref = run_episode(spec, "kalman_oracle", cfg.horizon, seed, noise=noise, env=env_id, run=run_id)
        except NUMERICAL_FAILURES as exc:
            results.extend(e for g in groups for e in _failed(env_id, run_id, policies, g, exc))
            continue
        for g in groups:
            pv = None if g == "base" else perceived[g]
            if isinstance(pv, Exception):
                results.extend(_failed(env_id, run_id, policies, g, pv))
                continue
            results.extend(_run_group(spec, cfg, env_id, run_id, policies, g, noise,
                                      perceived=pv, oracle_regret=ref.total_regret))
    return results


def run_robustness(cfg: ExperimentConfig, nus=ROBUST_NUS, targets=ROBUST_TARGETS,
                   policies=ROBUST_POLICIES) -> RobustnessResult:
    """One perturbed matrix at a time, for each magnitude in ``nus``; normalized
    regret is always measured against the unperturbed Kalman Oracle."""
    cfg.validate()
    if any(nu <= 0 for nu in nus):
        raise ParameterError("perturbation magnitudes must be positive")
    nus, targets, policies = tuple(nus), tuple(targets), tuple(policies)
    chunks = _map(_robust_env, [(cfg, e, nus, targets, policies) for e in range(cfg.envs)], cfg.jobs)
    episodes = [e for chunk in chunks for e in chunk]
    groups = ["base"] + [group_name(t, nu) for t in targets for nu in nus]
    summary = {g: summary_by_policy(episodes, policies, g) for g in groups}
    return RobustnessResult(cfg, nus, targets, episodes, summary)


# -- interval metric pipeline -----------------------------------------------------------


@dataclass
class MetricRow:
    env: int
    policy: str
    low: float
    high: float
    empty: bool = False
    status: str = "ok"


@dataclass
class MetricResult:
    config: ExperimentConfig
    intervals: list[MetricRow]
    episodes: list[EpisodeResult] = field(default_factory=list)

    def interval(self, env: int, policy: str) -> MetricRow | None:
        for r in self.intervals:
            if r.env == env and r.policy == policy:
                return r
        return None


METRIC_POLICIES = ("idea", "kalman_ucb")


def _metric_env(args):
    cfg, env_id, with_episodes = args
    rows, episodes = [], []
    try:
        spec = env_spec(cfg, env_id)
        evaluators = {p: optimism_evaluator(p, **cfg.policy_params.get(p, {})) for p in METRIC_POLICIES}
        ivals = phi_intervals(spec, evaluators)
        rows = [MetricRow(env_id, p, iv.low, iv.high, iv.empty) for p, iv in ivals.items()]
    except NUMERICAL_FAILURES as exc:
        log.warning("env %d interval failed: %s", env_id, exc)
        return [MetricRow(env_id, p, math.nan, math.nan, status=f"failed:{type(exc).__name__}")
                for p in METRIC_POLICIES], [
            e for r in range(cfg.runs) for e in _failed(env_id, r, _oracle_needed(METRIC_POLICIES), "", exc)
        ] if with_episodes else []
    if with_episodes:
        for run_id in range(cfg.runs):
            seed = derive_seed(cfg.seed, env_id, run_id, "episode")
            try:
                noise = draw_episode_noise(spec, cfg.horizon, seed, cfg.warmup)
            except NUMERICAL_FAILURES as exc:
                episodes.extend(_failed(env_id, run_id, _oracle_needed(METRIC_POLICIES), "", exc))
                continue
            episodes.extend(_run_group(spec, cfg, env_id, run_id, _oracle_needed(METRIC_POLICIES), "", noise))
    return rows, episodes


def run_metric(cfg: ExperimentConfig, with_episodes: bool = True) -> MetricResult:
    """phi intervals of IDEA and Kalman-UCB per environment, optionally with
    paired episodes of both (plus the oracle) for comparison."""
    cfg.validate()
    chunks = _map(_metric_env, [(cfg, e, with_episodes) for e in range(cfg.envs)], cfg.jobs)
    return MetricResult(cfg, [r for c in chunks for r in c[0]], [e for c in chunks for e in c[1]])

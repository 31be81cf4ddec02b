"""Regret accounting, the phi comparison metric, lower bounds, observability."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .config import TOL
from .environment import LgdsSpec, oracle_action
from .errors import DareDivergenceError, InvalidFloorError, ParameterError, UnsupportedEnvironmentError
from .numerics import (
    check_psd,
    is_psd,
    psd_sqrt,
    solve_dare_multi,
    solve_dare_single,
    spectral_radius,
    stationary_covariance,
    symmetrize,
)

# -- regret --------------------------------------------------------------------


def instantaneous_regret(z, chosen: int, spec: LgdsSpec) -> float:
    """Noise-free gap <a*, z> - <a_chosen, z>."""
    best = oracle_action(z, spec)
    return float(spec.actions[best] @ z - spec.actions[chosen] @ z)


@dataclass
class RegretTrace:
    instantaneous: np.ndarray
    cumulative: np.ndarray
    oracle_actions: np.ndarray
    chosen_actions: np.ndarray

    @property
    def total(self) -> float:
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0


def regret_trace(states, chosen, spec: LgdsSpec) -> RegretTrace:
    """Per-round and cumulative regret along a state path (n x d)."""
    states = np.atleast_2d(states)
    chosen = np.asarray(chosen, dtype=int)
    values = states @ spec.actions.T
    best = np.argmax(values, axis=1)
    rows = np.arange(len(chosen))
    inst = values[rows, best] - values[rows, chosen]
    return RegretTrace(inst, np.cumsum(inst), best, chosen)


def normalized_regret(r_method: float, r_oracle: float) -> float:
    """(R_method - R_oracle) / |R_oracle|; NaN when the oracle regret vanishes."""
    if abs(r_oracle) < TOL.normalization_floor:
        return math.nan
    return (r_method - r_oracle) / abs(r_oracle)


# -- observability ---------------------------------------------------------------


def observability_gramian(gamma, actions, t0: int, t1: int):
    """sum_{tau=t0}^{t1} (G^T)^tau a_tau a_tau^T G^tau; ``actions[tau]`` is a_tau."""
    if not 0 <= t0 <= t1:
        raise IndexError(f"need 0 <= t0 <= t1, got {t0}, {t1}")
    if len(actions) <= t1:
        raise IndexError("action sequence does not cover [t0, t1]")
    gamma = np.asarray(gamma, dtype=float)
    d = gamma.shape[0]
    out = np.zeros((d, d))
    Gp = np.linalg.matrix_power(gamma, t0)
    for tau in range(t0, t1 + 1):
        v = Gp.T @ np.asarray(actions[tau], dtype=float)
        out += np.outer(v, v)
        Gp = gamma @ Gp
    return symmetrize(out)


def is_observable(gramian, rtol: float = TOL.rank) -> bool:
    w = np.linalg.eigvalsh(symmetrize(gramian))
    return bool(w[-1] > 0 and w[0] > rtol * w[-1])


# -- phi metric -----------------------------------------------------------------


def wasserstein2_gaussian_cost(mu1, cov1, mu2, cov2) -> float:
    """||mu1 - mu2||_2 + tr(S1 + S2) - 2 tr((S2^1/2 S1 S2^1/2)^1/2).

    The mean term is the unsquared norm, matching the comparison metric this
    package reproduces (the textbook squared W2 would square it).
    """
    cov1 = check_psd(symmetrize(cov1), name="cov1")
    cov2 = check_psd(symmetrize(cov2), name="cov2")
    if cov1.shape != cov2.shape:
        raise ParameterError("covariances must have equal shape")
    root2 = psd_sqrt(cov2)
    cross = np.linalg.eigvalsh(symmetrize(root2 @ cov1 @ root2))
    mean_term = float(np.linalg.norm(np.asarray(mu1, dtype=float) - np.asarray(mu2, dtype=float)))
    return mean_term + float(np.trace(cov1) + np.trace(cov2)) - 2.0 * float(np.sum(np.sqrt(np.clip(cross, 0, None))))


def difference_matrix(actions, i: int):
    """Rows a_i - a_s for every s != i, in increasing s."""
    actions = np.asarray(actions, dtype=float)
    others = np.delete(np.arange(actions.shape[0]), i)
    return actions[i] - actions[others]


def _require_stable(spec):
    if spectral_radius(spec.gamma) >= 1.0:
        raise UnsupportedEnvironmentError("a stationary state covariance needs spectral radius < 1")


@dataclass
class PhiContext:
    """Quantities shared by every phi evaluation on one environment."""

    Z: np.ndarray
    P_A: np.ndarray
    Z_tilde: np.ndarray

    @classmethod
    def build(cls, spec: LgdsSpec) -> "PhiContext":
        _require_stable(spec)
        Z = stationary_covariance(spec.gamma, spec.Q)
        P_A, _ = solve_dare_multi(spec.gamma, spec.actions, spec.Q, spec.sigma2)
        return cls(Z=Z, P_A=P_A, Z_tilde=symmetrize(Z - P_A))


def phi_mean(i: int, P, spec: LgdsSpec, u: Callable):
    """mu_i(P): differences u(a_i|P) - u(a_s|P) over s != i, then k-1 zeros."""
    vals = np.asarray(u(P, spec), dtype=float)
    head = vals[i] - np.delete(vals, i)
    return np.concatenate([head, np.zeros(spec.k - 1)])


def phi_covariances(i: int, j: int, P, spec: LgdsSpec, ctx: PhiContext):
    """(Sigma_hat_{i,j}(P), Sigma_{i,j}) block matrices."""
    Ai = difference_matrix(spec.actions, i)
    Aj = difference_matrix(spec.actions, j)
    ZP = ctx.Z - P
    jj = Aj @ ctx.Z @ Aj.T
    sig_hat = np.block([[Ai @ ZP @ Ai.T, Ai @ ZP @ Aj.T], [Aj @ ZP @ Ai.T, jj]])
    Zt = ctx.Z_tilde
    sig = np.block([[Ai @ Zt @ Ai.T, Ai @ Zt @ Aj.T], [Aj @ Zt @ Ai.T, jj]])
    return symmetrize(sig_hat), symmetrize(sig)


def phi_metric(i: int, j: int, P, spec: LgdsSpec, u: Callable, ctx: PhiContext | None = None) -> float:
    """Gaussian transport cost between the optimism-perturbed ranking
    distribution N(mu_i(P), Sigma_hat_{i,j}(P)) and the oracle-filter
    distribution N(0, Sigma_{i,j}).

    ``u(P, spec)`` returns the optimism term for every action. The oracle
    filter's prediction covariance is taken as Z - P_A.
    """
    if i == j:
        raise ParameterError("phi needs i != j")
    ctx = ctx or PhiContext.build(spec)
    mu = phi_mean(i, P, spec, u)
    sig_hat, sig = phi_covariances(i, j, P, spec, ctx)
    return wasserstein2_gaussian_cost(mu, sig_hat, np.zeros_like(mu), sig)


@dataclass
class PhiInterval:
    low: float
    high: float
    empty: bool = False


def steady_covariances(spec: LgdsSpec):
    """P_a = g(P_a, a) for every action, in action order."""
    out = []
    for idx, a in enumerate(spec.actions):
        try:
            out.append(solve_dare_single(spec.gamma, a, spec.Q, spec.sigma2))
        except DareDivergenceError as exc:
            exc.action_index = idx
            raise
    return out


def phi_intervals(spec: LgdsSpec, evaluators: Mapping[str, Callable]) -> dict[str, PhiInterval]:
    """min / max of phi(i, j | P_a) over ordered pairs i != j and actions a,
    for several optimism terms at once (the covariance part is shared)."""
    k = spec.k
    if k == 1:
        return {name: PhiInterval(0.0, 0.0, empty=True) for name in evaluators}
    ctx = PhiContext.build(spec)
    Ps = steady_covariances(spec)
    diffs = [difference_matrix(spec.actions, i) for i in range(k)]
    Zt, Z = ctx.Z_tilde, ctx.Z

    # covariance part of phi for each (i, j, a)
    cov_cost = np.empty((k, k, k))
    for i in range(k):
        Ai = diffs[i]
        for j in range(k):
            if i == j:
                continue
            Aj = diffs[j]
            jj = Aj @ Z @ Aj.T
            sig = symmetrize(np.block([[Ai @ Zt @ Ai.T, Ai @ Zt @ Aj.T], [Aj @ Zt @ Ai.T, jj]]))
            root = psd_sqrt(sig)
            tr_sig = float(np.trace(sig))
            for a, P in enumerate(Ps):
                ZP = Z - P
                sig_hat = symmetrize(np.block([[Ai @ ZP @ Ai.T, Ai @ ZP @ Aj.T], [Aj @ ZP @ Ai.T, jj]]))
                cross = np.linalg.eigvalsh(symmetrize(root @ sig_hat @ root))
                cov_cost[i, j, a] = tr_sig + float(np.trace(sig_hat)) - 2.0 * float(
                    np.sum(np.sqrt(np.clip(cross, 0.0, None)))
                )

    mask = ~np.eye(k, dtype=bool)
    result = {}
    for name, u in evaluators.items():
        # ||mu_i(P_a)|| for each (i, a)
        mean_norm = np.empty((k, k))
        for a, P in enumerate(Ps):
            vals = np.asarray(u(P, spec), dtype=float)
            for i in range(k):
                mean_norm[i, a] = float(np.linalg.norm(vals[i] - np.delete(vals, i)))
        phi = cov_cost + mean_norm[:, None, :]
        sel = phi[mask]
        result[name] = PhiInterval(float(sel.min()), float(sel.max()))
    return result


def phi_interval(spec: LgdsSpec, u: Callable) -> PhiInterval:
    return phi_intervals(spec, {"u": u})["u"]


# -- lower bounds --------------------------------------------------------------


def lower_bound_continuous_mc(spec: LgdsSpec, n: int, P_floor, samples: int, rng):
    """Monte-Carlo estimate of the unit-sphere regret lower bound.

    Returns ``(estimate, standard_error)`` of
    n * (E sqrt(v^T Z v) - E sqrt(w^T (Z - P_floor) w)), v, w ~ N(0, I).
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    _require_stable(spec)
    Z = stationary_covariance(spec.gamma, spec.Q)
    gap = symmetrize(Z - np.asarray(P_floor, dtype=float))
    if not is_psd(gap, tol=1e-9):
        raise InvalidFloorError("Z - P_floor is not PSD")
    rng = np.random.default_rng(rng)
    d = spec.d
    v = rng.standard_normal((samples, d))
    w = rng.standard_normal((samples, d))
    full = np.sqrt(np.clip(np.einsum("si,ij,sj->s", v, Z, v), 0, None))
    pred = np.sqrt(np.clip(np.einsum("si,ij,sj->s", w, gap, w), 0, None))
    per_round = full - pred
    mean = float(per_round.mean())
    se = float(per_round.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return n * mean, n * se


@dataclass
class DiscreteBound:
    value: float
    terms: dict[tuple[int, int], float] = field(default_factory=dict)
    skipped: list[tuple[int, int]] = field(default_factory=list)


def discrete_bound_term(i: int, j: int, spec: LgdsSpec, Z, Z_tilde):
    """One (i, j) summand of the finite-action lower bound (without the n factor).

    Returns None when a required matrix is singular.
    """
    k = spec.k
    diff = spec.actions[j] - spec.actions[i]
    num = 2.0 * float(diff @ Z @ diff)
    if num <= 0.0:
        return 0.0
    Ai = difference_matrix(spec.actions, i)
    Aj = difference_matrix(spec.actions, j)
    Sj = symmetrize(Aj @ Z @ Aj.T)
    if np.linalg.cond(Sj) > TOL.max_condition:
        return None
    cross = Ai @ Z_tilde @ Aj.T
    Sj_inv_Aj = np.linalg.solve(Sj, Aj)
    Pi = cross @ Sj_inv_Aj
    sig_t = symmetrize(Ai @ Z_tilde @ Ai.T - cross @ np.linalg.solve(Sj, cross.T))
    sign, logdet = np.linalg.slogdet(sig_t)
    if sign <= 0 or np.linalg.cond(sig_t) > TOL.max_condition:
        return None
    sig_inv = np.linalg.inv(sig_t)
    tr_psi = float(np.trace(sig_inv) + np.trace(Pi.T @ sig_inv @ Pi))
    if tr_psi <= 0:
        return None
    log_term = 0.5 * (math.log(num) - (2 * k - 2) * math.log(tr_psi) - logdet)
    return math.exp(log_term)


def lower_bound_discrete(spec: LgdsSpec, n: int) -> DiscreteBound:
    """Finite-action lower bound, summing over ordered pairs (i, j).

    The oracle filter's prediction covariance Z - P_A stands in for Z~, and the
    covariance inside Psi_{i|j} is read as Sigma~_{i|j}. Pairs whose matrices
    are singular are skipped with a warning and listed in ``skipped``.
    """
    if spec.k == 1:
        return DiscreteBound(0.0)
    _require_stable(spec)
    Z = stationary_covariance(spec.gamma, spec.Q)
    P_A, _ = solve_dare_multi(spec.gamma, spec.actions, spec.Q, spec.sigma2)
    Zt = symmetrize(Z - P_A)
    out = DiscreteBound(0.0)
    for i in range(spec.k):
        for j in range(spec.k):
            if i == j:
                continue
            term = discrete_bound_term(i, j, spec, Z, Zt)
            if term is None:
                out.skipped.append((i, j))
                continue
            out.terms[(i, j)] = term
    if out.skipped:
        warnings.warn(f"skipped {len(out.skipped)} singular pairs in discrete lower bound", RuntimeWarning)
    out.value = n * float(sum(out.terms.values()))
    return out

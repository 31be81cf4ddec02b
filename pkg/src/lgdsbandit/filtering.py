"""Kalman one-step predictors: scalar observation of the played action, and the
steady-gain all-rewards filter used by the oracle baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import LgdsSpec
from .errors import DimensionError
from .numerics import solve_dare_multi, symmetrize


@dataclass
class KalmanState:
    """Prediction of z_t from X_0..X_{t-1} and its error covariance."""

    zhat: np.ndarray
    P: np.ndarray


@dataclass
class OracleKalmanState:
    ztilde: np.ndarray
    K: np.ndarray
    P_A: np.ndarray


def kf_init(spec: LgdsSpec) -> KalmanState:
    return KalmanState(zhat=np.zeros(spec.d), P=np.array(spec.sigma0, dtype=float))


def _action(spec, i):
    if not 0 <= int(i) < spec.k:
        raise IndexError(f"action index {i} out of range for k={spec.k}")
    return spec.actions[int(i)]


def kf_predict_reward(kf: KalmanState, action_index: int, spec: LgdsSpec):
    """Predicted reward mean and innovation variance a^T P a + sigma^2."""
    a = _action(spec, action_index)
    return float(a @ kf.zhat), float(a @ kf.P @ a) + spec.sigma2


def kf_update(kf: KalmanState, action_index: int, reward: float, spec: LgdsSpec) -> KalmanState:
    """Standard predictor recursion.

    zhat' = G zhat + G K (X - <a, zhat>),  K = P a / (a^T P a + sigma^2),
    P' = G P G^T + Q - G P a a^T P G^T / (a^T P a + sigma^2).
    """
    a = _action(spec, action_index)
    G = spec.gamma
    P = kf.P
    Pa = P @ a
    s = float(a @ Pa) + spec.sigma2
    GP = G @ P
    if s > 0:
        innov = float(reward) - float(a @ kf.zhat)
        zhat = G @ (kf.zhat + Pa * (innov / s))
        v = G @ Pa
        P_new = GP @ G.T + spec.Q - np.outer(v, v) / s
    else:
        # zero innovation variance carries no information
        zhat = G @ kf.zhat
        P_new = GP @ G.T + spec.Q
    return KalmanState(zhat=zhat, P=symmetrize(P_new))


def oracle_kf_init(spec: LgdsSpec) -> OracleKalmanState:
    P_A, K = solve_dare_multi(spec.gamma, spec.actions, spec.Q, spec.sigma2)
    return OracleKalmanState(ztilde=np.zeros(spec.d), K=K, P_A=P_A)


def oracle_kf_update(okf: OracleKalmanState, rewards, spec: LgdsSpec) -> OracleKalmanState:
    """z~' = G z~ + G K (X - C z~) with the steady gain K."""
    X = np.asarray(rewards, dtype=float)
    if X.shape != (spec.k,):
        raise DimensionError(f"expected {spec.k} rewards, got shape {X.shape}")
    zt = okf.ztilde
    new = spec.gamma @ (zt + okf.K @ (X - spec.actions @ zt))
    return OracleKalmanState(ztilde=new, K=okf.K, P_A=okf.P_A)

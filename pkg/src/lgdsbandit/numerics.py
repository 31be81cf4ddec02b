"""Small dense matrix helpers: spectra, PSD roots, sampling, Riccati fixed points."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .config import TOL
from .errors import DareDivergenceError, DimensionError, NotPSDError, ParameterError


def _square(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    return M


def symmetrize(M):
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    M = _square(M)
    if not np.all(np.isfinite(M)):
        raise ParameterError("matrix has non-finite entries")
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def check_psd(M, tol=TOL.psd, name="matrix"):
    """Raise NotPSDError unless M is symmetric PSD within relative tolerance."""
    M = _square(M, name)
    scale = max(float(np.max(np.abs(M))), 1e-300) if M.size else 1.0
    if np.max(np.abs(M - M.T)) > TOL.symmetry * scale:
        raise NotPSDError(f"{name} is not symmetric")
    w = np.linalg.eigvalsh(symmetrize(M))
    if w.size and w[0] < -tol * max(w[-1], 0.0) and w[0] < -tol * scale:
        raise NotPSDError(f"{name} has eigenvalue {w[0]:.3e} < 0")
    return M


def is_psd(M, tol=TOL.psd) -> bool:
    try:
        check_psd(M, tol)
    except NotPSDError:
        return False
    return True


def psd_sqrt(M):
    """Symmetric PSD square root via eigendecomposition.

    Slightly negative eigenvalues (roundoff within the PSD tolerance) are
    clipped to zero; genuinely indefinite input raises NotPSDError.
    """
    M = check_psd(M, name="psd_sqrt input")
    w, V = np.linalg.eigh(symmetrize(M))
    w = np.clip(w, 0.0, None)
    S = (V * np.sqrt(w)) @ V.T
    return symmetrize(S)


def gaussian_factor(cov):
    """Lower-triangular L with L L^T ~= cov.

    Cholesky first; on failure add diagonal jitter starting at
    ``1e-12 * trace`` and doubling at most 20 times.
    """
    cov = symmetrize(_square(cov, "covariance"))
    tr = float(np.trace(cov))
    if tr == 0.0 and not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    jitter = TOL.jitter_scale * abs(tr)
    eye = np.eye(cov.shape[0])
    for _ in range(TOL.jitter_doublings + 1):
        try:
            return np.linalg.cholesky(cov + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 2.0
    raise NotPSDError("covariance could not be factorized even with jitter")


def sample_gaussian(mean, cov, rng: np.random.Generator):
    mean = np.asarray(mean, dtype=float)
    cov = _square(cov, "covariance")
    if mean.shape != (cov.shape[0],):
        raise DimensionError(f"mean shape {mean.shape} vs covariance {cov.shape}")
    L = gaussian_factor(cov)
    w = rng.standard_normal(mean.shape[0])
    return mean + L @ w


def riccati_map(P, a, gamma, Q, sigma2):
    """One step of the scalar-observation Riccati recursion g(P, a)."""
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    P = np.asarray(P, dtype=float)
    a = np.asarray(a, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    Pa = P @ a
    s = float(a @ Pa) + sigma2
    v = gamma @ Pa
    out = gamma @ P @ gamma.T + Q - np.outer(v, v) / s
    return symmetrize(out)


def riccati_map_multi(P, C, gamma, Q, sigma2):
    """Riccati step for the k-output observation matrix C (k x d)."""
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    P = np.asarray(P, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    PCt = P @ C.T
    S = C @ PCt + sigma2 * np.eye(C.shape[0])
    GPCt = gamma @ PCt
    out = gamma @ P @ gamma.T + Q - GPCt @ np.linalg.solve(S, GPCt.T)
    return symmetrize(out)


def _fixed_point(step, Q, tol, max_iter):
    P = symmetrize(Q)
    best = np.inf
    since_best = 0
    res = np.inf
    for _ in range(max_iter):
        Pn = step(P)
        res = float(np.linalg.norm(Pn - P))
        if not np.isfinite(res) or res > 1e150:
            raise DareDivergenceError("Riccati iteration diverged", residual=res)
        if res <= tol * max(1.0, float(np.linalg.norm(P))):
            return P
        if res < best:
            best, since_best = res, 0
        else:
            since_best += 1
            # stalled at roundoff level above the requested tolerance
            if since_best > 10_000:
                break
        P = Pn
    raise DareDivergenceError(
        f"Riccati iteration did not reach tolerance {tol:g}", residual=res
    )


def solve_dare_single(gamma, a, Q, sigma2, tol=TOL.dare_residual, max_iter=TOL.dare_max_iter):
    """Fixed point P_a = g(P_a, a), iterated from P = Q."""
    gamma = _square(gamma, "gamma")
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    a = np.asarray(a, dtype=float)
    Q = np.asarray(Q, dtype=float)
    return _fixed_point(lambda P: riccati_map(P, a, gamma, Q, sigma2), Q, tol, max_iter)


def solve_dare_multi(gamma, C, Q, sigma2, tol=TOL.dare_residual, max_iter=TOL.dare_max_iter):
    """Steady covariance and gain for the k-output filter.

    Returns ``(P, K)`` with ``K = P C^T (C P C^T + sigma2 I)^-1``.
    """
    gamma = _square(gamma, "gamma")
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    C = np.atleast_2d(np.asarray(C, dtype=float))
    Q = np.asarray(Q, dtype=float)
    P = _fixed_point(lambda P: riccati_map_multi(P, C, gamma, Q, sigma2), Q, tol, max_iter)
    S = C @ P @ C.T + sigma2 * np.eye(C.shape[0])
    K = np.linalg.solve(S, C @ P).T
    return P, K


def stationary_covariance(gamma, Q):
    """Solution Z of Z = gamma Z gamma^T + Q (requires spectral radius < 1)."""
    gamma = _square(gamma, "gamma")
    if spectral_radius(gamma) >= 1.0:
        raise ParameterError("stationary covariance needs spectral radius < 1")
    return symmetrize(scipy.linalg.solve_discrete_lyapunov(gamma, np.asarray(Q, dtype=float)))


def numerical_rank(M, rtol=TOL.rank) -> int:
    s = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))

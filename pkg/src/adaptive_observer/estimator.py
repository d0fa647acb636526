"""Recursive least squares with covariance resetting, plus baselines.

Three update variants share one step function:

``covariance_reset``
    ordinary RLS, but the covariance is reset to ``k0 * I`` whenever the
    smallest eigenvalue of the updated covariance drops to ``k_min`` or below.
``forgetting``
    exponentially weighted RLS with factor ``lam``; no reset.
``ordinary``
    plain RLS (``lam = 1``, no reset).

``batch_ls_oracle`` solves the same weighted least-squares problem in
information form and is used to cross-check the recursive path.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

VARIANTS = ("covariance_reset", "forgetting", "ordinary")
UPPER_ROUNDING = 1e-10


class EstimatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    k0: float = 1000.0
    k_min: float = 1e-4
    R: np.ndarray = field(default_factory=lambda: np.eye(1))
    p_hat0: np.ndarray | None = None
    variant: str = "covariance_reset"
    lam: float = 1.0

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        object.__setattr__(self, "R", R)
        if self.p_hat0 is not None:
            object.__setattr__(self, "p_hat0", np.asarray(self.p_hat0, dtype=float).reshape(-1))
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.k0 > 0:
            raise ValueError(f"k0 must be positive, got {self.k0}")
        # k_min = 0 is accepted: it disables resets while keeping the variant
        if not 0 <= self.k_min < self.k0:
            raise ValueError(f"need 0 <= k_min < k0, got k_min={self.k_min}, k0={self.k0}")
        if self.variant == "forgetting" and not 0 < self.lam <= 1:
            raise ValueError(f"forgetting factor must lie in (0, 1], got {self.lam}")
        if R.shape[0] != R.shape[1] or not np.allclose(R, R.T, rtol=0, atol=1e-12):
            raise ValueError("R must be a symmetric square matrix")
        if np.linalg.eigvalsh(R)[0] <= 0:
            raise ValueError("R must be positive definite")

    @property
    def forgetting_factor(self) -> float:
        return self.lam if self.variant == "forgetting" else 1.0


@dataclass(frozen=True)
class EstimatorState:
    p_hat: np.ndarray
    Gamma: np.ndarray
    t: int = 0
    reset_count: int = 0
    last_W: np.ndarray | None = None
    reset: bool = False  # whether the most recent step reset the covariance
    spectrum: tuple | None = None  # (lambda_min, lambda_max) of Gamma, if known


def init_estimator(cfg: EstimatorConfig, d: int) -> EstimatorState:
    p0 = np.zeros(d) if cfg.p_hat0 is None else cfg.p_hat0.copy()
    if p0.size != d:
        raise ValueError(f"p_hat0 has length {p0.size}, expected d={d}")
    return EstimatorState(p_hat=p0, Gamma=cfg.k0 * np.eye(d), spectrum=(cfg.k0, cfg.k0))


def _spd_factor(M: np.ndarray, name: str):
    try:
        return linalg.cho_factor(M, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise EstimatorError(f"{name} is not symmetric positive definite: {exc}") from exc


def _spd_inverse(M: np.ndarray, name: str) -> np.ndarray:
    """Inverse of a small SPD matrix through its Cholesky factor."""
    if M.shape == (1, 1):
        if not M[0, 0] > 0:
            raise EstimatorError(f"{name} is not symmetric positive definite")
        return 1.0 / M
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise EstimatorError(f"{name} is not symmetric positive definite") from exc
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv


def rls_step(state: EstimatorState, phi, z, cfg: EstimatorConfig) -> EstimatorState:
    phi = np.asarray(phi, dtype=float)
    z = np.asarray(z, dtype=float).reshape(-1)
    d = state.p_hat.size
    if phi.ndim == 1:
        phi = phi.reshape(d, -1)
    if phi.shape != (d, z.size):
        raise ValueError(f"phi has shape {phi.shape}, expected ({d}, {z.size})")
    if not (np.isfinite(phi).all() and np.isfinite(z).all()):
        raise EstimatorError("non-finite regressor or measurement")

    lam = cfg.forgetting_factor
    Gamma = state.Gamma
    Gphi = Gamma @ phi
    W = _spd_inverse(lam * cfg.R + phi.T @ Gphi, "R + phi' Gamma phi")
    K = Gphi @ W
    p_next = state.p_hat + K @ (z - phi.T @ state.p_hat)
    G_bar = Gamma - K @ Gphi.T
    G_bar = 0.5 * (G_bar + G_bar.T)
    if lam != 1.0:
        G_bar = G_bar / lam

    if not (np.isfinite(p_next).all() and np.isfinite(G_bar).all()):
        raise EstimatorError(f"non-finite estimator update at t={state.t + 1}")
    ev = np.linalg.eigvalsh(G_bar)
    spectrum = (float(ev[0]), float(ev[-1]))
    reset = False
    # inclusive threshold on the raw eigenvalue, no extra slack.  The downdate
    # can only shrink Gamma, so lambda_max above k0 beyond rounding means the
    # update was swamped by cancellation; that case resets as well.
    if cfg.variant == "covariance_reset" and (
            spectrum[0] <= cfg.k_min or spectrum[1] > cfg.k0 * (1 + UPPER_ROUNDING)):
        G_bar = cfg.k0 * np.eye(d)
        spectrum = (cfg.k0, cfg.k0)
        reset = True
    return EstimatorState(p_hat=p_next, Gamma=G_bar, t=state.t + 1,
                          reset_count=state.reset_count + reset, last_W=W, reset=reset,
                          spectrum=spectrum)


def covariance_spectrum(state: EstimatorState) -> tuple[float, float]:
    if state.spectrum is not None:
        return state.spectrum
    ev = np.linalg.eigvalsh(state.Gamma)
    return float(ev[0]), float(ev[-1])


class BatchLeastSquares:
    """Information-form accumulator for the regularised least-squares cost.

    Keeps ``Gamma0^{-1} + sum phi R^{-1} phi'`` and
    ``Gamma0^{-1} p0 + sum phi R^{-1} z`` and solves on demand.
    """

    def __init__(self, cfg: EstimatorConfig, d: int):
        if cfg.variant != "ordinary":
            raise ValueError("the batch oracle only matches the 'ordinary' variant")
        p0 = np.zeros(d) if cfg.p_hat0 is None else cfg.p_hat0
        self.R_fac = _spd_factor(cfg.R, "R")
        self.info = np.eye(d) / cfg.k0
        self.rhs = p0 / cfg.k0
        self.t = 0

    def add(self, phi, z) -> None:
        phi = np.asarray(phi, dtype=float)
        z = np.asarray(z, dtype=float).reshape(-1)
        phi = phi.reshape(self.info.shape[0], z.size)
        Rinv_phiT = linalg.cho_solve(self.R_fac, phi.T)
        self.info = self.info + phi @ Rinv_phiT
        self.rhs = self.rhs + Rinv_phiT.T @ z
        self.t += 1

    def solve(self) -> np.ndarray:
        info = 0.5 * (self.info + self.info.T)
        cond = np.linalg.cond(info)
        if cond > 1e13:
            warnings.warn(f"batch information matrix poorly conditioned (cond={cond:.3g})",
                          RuntimeWarning, stacklevel=2)
        return linalg.cho_solve(_spd_factor(info, "information matrix"), self.rhs)


def batch_ls_oracle(history, cfg: EstimatorConfig) -> np.ndarray:
    """Batch minimiser of the regularised weighted least-squares cost."""
    history = list(history)
    if not history:
        raise ValueError("history must be non-empty")
    phi0 = np.asarray(history[0][0], dtype=float)
    d = phi0.shape[0]
    acc = BatchLeastSquares(cfg, d)
    for phi, z in history:
        acc.add(phi, z)
    return acc.solve()

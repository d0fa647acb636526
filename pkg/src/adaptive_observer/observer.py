"""Per-step adaptive observer cycle.

Order within one step (``t -> t+1``):

1. advance the filters with the previous sample ``(y_t, u_t)`` and read
   ``phi_{t+1}``;
2. propagate ``zeta_{t+1} = F zeta_t`` (this is ``F^{t+1} x_hat_0``);
3. form the innovation target ``z_{t+1} = y_{t+1} - C zeta_{t+1}``;
4. update ``p_hat`` and the covariance;
5. rebuild ``x_hat_{t+1} = S_{t+1} p_hat_{t+1} + zeta_{t+1}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import EstimatorConfig, EstimatorState, init_estimator, rls_step
from .filter_bank import FilterBankState, advance_filters, snapshot_regressor
from .lti_model import Dimensions, DimensionError, output_matrix

DEFAULT_GUARD = 1e150


class OverflowGuardTripped(RuntimeError):
    """A monitored magnitude crossed the guard cap; the run must stop."""

    def __init__(self, t: int, quantity: str, value: float):
        super().__init__(f"overflow guard tripped at t={t}: ||{quantity}|| = {value:.3g}")
        self.t = t
        self.quantity = quantity
        self.value = value


@dataclass(frozen=True)
class ObserverState:
    filter: FilterBankState
    est: EstimatorState
    zeta: np.ndarray
    x_hat: np.ndarray
    y_hat: np.ndarray
    t: int
    cfg: EstimatorConfig
    C: np.ndarray
    guard: float = DEFAULT_GUARD

    @property
    def dims(self) -> Dimensions:
        return self.filter.dims


@dataclass(frozen=True)
class StepRecord:
    """Everything computed while moving the observer from ``t - 1`` to ``t``.

    ``y_prev``/``u_prev`` are the samples at ``t - 1`` fed to the filters and
    ``y`` is the sample at ``t`` used for the innovation.
    """

    t: int
    y_prev: np.ndarray
    u_prev: np.ndarray
    y: np.ndarray
    S: np.ndarray
    phi: np.ndarray
    zeta: np.ndarray
    z: np.ndarray
    p_hat_prev: np.ndarray
    p_hat: np.ndarray
    gain: np.ndarray  # Gamma_{t-1} phi_t W_t
    Gamma: np.ndarray
    W: np.ndarray
    reset: bool
    x_hat: np.ndarray
    y_hat: np.ndarray


def observer_init(dims: Dimensions, f_vec, C, cfg: EstimatorConfig, x_hat0,
                  guard: float = DEFAULT_GUARD) -> ObserverState:
    C = output_matrix(dims) if C is None else np.asarray(C, dtype=float)
    x_hat0 = np.asarray(x_hat0, dtype=float).reshape(-1)
    if C.shape != (dims.q, dims.n):
        raise DimensionError(f"C has shape {C.shape}, expected ({dims.q}, {dims.n})")
    if x_hat0.size != dims.n:
        raise DimensionError(f"x_hat0 has length {x_hat0.size}, expected n={dims.n}")
    if cfg.R.shape != (dims.q, dims.q):
        raise DimensionError(f"R has shape {cfg.R.shape}, expected ({dims.q}, {dims.q})")
    filt = FilterBankState.zeros(f_vec, dims)
    est = init_estimator(cfg, dims.d)
    return ObserverState(filter=filt, est=est, zeta=x_hat0.copy(), x_hat=x_hat0.copy(),
                         y_hat=C @ x_hat0, t=0, cfg=cfg, C=C, guard=guard)


def observer_step(state: ObserverState, y_prev, u_prev, y) -> tuple[ObserverState, StepRecord]:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != state.dims.q:
        raise DimensionError(f"y has length {y.size}, expected q={state.dims.q}")
    if not np.isfinite(y).all():
        raise ValueError("observer_step received a non-finite measurement")
    t = state.t + 1

    filt = advance_filters(state.filter, y_prev, u_prev)
    snap = snapshot_regressor(filt, state.C)
    _guard(t, "phi", snap.phi, state.guard)
    zeta = filt.F @ state.zeta
    z = y - state.C @ zeta

    est = rls_step(state.est, snap.phi, z, state.cfg)
    gain = state.est.Gamma @ snap.phi @ est.last_W
    x_hat = snap.S @ est.p_hat + zeta
    y_hat = snap.phi.T @ est.p_hat + state.C @ zeta
    _guard(t, "p_hat", est.p_hat, state.guard)
    _guard(t, "Gamma", est.Gamma, state.guard)
    _guard(t, "x_hat", x_hat, state.guard)

    new = ObserverState(filter=filt, est=est, zeta=zeta, x_hat=x_hat, y_hat=y_hat, t=t,
                        cfg=state.cfg, C=state.C, guard=state.guard)
    rec = StepRecord(t=t, y_prev=np.asarray(y_prev, dtype=float).reshape(-1),
                     u_prev=np.asarray(u_prev, dtype=float).reshape(-1), y=y,
                     S=snap.S, phi=snap.phi, zeta=zeta, z=z,
                     p_hat_prev=state.est.p_hat, p_hat=est.p_hat, gain=gain,
                     Gamma=est.Gamma, W=est.last_W, reset=est.reset,
                     x_hat=x_hat, y_hat=y_hat)
    return new, rec


def _guard(t: int, name: str, arr: np.ndarray, cap: float) -> None:
    # max-abs is cheaper than a norm and catches inf/nan as well
    val = float(np.abs(arr).max()) if arr.size else 0.0
    if not val < cap:
        raise OverflowGuardTripped(t, name, val)

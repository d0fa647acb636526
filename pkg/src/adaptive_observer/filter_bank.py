"""Filter bank producing the linear-in-parameters regressor.

The filters run on measured data only::

    S_y[t+1]    = F S_y[t]    + kron(I_r, y_t)
    S_u_i[t+1]  = F S_u_i[t]  + u_t[i] * I_n        (i = 1..m)

and ``S_t = [S_y | S_u_1 ... S_u_m]`` satisfies ``x_t = S_t p + F^t x_0``
for the true parameter vector ``p``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lti_model import Dimensions, DimensionError, companion_blocks, is_schur_stable


def build_F(f_vec, q: int) -> np.ndarray:
    """Filter matrix with the same block layout as the plant's ``A``."""
    return companion_blocks(f_vec, q)


@dataclass(frozen=True)
class FilterBankState:
    F: np.ndarray
    S_y: np.ndarray
    S_u_blocks: tuple
    t: int
    dims: Dimensions

    @classmethod
    def zeros(cls, f_vec, dims: Dimensions, check_stable: bool = True) -> "FilterBankState":
        F = build_F(f_vec, dims.q)
        if F.shape != (dims.n, dims.n):
            raise DimensionError(f"f_vec must have length r={dims.r}")
        if check_stable and not is_schur_stable(F):
            raise ValueError("filter matrix F is not Schur stable")
        n = dims.n
        return cls(F=F, S_y=np.zeros((n, dims.r)),
                   S_u_blocks=tuple(np.zeros((n, n)) for _ in range(dims.m)),
                   t=0, dims=dims)


@dataclass(frozen=True)
class RegressorSnapshot:
    S: np.ndarray  # n x d
    phi: np.ndarray  # d x q
    t: int


def advance_filters(state: FilterBankState, y, u) -> FilterBankState:
    dims = state.dims
    y = np.asarray(y, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if y.size != dims.q or u.size != dims.m:
        raise DimensionError(f"y/u lengths ({y.size}, {u.size}) != (q={dims.q}, m={dims.m})")
    if not (np.isfinite(y).all() and np.isfinite(u).all()):
        raise ValueError("advance_filters received non-finite data")
    F = state.F
    # kron(I_r, y): y copied down the block diagonal of an n x r matrix
    Y = np.zeros((dims.n, dims.r))
    for i in range(dims.r):
        Y[i * dims.q:(i + 1) * dims.q, i] = y
    S_u = []
    for i, S in enumerate(state.S_u_blocks):
        S = F @ S
        S.flat[::dims.n + 1] += u[i]
        S_u.append(S)
    return FilterBankState(F=F, S_y=F @ state.S_y + Y, S_u_blocks=tuple(S_u),
                           t=state.t + 1, dims=dims)


def assemble_S(state: FilterBankState) -> np.ndarray:
    return np.hstack((state.S_y,) + state.S_u_blocks)


def snapshot_regressor(state: FilterBankState, C: np.ndarray) -> RegressorSnapshot:
    S = assemble_S(state)
    return RegressorSnapshot(S=S, phi=S.T @ C.T, t=state.t)

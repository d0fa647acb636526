"""Plant description, observable canonical realization and parameter packing.

Sign convention: ``a_vec`` always stores the *negated* denominator
coefficients, ``a_vec = -[a_1, ..., a_r]``, so that the first block column of
``A`` is ``a_vec[i] * I_q``.  The same holds for ``f_vec`` and the filter
matrix ``F``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SCHUR_TOL = 1e-9


class DimensionError(ValueError):
    """Raised when array shapes disagree with the declared dimensions."""


@dataclass(frozen=True)
class Dimensions:
    q: int
    m: int
    r: int

    def __post_init__(self):
        for name in ("q", "m", "r"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise DimensionError(f"{name} must be a positive integer, got {val!r}")

    @property
    def n(self) -> int:
        return self.r * self.q

    @property
    def d(self) -> int:
        return self.r + self.m * self.n


@dataclass(frozen=True)
class TransferFunctionSpec:
    """Denominator coefficients ``a_1..a_r`` and numerator matrices ``N_1..N_r``.

    ``a_coeffs`` uses the transfer-function sign (``s^r + a_1 s^{r-1} + ...``),
    not the negated ``a_vec`` convention.
    """

    a_coeffs: np.ndarray
    numerators: tuple

    def __init__(self, a_coeffs: Sequence[float], numerators: Sequence):
        a = np.asarray(a_coeffs, dtype=float).reshape(-1)
        nums = tuple(np.atleast_2d(np.asarray(N, dtype=float)) for N in numerators)
        if a.size == 0:
            raise DimensionError("a_coeffs must contain at least one coefficient")
        if len(nums) != a.size:
            raise DimensionError(
                f"expected {a.size} numerator matrices (one per a_i), got {len(nums)}"
            )
        shape = nums[0].shape
        for i, N in enumerate(nums):
            if N.shape != shape:
                raise DimensionError(
                    f"numerator N_{i + 1} has shape {N.shape}, expected {shape} like N_1"
                )
        if not np.all(np.isfinite(a)) or not all(np.all(np.isfinite(N)) for N in nums):
            raise ValueError("transfer function coefficients must be finite")
        object.__setattr__(self, "a_coeffs", a)
        object.__setattr__(self, "numerators", nums)

    @property
    def dims(self) -> Dimensions:
        q, m = self.numerators[0].shape
        return Dimensions(q=q, m=m, r=self.a_coeffs.size)


@dataclass(frozen=True)
class SystemRealization:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dims: Dimensions

    @property
    def a_vec(self) -> np.ndarray:
        """Negated denominator coefficients read off the first block column."""
        q, r = self.dims.q, self.dims.r
        return np.array([self.A[i * q, 0] for i in range(r)])


@dataclass(frozen=True)
class ParameterVector:
    a_vec: np.ndarray
    f_vec: np.ndarray
    b_vec: np.ndarray
    p: np.ndarray


def companion_blocks(coeffs: np.ndarray, q: int) -> np.ndarray:
    """Block companion matrix with ``coeffs[i] * I_q`` down the first block column.

    Used for both the plant ``A`` (with ``a_vec``) and the filter ``F`` (with
    ``f_vec``); the identity and zero blocks are written, never computed.
    """
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    r = coeffs.size
    n = r * q
    M = np.zeros((n, n))
    eye = np.eye(q)
    for i in range(r):
        M[i * q:(i + 1) * q, 0:q] = coeffs[i] * eye
        if i + 1 < r:
            M[i * q:(i + 1) * q, (i + 1) * q:(i + 2) * q] = eye
    return M


def output_matrix(dims: Dimensions) -> np.ndarray:
    C = np.zeros((dims.q, dims.n))
    C[:, :dims.q] = np.eye(dims.q)
    return C


def realize_observable_canonical(tf: TransferFunctionSpec) -> SystemRealization:
    dims = tf.dims
    A = companion_blocks(-tf.a_coeffs, dims.q)
    B = np.vstack(tf.numerators)
    return SystemRealization(A=A, B=B, C=output_matrix(dims), dims=dims)


def realization_from_matrices(a_vec, B) -> SystemRealization:
    """Build a canonical realization from ``a_vec`` and an explicit ``B``.

    ``B`` must have ``n = r*q`` rows; ``q`` is inferred as ``n // r``.
    """
    a_vec = np.asarray(a_vec, dtype=float).reshape(-1)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    r = a_vec.size
    n = B.shape[0]
    if r == 0 or n % r:
        raise DimensionError(f"B has {n} rows, not a multiple of r={r}")
    q = n // r
    nums = [B[i * q:(i + 1) * q] for i in range(r)]
    return realize_observable_canonical(TransferFunctionSpec(-a_vec, nums))


def check_canonical_pattern(M: np.ndarray, q: int, r: int) -> bool:
    """True iff ``M`` has the exact block-companion layout (bit-exact)."""
    n = q * r
    if M.shape != (n, n):
        return False
    coeffs = np.array([M[i * q, 0] for i in range(r)])
    return bool(np.array_equal(M, companion_blocks(coeffs, q)))


def markov_parameters(sys: SystemRealization, k_max: int) -> list[np.ndarray]:
    """Return ``[C A^{k-1} B for k = 1..k_max]``."""
    out = []
    AkB = sys.B.copy()
    for _ in range(k_max):
        out.append(sys.C @ AkB)
        AkB = sys.A @ AkB
    return out


def simulate_step(sys: SystemRealization, x, u) -> tuple[np.ndarray, np.ndarray]:
    """One step of ``x+ = A x + B u``; the output ``y = C x`` uses the pre-update state."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.size != sys.dims.n or u.size != sys.dims.m:
        raise DimensionError(
            f"state/input lengths ({x.size}, {u.size}) != (n={sys.dims.n}, m={sys.dims.m})"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise ValueError("simulate_step received non-finite state or input")
    return sys.A @ x + sys.B @ u, sys.C @ x


def pack_parameters(a_vec, f_vec, B) -> ParameterVector:
    """Stack ``p = [a - f ; vec(B)]`` with ``vec`` taking columns in order."""
    a_vec = np.asarray(a_vec, dtype=float).reshape(-1)
    f_vec = np.asarray(f_vec, dtype=float).reshape(-1)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if a_vec.size != f_vec.size:
        raise DimensionError(f"a_vec has length {a_vec.size} but f_vec has {f_vec.size}")
    if B.shape[0] % max(a_vec.size, 1):
        raise DimensionError(f"B has {B.shape[0]} rows, not a multiple of r={a_vec.size}")
    b_vec = B.reshape(-1, order="F")
    return ParameterVector(a_vec=a_vec, f_vec=f_vec, b_vec=b_vec,
                           p=np.concatenate([a_vec - f_vec, b_vec]))


def unpack_parameters(p, f_vec, dims: Dimensions) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float).reshape(-1)
    f_vec = np.asarray(f_vec, dtype=float).reshape(-1)
    if p.size != dims.d:
        raise DimensionError(f"p has length {p.size}, expected d={dims.d}")
    if f_vec.size != dims.r:
        raise DimensionError(f"f_vec has length {f_vec.size}, expected r={dims.r}")
    a_vec = p[:dims.r] + f_vec
    B = p[dims.r:].reshape((dims.n, dims.m), order="F")
    return a_vec, B


def spectral_radius(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    # LinAlgError from a failed eigen-solve propagates to the caller
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


def is_schur_stable(M, tol: float = SCHUR_TOL) -> bool:
    """Spectral radius strictly below ``1 - tol``."""
    return spectral_radius(M) < 1.0 - tol

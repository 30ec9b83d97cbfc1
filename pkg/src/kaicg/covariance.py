"""
Covariance construction, forward-backward spatial smoothing and refinement.

Every builder returns a :class:`CovarianceEstimate` that carries a
provenance tag and is re-symmetrised as (R + R^H) / 2 on construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .signal_model import SnapshotMatrix


def hermitian_part(r: np.ndarray) -> np.ndarray:
    return (r + r.conj().T) / 2


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """A Hermitian covariance matrix together with how it was obtained.

    ``provenance`` is one of ``"sample"``, ``"exact"``, ``"fb_averaged"``,
    ``"fbss"`` or ``"refined"``; refined estimates also record ``mu`` and
    the KAI ``iteration`` that produced them.
    """

    matrix: np.ndarray
    provenance: str = "sample"
    mu: float | None = None
    iteration: int | None = None

    def __post_init__(self):
        r = np.asarray(self.matrix, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise DomainError(f"covariance must be square, got shape {r.shape}")
        r = hermitian_part(r)
        r.setflags(write=False)
        object.__setattr__(self, "matrix", r)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix
        return self.matrix.astype(dtype)

    @property
    def label(self) -> str:
        if self.provenance == "refined":
            return f"refined(mu={self.mu:g}, iteration={self.iteration})"
        return self.provenance


def as_matrix(r) -> np.ndarray:
    """Plain complex ndarray view of a covariance argument."""
    if isinstance(r, CovarianceEstimate):
        return r.matrix
    return np.asarray(r, dtype=complex)


@dataclass(frozen=True)
class SmoothingConfig:
    """Subarray length ``l`` for smoothing an ``m``-sensor array; ``p`` sources when known."""

    m: int
    l: int
    p: int | None = None

    def __post_init__(self):
        if not 1 <= self.l <= self.m:
            raise ValidationError(f"subarray length must satisfy 1 <= l <= m, got l={self.l}, m={self.m}")
        if self.p is not None and self.l <= self.p:
            raise ValidationError(f"subarray length l={self.l} must exceed the number of sources p={self.p}")

    @property
    def k(self) -> int:
        return self.m - self.l + 1

    @classmethod
    def default(cls, m: int, p: int) -> "SmoothingConfig":
        """L = M - P, i.e. P + 1 subarrays."""
        return cls(m, m - p, p)


def sample_covariance(x: SnapshotMatrix | np.ndarray) -> CovarianceEstimate:
    """(1 / N) sum_i x(i) x(i)^H."""
    data = x.data if isinstance(x, SnapshotMatrix) else np.asarray(x)
    if data.ndim != 2 or data.shape[1] == 0 or data.shape[0] == 0:
        raise DomainError("sample_covariance needs a non-empty M x N snapshot matrix")
    return CovarianceEstimate(data @ data.conj().T / data.shape[1], "sample")


def covariance_decomposition(x: SnapshotMatrix, a_true: np.ndarray, s_true: np.ndarray,
                             n_true: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Split the sample covariance into the signal-plus-noise part and the
    signal-noise cross terms.

    Returns
    -------
    wanted : ndarray
        A (1/N sum s s^H) A^H + (1/N) sum n n^H
    unwanted : ndarray
        A (1/N sum s n^H) + (1/N sum n s^H) A^H
    """
    data = x.data if isinstance(x, SnapshotMatrix) else np.asarray(x)
    m, n = data.shape
    a_true = np.asarray(a_true)
    s_true = np.asarray(s_true)
    n_true = np.asarray(n_true)
    if a_true.shape[0] != m or s_true.shape != (a_true.shape[1], n) or n_true.shape != (m, n):
        raise DomainError(
            f"dimension mismatch: x {data.shape}, A {a_true.shape}, s {s_true.shape}, n {n_true.shape}"
        )
    rs = s_true @ s_true.conj().T / n
    rn = n_true @ n_true.conj().T / n
    rsn = s_true @ n_true.conj().T / n
    wanted = a_true @ rs @ a_true.conj().T + rn
    unwanted = a_true @ rsn + rsn.conj().T @ a_true.conj().T
    return wanted, unwanted


def exchange_matrix(m: int) -> np.ndarray:
    """m x m reversal matrix (ones on the anti-diagonal)."""
    if m < 1:
        raise DomainError(f"exchange matrix dimension must be >= 1, got {m}")
    return np.eye(m)[::-1].copy()


def fb_average(r) -> CovarianceEstimate:
    """Forward-backward average (R + J R* J) / 2."""
    mat = as_matrix(r)
    # J R* J is the conjugate with both axes reversed
    backward = mat.conj()[::-1, ::-1]
    return CovarianceEstimate((mat + backward) / 2, "fb_averaged")


def selection_matrix(k_index: int, l: int, m: int) -> np.ndarray:
    """L x M matrix [0 | I_L | 0] picking sensors k..k+L-1 (1-based ``k_index``)."""
    if not 1 <= l <= m or not 1 <= k_index <= m - l + 1:
        raise DomainError(f"selection index k={k_index} out of range for l={l}, m={m}")
    z = np.zeros((l, m))
    z[:, k_index - 1:k_index - 1 + l] = np.eye(l)
    return z


def fbss(r0, cfg: SmoothingConfig) -> CovarianceEstimate:
    """
    Forward-backward spatially smoothed covariance of dimension ``cfg.l``.

    The full-array matrix is FB-averaged, then the K = M - L + 1 diagonal
    L x L blocks are averaged.
    """
    mat = as_matrix(r0)
    if mat.shape[0] != cfg.m:
        raise DomainError(f"covariance dimension {mat.shape[0]} does not match smoothing m={cfg.m}")
    if cfg.p is not None and cfg.l <= cfg.p:
        raise ValidationError(f"subarray length l={cfg.l} must exceed p={cfg.p}")
    r_fb = fb_average(mat).matrix
    acc = np.zeros((cfg.l, cfg.l), dtype=complex)
    for k in range(cfg.k):
        # Z_k R Z_k^T is the k-th diagonal block
        acc += r_fb[k:k + cfg.l, k:k + cfg.l]
    return CovarianceEstimate(acc / cfg.k, "fbss")


def refine(base, v: np.ndarray, mu: float, iteration: int | None = None) -> CovarianceEstimate:
    """Subtract the estimated cross terms: base - mu (V + V^H)."""
    if not 0.0 <= mu <= 1.0:
        raise DomainError(f"correction factor mu must lie in [0, 1], got {mu}")
    mat = as_matrix(base)
    v = np.asarray(v)
    if v.shape != mat.shape:
        raise DomainError(f"V shape {v.shape} does not match covariance shape {mat.shape}")
    return CovarianceEstimate(mat - mu * (v + v.conj().T), "refined", float(mu), iteration)

"""
Narrowband far-field signal model for a uniform linear array.

Snapshots follow x(i) = A s(i) + n(i) with circular complex Gaussian
sources and white noise. Angles are in degrees at every public entry point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError

_PSD_TOL = 1e-10


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array with ``m`` sensors spaced ``d_over_lambda`` wavelengths apart."""

    m: int
    d_over_lambda: float = 0.5

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"sensor count must be a positive integer, got {self.m}")
        if not 0.0 < self.d_over_lambda <= 0.5:
            raise ValidationError(f"d_over_lambda must lie in (0, 0.5], got {self.d_over_lambda}")
        object.__setattr__(self, "m", int(self.m))


def _check_correlation(corr: np.ndarray) -> None:
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ValidationError("correlation matrix must be square")
    scale = max(1.0, float(np.abs(corr).max()))
    if np.abs(corr - corr.conj().T).max() > 1e-12 * scale:
        raise ValidationError("correlation matrix must be Hermitian")
    if np.abs(np.diag(corr) - 1.0).max() > 1e-12:
        raise ValidationError("correlation matrix must have a unit diagonal")
    if np.linalg.eigvalsh((corr + corr.conj().T) / 2).min() < -_PSD_TOL:
        raise ValidationError("correlation matrix is not positive semidefinite")


@dataclass(frozen=True, eq=False)
class SourceSet:
    """
    Far-field sources: DoAs, powers and the correlation structure between them.

    Sources are stored in ascending-angle order; powers and correlation are
    permuted along with the angles, so two sets that differ only in listing
    order are identical after construction.
    """

    angles_deg: tuple
    powers: tuple = None
    correlation: np.ndarray = None

    def __post_init__(self):
        angles = np.asarray(self.angles_deg, dtype=float).ravel()
        p = angles.size
        if p == 0:
            raise ValidationError("a source set needs at least one angle")
        if np.any(angles < -90.0) or np.any(angles > 90.0):
            raise ValidationError(f"source angles must lie in [-90, 90], got {angles.tolist()}")
        powers = np.ones(p) if self.powers is None else np.asarray(self.powers, dtype=float).ravel()
        if powers.size != p:
            raise ValidationError(f"expected {p} source powers, got {powers.size}")
        if np.any(powers < 0):
            raise ValidationError("source powers must be non-negative")
        corr = np.eye(p, dtype=complex) if self.correlation is None else np.array(self.correlation, dtype=complex)
        if corr.shape != (p, p):
            raise ValidationError(f"correlation must be {p}x{p}, got {corr.shape}")
        _check_correlation(corr)

        order = np.argsort(angles, kind="stable")
        corr = corr[np.ix_(order, order)]
        corr.setflags(write=False)
        object.__setattr__(self, "angles_deg", tuple(float(a) for a in angles[order]))
        object.__setattr__(self, "powers", tuple(float(w) for w in powers[order]))
        object.__setattr__(self, "correlation", corr)

    @property
    def p(self) -> int:
        return len(self.angles_deg)

    @classmethod
    def with_rho(cls, angles_deg: Sequence[float], rho: float, powers=None) -> "SourceSet":
        """Sources with a common real correlation coefficient ``rho`` between every pair."""
        p = len(angles_deg)
        corr = np.full((p, p), rho, dtype=complex)
        np.fill_diagonal(corr, 1.0)
        return cls(tuple(angles_deg), powers, corr)


@dataclass(frozen=True)
class ScenarioConfig:
    """
    A complete single-realization experiment description.

    The noise variance is derived from the SNR as
    ``mean(powers) / 10**(snr_db / 10)`` unless ``fixed_noise_var`` is given.
    """

    geometry: ArrayGeometry
    sources: SourceSet
    n_snapshots: int
    snr_db: float = 0.0
    seed: int = 0
    fixed_noise_var: float | None = None

    def __post_init__(self):
        if int(self.n_snapshots) != self.n_snapshots or self.n_snapshots < 1:
            raise ValidationError(f"n_snapshots must be a positive integer, got {self.n_snapshots}")
        if self.sources.p >= self.geometry.m:
            raise ValidationError(
                f"number of sources ({self.sources.p}) must be below the sensor count ({self.geometry.m})"
            )
        if not self.noise_var > 0:
            raise ValidationError("derived noise variance must be positive")

    @property
    def noise_var(self) -> float:
        if self.fixed_noise_var is not None:
            return float(self.fixed_noise_var)
        return float(np.mean(self.sources.powers)) / 10.0 ** (self.snr_db / 10.0)

    def with_snr(self, snr_db: float) -> "ScenarioConfig":
        return replace(self, snr_db=float(snr_db))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True, eq=False)
class SnapshotMatrix:
    """M x N block of array snapshots, column i = x(i).

    ``signals`` and ``noise`` keep the generating components when the
    block was synthesised, so that the data covariance can be split into
    its signal, noise and cross terms.
    """

    data: np.ndarray
    signals: np.ndarray | None = field(default=None, repr=False)
    noise: np.ndarray | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


def _check_angle(theta_deg) -> None:
    theta = np.asarray(theta_deg, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(theta < -90.0) or np.any(theta > 90.0):
        raise DomainError(f"angle must lie in [-90, 90] degrees, got {theta_deg}")


def steering_vector(theta_deg: float, geometry: ArrayGeometry) -> np.ndarray:
    """
    ULA response to a unit plane wave from ``theta_deg``.

    Element k is exp(j 2 pi k (d / lambda) sin(theta)); the first element is 1.
    """
    _check_angle(theta_deg)
    phase = 2.0 * np.pi * geometry.d_over_lambda * np.sin(np.deg2rad(float(theta_deg)))
    return np.exp(1j * phase * np.arange(geometry.m))


def array_manifold(angles_deg: Sequence[float], geometry: ArrayGeometry) -> np.ndarray:
    """Steering matrix whose columns are the steering vectors of ``angles_deg``."""
    angles = np.asarray(angles_deg, dtype=float).ravel()
    if angles.size == 0:
        raise DomainError("array_manifold needs at least one angle")
    _check_angle(angles)
    phase = 2.0 * np.pi * geometry.d_over_lambda * np.sin(np.deg2rad(angles))
    return np.exp(1j * np.outer(np.arange(geometry.m), phase))


def source_covariance(sources: SourceSet) -> np.ndarray:
    """Source covariance R_ss with entries sqrt(p_i p_j) * corr_ij."""
    corr = np.asarray(sources.correlation)
    _check_correlation(corr)
    amp = np.sqrt(np.asarray(sources.powers))
    rss = amp[:, None] * corr * amp[None, :]
    return (rss + rss.conj().T) / 2


def true_covariance(config: ScenarioConfig) -> np.ndarray:
    """Population covariance A R_ss A^H + sigma_n^2 I."""
    a = array_manifold(config.sources.angles_deg, config.geometry)
    r = a @ source_covariance(config.sources) @ a.conj().T + config.noise_var * np.eye(config.geometry.m)
    return (r + r.conj().T) / 2


def _matrix_sqrt(rss: np.ndarray) -> np.ndarray:
    # Cholesky first; coherent or zero-power sources make R_ss singular
    try:
        return np.linalg.cholesky(rss)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(rss)
        return v * np.sqrt(np.clip(w, 0.0, None))


def _cgauss(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_snapshots(config: ScenarioConfig, rng: np.random.Generator | None = None) -> SnapshotMatrix:
    """
    Draw N snapshots x(i) = A s(i) + n(i).

    Sources are circular complex Gaussian with covariance R_ss, noise is
    white with variance sigma_n^2. Without an explicit ``rng`` the output is
    a deterministic function of ``config.seed``.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    p, n = config.sources.p, config.n_snapshots
    a = array_manifold(config.sources.angles_deg, config.geometry)
    s = _matrix_sqrt(source_covariance(config.sources)) @ _cgauss(rng, (p, n))
    noise = np.sqrt(config.noise_var) * _cgauss(rng, (config.geometry.m, n))
    return SnapshotMatrix(a @ s + noise, s, noise)

"""Reference estimators: MUSIC, ESPRIT and CG on the FBSS covariance."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .cg import EPS_CAP, AngleGrid, Spectrum, cg_estimate, find_peaks
from .covariance import SmoothingConfig, as_matrix, fbss, sample_covariance
from .errors import DomainError
from .signal_model import ArrayGeometry, array_manifold

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SubspaceDecomposition:
    signal_basis: np.ndarray
    noise_basis: np.ndarray
    eigenvalues: np.ndarray


def eigendecompose(r, p: int) -> SubspaceDecomposition:
    """Eigenvectors in descending eigenvalue order, split after the first ``p``."""
    mat = as_matrix(r)
    if not 0 <= p <= mat.shape[0]:
        raise DomainError(f"model order p={p} out of range for dimension {mat.shape[0]}")
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2)
    w, v = w[::-1], v[:, ::-1]
    return SubspaceDecomposition(v[:, :p], v[:, p:], w)


def _check_order(mat: np.ndarray, p: int, geometry: ArrayGeometry | None) -> ArrayGeometry:
    if not 1 <= p < mat.shape[0]:
        raise DomainError(f"model order p={p} must satisfy 1 <= p < {mat.shape[0]}")
    if geometry is None:
        return ArrayGeometry(mat.shape[0])
    if geometry.m != mat.shape[0]:
        raise DomainError(f"geometry has {geometry.m} sensors but covariance is {mat.shape[0]}x{mat.shape[0]}")
    return geometry


def music_spectrum(r, grid: AngleGrid, p: int, geometry: ArrayGeometry | None = None) -> Spectrum:
    """MUSIC pseudo-spectrum 1 / ||E_n^H a(theta)||^2, capped like the CG spectrum."""
    mat = as_matrix(r)
    geometry = _check_order(mat, p, geometry)
    en = eigendecompose(mat, p).noise_basis
    den = np.sum(np.abs(en.conj().T @ array_manifold(grid.points, geometry)) ** 2, axis=0)
    capped = den < EPS_CAP
    return Spectrum(grid, np.where(capped, 1.0 / EPS_CAP, 1.0 / np.where(capped, 1.0, den)))


def music_estimate(r, grid: AngleGrid, p: int, geometry: ArrayGeometry | None = None) -> list[float]:
    return find_peaks(music_spectrum(r, grid, p, geometry), p)


def esprit_estimate(r, p: int, geometry: ArrayGeometry | None = None) -> list[float]:
    """
    Least-squares ESPRIT with maximally overlapping subarrays (shift of one sensor).

    Phases that fall outside the visible region are clamped to +/-90 degrees.
    """
    mat = as_matrix(r)
    geometry = _check_order(mat, p, geometry)
    es = eigendecompose(mat, p).signal_basis
    psi, *_ = np.linalg.lstsq(es[:-1], es[1:], rcond=None)
    phases = np.angle(np.linalg.eigvals(psi))
    arg = phases / (2.0 * np.pi * geometry.d_over_lambda)
    if np.any(np.abs(arg) > 1.0):
        log.info("ESPRIT phase outside the visible region, clamping to +/-90 degrees")
    return sorted(float(a) for a in np.rad2deg(np.arcsin(np.clip(arg, -1.0, 1.0))))


def cg_fb_estimate(x, grid: AngleGrid, p: int, geometry: ArrayGeometry,
                   smoothing: SmoothingConfig | None = None, covariance=None) -> list[float]:
    """CG estimates from the FBSS covariance on an L-element subarray."""
    smoothing = smoothing or SmoothingConfig.default(geometry.m, p)
    if smoothing.l <= p:
        raise DomainError(f"subarray length l={smoothing.l} must exceed p={p}")
    r_full = sample_covariance(x) if covariance is None else as_matrix(covariance)
    sub = ArrayGeometry(smoothing.l, geometry.d_over_lambda)
    return cg_estimate(fbss(r_full, smoothing), grid, p, sub)

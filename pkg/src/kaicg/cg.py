"""
Conjugate-gradient (Krylov subspace) spectral DoA estimator.

For every search angle the CG recursion is started from the primary vector
b = R a / ||R a|| and run for P steps. The residuals form an expanded
signal-subspace basis whose last, unnormalised member vanishes when the
search angle hits a true DoA. The recursion is evaluated for the whole
search grid at once, one column per angle.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .covariance import as_matrix
from .errors import DegenerateInputError, DomainError, ValidationError
from .signal_model import ArrayGeometry, array_manifold

EPS_CAP = 1e-20
BREAKDOWN_TOL = 1e-24
_TINY_NORM = 1e-300


@dataclass(frozen=True)
class AngleGrid:
    """Search grid -90, -90 + step, ..., 90 degrees; 180 / step must be an integer."""

    step_deg: float = 0.2

    def __post_init__(self):
        if not self.step_deg > 0:
            raise ValidationError(f"grid step must be positive, got {self.step_deg}")
        n = round(180.0 / self.step_deg)
        if n < 1 or abs(n * self.step_deg - 180.0) > 1e-9:
            raise ValidationError(f"grid step {self.step_deg} does not divide 180 degrees")

    @property
    def size(self) -> int:
        return round(180.0 / self.step_deg) + 1

    @cached_property
    def points(self) -> np.ndarray:
        pts = np.round(np.linspace(-90.0, 90.0, self.size), 12)
        pts.setflags(write=False)
        return pts


@dataclass(frozen=True, eq=False)
class ResidualBasis:
    """
    CG residual basis [g_0, ..., g_P] at one search angle.

    Columns 0..P-1 are unit norm, column P is the raw last residual.
    ``converged_at`` is the CG step at which the recursion broke down
    (columns from there on are zero), or None.
    """

    g: np.ndarray
    converged_at: int | None = None

    @property
    def last(self) -> np.ndarray:
        return self.g[:, -1]


@dataclass(frozen=True, eq=False)
class Spectrum:
    grid: AngleGrid
    values: np.ndarray

    @property
    def angles(self) -> np.ndarray:
        return self.grid.points


def _default_geometry(r: np.ndarray, geometry: ArrayGeometry | None) -> ArrayGeometry:
    if geometry is None:
        return ArrayGeometry(r.shape[0])
    if geometry.m != r.shape[0]:
        raise DomainError(f"geometry has {geometry.m} sensors but covariance is {r.shape[0]}x{r.shape[0]}")
    return geometry


def primary_vector(r, theta_deg: float, geometry: ArrayGeometry | None = None) -> np.ndarray:
    """b(theta) = R a(theta) / ||R a(theta)||."""
    mat = as_matrix(r)
    geometry = _default_geometry(mat, geometry)
    ra = mat @ array_manifold([theta_deg], geometry)[:, 0]
    nrm = np.linalg.norm(ra)
    if nrm <= _TINY_NORM:
        raise DegenerateInputError(f"R a(theta) vanishes at theta={theta_deg}")
    return ra / nrm


def _cg_bases(r: np.ndarray, steering: np.ndarray, p: int):
    """Run P CG steps for each column of ``steering``.

    Returns the (M, P+1, G) residual bases and, per column, the breakdown
    step (-1 when the recursion ran to completion).
    """
    m, n_ang = steering.shape
    ra = r @ steering
    nrm = np.linalg.norm(ra, axis=0)
    if np.any(nrm <= _TINY_NORM):
        raise DegenerateInputError("R a(theta) vanishes on part of the search grid")
    b = ra / nrm

    basis = np.zeros((m, p + 1, n_ang), dtype=complex)
    basis[:, 0, :] = b
    conv = np.full(n_ang, -1)
    active = np.ones(n_ang, dtype=bool)

    g = b.copy()
    d = b.copy()
    rho0 = np.einsum("mg,mg->g", g.conj(), g).real
    rho = rho0.copy()
    for i in range(1, p + 1):
        v = r @ d
        dv = np.einsum("mg,mg->g", d.conj(), v).real
        broke = active & ~(np.abs(dv) > _TINY_NORM)
        conv[broke] = i
        active &= ~broke

        alpha = np.where(active, rho / np.where(active, dv, 1.0), 0.0)
        g = g - alpha * v
        rho_new = np.einsum("mg,mg->g", g.conj(), g).real
        small = active & (rho_new <= BREAKDOWN_TOL * rho0)
        conv[small] = i

        if i < p:
            ok = active & ~small
            basis[:, i, ok] = g[:, ok] / np.sqrt(rho_new[ok])
            active = ok
        else:
            # the last residual is kept raw, even when it has collapsed
            basis[:, p, active] = g[:, active]
            active &= ~small

        beta = np.where(active, rho_new / np.where(active, rho, 1.0), 0.0)
        d = g + beta * d
        rho = np.where(active, rho_new, rho)
    return basis, conv


def cg_residual_basis(r, theta_deg: float, p: int, geometry: ArrayGeometry | None = None) -> ResidualBasis:
    """CG residual basis at a single search angle."""
    mat = as_matrix(r)
    if not 0 <= p < mat.shape[0]:
        raise DomainError(f"model order p={p} must be below the covariance dimension {mat.shape[0]}")
    geometry = _default_geometry(mat, geometry)
    basis, conv = _cg_bases(mat, array_manifold([theta_deg], geometry), p)
    return ResidualBasis(basis[:, :, 0], None if conv[0] < 0 else int(conv[0]))


def spectral_value(g_last: np.ndarray, g_prev) -> float:
    """1 / ||g_last^H G_prev||^2, capped at 1 / EPS_CAP."""
    g_prev = g_prev.g if isinstance(g_prev, ResidualBasis) else np.asarray(g_prev)
    den = float(np.sum(np.abs(np.asarray(g_last).conj() @ g_prev) ** 2))
    if den < EPS_CAP:
        return 1.0 / EPS_CAP
    return 1.0 / den


def _spectral_values(basis: np.ndarray) -> np.ndarray:
    p = basis.shape[1] - 1
    g_last = basis[:, p, :]
    # basis of the previous grid angle; the first angle pairs with itself
    prev = np.concatenate([basis[:, :, :1], basis[:, :, :-1]], axis=2)
    proj = np.einsum("mg,mkg->kg", g_last.conj(), prev)
    den = np.sum(np.abs(proj) ** 2, axis=0)
    capped = den < EPS_CAP
    return np.where(capped, 1.0 / EPS_CAP, 1.0 / np.where(capped, 1.0, den))


def cg_spectrum(r, grid: AngleGrid, p: int, geometry: ArrayGeometry | None = None) -> Spectrum:
    """Evaluate the CG spectral function over ``grid`` in ascending-angle order."""
    mat = as_matrix(r)
    if not 1 <= p < mat.shape[0]:
        raise DomainError(f"model order p={p} must satisfy 1 <= p < {mat.shape[0]}")
    geometry = _default_geometry(mat, geometry)
    basis, _ = _cg_bases(mat, array_manifold(grid.points, geometry), p)
    return Spectrum(grid, _spectral_values(basis))


def find_peaks(spectrum: Spectrum, p: int) -> list[float]:
    """
    The ``p`` largest strict interior local maxima, as ascending angles.

    Falls back to the largest remaining grid values when there are fewer
    than ``p`` local maxima. Equal values prefer the smaller angle.
    """
    vals = np.asarray(spectrum.values, dtype=float)
    if vals.size == 0:
        raise DomainError("cannot search an empty spectrum")
    idx = np.arange(vals.size)
    if vals.size >= 3:
        inner = (vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])
        peaks = idx[1:-1][inner]
    else:
        peaks = idx[:0]
    chosen = list(peaks[np.lexsort((peaks, -vals[peaks]))][:p])
    if len(chosen) < p:
        rest = np.setdiff1d(idx, chosen)
        chosen += list(rest[np.lexsort((rest, -vals[rest]))][:p - len(chosen)])
    return sorted(float(spectrum.grid.points[i]) for i in chosen)


def cg_estimate(r, grid: AngleGrid, p: int, geometry: ArrayGeometry | None = None) -> list[float]:
    """CG DoA estimates: spectrum followed by peak search."""
    return find_peaks(cg_spectrum(r, grid, p, geometry), p)

"""
Knowledge-aided iterative refinement of the data covariance (MS-KAI-CG).

Preliminary CG estimates give a steering matrix whose projectors isolate
the signal-noise cross terms V = Q R Q_perp of the covariance. Each
iteration subtracts mu (V + V^H) for mu on a grid, re-estimates the DoAs,
and keeps the candidate set minimising a log-determinant likelihood
surrogate. The steering matrix then absorbs the new estimates one source
per iteration until all of them have been replaced.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cg import AngleGrid, cg_estimate
from .covariance import (CovarianceEstimate, SmoothingConfig, as_matrix, fbss, refine,
                         sample_covariance)
from .errors import DegenerateInputError, DomainError, ValidationError
from .signal_model import ArrayGeometry, SnapshotMatrix, array_manifold

log = logging.getLogger(__name__)

COND_LIMIT = 1e12
EIG_FLOOR = 1e-30


@dataclass(frozen=True)
class KaiConfig:
    """Iteration count ``iterations``, mu-grid increment ``iota`` and DoA search grid."""

    iterations: int = 4
    iota: float = 0.1
    grid: AngleGrid = field(default_factory=AngleGrid)

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ValidationError(f"iterations must be a positive integer, got {self.iterations}")
        if not 0.0 < self.iota <= 1.0:
            raise ValidationError(f"iota must lie in (0, 1], got {self.iota}")
        steps = round(1.0 / self.iota)
        if abs(steps * self.iota - 1.0) > 1e-9:
            raise ValidationError(f"iota={self.iota} does not divide the unit interval")

    @property
    def tau(self) -> int:
        return round(1.0 / self.iota) + 1

    @property
    def mu_grid(self) -> np.ndarray:
        return np.round(np.linspace(0.0, 1.0, self.tau), 12)


@dataclass(frozen=True, eq=False)
class ProjectorPair:
    q: np.ndarray
    q_perp: np.ndarray
    rank: int
    reduced: bool = False


@dataclass
class IterationRecord:
    """What one KAI iteration chose.

    ``permutation`` maps the steering-matrix column order produced by the
    update rule to ascending angle order.
    """

    iteration: int
    mu_opt: float
    u_values: np.ndarray
    candidates: list
    doas: list
    steering_angles: list
    permutation: list
    skipped_mu: list = field(default_factory=list)


@dataclass
class KaiTrace:
    first_step: list = field(default_factory=list)
    records: list = field(default_factory=list)
    final_covariance: CovarianceEstimate | None = None

    @property
    def mu_opt(self) -> list[float]:
        return [rec.mu_opt for rec in self.records]

    @property
    def doas_per_iteration(self) -> list[list[float]]:
        return [rec.doas for rec in self.records]


def _gram_inverse(a: np.ndarray):
    gram = a.conj().T @ a
    if np.linalg.cond(gram) > COND_LIMIT:
        return None
    return np.linalg.inv(gram)


def ls_amplitudes(a_hat: np.ndarray, x) -> np.ndarray:
    """Least-squares source amplitudes (A^H A)^-1 A^H x(i), one column per snapshot."""
    a_hat = np.asarray(a_hat)
    data = x.data if isinstance(x, SnapshotMatrix) else np.asarray(x)
    if data.ndim == 1:
        data = data[:, None]
    if data.shape[0] != a_hat.shape[0]:
        raise DomainError(f"snapshot length {data.shape[0]} does not match steering matrix {a_hat.shape}")
    inv = _gram_inverse(a_hat)
    if inv is None:
        log.info("ill-conditioned steering matrix, falling back to a truncated pseudo-inverse")
        return np.linalg.pinv(a_hat, rcond=1.0 / np.sqrt(COND_LIMIT)) @ data
    return inv @ (a_hat.conj().T @ data)


def noise_residual(a_hat: np.ndarray, x, s_hat: np.ndarray) -> np.ndarray:
    """x(i) - A s_hat(i) for every snapshot."""
    data = x.data if isinstance(x, SnapshotMatrix) else np.asarray(x)
    if data.ndim == 1:
        data = data[:, None]
    s_hat = np.asarray(s_hat)
    if s_hat.ndim == 1:
        s_hat = s_hat[:, None]
    if a_hat.shape[1] != s_hat.shape[0] or data.shape != (a_hat.shape[0], s_hat.shape[1]):
        raise DomainError("dimension mismatch between steering matrix, snapshots and amplitudes")
    return data - a_hat @ s_hat


def projectors(a_hat: np.ndarray) -> ProjectorPair:
    """Orthogonal projectors onto span(A) and its complement."""
    a_hat = np.asarray(a_hat, dtype=complex)
    m, p = a_hat.shape
    inv = _gram_inverse(a_hat)
    reduced = inv is None
    if reduced:
        u, sv, _ = np.linalg.svd(a_hat, full_matrices=False)
        keep = sv > sv[0] / np.sqrt(COND_LIMIT)
        basis = u[:, keep]
        q = basis @ basis.conj().T
        rank = int(keep.sum())
        log.info("rank-deficient steering matrix: projector rank %d < %d", rank, p)
    else:
        q = a_hat @ inv @ a_hat.conj().T
        rank = p
    q = (q + q.conj().T) / 2
    return ProjectorPair(q, np.eye(m) - q, rank, reduced)


def unwanted_term(pair: ProjectorPair, r_base) -> np.ndarray:
    """Estimated signal-noise cross term V = Q R Q_perp."""
    mat = as_matrix(r_base)
    if mat.shape != pair.q.shape:
        raise DomainError(f"projector shape {pair.q.shape} does not match covariance {mat.shape}")
    return pair.q @ mat @ pair.q_perp


def correction_function(q_b: ProjectorPair, r_ref, p: int) -> float:
    """
    ln det(Q R Q + tr(Q_perp R) / (dim - p) Q_perp).

    Evaluated from the eigenvalues of the Hermitian bracket, each floored
    at ``EIG_FLOOR``; ``dim`` is the covariance dimension, so the smoothed
    variant automatically uses L - P.
    """
    mat = as_matrix(r_ref)
    dim = mat.shape[0]
    if dim - p <= 0:
        raise DomainError(f"correction function needs dim > p, got dim={dim}, p={p}")
    noise_level = np.trace(q_b.q_perp @ mat).real / (dim - p)
    bracket = q_b.q @ mat @ q_b.q + noise_level * q_b.q_perp
    eig = np.linalg.eigvalsh((bracket + bracket.conj().T) / 2)
    if np.all(eig < EIG_FLOOR):
        raise DegenerateInputError("correction-function bracket has no eigenvalue above the floor")
    return float(np.sum(np.log(np.maximum(eig, EIG_FLOOR))))


def _updated_angles(n: int, p: int, new_estimates, initial_estimates) -> list[float]:
    if len(new_estimates) != p or len(initial_estimates) != p:
        raise DomainError(f"both estimate lists must have length p={p}")
    if n <= p:
        return list(new_estimates[:n]) + list(initial_estimates[n:])
    return list(new_estimates)


def steering_update(n: int, p: int, new_estimates, initial_estimates, geometry: ArrayGeometry) -> np.ndarray:
    """
    Steering matrix for the next iteration.

    While n <= P the first n columns come from the newest estimates and the
    rest from the first-step estimates; afterwards every column is new.
    """
    return array_manifold(_updated_angles(n, p, new_estimates, initial_estimates), geometry)


def _kai_loop(r0: CovarianceEstimate, p: int, geometry: ArrayGeometry, kai: KaiConfig):
    grid = kai.grid
    first = cg_estimate(r0, grid, p, geometry)
    trace = KaiTrace(first_step=list(first), final_covariance=r0)
    a_hat = array_manifold(first, geometry)
    doas = list(first)

    for n in range(1, kai.iterations + 1):
        v = unwanted_term(projectors(a_hat), r0)
        mus = kai.mu_grid
        u_values = np.full(mus.size, np.nan)
        candidates = []
        refined = []
        skipped = []
        for j, mu in enumerate(mus):
            try:
                r_mu = refine(r0, v, float(mu), n)
                est = cg_estimate(r_mu, grid, p, geometry)
                u_values[j] = correction_function(projectors(array_manifold(est, geometry)), r0, p)
            except (DegenerateInputError, np.linalg.LinAlgError) as exc:
                log.info("iteration %d: skipping mu=%g (%s)", n, mu, exc)
                skipped.append(float(mu))
                candidates.append(None)
                refined.append(None)
                continue
            candidates.append(est)
            refined.append(r_mu)
        finite = np.flatnonzero(np.isfinite(u_values))
        if finite.size == 0:
            raise DegenerateInputError(f"every mu candidate was degenerate in iteration {n}")
        # first minimum, i.e. the smallest mu on ties
        best = int(finite[np.argmin(u_values[finite])])
        doas = list(candidates[best])

        angles = _updated_angles(n, p, doas, first)
        perm = [int(i) for i in np.argsort(angles, kind="stable")]
        a_hat = steering_update(n, p, doas, first, geometry)
        trace.records.append(IterationRecord(
            iteration=n,
            mu_opt=float(mus[best]),
            u_values=u_values,
            candidates=candidates,
            doas=list(doas),
            steering_angles=[angles[i] for i in perm],
            permutation=perm,
            skipped_mu=skipped,
        ))
        trace.final_covariance = refined[best]
    return sorted(doas), trace


def ms_kai_cg(x, p: int, geometry: ArrayGeometry, kai: KaiConfig | None = None,
              covariance=None) -> tuple[list[float], KaiTrace]:
    """
    MS-KAI-CG DoA estimates from snapshots ``x``.

    ``covariance`` replaces the sample covariance of ``x`` when given (the
    exact-covariance hook); ``x`` may then be None.
    """
    kai = kai or KaiConfig()
    if covariance is None:
        r0 = sample_covariance(x)
    elif isinstance(covariance, CovarianceEstimate):
        r0 = covariance
    else:
        r0 = CovarianceEstimate(covariance, "exact")
    if r0.dim != geometry.m:
        raise DomainError(f"covariance dimension {r0.dim} does not match {geometry.m} sensors")
    return _kai_loop(r0, p, geometry, kai)


def ms_kai_cg_fb(x, p: int, geometry: ArrayGeometry, smoothing: SmoothingConfig | None = None,
                 kai: KaiConfig | None = None, covariance=None) -> tuple[list[float], KaiTrace]:
    """
    MS-KAI-CG on the forward-backward spatially smoothed covariance.

    All subsequent algebra runs on an ``smoothing.l``-element ULA.
    """
    kai = kai or KaiConfig()
    smoothing = smoothing or SmoothingConfig.default(geometry.m, p)
    if smoothing.l <= p:
        raise ValidationError(f"subarray length l={smoothing.l} must exceed p={p}")
    r_full = sample_covariance(x) if covariance is None else as_matrix(covariance)
    r0 = fbss(r_full, smoothing)
    sub = ArrayGeometry(smoothing.l, geometry.d_over_lambda)
    return _kai_loop(r0, p, sub, kai)

"""Accuracy metrics and the deterministic Cramer-Rao bound for a ULA."""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateInputError, DomainError, UnsupportedConfigurationError
from .signal_model import ScenarioConfig, array_manifold, source_covariance

CRB_VARIANT = "deterministic (conditional) CRB with population source covariance R_ss"


def rmse(true_angles, estimates_per_trial) -> float:
    """
    Root-mean-square DoA error in degrees over S trials and P sources.

    Truth and each trial's estimates are sorted before pairing by index.
    """
    truth = np.sort(np.asarray(true_angles, dtype=float).ravel())
    est = np.asarray(estimates_per_trial, dtype=float)
    if est.ndim == 1:
        est = est[None, :]
    if est.ndim != 2 or est.shape[1] != truth.size or est.shape[0] == 0:
        raise DomainError(f"expected an S x {truth.size} estimate array, got shape {est.shape}")
    err = np.sort(est, axis=1) - truth
    return float(np.sqrt(np.mean(err ** 2)))


def rmse_db(rmse_deg: float) -> float:
    """10 log10(RMSE / 1 degree); zero maps to -inf."""
    if rmse_deg < 0:
        raise DomainError(f"RMSE cannot be negative, got {rmse_deg}")
    if rmse_deg == 0:
        return -math.inf
    return 10.0 * math.log10(rmse_deg)


def resolved(true_pair, estimate_pair) -> bool:
    """Both sorted estimates lie strictly within half the source separation of their truth."""
    truth = sorted(float(t) for t in true_pair)
    est = sorted(float(e) for e in estimate_pair)
    if len(truth) != 2 or len(est) != 2:
        raise UnsupportedConfigurationError("the resolution criterion is defined for two sources only")
    half = abs(truth[0] - truth[1]) / 2
    return abs(est[0] - truth[0]) < half and abs(est[1] - truth[1]) < half


def crb_sqrt(config: ScenarioConfig) -> float:
    """
    Square root of the mean deterministic CRB over all sources, in degrees.

    CRB = sigma^2 / (2N) * Re{(D^H P_A_perp D) .* R_ss^T}^-1 with
    D = d a(theta) / d theta (theta in radians).
    """
    geo = config.geometry
    theta = np.deg2rad(np.asarray(config.sources.angles_deg))
    a = array_manifold(config.sources.angles_deg, geo)
    k = np.arange(geo.m)[:, None]
    d = 1j * 2.0 * np.pi * geo.d_over_lambda * np.cos(theta)[None, :] * k * a
    p_perp = np.eye(geo.m) - a @ np.linalg.pinv(a)
    fim = np.real((d.conj().T @ p_perp @ d) * source_covariance(config.sources).T)
    if np.linalg.cond(fim) > 1e14:
        raise DegenerateInputError("Fisher information matrix is singular for this scenario")
    crb = config.noise_var / (2.0 * config.n_snapshots) * np.linalg.inv(fim)
    var = float(np.mean(np.diag(crb)))
    if not var > 0:
        raise DegenerateInputError("non-positive CRB")
    return math.degrees(math.sqrt(var))

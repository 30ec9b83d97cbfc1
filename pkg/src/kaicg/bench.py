"""
Monte Carlo benchmark runner.

Every (SNR, trial) pair gets its own seed derived from the master seed, and
all algorithms are run on that same realization, so comparisons between
algorithms are paired trial by trial.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import cg_fb_estimate, esprit_estimate, music_estimate
from .cg import cg_estimate
from .covariance import CovarianceEstimate, SmoothingConfig, sample_covariance
from .errors import DegenerateInputError, DomainError, UnsupportedConfigurationError
from .kai import KaiConfig, ms_kai_cg, ms_kai_cg_fb
from .metrics import crb_sqrt, resolved, rmse, rmse_db
from .signal_model import ScenarioConfig, generate_snapshots, true_covariance

log = logging.getLogger(__name__)

ESTIMATORS = ("CG", "MS-KAI-CG", "CG-FB", "MS-KAI-CG-FB", "MUSIC", "ESPRIT")
PAIRING_RULE = "sorted estimates paired with sorted truth"
FAILURE_POLICY = "failed trials count as unresolved and are excluded from RMSE"


@dataclass
class TrialRecord:
    algorithm: str
    snr_db: float
    trial: int
    seed: int
    true_angles: list
    estimates: list | None
    resolved: bool | None
    sq_error_sum: float
    iteration_estimates: list | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.estimates is None or len(self.estimates) != len(self.true_angles)


@dataclass
class TrialStats:
    algorithm: str
    snr_db: float
    trials: int
    failures: int
    rmse_deg: float
    rmse_db: float
    pr: float
    crb_sqrt_deg: float
    records: list = field(default_factory=list, repr=False)


def trial_seed(master_seed: int, snr_index: int, trial: int) -> int:
    """Seed for one realization; independent of the algorithm so trials are paired."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(snr_index), int(trial)))
    return int(ss.generate_state(1, np.uint32)[0])


def _estimate(alg: str, x, r0, config: ScenarioConfig, kai: KaiConfig, smoothing: SmoothingConfig):
    p, geo = config.sources.p, config.geometry
    if alg == "CG":
        return cg_estimate(r0, kai.grid, p, geo), None
    if alg == "MUSIC":
        return music_estimate(r0, kai.grid, p, geo), None
    if alg == "ESPRIT":
        return esprit_estimate(r0, p, geo), None
    if alg == "CG-FB":
        return cg_fb_estimate(x, kai.grid, p, geo, smoothing, covariance=r0), None
    if alg == "MS-KAI-CG":
        est, trace = ms_kai_cg(x, p, geo, kai, covariance=r0)
        return est, [sorted(d) for d in trace.doas_per_iteration]
    if alg == "MS-KAI-CG-FB":
        est, trace = ms_kai_cg_fb(x, p, geo, smoothing, kai, covariance=r0)
        return est, [sorted(d) for d in trace.doas_per_iteration]
    raise DomainError(f"unknown algorithm {alg!r}; expected one of {', '.join(ESTIMATORS)}")


def run_trial(config: ScenarioConfig, algorithms, kai: KaiConfig, smoothing: SmoothingConfig,
              trial: int = 0, exact_covariance: bool = False) -> list[TrialRecord]:
    """Run every algorithm on the realization generated from ``config.seed``."""
    truth = list(config.sources.angles_deg)
    if exact_covariance:
        x = None
        r0 = CovarianceEstimate(true_covariance(config), "exact")
    else:
        x = generate_snapshots(config)
        r0 = sample_covariance(x)
    out = []
    for alg in algorithms:
        try:
            est, per_iter = _estimate(alg, x, r0, config, kai, smoothing)
            err = None
        except (DegenerateInputError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.warning("%s failed on trial %d at %g dB: %s", alg, trial, config.snr_db, exc)
            est, per_iter, err = None, None, f"{type(exc).__name__}: {exc}"
        rec = TrialRecord(alg, config.snr_db, trial, config.seed, truth, est, None, math.nan, per_iter, err)
        if not rec.failed:
            rec.sq_error_sum = float(np.sum((np.sort(est) - np.sort(truth)) ** 2))
            rec.resolved = resolved(truth, est) if len(truth) == 2 else None
        elif len(truth) == 2:
            rec.resolved = False
        out.append(rec)
    return out


def aggregate(records: list[TrialRecord], crb: float) -> TrialStats:
    """Reduce one (algorithm, SNR) cell of trial records to summary statistics."""
    if not records:
        raise DomainError("cannot aggregate an empty set of trials")
    records = sorted(records, key=lambda r: r.trial)
    ok = [r for r in records if not r.failed]
    truth = records[0].true_angles
    if ok:
        value = rmse(truth, [r.estimates for r in ok])
    else:
        value = math.nan
    if len(truth) == 2:
        pr = sum(bool(r.resolved) for r in records) / len(records)
    else:
        pr = math.nan
    return TrialStats(
        algorithm=records[0].algorithm,
        snr_db=records[0].snr_db,
        trials=len(records),
        failures=len(records) - len(ok),
        rmse_deg=value,
        rmse_db=rmse_db(value) if ok else math.nan,
        pr=pr,
        crb_sqrt_deg=crb,
        records=records,
    )


def _trial_task(args):
    config, algorithms, kai, smoothing, trial, exact = args
    return run_trial(config, algorithms, kai, smoothing, trial, exact)


def monte_carlo_run(scenario: ScenarioConfig, algorithms, snr_sweep, trials: int,
                    kai: KaiConfig | None = None, smoothing: SmoothingConfig | None = None,
                    exact_covariance: bool = False, workers: int = 1) -> list[TrialStats]:
    """
    Run ``trials`` independent realizations per SNR and aggregate per algorithm.

    Results are ordered by SNR, then by the order of ``algorithms``; each
    :class:`TrialStats` keeps its trial records.
    """
    kai = kai or KaiConfig()
    p = scenario.sources.p
    smoothing = smoothing or SmoothingConfig.default(scenario.geometry.m, p)
    algorithms = list(algorithms)
    unknown = [a for a in algorithms if a not in ESTIMATORS]
    if unknown:
        raise DomainError(f"unknown algorithms {unknown}; expected a subset of {', '.join(ESTIMATORS)}")
    if trials < 1:
        raise DomainError("need at least one trial")

    tasks = []
    for si, snr in enumerate(snr_sweep):
        base = scenario.with_snr(snr)
        for t in range(trials):
            cfg = base.with_seed(trial_seed(scenario.seed, si, t))
            tasks.append((cfg, algorithms, kai, smoothing, t, exact_covariance))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        results = [_trial_task(t) for t in tasks]

    stats = []
    for si, snr in enumerate(snr_sweep):
        try:
            crb = crb_sqrt(scenario.with_snr(snr))
        except DegenerateInputError:
            crb = math.nan
        cell = [rec for res in results[si * trials:(si + 1) * trials] for rec in res]
        for alg in algorithms:
            stats.append(aggregate([r for r in cell if r.algorithm == alg], crb))
    return stats


def find_stats(stats: list[TrialStats], algorithm: str, snr_db: float) -> TrialStats:
    for s in stats:
        if s.algorithm == algorithm and math.isclose(s.snr_db, snr_db):
            return s
    raise KeyError((algorithm, snr_db))


def _paired_arrays(a: TrialStats, b: TrialStats, attr: str):
    rb = {r.trial: r for r in b.records}
    pairs = [(r, rb[r.trial]) for r in a.records if r.trial in rb]
    if attr == "sq_error_sum":
        pairs = [(x, y) for x, y in pairs if not x.failed and not y.failed]
        return (np.array([x.sq_error_sum for x, _ in pairs]),
                np.array([y.sq_error_sum for _, y in pairs]))
    return (np.array([bool(x.resolved) for x, _ in pairs], dtype=float),
            np.array([bool(y.resolved) for _, y in pairs], dtype=float))


def bootstrap_confidence(a: TrialStats, b: TrialStats, metric: str = "rmse",
                         n_boot: int = 2000, seed: int = 0) -> float:
    """
    Paired-bootstrap probability that ``a`` is at least as good as ``b``.

    ``metric="rmse"`` tests RMSE(a) <= RMSE(b); ``metric="pr"`` tests
    PR(a) >= PR(b). Trials are resampled jointly for both algorithms.
    """
    if metric not in ("rmse", "pr"):
        raise UnsupportedConfigurationError(f"unknown metric {metric!r}")
    va, vb = _paired_arrays(a, b, "sq_error_sum" if metric == "rmse" else "resolved")
    if va.size == 0:
        return math.nan
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, va.size, size=(n_boot, va.size))
    ma, mb = va[idx].mean(axis=1), vb[idx].mean(axis=1)
    scale = max(1.0, float(np.abs(mb).max()))
    if metric == "rmse":
        good = ma <= mb + 1e-12 * scale
    else:
        good = ma >= mb - 1e-12
    return float(good.mean())


def rmse_upper(stats: TrialStats, k: float = 2.0) -> float:
    """RMSE at ``k`` Monte Carlo standard errors above the estimate (delta on the MSE)."""
    ok = [r for r in stats.records if not r.failed]
    if not ok:
        return math.nan
    p = len(ok[0].true_angles)
    per_trial = np.array([r.sq_error_sum for r in ok]) / p
    se = per_trial.std(ddof=1) / math.sqrt(per_trial.size) if per_trial.size > 1 else 0.0
    return math.sqrt(per_trial.mean() + k * se)

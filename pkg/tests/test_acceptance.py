"""
Acceptance gate. Each test checks one numbered criterion at its stated
tolerance and records a PASS/FAIL line shown in the terminal summary.

The Monte Carlo criteria (4 to 7) take a few minutes on one core.
"""

import time

import numpy as np
import pytest

from kaicg.baselines import esprit_estimate, music_estimate
from kaicg.bench import bootstrap_confidence, find_stats, monte_carlo_run, rmse_upper
from kaicg.cg import AngleGrid, cg_estimate, cg_residual_basis
from kaicg.cli import main
from kaicg.complexity import ComplexityQuery, multiplication_count_exact
from kaicg.config import load_config, resolve_config_path
from kaicg.covariance import covariance_decomposition, sample_covariance
from kaicg.kai import ls_amplitudes, ms_kai_cg, noise_residual, projectors, unwanted_term
from kaicg.metrics import rmse
from kaicg.signal_model import ArrayGeometry, ScenarioConfig, SourceSet, array_manifold, generate_snapshots, \
    true_covariance

CONFIDENCE = 0.9

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def uncorrelated():
    exp = load_config(resolve_config_path("uncorrelated_fig3"))
    return monte_carlo_run(exp.scenario, ["CG", "MS-KAI-CG"], [-6.0, -2.0, 0.0, 2.0, 4.0], 150, exp.kai,
                           exp.smoothing)


@pytest.fixture(scope="module")
def correlated():
    exp = load_config(resolve_config_path("correlated_fig5"))
    assert exp.trials == 150
    return exp, monte_carlo_run(exp.scenario, exp.algorithms, exp.snr_db_list, exp.trials, exp.kai,
                                exp.smoothing)


def test_criterion_1_exact_model_recovery(verdict):
    start = time.perf_counter()
    cfg = ScenarioConfig(ArrayGeometry(12), SourceSet((15, 17)), 100, 0.0)
    r, grid = true_covariance(cfg), AngleGrid(0.2)
    got = {
        "CG": cg_estimate(r, grid, 2, cfg.geometry),
        "MUSIC": music_estimate(r, grid, 2, cfg.geometry),
        "MS-KAI-CG": ms_kai_cg(None, 2, cfg.geometry, covariance=r)[0],
    }
    esprit = esprit_estimate(r, 2, cfg.geometry)
    elapsed = time.perf_counter() - start
    errs = {k: float(np.max(np.abs(np.subtract(v, [15, 17])))) for k, v in got.items()}
    esprit_err = float(np.max(np.abs(np.subtract(esprit, [15, 17]))))
    ok = all(e <= 0.1 for e in errs.values()) and esprit_err <= 1e-6 and elapsed < 10
    verdict(1, ok, f"max grid error {max(errs.values()):.3g} deg, ESPRIT error {esprit_err:.2e} deg, "
                   f"{elapsed:.2f} s")
    assert ok


def test_criterion_2_rank_drop(verdict):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        p, m = int(rng.integers(1, 4)), int(rng.choice([8, 12]))
        while True:
            angles = np.sort(rng.uniform(-60, 60, p))
            if p == 1 or np.min(np.diff(angles)) > 5:
                break
        cfg = ScenarioConfig(ArrayGeometry(m), SourceSet(tuple(angles), tuple(rng.uniform(0.5, 2, p))), 50,
                             float(rng.uniform(-5, 20)))
        r = true_covariance(cfg)
        for theta in angles:
            basis = cg_residual_basis(r, float(theta), p, cfg.geometry)
            worst = max(worst, np.linalg.norm(basis.last) / np.linalg.norm(basis.g[:, 0]))
    ok = worst <= 1e-8
    verdict(2, ok, f"worst ||g_P|| / ||b|| = {worst:.2e} over 20 scenarios")
    assert ok


def test_criterion_3_decomposition_oracle(verdict):
    rng = np.random.default_rng(3)
    worst_rec, worst_v = 0.0, 0.0
    for i in range(20):
        m, n = int(rng.integers(3, 7)), int(rng.integers(2, 11))
        p = int(rng.integers(1, m))
        angles = tuple(np.sort(rng.uniform(-80, 80, p)))
        cfg = ScenarioConfig(ArrayGeometry(m), SourceSet(angles), n, float(rng.uniform(-5, 15)), seed=i)
        x = generate_snapshots(cfg)
        a = array_manifold(cfg.sources.angles_deg, cfg.geometry)
        r = sample_covariance(x).matrix
        wanted, unwanted = covariance_decomposition(x, a, x.signals, x.noise)
        worst_rec = max(worst_rec, np.linalg.norm(wanted + unwanted - r) / np.linalg.norm(r))

        a_hat = array_manifold(np.clip(np.array(angles) + rng.normal(0, 2, p), -90, 90), cfg.geometry)
        s_hat = ls_amplitudes(a_hat, x)
        n_hat = noise_residual(a_hat, x, s_hat)
        brute = a_hat @ (s_hat @ n_hat.conj().T) / n
        v = unwanted_term(projectors(a_hat), r)
        worst_v = max(worst_v, np.linalg.norm(v - brute) / np.linalg.norm(brute))
    ok = worst_rec <= 1e-10 and worst_v <= 1e-8
    verdict(3, ok, f"reconstruction {worst_rec:.1e}, V chain {worst_v:.1e} (relative Frobenius)")
    assert ok


def test_criterion_4_uncorrelated_ordering(uncorrelated, verdict):
    cells = []
    for snr in (-6.0, -2.0, 0.0, 2.0, 4.0):
        kai, cg = find_stats(uncorrelated, "MS-KAI-CG", snr), find_stats(uncorrelated, "CG", snr)
        conf = bootstrap_confidence(kai, cg, "rmse")
        cells.append((snr, kai.rmse_deg, cg.rmse_deg, conf, kai.rmse_deg <= cg.rmse_deg and conf >= CONFIDENCE))
    ok = all(c[-1] for c in cells)
    detail = "; ".join(f"{s:g} dB {k:.3f}<={c:.3f} conf {q:.2f}" for s, k, c, q, _ in cells)
    verdict(4, ok, f"RMSE(MS-KAI-CG) vs RMSE(CG): {detail}")
    assert ok


def test_criterion_5_iteration_trend(uncorrelated, verdict):
    kai = find_stats(uncorrelated, "MS-KAI-CG", 0.0)
    truth = kai.records[0].true_angles
    per_iter = [rmse(truth, [r.iteration_estimates[i] for r in kai.records if not r.failed])
                for i in range(4)]
    ok = all(b <= 1.05 * a for a, b in zip(per_iter, per_iter[1:]))
    verdict(5, ok, "RMSE at 0 dB for I=1..4: " + ", ".join(f"{v:.4f}" for v in per_iter))
    assert ok


def test_criterion_6_correlated_ordering(correlated, verdict):
    _, stats = correlated
    failures, lines = [], []
    for snr in (0.0, 4.0, 8.0):
        kfb, cfb, cg = (find_stats(stats, a, snr) for a in ("MS-KAI-CG-FB", "CG-FB", "CG"))
        for hi, lo in ((kfb, cfb), (cfb, cg)):
            conf = bootstrap_confidence(hi, lo, "pr")
            good = hi.pr >= lo.pr and conf >= CONFIDENCE
            lines.append(f"PR {hi.algorithm}>={lo.algorithm} at {snr:g} dB: {hi.pr:.3f} vs {lo.pr:.3f} "
                         f"conf {conf:.2f}")
            if not good:
                failures.append(lines[-1])
    for snr in (4.0, 8.0, 12.0):
        kfb, cfb = find_stats(stats, "MS-KAI-CG-FB", snr), find_stats(stats, "CG-FB", snr)
        conf = bootstrap_confidence(kfb, cfb, "rmse")
        good = kfb.rmse_deg <= cfb.rmse_deg and conf >= CONFIDENCE
        lines.append(f"RMSE MS-KAI-CG-FB<=CG-FB at {snr:g} dB: {kfb.rmse_deg:.3f} vs {cfb.rmse_deg:.3f} "
                     f"conf {conf:.2f}")
        if not good:
            failures.append(lines[-1])
    ok = not failures
    verdict(6, ok, f"{len(lines) - len(failures)}/{len(lines)} orderings hold"
                   + ("" if ok else "; failing: " + " | ".join(failures)))
    assert ok, "\n".join(lines)


def test_criterion_7_crb_floor(correlated, verdict):
    _, stats = correlated
    below = [(s.algorithm, s.snr_db, rmse_upper(s), s.crb_sqrt_deg) for s in stats
             if not rmse_upper(s) >= s.crb_sqrt_deg]
    ok = not below
    detail = (f"{len(stats) - len(below)}/{len(stats)} cells at or above the CRB"
              + ("" if ok else "; below: " + ", ".join(f"{a}@{s:g}dB {u:.3f}<{c:.3f}" for a, s, u, c in below)))
    verdict(7, ok, detail)
    assert ok


def test_criterion_8_complexity(verdict):
    start = time.perf_counter()
    music = multiplication_count_exact(ComplexityQuery("MUSIC", 12, 100, 2, 0.2))
    esprit = multiplication_count_exact(ComplexityQuery("ESPRIT", 12, 100, 2, 0.2))
    merged = all(multiplication_count_exact(ComplexityQuery("MS-KAI-CG", m, 100, 4))
                 == multiplication_count_exact(ComplexityQuery("MS-KAI-CG-FB", m, 100, 4))
                 for m in range(5, 101))
    elapsed = time.perf_counter() - start
    ok = music == 1_087_800 and esprit == 960_636 and merged and elapsed < 1
    verdict(8, ok, f"MUSIC {music}, ESPRIT {esprit}, KAI columns identical: {merged}, {elapsed * 1e3:.1f} ms")
    assert ok


SMALL = """\
m = 12
p = 2
angles_deg = 15, 17
rho = 0.9
n_snapshots = 70
snr_db_list = 0, 10
trials = 4
seed = 99
algorithms = CG, MS-KAI-CG, CG-FB, MS-KAI-CG-FB, MUSIC, ESPRIT
"""


def test_criterion_9_determinism(tmp_path, verdict):
    cfg = tmp_path / "det.cfg"
    cfg.write_text(SMALL)
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        assert main(["simulate", "--config", str(cfg), "--out", str(d)]) == 0
        assert main(["spectrum", "--config", str(cfg), "--snr-db", "10", "--out", str(d / "spec.csv")]) == 0
        assert main(["complexity", "--m-min", "5", "--m-max", "100", "--out", str(d / "cx.csv")]) == 0
        outputs.append({f: (d / f).read_bytes() for f in ("stats.csv", "trials.csv", "spec.csv", "cx.csv")})
    same = [f for f in outputs[0] if outputs[0][f] == outputs[1][f]]
    ok = len(same) == len(outputs[0])
    verdict(9, ok, f"{len(same)}/{len(outputs[0])} CSV files byte-identical across reruns")
    assert ok

"""
Command-line front end.

    kaicg simulate   --config uncorrelated_fig3 --out results/
    kaicg spectrum   --config correlated_fig5 --snr-db 10 --out spectrum.csv
    kaicg complexity --m-min 5 --m-max 100 --n 100 --p 4 --out complexity.csv

Exit status: 0 success, 2 usage or configuration error, 3 runtime or
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .baselines import music_spectrum
from .bench import FAILURE_POLICY, PAIRING_RULE, monte_carlo_run
from .cg import AngleGrid, cg_spectrum
from .complexity import ALGORITHMS, ComplexityQuery, multiplication_count
from .config import ConfigError, Experiment, load_config, resolve_config_path
from .covariance import CovarianceEstimate, fbss, sample_covariance
from .errors import DegenerateInputError, DomainError, ValidationError
from .kai import ms_kai_cg, ms_kai_cg_fb
from .metrics import CRB_VARIANT
from .signal_model import ArrayGeometry, generate_snapshots, true_covariance

log = logging.getLogger("kaicg")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

STATS_HEADER = ["algorithm", "snr_db", "trials", "failures", "rmse_deg", "rmse_db", "pr", "crb_sqrt_deg"]


def _fmt(value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    if math.isinf(value):
        return "-inf" if value < 0 else "inf"
    return f"{value:.10g}"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _flags(exp: Experiment, exact: bool) -> dict:
    return {
        "subarray_l": exp.smoothing.l,
        "subarray_l_is_default": exp.subarray_l_default,
        "iota": exp.kai.iota,
        "tau": exp.kai.tau,
        "iterations": exp.kai.iterations,
        "grid_step_deg": exp.kai.grid.step_deg,
        "pairing_rule": PAIRING_RULE,
        "failure_policy": FAILURE_POLICY,
        "crb_variant": CRB_VARIANT,
        "snr_definition": "per-source power over noise variance",
        "exact_covariance": exact,
    }


def _write_manifest(path: Path, command: str, outputs: list[Path], config: dict, seed, flags: dict) -> None:
    manifest = {
        "tool": "kaicg",
        "version": __version__,
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "master_seed": seed,
        "config": config,
        "flags": flags,
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load(args) -> Experiment:
    exp = load_config(resolve_config_path(args.config))
    if args.seed is not None:
        exp.with_seed(args.seed)
    return exp


def cmd_simulate(args) -> int:
    exp = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stats = monte_carlo_run(exp.scenario, exp.algorithms, exp.snr_db_list, exp.trials, exp.kai,
                            exp.smoothing, exact_covariance=args.exact_covariance, workers=args.workers)
    p = exp.scenario.sources.p

    stats_path, trials_path = out / "stats.csv", out / "trials.csv"
    _write_csv(stats_path, STATS_HEADER, [
        [s.algorithm, _fmt(s.snr_db), s.trials, s.failures, _fmt(s.rmse_deg), _fmt(s.rmse_db), _fmt(s.pr),
         _fmt(s.crb_sqrt_deg)]
        for s in stats
    ])
    header = (["algorithm", "snr_db", "trial"] + [f"theta_true_{i + 1}" for i in range(p)]
              + [f"theta_est_{i + 1}" for i in range(p)] + ["resolved"])
    rows = []
    for s in stats:
        for r in s.records:
            est = [f"{e:.4f}" for e in sorted(r.estimates)] if not r.failed else ["nan"] * p
            res = "" if r.resolved is None else int(r.resolved)
            rows.append([s.algorithm, _fmt(s.snr_db), r.trial] + [f"{t:.4f}" for t in r.true_angles] + est + [res])
    _write_csv(trials_path, header, rows)

    _write_manifest(out / "manifest.json", "simulate", [stats_path, trials_path], exp.raw,
                    exp.scenario.seed, _flags(exp, args.exact_covariance))
    failures = sum(s.failures for s in stats)
    log.info("wrote %s and %s (%d failed trials)", stats_path, trials_path, failures)
    return EXIT_OK


def _spectra(exp: Experiment, exact: bool):
    cfg = exp.scenario
    p, geo, grid = cfg.sources.p, cfg.geometry, exp.kai.grid
    if exact:
        r0 = CovarianceEstimate(true_covariance(cfg), "exact")
    else:
        r0 = sample_covariance(generate_snapshots(cfg))
    sub = ArrayGeometry(exp.smoothing.l, geo.d_over_lambda)
    for alg in exp.algorithms:
        if alg == "CG":
            yield alg, cg_spectrum(r0, grid, p, geo)
        elif alg == "MUSIC":
            yield alg, music_spectrum(r0, grid, p, geo)
        elif alg == "CG-FB":
            yield alg, cg_spectrum(fbss(r0, exp.smoothing), grid, p, sub)
        elif alg == "MS-KAI-CG":
            _, trace = ms_kai_cg(None, p, geo, exp.kai, covariance=r0)
            yield alg, cg_spectrum(trace.final_covariance, grid, p, geo)
        elif alg == "MS-KAI-CG-FB":
            _, trace = ms_kai_cg_fb(None, p, geo, exp.smoothing, exp.kai, covariance=r0)
            yield alg, cg_spectrum(trace.final_covariance, grid, p, sub)
        else:
            log.info("%s has no spectrum; skipped", alg)


def cmd_spectrum(args) -> int:
    exp = _load(args)
    exp.scenario = exp.scenario.with_snr(args.snr_db)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for alg, spec in _spectra(exp, args.exact_covariance):
        rows += [[alg, f"{a:.4f}", repr(float(v))] for a, v in zip(spec.angles, spec.values)]
    _write_csv(out, ["algorithm", "angle_deg", "spectrum_value"], rows)
    flags = _flags(exp, args.exact_covariance) | {"snr_db": args.snr_db}
    _write_manifest(out.with_name(out.name + ".manifest.json"), "spectrum", [out], exp.raw,
                    exp.scenario.seed, flags)
    return EXIT_OK


def cmd_complexity(args) -> int:
    if args.m_min > args.m_max or args.m_min < 1:
        raise ConfigError(f"invalid sensor range [{args.m_min}, {args.m_max}]", "complexity")
    AngleGrid(args.delta_deg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for m in range(args.m_min, args.m_max + 1):
        counts = [multiplication_count(ComplexityQuery(alg, m, args.n, args.p, args.delta_deg, args.tau))
                  for alg in ALGORITHMS]
        rows.append([m] + [repr(math.log10(c)) if c > 0 else "nan" for c in counts])
    _write_csv(out, ["m"] + list(ALGORITHMS), rows)
    params = {"m_min": args.m_min, "m_max": args.m_max, "n": args.n, "p": args.p,
              "delta_deg": args.delta_deg, "tau": args.tau}
    _write_manifest(out.with_name(out.name + ".manifest.json"), "complexity", [out], params, None,
                    {"values": "log10 of the multiplication count"})
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kaicg", description="Knowledge-aided CG DoA estimation benchmarks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    sim.add_argument("--config", required=True, help="config file or bundled scenario name")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--seed", type=int, help="override the config's master seed")
    sim.add_argument("--exact-covariance", action="store_true",
                     help="use the population covariance instead of the sample covariance")
    sim.set_defaults(func=cmd_simulate)

    spec = sub.add_parser("spectrum", help="dump spectra of one realization")
    spec.add_argument("--config", required=True)
    spec.add_argument("--snr-db", type=float, required=True)
    spec.add_argument("--seed", type=int)
    spec.add_argument("--out", required=True, help="output CSV path")
    spec.add_argument("--exact-covariance", action="store_true")
    spec.add_argument("--workers", type=int, default=1)
    spec.set_defaults(func=cmd_spectrum)

    cx = sub.add_parser("complexity", help="multiplication counts versus sensor count")
    cx.add_argument("--m-min", type=int, required=True)
    cx.add_argument("--m-max", type=int, required=True)
    cx.add_argument("--n", type=int, default=100)
    cx.add_argument("--p", type=int, default=4)
    cx.add_argument("--delta-deg", type=float, default=0.2)
    cx.add_argument("--tau", type=int, default=11)
    cx.add_argument("--out", required=True)
    cx.set_defaults(func=cmd_complexity)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValidationError, DomainError) as exc:
        print(f"kaicg: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateInputError, ArithmeticError) as exc:
        print(f"kaicg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"kaicg: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

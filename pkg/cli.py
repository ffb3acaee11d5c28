"""
Command line entry point.

Usage:
    python cli.py simulate --config configs/desk.toml --seed 1 --out results/
    python cli.py design --nodes nodes.json --order 3 --out lattice.txt
    python cli.py track --transcript results/transcripts/lattice_10kmh_seed1.txt
    python cli.py report --in results/ --out report/

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import json
import sys

import numpy as np

from allpass import save_params, snip_design_report
from config import DESIGN_TOL, RESULTS_DIR, configure_logging
from errors import ConfigError, PrecoderError
from feedback import read_transcript, replay_transcript
from harness import check_seed, load_config, load_results, run_experiment, write_results

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load_nodes(path: str) -> list:
    """JSON list of {"omega": w, "re": [[...]], "im": [[...]]}."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        return [(float(n["omega"]), np.array(n["re"]) + 1j * np.array(n["im"])) for n in raw]
    except OSError as exc:
        raise ConfigError(f"Cannot read nodes file '{path}': {exc}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"Nodes file '{path}' is malformed: {exc}") from exc


def cmd_simulate(args) -> int:
    check_seed(args.seed)
    cfg = load_config(args.config)
    if args.full_scale:
        cfg = cfg.full_scale()
    if args.workers is not None:
        cfg = cfg.with_overrides(workers=args.workers)
    print(f"Simulating {len(cfg.schemes)} scheme(s), {len(cfg.speed_kmh)} speed(s), {cfg.n_seeds} seed(s)...")
    result = run_experiment(cfg, base_seed=args.seed)
    summary = write_results(result, args.out)
    for scheme, speed, snr, n, mean, low, high in summary:
        print(f"  {scheme:12s} {speed:6g} km/h {snr:5g} dB  {mean:8.4f} b/s/Hz  [{low:.4f}, {high:.4f}]  n={n}")
    if result.failures:
        print(f"{len(result.failures)} cell(s) failed; see failures.csv.")
    print(f"Results written to {args.out}")
    return EXIT_OK


def cmd_design(args) -> int:
    nodes = _load_nodes(args.nodes)
    report = snip_design_report(nodes, args.order, tol=args.tol, match=args.match)
    save_params(report.params, args.out)
    print(
        f"Designed order-{args.order} lattice: residual {report.residual:.3e} "
        f"after {report.iterations} solver evaluations, {report.restarts} restart(s). Saved to {args.out}"
    )
    return EXIT_OK


def cmd_track(args) -> int:
    try:
        transcript = read_transcript(args.transcript)
    except OSError as exc:
        raise ConfigError(f"Cannot read transcript '{args.transcript}': {exc}") from exc
    tracker = replay_transcript(transcript)
    print(f"Replayed {len(transcript.frames)} frame(s) bit-exactly; final digest {tracker.digest()}")
    return EXIT_OK


def cmd_report(args) -> int:
    result = load_results(args.in_dir)
    summary = write_results(result, args.out)
    print(f"Re-reported {len(result.rates)} rate rows into {len(summary)} summary rows in {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Lattice precoder feedback toolkit")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the feedback experiment grid")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=RESULTS_DIR)
    p.add_argument("--full-scale", action="store_true", help="use the 4096-subcarrier grid")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("design", help="fit a lattice all-pass filter through unitary nodes")
    p.add_argument("--nodes", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=DESIGN_TOL)
    p.add_argument("--match", choices=["exact", "subspace"], default="exact")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("track", help="replay a feedback transcript and verify every digest")
    p.add_argument("--transcript", required=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("report", help="rebuild CSVs and the summary from saved results")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging(args.log_level)
    except ValueError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"Configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PrecoderError as exc:
        print(f"Numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

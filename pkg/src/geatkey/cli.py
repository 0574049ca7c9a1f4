"""Command-line entry point: ``geatkey run --config scenario.json``."""

from __future__ import annotations

import argparse
import logging
import sys

from .runner import ConfigError, ScenarioConfig, emit_results, has_solver_flags, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_FLAGGED = 0, 1, 2


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geatkey",
                                     description="Finite-size key rates for BB84 variants.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario sweep")
    run.add_argument("--config", required=True, help="JSON scenario file")
    run.add_argument("--output", help="output directory (overrides the config)")
    run.add_argument("--threads", type=int, default=1, help="worker processes for grid cells")
    run.add_argument("--protocol", choices=["qubit-bb84", "decoy-bb84"])
    run.add_argument("--loss-db", type=_float_list, help="comma-separated losses in dB")
    run.add_argument("--n", type=_float_list, help="comma-separated block lengths")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ScenarioConfig.load(args.config)
        overrides = {k: v for k, v in (("protocol", args.protocol), ("loss_db", args.loss_db),
                                       ("n", args.n), ("output", args.output)) if v is not None}
        if overrides:
            cfg = ScenarioConfig.from_dict({**cfg.__dict__, **overrides})
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = run_scenario(cfg, threads=args.threads)
    csv_path, gp_path = emit_results(rows, cfg.output)
    for r in rows:
        print(f"loss={r.loss_db:g} dB  n={r.n:.0e}  rate={r.key_rate:.4e}  "
              f"gamma={r.gamma_opt:.3g}  alpha-1={r.alpha_opt - 1:.2e}"
              + (f"  [{r.flags}]" if r.flags else ""))
    print(f"wrote {csv_path} and {gp_path}")
    return EXIT_FLAGGED if has_solver_flags(rows) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

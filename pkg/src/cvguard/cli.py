"""Command-line entry points: run, sweep, feasibility, validate."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .model import ChannelConfig, ScenarioValidationError, load_scenario
from .runner import feasibility_report, run, sweep


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvguard",
        description="V2I flooding-attack simulator with rule-based detection "
                    "and sampling-based prevention.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario and write result files")
    p_run.add_argument("--config", required=True, help="scenario file (YAML)")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the seed")

    p_sweep = sub.add_parser("sweep", help="run a grid of scenarios")
    p_sweep.add_argument("--config", required=True, help="base scenario file (YAML)")
    p_sweep.add_argument("--axis", action="append", default=[], metavar="KEY=V1,V2,...",
                         help="sweep axis (repeatable): n_attackers, tx_pps, "
                              "n_minor, cvguard")
    p_sweep.add_argument("--seeds", type=int, default=20, help="seeds per grid point")
    p_sweep.add_argument("--out", required=True, help="output directory")

    p_feas = sub.add_parser("feasibility",
                            help="attacker-count feasibility calculator")
    p_feas.add_argument("--packet-bytes", type=int, default=220)
    p_feas.add_argument("--attacker-bps", type=float, default=3_000_000.0)
    p_feas.add_argument("--receiver-bps", type=float, default=12_000_000.0)
    p_feas.add_argument("--overhead-s", type=float, default=0.003456)
    p_feas.add_argument("--sch-fraction", type=float, default=0.46)

    p_val = sub.add_parser("validate", help="validate a scenario file")
    p_val.add_argument("--config", required=True, help="scenario file (YAML)")
    return parser


def _parse_axes(specs: list[str]) -> dict[str, list[str]]:
    axes: dict[str, list[str]] = {}
    for spec in specs:
        if "=" not in spec:
            raise ValueError(f"bad --axis {spec!r}; expected KEY=V1,V2,...")
        key, _, values = spec.partition("=")
        axes[key.strip()] = [v.strip() for v in values.split(",") if v.strip()]
        if not axes[key.strip()]:
            raise ValueError(f"axis {key!r} has no values")
    return axes


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_scenario(args.config)
            if args.seed is not None:
                cfg = replace(cfg, seed=args.seed)
            result = run(cfg, out_dir=args.out)
            s = result.summary
            print(f"windows={s['n_windows']} app_drr={_show(s['app_drr'])} "
                  f"conflicts={s['conflicts']} attempts={s['crossing_attempts']} "
                  f"conflict_pct={s['conflict_pct']:.2f} reports={s['reports']}")
            print(f"results written to {args.out}")
        elif args.command == "sweep":
            cfg = load_scenario(args.config)
            axes = _parse_axes(args.axis)
            if not axes:
                raise ValueError("sweep requires at least one --axis")
            rows = sweep(cfg, axes, seeds=args.seeds, out_dir=args.out)
            print(f"{len(rows)} rows written to {args.out}/sweep.csv")
        elif args.command == "feasibility":
            cfg = ChannelConfig(packet_bytes=args.packet_bytes,
                                sender_rate=args.attacker_bps,
                                receiver_rate=args.receiver_bps,
                                overhead=args.overhead_s,
                                sch_fraction=args.sch_fraction)
            print(feasibility_report(cfg))
        elif args.command == "validate":
            load_scenario(args.config)
            print(f"{args.config}: valid")
    except ScenarioValidationError as exc:
        for violation in exc.violations:
            print(f"invalid: {violation}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _show(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.3f}"


if __name__ == "__main__":
    raise SystemExit(main())

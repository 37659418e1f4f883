"""Command line interface for the experiment harness.

Each experiment subcommand writes the result CSV to ``--out`` and, unless
``--no-figure`` is given, a PNG figure next to it.  ``design-pilots``
writes the pattern as JSON plus a coherence report CSV.
"""

from __future__ import annotations

import argparse
import json
import os

from .config import load_config
from .runner import (
    run_ber_vs_snr,
    run_diagnose_elimination,
    run_mse_vs_position,
    run_mse_vs_snr,
    run_mse_vs_velocity,
    run_pilot_design,
    write_csv,
)

_EXPERIMENTS = {
    "mse-snr": run_mse_vs_snr,
    "mse-position": run_mse_vs_position,
    "mse-velocity": run_mse_vs_velocity,
    "ber-snr": run_ber_vs_snr,
    "diagnose-elimination": run_diagnose_elimination,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hstofdm",
        description="Multi-cell high-mobility OFDM link simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(_EXPERIMENTS) + ["design-pilots"]:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", required=True, help="output path")
        p.add_argument("--threads", type=int, default=None, help="worker process count")
        p.add_argument(
            "--no-figure", action="store_true", help="skip rendering the PNG figure"
        )
    return parser


def _figure_path(out: str) -> str:
    base, _ = os.path.splitext(out)
    return base + ".png"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    cfg = load_config(args.config, overrides)

    if args.command == "design-pilots":
        pattern, rows = run_pilot_design(cfg)
        payload = {
            "pattern": [int(i) for i in pattern],
            "coherence": rows[0].value,
            "equidistant_coherence": rows[1].value,
            "subcarriers": cfg.subcarriers,
            "seed": cfg.seed,
        }
        with open(args.out, "w", newline="") as fh:
            fh.write(json.dumps(payload, sort_keys=True, indent=2))
            fh.write("\n")
        write_csv(rows, args.out + ".report.csv")
        print(f"designed {len(pattern)} pilots, coherence {rows[0].value:.6f} "
              f"(equidistant {rows[1].value:.6f}) -> {args.out}")
    else:
        rows = _EXPERIMENTS[args.command](cfg)
        write_csv(rows, args.out)
        print(f"{args.command}: wrote {len(rows)} rows -> {args.out}")
        if not args.no_figure:
            from .figures import render_figure

            render_figure(rows, _figure_path(args.out))
            print(f"figure -> {_figure_path(args.out)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

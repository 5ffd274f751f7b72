"""Command line: ``noma-vlc run | compare | list-scenarios``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .experiments import (
    OUT_DIR_ENV,
    SCENARIO_NOTES,
    SCENARIOS,
    ConfigError,
    GridMismatch,
    compare,
    load_config_file,
    resolve_config,
    run,
)


def _floats(text: str) -> list[float]:
    """``105:130:2.5`` (inclusive range) or ``110,115,120``."""
    if ":" in text:
        lo, hi, step = (float(t) for t in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("range step must be positive")
        n = int(round((hi - lo) / step))
        return [lo + i * step for i in range(n + 1)]
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noma-vlc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write CSV curves plus metadata.json")
    r.add_argument("config", nargs="?", help="TOML config file")
    r.add_argument("--scenario", choices=sorted(SCENARIOS))
    r.add_argument("--snr", type=_floats, help="SNR grid in dB, list or lo:hi:step")
    r.add_argument("--rho", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int, help="bits per user and SNR point")
    r.add_argument("--csi", help="perfect | noisy_fixed | noisy_snr_dependent | outdated")
    r.add_argument("--dimming", help="none | analog | vook")
    r.add_argument("--workers", type=int)
    r.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or ./out)")

    c = sub.add_parser("compare", help="check curve A against curve B point by point")
    c.add_argument("curve_a")
    c.add_argument("curve_b")
    c.add_argument("--rule", choices=["abs", "ratio", "stderr", "ge"], default="stderr")
    c.add_argument("--tol", type=float, default=3.0)
    c.add_argument("--min-ber", type=float, default=0.0, help="skip points where B is below this")

    sub.add_parser("list-scenarios", help="print the scenario tags")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list-scenarios":
        for name in SCENARIOS:
            print(f"{name:8s} {SCENARIO_NOTES[name]}")
        return 0

    if args.command == "compare":
        try:
            report = compare(args.curve_a, args.curve_b, args.rule, args.tol, args.min_ber)
        except (GridMismatch, ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(json.dumps(report, indent=2))
        return 0 if report["pass"] else 1

    overrides = {k: getattr(args, k) for k in ("scenario", "snr", "rho", "seed", "trials", "csi",
                                               "dimming", "workers")}
    try:
        file_values = load_config_file(args.config) if args.config else {}
        out_dir = args.out_dir or file_values.pop("out_dir", None) or os.environ.get(OUT_DIR_ENV, "out")
        cfg = resolve_config(file_values, overrides)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    meta = run(cfg, out_dir)
    print(f"wrote {len(meta['files'])} curves to {out_dir} in {meta['wall_time_s']} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())

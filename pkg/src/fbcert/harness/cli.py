"""
Command line entry point.

    fbcert pev-sweep-s  [--config FILE] [--seed N] [--out DIR] [--data CSV] ...
    fbcert pev-sweep-k  ...
    fbcert qp-sweep-k   ...
    fbcert certify      ...
    fbcert gen-data     --s N [--seed N] --out FILE

Flags override keys of the config file, which override the experiment
defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..games.pev import alg3_run, epsilon_sne_certificate
from .config import EXPERIMENTS, load_config, make_config
from .data import HORIZON, synth_prices, write_prices
from .sweep import format_table2, pev_context, run_sweep, summarize_table2

__all__ = ["main", "build_parser"]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--data", dest="data_path", help="price CSV (synthetic pool when absent)")
    p.add_argument("--delta", type=float, help="confidence parameter in (0, 1)")
    p.add_argument("--gamma", type=float, help="step size")
    p.add_argument("--trials", type=int, help="trials per sweep value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbcert", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "pev-sweep-s": "charging game, sweep over the dataset size",
        "pev-sweep-k": "charging game, sweep over the iteration count",
        "qp-sweep-k": "random box QPs, sweep over the iteration count",
        "certify": "one charging game run with its certificate",
    }
    for name in EXPERIMENTS:
        _add_common(sub.add_parser(name, help=helps[name]))
    g = sub.add_parser("gen-data", help="write a synthetic price CSV")
    g.add_argument("--s", type=int, default=3649, help="number of days")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--horizon", type=int, default=HORIZON)
    g.add_argument("--out", required=True, help="output CSV path")
    return parser


def _config(args):
    overrides = {k: getattr(args, k) for k in
                 ("seed", "output_dir", "data_path", "delta", "gamma", "trials")}
    if args.config:
        return load_config(args.config, args.command).with_overrides(**overrides)
    return make_config(args.command, **overrides)


def _certify(cfg) -> dict:
    ctx = pev_context(cfg)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, cfg.s_values[0], 0]))
    data = ctx.pool.subset(rng.choice(len(ctx.pool), cfg.s_values[0], replace=False))
    h, _ = alg3_run(ctx.game, data, cfg.gamma, cfg.k_values[0], record=False)
    ref = float(np.linalg.norm(ctx.reference))
    cert = epsilon_sne_certificate(h, ctx.game, data, cfg.gamma, cfg.delta, ctx.constants,
                                   k=cfg.k_values[0], loss_bound=ctx.loss_bound,
                                   reference_norm=ref or None)
    return {"certificate": cert.to_dict(),
            "relative_error": float(np.linalg.norm(h.x - ctx.reference)) / ref if ref else None}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen-data":
            write_prices(synth_prices(args.s, args.horizon, seed=args.seed), args.out)
            print(f"wrote {args.s} days to {args.out}")
            return 0
        cfg = _config(args)
        if args.command == "certify":
            doc = _certify(cfg)
            Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
            (Path(cfg.output_dir) / "certificate.json").write_text(json.dumps(doc, indent=2) + "\n")
            print(json.dumps(doc, indent=2))
            return 0
        result = run_sweep(cfg)
        for value, st in result.stats.items():
            recs = result.records[value]
            failed = sum(r.failed for r in recs)
            line = f"{cfg.sweep_axis}={value}: {len(recs) - failed}/{len(recs)} ok"
            if st is not None:
                line += f", median rel. error {st.median:.4g} (IQR {st.iqr:.3g})"
            print(line)
        if cfg.sweep_axis == "k":
            print(format_table2(summarize_table2(result.all_records())))
        print(f"outputs in {cfg.output_dir}")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

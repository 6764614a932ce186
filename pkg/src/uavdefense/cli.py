"""Command line entry point: ``run``, ``batch`` and ``sweep``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 when
a file cannot be read or written.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from . import harness as hz
from .engine import ConfigError, ScenarioConfig, dump_config, load_config, run

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; 2 is reserved for I/O here
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config(args) -> ScenarioConfig:
    if args.config == "default":
        cfg = ScenarioConfig()
    else:
        cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.max_ticks is not None:
        cfg = cfg.replace(max_ticks=args.max_ticks)
    return cfg


def _format_record(r) -> str:
    return (f"seed={r.seed} outcome={r.outcome.value} escort_ticks={r.escort_ticks} "
            f"clusterless_final={r.clusterless_final}")


def _format_row(row: hz.SummaryRow) -> str:
    return (f"{row.parameter}={row.value} success={row.n_success}/{row.runs} "
            f"mean={row.mean_ticks:.1f} sd={row.std_ticks:.1f} "
            f"AD={row.ad_statistic:.3f} p={row.ad_p_value:.3g}")


def cmd_run(args) -> int:
    cfg = _config(args)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="\n") as fh:
            rec = run(cfg, trace=fh)
    else:
        rec = run(cfg)
    print(_format_record(rec))
    return EXIT_OK


def cmd_batch(args) -> int:
    cfg = _config(args)
    records = hz.batch(cfg, args.runs, workers=args.workers)
    hz.emit_records_csv(records, args.out)
    print(_format_row(hz.summarize("seed", cfg.seed, records)))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    spec = hz.SweepSpec.parse(args.param, args.values, args.runs)
    records: list = []
    rows = hz.sweep(cfg, spec, workers=args.workers, records_out=records)
    hz.emit_records_csv(records, args.out)
    if args.summary:
        hz.emit_summary_csv(rows, args.summary)
    for row in rows:
        print(_format_row(row))
    return EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(dump_config(_config(args)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="uavdefense", description="Swarm escort simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", required=True,
                        help="key=value config file, or 'default' for built-in defaults")
        sp.add_argument("--max-ticks", type=int, default=None, help="override the tick cap")

    sp = sub.add_parser("run", help="one seeded run")
    common(sp)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--trace", default=None, help="write a per-tick CSV trace here")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("batch", help="consecutive seeds from the config seed")
    common(sp)
    sp.add_argument("--runs", type=int, required=True)
    sp.add_argument("--out", required=True, help="per-run CSV")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_batch)

    sp = sub.add_parser("sweep", help="batches over values of one parameter")
    common(sp)
    sp.add_argument("--param", required=True)
    sp.add_argument("--values", required=True, help="a,b,c or START:STOP:STEP")
    sp.add_argument("--runs", type=int, default=100)
    sp.add_argument("--out", required=True, help="per-run CSV")
    sp.add_argument("--summary", default=None, help="per-value summary CSV")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("config", help="print the effective configuration")
    common(sp)
    sp.set_defaults(func=cmd_config)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: run, sweep, oracle-compare, verify.

Exit codes: 0 success, 1 verification or acceptance failure, 2 usage or
configuration error. Any ``--section.field value`` flag not listed below is
applied as a dotted override of the resolved configuration, e.g.
``--solver.max_iterations 500`` or ``--mobility.v_max=1.5``.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .compare import GapRow, oracle_compare
from .config import ConfigError, default_output_dir, load_config, parse_value
from .oracle import InstanceTooLargeError
from .sim import simulate
from .verify import run_checks

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

AGGREGATE_FIELDS = ("users", "T", "runs", "mean_throughput", "mean_objective", "total_handovers",
                    "mean_runtime", "failures")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def int_list(text: str) -> list[int]:
    """Comma/space separated integers with optional ranges: ``0-9``, ``1,3,5``."""
    out: list[int] = []
    for part in text.replace(",", " ").split():
        lo, sep, hi = part.partition("-")
        try:
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    return out


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML scenario file; its keys mirror ScenarioConfig fields")
    p.add_argument("--scenario", choices=("room2ap", "room4ap"), help="base preset (default room2ap)")
    p.add_argument("--duration", type=float, help="simulated seconds")
    p.add_argument("--algorithm", choices=("mvr", "exhaustive"))
    p.add_argument("--prediction", choices=("two_fix_estimate", "oracle_positions"))
    p.add_argument("--out", type=Path, help="output directory (default $VLCMVR_OUTPUT_DIR or ./runs)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vlcmvr", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="simulate one scenario; writes metrics CSV and summary JSON")
    _common(p)
    p.add_argument("--users", type=positive_int)
    p.add_argument("--T", type=positive_int, help="prediction level (>= 1)")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("sweep", help="Cartesian product of users x T x seeds plus an aggregate CSV")
    _common(p)
    p.add_argument("--users", type=int_list, required=True, help="e.g. '5,10,15'")
    p.add_argument("--T", type=int_list, required=True, help="e.g. '1-4'")
    p.add_argument("--seeds", type=int_list, required=True, help="e.g. '0-9'")
    p.add_argument("--jobs", type=positive_int, default=1)

    p = sub.add_parser("oracle-compare", help="MVR vs exhaustive search on identical closed-loop instances")
    _common(p)
    p.add_argument("--users", type=positive_int, default=3)
    p.add_argument("--T", type=positive_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=positive_int, help="service times to simulate (overrides --duration)")
    p.add_argument("--cap", type=positive_int, help="per-step enumeration cap")
    p.add_argument("--max-gap", type=float, help="exit 1 if any per-step gap exceeds this")

    p = sub.add_parser("verify", help="convexity, stationarity and mobility self-checks")
    p.add_argument("--quick", action="store_true", help="reduced sample counts, same assertions")
    p.add_argument("--seed", type=int, default=0)
    return parser


def split_overrides(extra: list[str]) -> dict:
    """Turn leftover ``--a.b value`` / ``--a.b=value`` tokens into {'a.b': value}."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok.split("=", 1)[0]:
            raise UsageError(f"unrecognized argument {tok!r}")
        key, eq, value = tok[2:].partition("=")
        if not eq:
            if i + 1 >= len(extra):
                raise UsageError(f"override {tok} needs a value")
            value = extra[i + 1]
            i += 1
        out[key] = parse_value(value)
        i += 1
    return out


def resolve(args, overrides: dict, **fixed):
    ov = dict(overrides)
    for name in ("duration", "algorithm", "prediction"):
        if getattr(args, name, None) is not None:
            ov[name] = getattr(args, name)
    for name, value in fixed.items():
        if value is not None:
            ov[name] = value
    return load_config(args.config, args.scenario, ov)


def _out_dir(args) -> Path:
    return args.out if args.out is not None else default_output_dir()


def run_stem(cfg) -> str:
    return f"u{cfg.users}_T{cfg.T}_s{cfg.seed}"


def cmd_run(args, overrides) -> int:
    cfg = resolve(args, overrides, users=args.users, T=args.T, seed=args.seed)
    result = simulate(cfg)
    out = _out_dir(args)
    stem = run_stem(cfg)
    io.write_metrics(out / f"{stem}.csv", result)
    io.write_summary(out / f"{stem}.json", result)
    s = io.summary(result)
    print(f"{stem}: steps={s['steps']} mean_throughput={s['mean_throughput_bps'] / 1e6:.3f} Mb/s "
          f"objective={s['total_objective']:.6e} handovers={s['handovers']} digest={s['config_digest']} "
          f"-> {out}")
    return EXIT_OK


def _sweep_one(cfg, out: Path) -> dict:
    start = time.perf_counter()
    result = simulate(cfg)
    stem = run_stem(cfg)
    io.write_metrics(out / f"{stem}.csv", result)
    io.write_summary(out / f"{stem}.json", result)
    return {
        "users": cfg.users, "T": cfg.T, "seed": cfg.seed,
        "mean_throughput": result.mean_throughput,
        "objective": result.total_objective,
        "handovers": result.handovers,
        "runtime": time.perf_counter() - start,
    }


def aggregate(results: list[dict], failures: list[dict]) -> list[list]:
    """One row per (users, T): means over seeds, handovers summed over seeds."""
    rows = []
    keys = sorted({(r["users"], r["T"]) for r in results} | {(f["users"], f["T"]) for f in failures})
    for u, t in keys:
        group = [r for r in results if (r["users"], r["T"]) == (u, t)]
        failed = sum(1 for f in failures if (f["users"], f["T"]) == (u, t))
        if group:
            rows.append([u, t, len(group),
                         float(np.mean([r["mean_throughput"] for r in group])),
                         float(np.mean([r["objective"] for r in group])),
                         int(sum(r["handovers"] for r in group)),
                         float(np.mean([r["runtime"] for r in group])), failed])
        else:
            rows.append([u, t, 0, "", "", "", "", failed])
    return rows


def cmd_sweep(args, overrides) -> int:
    if not args.seeds:
        raise UsageError("the seed list is empty")
    if not args.users or not args.T:
        raise UsageError("sweep axes must be non-empty")
    if min(args.users) < 1 or min(args.T) < 1:
        raise UsageError("users and T must be >= 1")
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    configs = [resolve(args, overrides, users=u, T=t, seed=s)
               for u in args.users for t in args.T for s in args.seeds]
    results, failures = [], []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [(cfg, pool.submit(_sweep_one, cfg, out)) for cfg in configs]
            for cfg, fut in futures:
                try:
                    results.append(fut.result())
                except Exception as exc:  # recorded, sweep continues
                    failures.append({"users": cfg.users, "T": cfg.T, "seed": cfg.seed, "error": repr(exc)})
    else:
        for cfg in configs:
            try:
                results.append(_sweep_one(cfg, out))
            except Exception as exc:
                failures.append({"users": cfg.users, "T": cfg.T, "seed": cfg.seed, "error": repr(exc)})
    extra = {"sweep": {"users": args.users, "T": args.T, "seeds": args.seeds}}
    io.write_csv(out / "aggregate.csv", AGGREGATE_FIELDS, aggregate(results, failures), configs[0], extra)
    if failures:
        with (out / "failures.csv").open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["users", "T", "seed", "error"])
            w.writeheader()
            w.writerows(failures)
    print(f"sweep: {len(results)} runs ok, {len(failures)} failed -> {out / 'aggregate.csv'}")
    return EXIT_FAIL if failures else EXIT_OK


def cmd_oracle_compare(args, overrides) -> int:
    fixed = dict(users=args.users, T=args.T, seed=args.seed, enumeration_cap=args.cap)
    cfg = resolve(args, overrides, **fixed)
    if args.steps is not None:
        cfg = cfg.replace(duration=args.steps * cfg.tau_p)
    cmp = oracle_compare(cfg)
    out = _out_dir(args)
    path = out / f"oracle_{run_stem(cfg)}.csv"
    extra = {"max_gap": cmp.max_gap, "fraction_within_5pct": cmp.fraction_within(0.05), "total_gap": cmp.total_gap}
    io.write_csv(path, GapRow.FIELDS, (r.row() for r in cmp.rows), cfg, extra)
    print(f"oracle-compare: {len(cmp.rows)} instances, max gap {cmp.max_gap:.4%}, "
          f"steps within 5% {cmp.fraction_within(0.05):.1%}, total-objective gap {cmp.total_gap:.4%} -> {path}")
    if args.max_gap is not None and cmp.max_gap > args.max_gap:
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(args, overrides) -> int:
    if overrides:
        raise UsageError("verify takes no configuration overrides")
    checks = run_checks(quick=args.quick, rng_seed=args.seed)
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.detail}")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "oracle-compare": cmd_oracle_compare, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = split_overrides(extra)
        return COMMANDS[args.command](args, overrides)
    except (UsageError, ConfigError, InstanceTooLargeError) as exc:
        print(f"vlcmvr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"vlcmvr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

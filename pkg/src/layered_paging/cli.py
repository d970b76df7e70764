"""``layered-paging`` command line.

Exit status: 0 on success, 1 when a validation or check fails, 2 on bad
input or configuration.
"""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from typing import List, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import experiments as ex
from ._accel import backend_name
from .errors import ConfigError, OracleCapExceeded, TraceFormatError
from .generators import (
    ZipfParams,
    gen_adaptive_adversary,
    gen_fixed_partition_adversary,
    gen_lru_nemesis,
    gen_yao_random,
    gen_zipf,
)
from .ingest import parse_moe_trace, round_expand, trace_stats
from .model import LayeredTrace, ModelShape, read_trace, validate_trace, write_trace
from .offline import belady_simulate
from .registry import POLICY_NAMES, applicable, check_policy_names, make_policy, run_policy

GENERATORS = ("zipf", "lru-nemesis", "fixed-partition", "adaptive", "yao")


# -- argument plumbing -------------------------------------------------------

def _int_list(value, name: str) -> List[int]:
    """Accept 3, [1, 2], "1,2,4" or "1:16" (inclusive range, optional :step)."""
    if value is None:
        return []
    if isinstance(value, int):
        return [value]
    if isinstance(value, str):
        value = [value]
    out = []
    for item in value:
        if isinstance(item, int):
            out.append(item)
            continue
        for part in str(item).split(","):
            part = part.strip()
            if not part:
                continue
            try:
                if ":" in part:
                    bits = [int(x) for x in part.split(":")]
                    lo, hi, step = bits[0], bits[1], bits[2] if len(bits) > 2 else 1
                    out.extend(range(lo, hi + 1, step))
                else:
                    out.append(int(part))
            except (ValueError, IndexError):
                raise ConfigError(f"--{name}: cannot parse {part!r} as integers") from None
    return out


def _float_list(value, name: str) -> List[float]:
    if value is None:
        return []
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, str):
        value = [value]
    out = []
    for item in value:
        for part in str(item).split(","):
            if part.strip():
                try:
                    out.append(float(part))
                except ValueError:
                    raise ConfigError(f"--{name}: cannot parse {part!r} as a number") from None
    return out


def _str_list(value) -> List[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [value]
    return [str(v) for v in value]


def apply_config(args: argparse.Namespace, path: str) -> dict:
    """Overlay a TOML file onto parsed flags; file values win."""
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    known = vars(args)
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest in ("command", "config", "func") or dest not in known:
            raise ConfigError(f"{path}: unknown key {key!r} for {args.command}")
        setattr(args, dest, value)
    return cfg


def _common(p: argparse.ArgumentParser, out_help: str = "output directory") -> None:
    p.add_argument("--trace", action="append", help="canonical trace file (.jsonl files are ingested and round-expanded)")
    p.add_argument("--policy", action="append", help=f"policy name, repeatable ({', '.join(POLICY_NAMES)})")
    p.add_argument("--k", action="append", help="cache size; lists and ranges like 1,2,8 or 1:64 where accepted")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help=out_help)
    p.add_argument("--config", help="TOML file whose keys override flags")


def _generator_flags(p: argparse.ArgumentParser, default: Optional[str] = None) -> None:
    g = p.add_argument_group("trace generator")
    g.add_argument("--generator", choices=GENERATORS, default=default)
    g.add_argument("--n", type=int, help="experts per layer")
    g.add_argument("--ell", type=int, help="number of layers")
    g.add_argument("--rounds", type=int, default=2000)
    g.add_argument("--a", type=float, default=2.0, help="Zipf exponent")
    g.add_argument("--b", type=float, default=0.0, help="Zipf rank shift")
    g.add_argument("--permute", action="store_true", help="independent rank-to-expert permutation per layer")
    g.add_argument("--z", type=int, help="starved layer for the fixed-partition adversary (default: smallest quota)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layered-paging", description="Layered paging simulator and experiment harness")
    parser.add_argument("--version", action="version", version=f"%(prog)s (kernels: {backend_name()})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a canonical trace file")
    _common(p)

    p = sub.add_parser("generate", help="write a synthetic or adversarial trace")
    _common(p, "output trace file ('-' for stdout)")
    _generator_flags(p, "zipf")

    p = sub.add_parser("ingest", help="convert a JSONL expert trace to a canonical trace")
    _common(p, "output trace file ('-' for stdout)")

    p = sub.add_parser("simulate", help="fault counts of policies on one trace")
    _common(p)
    p.add_argument("--engine", choices=("auto", "kernel", "reference"), default="auto")

    p = sub.add_parser("sweep-k", help="faults against cache size")
    _common(p)
    _generator_flags(p)

    p = sub.add_parser("compare", help="faults normalised by OPT over several traces")
    _common(p)
    _generator_flags(p)
    p.add_argument("--seeds", help="generator seeds, e.g. 1:10")

    p = sub.add_parser("grid-opt-dist", help="OPT-Dist / OPT over an (n, ell) grid of Zipf traces")
    _common(p)
    p.add_argument("--ns", default="1,2,4,8,16,32")
    p.add_argument("--ells", default="2,4,8,16,32")
    p.add_argument("--rounds", type=int, default=2000)
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--permute", action="store_true")

    p = sub.add_parser("sweep-zipf-a", help="OPT-Dist / OPT against the Zipf exponent")
    _common(p)
    p.add_argument("--a-values", default="0.01,0.1,0.5,1,1.5,2,3,5,10,20,50")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--ell", type=int, default=32)
    p.add_argument("--rounds", type=int, default=2000)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--permute", action="store_true")

    p = sub.add_parser("verify-theory", help="empirical checks of the lower-bound constructions")
    _common(p)
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo samples per cover-time cell")
    p.add_argument("--rounds", type=int, help="horizon for the fixed-partition check")
    p.add_argument("--oracle-traces", type=int, default=0,
                   help="also cross-check Belady against exhaustive search on this many random small traces")

    p = sub.add_parser("stats", help="summary statistics of a trace")
    _common(p)
    return parser


# -- trace sources -----------------------------------------------------------

def _load(path: str) -> LayeredTrace:
    if path.endswith(".jsonl"):
        return round_expand(parse_moe_trace(path))
    return read_trace(path)


def _trace_id(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _one_trace(args) -> LayeredTrace:
    traces = _str_list(args.trace)
    if len(traces) != 1:
        raise ConfigError(f"{args.command} needs exactly one --trace")
    return _load(traces[0])


def _ks(args) -> List[int]:
    ks = _int_list(args.k, "k")
    bad = [k for k in ks if k < 1]
    if bad:
        raise ConfigError(f"cache sizes must be >= 1, got {bad}")
    return ks


def _single_k(args) -> int:
    ks = _ks(args)
    if len(ks) != 1:
        raise ConfigError(f"{args.command} needs exactly one --k")
    return ks[0]


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError(f"{args.generator} generator needs --{', --'.join(missing)}")


def _generate(args, seed) -> tuple:
    """Returns (trace, description) for the generator flags."""
    gen = args.generator
    if gen == "zipf":
        _need(args, "n", "ell")
        params = ZipfParams(args.a, args.b, bool(args.permute))
        trace = gen_zipf(ModelShape(args.n, args.ell), params, args.rounds, seed)
        desc = (f"generator=zipf n={args.n} l={args.ell} rounds={args.rounds} a={args.a:g} b={args.b:g} "
                f"per_layer_permutation={str(bool(args.permute)).lower()} seed={seed}")
    elif gen == "lru-nemesis":
        _need(args, "ell")
        k = _single_k(args)
        trace = gen_lru_nemesis(k, args.ell).trace(args.rounds)
        desc = f"generator=lru-nemesis k={k} l={args.ell} n={trace.shape.n} rounds={args.rounds}"
    elif gen == "fixed-partition":
        _need(args, "n", "ell")
        k = _single_k(args)
        # the last layer never receives one of the k mod ell leftover slots
        z = args.z if args.z is not None else args.ell
        trace = gen_fixed_partition_adversary(args.n, args.ell, z, args.rounds, k)
        desc = f"generator=fixed-partition n={args.n} l={args.ell} z={z} k={k} rounds={args.rounds}"
    elif gen == "adaptive":
        _need(args, "n", "ell")
        name = (_str_list(args.policy) or ["lru"])[0]
        k = args.n * args.ell - 1
        policy = make_policy(name, k, args.ell, seed)
        trace = gen_adaptive_adversary(policy, args.ell, args.n, args.rounds).trace
        desc = f"generator=adaptive policy={name} n={args.n} l={args.ell} k={k} rounds={args.rounds}"
    elif gen == "yao":
        _need(args, "n", "ell")
        trace = gen_yao_random(args.n, args.ell, args.rounds, seed)
        desc = f"generator=yao n={args.n} l={args.ell} rounds={args.rounds} seed={seed}"
    else:
        raise ConfigError(f"unknown generator {gen!r}")
    return trace, desc


def _trace_or_generated(args) -> tuple:
    if _str_list(args.trace):
        if args.generator:
            raise ConfigError("give either --trace or --generator, not both")
        return _one_trace(args), _trace_id(_str_list(args.trace)[0])
    if not args.generator:
        raise ConfigError(f"{args.command} needs --trace or --generator")
    trace, _ = _generate(args, args.seed)
    return trace, f"{args.generator}-seed{args.seed}"


def _out_dir(args) -> str:
    return args.out or os.path.join("results", args.command)


def _finish(out: ex.ExperimentOutput, args, config_path: Optional[str]) -> List[str]:
    out_dir = _out_dir(args)
    written = out.write(out_dir)
    if config_path:
        dest = os.path.join(out_dir, "config.toml")
        shutil.copyfile(config_path, dest)
        written.append(dest)
    for path in written:
        print(f"wrote {path}")
    return written


# -- subcommands -------------------------------------------------------------

def cmd_validate(args, config_path) -> int:
    traces = _str_list(args.trace)
    if not traces:
        raise ConfigError("validate needs --trace")
    status = 0
    for path in traces:
        trace = read_trace(path, strict=False)
        report = validate_trace(trace)
        if report.ok:
            tail = f", ragged final round of {report.ragged_tail}" if report.ragged_tail else ""
            print(f"{path}: ok, {report.length} requests, n={trace.shape.n} l={trace.shape.ell}{tail}")
        else:
            v = report.violation
            if v.reason == "layer":
                msg = f"position {v.position} requests layer {v.found_layer}, expected layer {v.expected_layer}"
            else:
                msg = f"position {v.position} requests expert {v.expert} outside [1, {trace.shape.n}]"
            print(f"{path}: invalid, {msg}")
            status = 1
    return status


def cmd_generate(args, config_path) -> int:
    if not args.generator:
        raise ConfigError("generate needs --generator")
    trace, desc = _generate(args, args.seed)
    dest = args.out or "-"
    if dest == "-":
        write_trace(trace, sys.stdout, comment=desc)
    else:
        write_trace(trace, dest, comment=desc)
        print(f"wrote {dest} ({len(trace)} requests)", file=sys.stderr)
    return 0


def cmd_ingest(args, config_path) -> int:
    sources = _str_list(args.trace)
    if len(sources) != 1:
        raise ConfigError("ingest needs exactly one --trace (the JSONL file)")
    raw = parse_moe_trace(sources[0])
    trace = round_expand(raw)
    desc = (f"ingested from {os.path.basename(sources[0])} model={raw.model or 'unknown'} tokens={raw.num_tokens} "
            f"e={raw.e} n={raw.shape.n} l={raw.shape.ell}")
    dest = args.out or "-"
    if dest == "-":
        write_trace(trace, sys.stdout, comment=desc)
    else:
        write_trace(trace, dest, comment=desc)
        print(f"wrote {dest} ({len(trace)} requests)", file=sys.stderr)
    return 0


def cmd_simulate(args, config_path) -> int:
    trace = _one_trace(args)
    trace_id = _trace_id(_str_list(args.trace)[0])
    policies = check_policy_names(_str_list(args.policy) or ["lru", "llru", "opt"])
    k = _single_k(args)
    table = ex.ResultTable("simulate", ["trace_id", "policy", "k", "faults", "normalized"], sort_by=("policy",))
    opt = belady_simulate(trace, k).faults if "opt" in policies else None
    for name in policies:
        if not applicable(name, k, trace.shape.ell):
            table.add(trace_id=trace_id, policy=name, k=k, faults=None, normalized=None)
            continue
        faults = opt if name == "opt" else run_policy(name, trace, k, args.seed, engine=args.engine).faults
        table.add(trace_id=trace_id, policy=name, k=k, faults=faults,
                  normalized=None if opt is None else (faults / opt if opt else 1.0))
    for r in table.sorted_rows():
        faults = "n/a (k < l)" if r["faults"] is None else r["faults"]
        norm = "" if r["normalized"] is None else f"  x{r['normalized']:.3f} OPT"
        print(f"{r['policy']:>14}  k={k}  faults={faults}{norm}")
    if args.out:
        _finish(ex.ExperimentOutput(table), args, config_path)
    return 0


def cmd_sweep_k(args, config_path) -> int:
    trace, trace_id = _trace_or_generated(args)
    policies = _str_list(args.policy) or ["lru", "llru", "marking", "opt"]
    ks = _ks(args) or None
    out = ex.sweep_k(trace, policies, ks, seed=args.seed, trace_id=trace_id)
    for name, ks_up in out.report["increasing_k"].items():
        print(f"{name:>14}  roughness {out.report['roughness'][name]:.3f}")
        if ks_up:
            print(f"{name:>14}  faults increase with k at k = {', '.join(map(str, ks_up))}")
    _finish(out, args, config_path)
    return 0


def cmd_compare(args, config_path) -> int:
    k = _single_k(args)
    policies = _str_list(args.policy) or ["lru", "llru", "marking", "lru-dist", "opt"]
    files = _str_list(args.trace)
    if files and args.generator:
        raise ConfigError("give either --trace or --generator, not both")
    if files:
        traces = [(_trace_id(p), _load(p)) for p in files]
    elif args.generator:
        seeds = _int_list(args.seeds, "seeds") or [args.seed]
        traces = []
        for s in seeds:
            t, _ = _generate(args, s)
            traces.append((f"{args.generator}-seed{s}", t))
    else:
        raise ConfigError("compare needs --trace or --generator")
    out = ex.compare_normalized(traces, k, policies, seed=args.seed)
    for name, med in sorted(out.report["median_normalized"].items()):
        print(f"{name:>14}  median faults/OPT = {med:.4f}")
    if "llru_median_le_lru" in out.report and not out.report["llru_median_le_lru"]:
        print("finding: LLRU median exceeds LRU median on these traces")
    _finish(out, args, config_path)
    return 0


def cmd_grid(args, config_path) -> int:
    k = _single_k(args) if args.k else 16
    ns, ells = _int_list(args.ns, "ns"), _int_list(args.ells, "ells")
    out = ex.grid_opt_vs_dist(ns, ells, k, ZipfParams(args.a, args.b, bool(args.permute)), args.rounds, seed=args.seed)
    print(f"max OPT-Dist / OPT = {out.report['max_ratio']:.4f}")
    _finish(out, args, config_path)
    return 0


def cmd_sweep_a(args, config_path) -> int:
    k = _single_k(args) if args.k else 64
    a_values = _float_list(args.a_values, "a-values")
    out = ex.sweep_zipf_a(a_values, args.n, args.ell, k, args.rounds, seed=args.seed, b=args.b,
                          per_layer_permutation=bool(args.permute))
    for a, r in out.report["ratios"].items():
        print(f"a={a:>6}  OPT-Dist / OPT = {r:.4f}")
    _finish(out, args, config_path)
    return 0


def cmd_verify(args, config_path) -> int:
    cfg = ex.TheoryConfig(t5_samples=args.samples, seed=args.seed)
    if args.rounds:
        cfg.t1_rounds = args.rounds
    out = ex.verify_theory(cfg)
    if args.oracle_traces:
        check = ex.check_oracle(args.oracle_traces, seed=args.seed)
        out.report["checks"].append(check)
        out.report["passed"] = out.report["passed"] and check["passed"]
        out.table.add(check=check["check"], passed=check["passed"], value=check["mismatches"], threshold=0)
    for c in out.report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['check']}")
    _finish(out, args, config_path)
    if not out.passed:
        failed = [c["check"] for c in out.report["checks"] if not c["passed"]]
        print(f"failed: {'; '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_stats(args, config_path) -> int:
    trace = _one_trace(args)
    text = json.dumps(trace_stats(trace).to_dict(), indent=2)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "stats.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote {path}")
    else:
        print(text)
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "simulate": cmd_simulate,
    "sweep-k": cmd_sweep_k,
    "compare": cmd_compare,
    "grid-opt-dist": cmd_grid,
    "sweep-zipf-a": cmd_sweep_a,
    "verify-theory": cmd_verify,
    "stats": cmd_stats,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            apply_config(args, args.config)
        return COMMANDS[args.command](args, args.config)
    except (ConfigError, TraceFormatError, OracleCapExceeded, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

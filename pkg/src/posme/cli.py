"""Command-line interface.

Exit codes: 0 success/accept, 1 verification reject, 2 malformed input or
usage, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, hashing
from .analysis import (
    POLICIES,
    adaptive_simulate,
    cascade_table,
    chernoff_tail,
    format_cascade_table,
    format_mixing,
    format_strengthened_table,
    format_tmto,
    mixing_stats,
    tally_run,
    tmto_penalty,
    tmto_simulate,
    to_jsonable,
    two_proportion_z,
)
from .analysis.tables import cascade_rows, format_alpha, format_ratio, mixing_rows, strengthened_rows
from .arena import ParameterError, Params
from .commitment import build_tree
from .engine import ReplayError, gen
from .prover import ProverError, prove
from .rundir import RunDirError, load_run, save_run
from .verifier import PARSE, verify
from .witness import serialize_proof

EXIT_OK, EXIT_REJECT, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3

TABLE_ALPHAS = "1/6,1/4,1/2,3/4,7/8"


class UsageError(Exception):
    pass


def _emit(args, text: str, payload) -> None:
    if args.json:
        print(json.dumps(to_jsonable(payload), indent=2, sort_keys=True))
    else:
        print(text)


def _parse_alpha(s: str) -> float:
    num, _, den = s.partition("/")
    try:
        return float(num) / float(den) if den else float(num)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None


def _alpha_list(s: str) -> list[float]:
    return [_parse_alpha(x) for x in s.split(",") if x.strip()]


def _seed(args) -> bytes:
    if getattr(args, "seed_hex", None):
        try:
            seed = bytes.fromhex(args.seed_hex)
        except ValueError:
            raise UsageError("--seed-hex is not valid hex") from None
        if len(seed) != hashing.DIGEST_SIZE:
            raise UsageError("--seed-hex must be 32 bytes")
        return seed
    if args.task_id is None or args.nonce is None:
        raise UsageError("--task-id and --nonce are required")
    return hashing.derive_seed(args.task_id.encode(), args.nonce.encode())


def cmd_gen(args) -> int:
    seed = _seed(args)
    params = Params.from_rho(args.d_hc, args.rho, d=args.d)
    run_log, arena = gen(seed, params, lean=args.lean, strict=not args.allow_toy)
    # self-audit: final root from scratch, transcript chain from the cursors
    _, r_final = build_tree(arena)
    audit = r_final == run_log.root(params.K)
    if not run_log.lean:
        audit = audit and run_log.audit_transcripts()
    if not audit:
        print("self-audit failed", file=sys.stderr)
        return EXIT_INTERNAL
    save_run(run_log, args.out, task_id=args.task_id, nonce=args.nonce)
    payload = {"T_K": run_log.final_transcript, "r_K": run_log.root(params.K),
               "N": params.N, "K": params.K, "d": params.d, "run_dir": str(args.out)}
    _emit(args, f"T_K {run_log.final_transcript.hex()}\nr_K {r_final.hex()}\n"
                f"N={params.N} K={params.K} d={params.d} -> {args.out}", payload)
    return EXIT_OK


def cmd_prove(args) -> int:
    run_log = load_run(args.run_dir)
    proof = prove(run_log, args.Q, args.R, strict=not args.allow_toy)
    data = serialize_proof(proof)
    out = Path(args.out) if args.out else Path(args.run_dir) / "proof.bin"
    out.write_bytes(data)
    payload = {"proof": str(out), "bytes": len(data), "Q": args.Q, "R": args.R,
               "opened_blocks": proof.opened_blocks()}
    _emit(args, f"proof {out} ({len(data)} bytes, Q={args.Q}, R={args.R})", payload)
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = _seed(args)
    try:
        data = Path(args.proof).read_bytes()
    except OSError as e:
        raise UsageError(str(e)) from None
    expected = None
    pinned = (args.d_hc, args.K, args.d, args.Q, args.R)
    if any(x is not None for x in pinned):
        if any(x is None for x in pinned):
            raise UsageError("expected parameters need all of --d-hc --K --d --Q --R")
        expected = Params(d_hc=args.d_hc, K=args.K, d=args.d, Q=args.Q, R=args.R)
    report = verify(data, seed, expected, strict=not args.allow_toy)
    payload = {"accepted": report.accepted, "challenge": report.challenge,
               "check": report.check, "detail": report.detail}
    _emit(args, str(report), payload)
    if report.accepted:
        return EXIT_OK
    return EXIT_USAGE if report.check == PARSE else EXIT_REJECT


def cmd_stats(args) -> int:
    if args.run_dir is not None:
        report = mixing_stats(load_run(args.run_dir))
    else:
        params = Params.from_rho(args.d_hc, args.rho, d=args.d)
        report, _ = tally_run(_seed(args), params)
    rows = {name: {"measured": m, "theory": t} for name, m, t in mixing_rows(report)}
    _emit(args, format_mixing(report), {"report": report, "display": rows})
    return EXIT_OK


def cmd_bounds(args) -> int:
    for a in args.alpha:
        if not 0 <= a < 1:
            raise UsageError(f"alpha must lie in [0, 1), got {a}")
    rows = [a for a in args.alpha if a > 0]
    table = cascade_table(rows, args.rho, args.d)
    penalties = {format_alpha(a): format_ratio(tmto_penalty(a, args.rho)) for a in args.alpha}
    tail = chernoff_tail(2 ** args.d_hc, args.d, args.rho, args.delta)
    text = "\n\n".join([
        f"cascade (rho = {format_ratio(args.rho)}, d = {args.d})\n" + format_cascade_table(table),
        "strengthened\n" + format_strengthened_table(table),
        "tmto penalty over Kd\n" + "\n".join(f"  alpha = {k}: {v}x" for k, v in penalties.items()),
        f"chernoff tail (N = 2^{args.d_hc}, delta = {args.delta:g}): {format_ratio(tail)}",
    ])
    payload = {"table": table,
               "display": {"cascade": cascade_rows(table),
                           "strengthened": strengthened_rows(table),
                           "tmto_penalty": penalties,
                           "chernoff_tail": format_ratio(tail)},
               "chernoff_tail": tail}
    _emit(args, text, payload)
    return EXIT_OK


def cmd_tmto(args) -> int:
    if not 0 <= args.alpha <= 1:
        raise UsageError(f"alpha must lie in [0, 1], got {args.alpha}")
    report = tmto_simulate(load_run(args.run_dir), args.alpha, args.seed)
    _emit(args, format_tmto(report), report)
    return EXIT_OK


def cmd_adaptive(args) -> int:
    run_log = load_run(args.run_dir)
    reports = {p: adaptive_simulate(run_log, args.alpha, p, args.seed) for p in POLICIES}
    base = reports["static"]
    lines, payload = [], {}
    for p, r in reports.items():
        z, pv = two_proportion_z(r, base)
        lines.append(f"{p:>15}  hit rate {r.hit_rate:.6f}  z {z:+.3f}  p {pv:.4f}")
        payload[p] = {"hits": r.hits, "reads": r.reads, "hit_rate": r.hit_rate, "z": z, "p": pv}
    _emit(args, "\n".join(lines), payload)
    return EXIT_OK


def cmd_bench(args) -> int:
    from . import bench

    out = {}
    text = []
    if args.d_hc:
        reports = bench.bench_steps(args.d_hc, args.rho, args.d, args.reps, max_steps=args.max_steps)
        out["steps"] = reports
        text.append(bench.format_bench(reports))
    if args.chase_bytes:
        ns = bench.bench_pointer_chase(args.chase_bytes, args.chase_steps)
        out["pointer_chase"] = {"arena_bytes": args.chase_bytes, "steps": args.chase_steps,
                                "ns_per_load": ns, "backend": bench.chase_backend()}
        text.append(f"pointer chase {args.chase_bytes} B: {ns:.2f} ns/load ({bench.chase_backend()})")
    if args.init is not None:
        s = bench.bench_init(args.init)
        out["init"] = {"d_hc": args.init, "seconds": s}
        text.append(f"init 2^{args.init} blocks: {s:.3f} s")
    _emit(args, "\n".join(text), out)
    return EXIT_OK


def _seed_flags(p, required_hint: str = "") -> None:
    p.add_argument("--task-id", help="task identifier bound into the seed" + required_hint)
    p.add_argument("--nonce", help="per-run nonce bound into the seed")
    p.add_argument("--seed-hex", help="UNSAFE: raw 32-byte seed, for test vectors only; "
                   "bypasses task binding and breaks arena isolation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posme", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(fn=fn)
        p.add_argument("--json", action="store_true", help="emit JSON instead of text")
        return p

    p = add("gen", cmd_gen, "initialize an arena and execute all steps")
    _seed_flags(p)
    p.add_argument("--d-hc", type=int, default=24)
    p.add_argument("--rho", type=float, default=4)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--out", required=True, help="run directory to write")
    p.add_argument("--lean", action="store_true", help="store only roots and transcripts")
    p.add_argument("--allow-toy", action="store_true", help="permit parameters below the security floors")

    p = add("prove", cmd_prove, "build a proof from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--Q", type=int, default=128)
    p.add_argument("--R", type=int, default=3)
    p.add_argument("--out", help="proof file (default RUN_DIR/proof.bin)")
    p.add_argument("--allow-toy", action="store_true")

    p = add("verify", cmd_verify, "verify a proof file")
    p.add_argument("proof")
    _seed_flags(p)
    for flag in ("--d-hc", "--K", "--d", "--Q", "--R"):
        p.add_argument(flag, type=int, help="expected parameter (all five or none)")
    p.add_argument("--allow-toy", action="store_true")

    p = add("stats", cmd_stats, "address mixing statistics")
    p.add_argument("run_dir", nargs="?", help="run directory; omit to stream a fresh run")
    _seed_flags(p)
    p.add_argument("--d-hc", type=int, default=16)
    p.add_argument("--rho", type=float, default=4)
    p.add_argument("--d", type=int, default=8)

    p = add("bounds", cmd_bounds, "analytic cascade and tail bounds")
    p.add_argument("--alpha", type=_alpha_list, default=_alpha_list(TABLE_ALPHAS),
                   help=f"comma-separated fractions (default {TABLE_ALPHAS})")
    p.add_argument("--rho", type=float, default=4)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--d-hc", type=int, default=24, help="arena size exponent for the tail bound")
    p.add_argument("--delta", type=float, default=1.0)

    p = add("tmto", cmd_tmto, "simulate a fixed-set storage adversary on a run")
    p.add_argument("run_dir")
    p.add_argument("--alpha", type=_parse_alpha, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = add("adaptive", cmd_adaptive, "compare adaptive storage policies on a run")
    p.add_argument("run_dir")
    p.add_argument("--alpha", type=_parse_alpha, default=0.25)
    p.add_argument("--seed", type=int, default=0)

    p = add("bench", cmd_bench, "timing benchmarks (time-dependent output)")
    p.add_argument("--d-hc", type=lambda s: [int(x) for x in s.split(",")], default=[],
                   help="comma-separated arena exponents for the step benchmark")
    p.add_argument("--rho", type=float, default=4)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--chase-bytes", type=int)
    p.add_argument("--chase-steps", type=int, default=65536)
    p.add_argument("--init", type=int, metavar="D_HC", help="time initialization of 2^D_HC blocks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (UsageError, ParameterError, RunDirError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ReplayError, ProverError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:  # noqa: BLE001
        logging.getLogger(__name__).debug("internal error", exc_info=True)
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``abcast <command> ...``."""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

from ..core.hashing import hash_bytes
from ..core.params import derive_fault_bound
from ..crypto.backends import SCHEMES, make_backend
from ..crypto.keys import write_key_files
from ..crypto.qc import (
    Blocklist,
    compact_qc_bytes,
    compact_vector_bytes,
    qc_assemble,
    qc_message,
    qc_reject_reason,
    qc_vector_aggregate,
)
from ..protocols.base import SafetyViolation
from .config import load_config, load_grid
from .quality import expected_success, quality_experiment
from .runner import ScenarioRunner, write_outputs

EXIT_SAFETY = 2
EXIT_LIVENESS = 3


def _run_one(cfg, out_dir=None):
    runner = ScenarioRunner(cfg)
    try:
        result = runner.run()
    except SafetyViolation as exc:
        sim = runner.sim
        print(
            f"SAFETY VIOLATION: {exc}\n  trace pointer: protocol={cfg.protocol} n={cfg.n} "
            f"adversary={cfg.adversary} seed={cfg.seed} t={sim.now:.4f} event={sim.events}",
            file=sys.stderr,
        )
        return None, EXIT_SAFETY
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result, 0 if result.live else EXIT_LIVENESS


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    result, code = _run_one(cfg, args.out)
    if result is None:
        return code
    rows = result.rows
    txs = sum(r.unique_new_txs for r in rows)
    print(f"{cfg.protocol} n={cfg.n} adversary={cfg.adversary} seed={cfg.seed}")
    print(f"  blocks={len(rows)} unique_txs={txs} sim_time={result.stats['sim_time']:.2f}")
    print(f"  outstanding={result.outstanding} live={result.live}")
    print(f"  trace={result.trace_digest}")
    if code == EXIT_LIVENESS:
        print("LIVENESS FAILURE: deliverable transactions left uncommitted", file=sys.stderr)
    return code


def cmd_sweep(args) -> int:
    configs = load_grid(args.grid)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["protocol", "n", "adversary", "seed", "blocks", "unique_txs", "bytes", "qc_bytes", "live", "trace"])
    worst = 0
    for cfg in configs:
        out = None
        if args.out is not None:
            out = Path(args.out) / f"{cfg.protocol}-n{cfg.n}-{cfg.adversary}-s{cfg.seed}"
        result, code = _run_one(cfg, out)
        worst = max(worst, code)
        if result is None:
            writer.writerow([cfg.protocol, cfg.n, cfg.adversary, cfg.seed, "", "", "", "", "SAFETY", ""])
            continue
        rows = result.rows
        writer.writerow([
            cfg.protocol, cfg.n, cfg.adversary, cfg.seed, len(rows),
            sum(r.unique_new_txs for r in rows), sum(r.bytes for r in result.metrics.ordered_rows()),
            sum(r.qc_bytes for r in result.metrics.ordered_rows()), result.live, result.trace_digest[:16],
        ])
    return worst


def cmd_attack_quality(args) -> int:
    abandon = args.abandon == "on"
    removal = not args.no_removal
    t0 = time.perf_counter()
    summary = quality_experiment(args.n, args.runs, abandon, removal, args.seed)
    took = time.perf_counter() - t0
    label = "abandon on" if abandon else "abandon off"
    print(f"n={args.n} runs={args.runs} {label} after-fact-removal={'on' if removal else 'off'}")
    print(f"  adversary success rate {summary.rate:.4f}  ({summary.wins}/{summary.runs})")
    print(f"  finite-n model         {expected_success(args.n, abandon, removal):.4f}")
    print(f"  mean election rounds   {summary.mean_rounds:.3f}")
    print(f"  {took:.1f}s")
    return 0


def cmd_bench_qc(args) -> int:
    n = args.n
    f = derive_fault_bound(n)
    quorum = n - f
    backend = make_backend(args.scheme, n, args.seed)
    sign_t = assemble_t = verify_t = 0.0
    qcs = []
    for r in range(args.runs):
        mid = (r % n, r + 1, hash_bytes(r.to_bytes(8, "little"), "bench"))
        msg = qc_message(mid)
        t0 = time.perf_counter()
        shares = {i: backend.sign(i, msg) for i in range(quorum)}
        t1 = time.perf_counter()
        qc = qc_assemble(mid, shares, Blocklist(), backend, quorum)
        t2 = time.perf_counter()
        ok = qc_reject_reason(qc, mid, backend, quorum) is None
        t3 = time.perf_counter()
        if qc is None or not ok:
            print("QC failed to verify", file=sys.stderr)
            return 1
        sign_t += t1 - t0
        assemble_t += t2 - t1
        verify_t += t3 - t2
        qcs.append(qc)
    runs = max(args.runs, 1)
    print(f"scheme={args.scheme} n={n} quorum={quorum} runs={args.runs}")
    print(f"  sign (per share)   {1e6 * sign_t / (runs * quorum):10.1f} us")
    print(f"  assemble           {1e6 * assemble_t / runs:10.1f} us")
    print(f"  verify             {1e6 * verify_t / runs:10.1f} us")
    print(f"  qc bytes           {qcs[0].wire_size:10d}")
    vec = qcs[:n] if len(qcs) >= n else qcs
    concat = sum(q.wire_size for q in vec)
    print(f"  vector of {len(vec)}: concatenated {concat} bytes", end="")
    if not backend.aggregatable:
        print(", scheme does not aggregate")
        return 0
    agg = qc_vector_aggregate(vec, backend)
    print(f", aggregated {agg.wire_size} bytes ({agg.wire_size / concat:.2%})")
    compact = sum(len(compact_qc_bytes(q)) for q in vec)
    packed = len(compact_vector_bytes(agg))
    print(f"  compact layout: concatenated {compact} bytes, aggregated {packed} bytes ({packed / compact:.2%})")
    return 0


def cmd_keygen(args) -> int:
    paths = write_key_files(args.out, args.scheme, args.n, args.seed)
    print(f"wrote {len(paths)} key files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="abcast", description="Asynchronous atomic broadcast simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("--config", required=True, help="scenario YAML file")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="directory for metrics.csv, ledgers and trace.digest")
    run.set_defaults(func=cmd_run)

    aq = sub.add_parser("attack-quality", help="agreement sessions under the quality attack")
    aq.add_argument("--n", type=int, required=True)
    aq.add_argument("--runs", type=int, required=True)
    aq.add_argument("--abandon", choices=("on", "off"), required=True)
    aq.add_argument("--no-removal", action="store_true", help="disable after-fact removal")
    aq.add_argument("--seed", type=int, default=0)
    aq.set_defaults(func=cmd_attack_quality)

    bq = sub.add_parser("bench-qc", help="time QC assembly and verification")
    bq.add_argument("--n", type=int, required=True)
    bq.add_argument("--scheme", required=True, choices=SCHEMES + ("bls-real",))
    bq.add_argument("--runs", type=int, required=True)
    bq.add_argument("--seed", type=int, default=0)
    bq.set_defaults(func=cmd_bench_qc)

    sw = sub.add_parser("sweep", help="run every scenario of a grid file")
    sw.add_argument("--grid", required=True)
    sw.add_argument("--out", default=None, help="write each run's outputs under this directory")
    sw.set_defaults(func=cmd_sweep)

    kg = sub.add_parser("keygen", help="deal key files, one per node")
    kg.add_argument("--n", type=int, required=True)
    kg.add_argument("--scheme", default="mock-deterministic", choices=SCHEMES + ("bls-real",))
    kg.add_argument("--out", required=True)
    kg.add_argument("--seed", type=int, default=0)
    kg.set_defaults(func=cmd_keygen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

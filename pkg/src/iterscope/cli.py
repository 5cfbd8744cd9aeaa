"""Command line interface.

    iterscope serve     run the profiling daemon for one entry file
    iterscope profile   one-shot key metrics + top-level breakdown as JSON
    iterscope predict   predicted batch size for a throughput/memory target
    iterscope gen-trace write a synthetic trace with known ground truth

Exit codes: 0 success, 1 usage error, 2 backend/operation failure,
3 could not bind a listening port.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from pathlib import Path

from . import breakdown as bd
from . import protocol
from .daemon import BackendError, BindError, ProfilerDaemon, SessionConfig
from .model import compute_throughput, untracked_memory, untracked_run_time
from .mutate import MutationError
from .predict import (
    PredictError,
    batch_from_memory,
    batch_from_throughput,
    fit_linear,
    memory_at,
    plan_batches,
    throughput_at,
)
from .traceio import SyntheticSpec, TraceFormatError, generate_synthetic_trace, read_trace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BACKEND = 2
EXIT_BIND = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _env_port(name: str, fallback: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        return fallback


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iterscope", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the profiling daemon")
    serve.add_argument("--root", required=True, help="project root directory")
    serve.add_argument("--entry", required=True, help="entry file (relative to root)")
    backend = serve.add_mutually_exclusive_group(required=True)
    backend.add_argument("--trace", help="replay this recorded trace file")
    backend.add_argument("--collector", help="collector command; '--batch N' is appended per run")
    serve.add_argument("--port", type=int, default=_env_port("ITERSCOPE_PORT", protocol.DEFAULT_TCP_PORT))
    serve.add_argument("--ws-port", type=int, default=_env_port("ITERSCOPE_WS_PORT", protocol.DEFAULT_WS_PORT))
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--provider", default="input_provider", help="input provider function name")
    serve.add_argument("--kwarg", default="batch_size", help="batch size keyword argument name")
    serve.add_argument("--capacity", type=int, default=None, help="device memory capacity override, bytes")

    profile = sub.add_parser("profile", help="print key metrics and the top-level breakdown")
    profile.add_argument("--trace", required=True)
    profile.add_argument("--batch", type=int, required=True)

    predict = sub.add_parser("predict", help="predict the batch size for a performance target")
    predict.add_argument("--trace", required=True)
    target = predict.add_mutually_exclusive_group(required=True)
    target.add_argument("--target-throughput", type=float, help="samples per second")
    target.add_argument("--target-memory", type=float, help="peak memory budget, bytes")

    gen = sub.add_parser("gen-trace", help="generate a synthetic trace")
    gen.add_argument("--a", type=float, required=True, help="run time slope, ms per sample")
    gen.add_argument("--b", type=float, required=True, help="run time intercept, ms")
    gen.add_argument("--c", type=int, required=True, help="memory slope, bytes per sample")
    gen.add_argument("--d", type=int, required=True, help="memory intercept, bytes")
    gen.add_argument("--ops", type=int, default=3, help="operation count")
    gen.add_argument("--depth", type=int, default=3, help="breakdown tree depth (>= 2)")
    gen.add_argument("--noise", type=float, default=0.0, help="noise fraction in [0, 0.1]")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--capacity", type=int, required=True, help="device capacity, bytes")
    gen.add_argument("--batches", required=True, help="comma-separated batch sizes, e.g. 32,48,64")
    gen.add_argument("--out", required=True, help="output path, or - for stdout")
    return parser


def _fit_from_trace(trace_path: str):
    """Fit both models from a recorded trace, anchored at its smallest batch."""
    contents = read_trace(Path(trace_path).read_bytes())
    if not contents.snapshots:
        raise BackendError(f"{trace_path} holds no profiling data")
    by_batch = contents.by_batch()
    anchor = min(by_batch)
    plan = plan_batches(anchor, set(contents.oom_batches))
    missing = [b for b in plan.batches if b not in by_batch]
    if missing:
        plan = plan_batches(anchor, set(contents.oom_batches) | set(missing))
        missing = [b for b in plan.batches if b not in by_batch]
    if missing:
        raise BackendError(f"trace lacks data for planned batches {sorted(missing)}")
    snaps = [by_batch[b] for b in plan.batches]
    run_time_model = fit_linear(
        [(s.iteration.batch_size, s.iteration.per_iteration_ms) for s in snaps], role="run_time"
    )
    memory_model = fit_linear(
        [(s.iteration.batch_size, float(s.iteration.peak_memory_bytes)) for s in snaps], role="memory"
    )
    if run_time_model.degenerate or memory_model.degenerate:
        raise BackendError("degenerate fit: non-positive slope, predictions disabled")
    return contents, plan, run_time_model, memory_model


def _cmd_profile(args) -> int:
    contents = read_trace(Path(args.trace).read_bytes())
    snap = contents.by_batch().get(args.batch)
    if snap is None:
        print(f"trace has no data for batch size {args.batch}", file=sys.stderr)
        return EXIT_BACKEND
    tree = bd.build_tree(snap.operations, snap.weights)
    untracked_ms, _ = untracked_run_time(snap)
    untracked_bytes, _ = untracked_memory(snap)
    top_level = [
        {
            "kind": child.kind,
            "display_name": child.display_name,
            "file": child.frame.file_path,
            "line": child.frame.line_number,
            "run_time_ms": child.run_time_ms,
            "weight_bytes": child.weight_bytes,
            "activation_bytes": child.activation_bytes,
            "leaf_count": child.leaf_count,
        }
        for child in tree.children
    ]
    out = {
        "key_metrics": {
            "batch_size": snap.iteration.batch_size,
            "iterations_timed": snap.iteration.iterations_timed,
            "per_iteration_ms": snap.iteration.per_iteration_ms,
            "throughput_samples_per_s": compute_throughput(snap.iteration),
            "peak_memory_bytes": snap.iteration.peak_memory_bytes,
            "capacity_bytes": snap.device.memory_capacity_bytes,
            "weight_bytes": snap.weight_bytes_total,
            "activation_bytes": snap.activation_bytes_total,
            "untracked_run_time_ms": untracked_ms,
            "untracked_memory_bytes": untracked_bytes,
        },
        "breakdown": top_level,
    }
    sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_predict(args) -> int:
    contents, plan, run_time_model, memory_model = _fit_from_trace(args.trace)
    capacity = contents.snapshots[0].device.memory_capacity_bytes
    if args.target_throughput is not None:
        batch = batch_from_throughput(run_time_model, args.target_throughput)
    else:
        batch = batch_from_memory(memory_model, args.target_memory)
    peak = memory_at(memory_model, batch)
    out = {
        "batch_size": batch,
        "throughput_samples_per_s": throughput_at(run_time_model, batch),
        "peak_memory_bytes": int(round(peak)),
        "feasible": peak <= capacity,
        "fit_batches": list(plan.batches),
    }
    sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_gen_trace(args) -> int:
    try:
        batches = [int(part) for part in args.batches.split(",") if part.strip()]
    except ValueError:
        print(f"--batches must be comma-separated integers, got {args.batches!r}", file=sys.stderr)
        return EXIT_USAGE
    spec = SyntheticSpec(
        a_ms_per_sample=args.a,
        b_ms=args.b,
        c_bytes_per_sample=args.c,
        d_bytes=args.d,
        op_count=args.ops,
        tree_depth=args.depth,
        noise_fraction=args.noise,
        seed=args.seed,
        capacity_bytes=args.capacity,
    )
    data = generate_synthetic_trace(spec, batches)
    if args.out == "-":
        sys.stdout.buffer.write(data)
    else:
        Path(args.out).write_bytes(data)
    return EXIT_OK


def _cmd_serve(args) -> int:
    config = SessionConfig(
        project_root=Path(args.root),
        entry_file=Path(args.entry),
        trace_path=Path(args.trace) if args.trace else None,
        collector_cmd=args.collector,
        provider_name=args.provider,
        kwarg_name=args.kwarg,
        capacity_override=args.capacity,
    )

    async def serve() -> int:
        daemon = ProfilerDaemon(config, tcp_port=args.port, ws_port=args.ws_port, host=args.host)
        try:
            await daemon.start()
        except BindError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_BIND
        print(
            f"iterscope daemon: session {daemon.session_id} on "
            f"tcp://{args.host}:{args.port} ws://{args.host}:{args.ws_port}",
            file=sys.stderr,
        )
        try:
            await daemon.serve_forever()
        except asyncio.CancelledError:
            pass
        finally:
            await daemon.stop()
        return EXIT_OK

    try:
        return asyncio.run(serve())
    except KeyboardInterrupt:
        return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "profile":
            return _cmd_profile(args)
        if args.command == "predict":
            return _cmd_predict(args)
        if args.command == "gen-trace":
            return _cmd_gen_trace(args)
    except (BackendError, TraceFormatError, PredictError, MutationError, bd.BreakdownError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_BACKEND
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

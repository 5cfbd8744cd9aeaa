"""Collector command line: profile one batch size, emit one trace.

    iterscope-collector --entry FILE --batch N [--reps K] [--capacity BYTES] --out FILE|-

Running out of memory is data, not failure: the trace then carries an oom
record and the exit code stays 0. Exit 2 means the entry file could not be
used (missing provider, import error).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .measure import collect, trace_lines
from .providers import ProviderError, load_providers


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iterscope-collector", description=__doc__)
    parser.add_argument("--entry", required=True, help="entry file defining the three providers")
    parser.add_argument("--batch", type=int, required=True, help="batch size to profile")
    parser.add_argument("--reps", type=int, default=3, help="repetitions per operation timing")
    parser.add_argument("--capacity", type=int, default=None, help="device memory capacity override, bytes")
    parser.add_argument("--out", default="-", help="output trace path, or - for stdout")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        bundle = load_providers(args.entry)
    except ProviderError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    run = collect(bundle, batch_size=args.batch, repetitions=args.reps, capacity_bytes=args.capacity)
    data = trace_lines(run)
    if args.out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(args.out).write_bytes(data)
    return 0


if __name__ == "__main__":
    sys.exit(main())

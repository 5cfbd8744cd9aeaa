"""Trace file format (.trace.jsonl) and the synthetic trace generator.

A trace is UTF-8 text, one JSON object per line, LF terminated, with a
`type` field selecting the record variant:

    meta       device_name, memory_capacity_bytes, entry_file
    iteration  batch_size, iterations_timed, total_time_ms, peak_memory_bytes
    weight     name, bytes, stack
    operation  name, run_time_ms, activation_bytes, stack
    oom        batch_size

The meta record comes first and appears exactly once. An iteration record
opens the group for its batch size; the weight and operation records that
follow belong to that group. Writers order records meta, then per batch
ascending (iteration, weights, operations), then oom records, so a trace
round-trips byte-for-byte.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import IO, Iterable

from .model import (
    DeviceSpec,
    IterationMetrics,
    OperationMeasurement,
    ProfileSnapshot,
    StackFrame,
    WeightMeasurement,
    validate_snapshot,
)


class TraceFormatError(ValueError):
    """Malformed trace input; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TraceContents:
    """Parsed trace: one snapshot per batch size plus the failed batches."""

    snapshots: tuple[ProfileSnapshot, ...]
    oom_batches: tuple[int, ...]

    def by_batch(self) -> dict[int, ProfileSnapshot]:
        return {s.iteration.batch_size: s for s in self.snapshots}


def _frame_to_json(frame: StackFrame) -> dict:
    return {"file": frame.file_path, "line": frame.line_number}


def _frames_from_json(raw, line: int) -> tuple[StackFrame, ...]:
    if not isinstance(raw, list) or not raw:
        raise TraceFormatError("stack must be a non-empty list", line)
    frames = []
    for entry in raw:
        if not isinstance(entry, dict) or "file" not in entry or "line" not in entry:
            raise TraceFormatError("stack entries need 'file' and 'line'", line)
        frames.append(StackFrame(str(entry["file"]), int(entry["line"])))
    return tuple(frames)


def _require(record: dict, fields: dict[str, type], line: int) -> None:
    for name, kind in fields.items():
        if name not in record:
            raise TraceFormatError(f"{record.get('type', '?')} record missing field {name!r}", line)
        value = record[name]
        if kind is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise TraceFormatError(f"field {name!r} must be a number", line)
        elif not isinstance(value, kind) or isinstance(value, bool):
            raise TraceFormatError(f"field {name!r} must be {kind.__name__}", line)


def read_trace(source: bytes | str | IO) -> TraceContents:
    """Parse a trace, grouping records into one snapshot per batch size."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data

    meta: dict | None = None
    groups: dict[int, dict] = {}
    current: dict | None = None
    ooms: list[int] = []

    lines = [ln for ln in text.split("\n")]
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TraceFormatError("trace is empty")

    for lineno, raw in enumerate(lines, start=1):
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(record, dict) or "type" not in record:
            raise TraceFormatError("record must be a JSON object with a 'type' field", lineno)
        kind = record["type"]

        if kind == "meta":
            if meta is not None:
                raise TraceFormatError("duplicate meta record", lineno)
            if lineno != 1:
                raise TraceFormatError("meta must be first", lineno)
            _require(record, {"device_name": str, "memory_capacity_bytes": int, "entry_file": str}, lineno)
            meta = record
            continue
        if meta is None:
            raise TraceFormatError("meta must be first", lineno)

        if kind == "iteration":
            _require(
                record,
                {"batch_size": int, "iterations_timed": int, "total_time_ms": float, "peak_memory_bytes": int},
                lineno,
            )
            batch = record["batch_size"]
            if batch in groups:
                raise TraceFormatError(f"duplicate iteration record for batch {batch}", lineno)
            current = {"iteration": record, "weights": [], "operations": [], "line": lineno}
            groups[batch] = current
        elif kind == "weight":
            _require(record, {"name": str, "bytes": int, "stack": list}, lineno)
            if current is None:
                raise TraceFormatError("weight record before any iteration record", lineno)
            current["weights"].append(
                WeightMeasurement(record["name"], record["bytes"], _frames_from_json(record["stack"], lineno))
            )
        elif kind == "operation":
            _require(record, {"name": str, "run_time_ms": float, "activation_bytes": int, "stack": list}, lineno)
            if current is None:
                raise TraceFormatError("operation record before any iteration record", lineno)
            current["operations"].append(
                OperationMeasurement(
                    record["name"],
                    float(record["run_time_ms"]),
                    record["activation_bytes"],
                    _frames_from_json(record["stack"], lineno),
                )
            )
        elif kind == "oom":
            _require(record, {"batch_size": int}, lineno)
            ooms.append(record["batch_size"])
        else:
            raise TraceFormatError(f"unknown record type {kind!r}", lineno)

    if not groups and not ooms:
        raise TraceFormatError("trace has no iteration records")

    device = DeviceSpec(meta["device_name"], meta["memory_capacity_bytes"])
    snapshots = []
    for batch in sorted(groups):
        group = groups[batch]
        it = group["iteration"]
        snapshot = ProfileSnapshot(
            iteration=IterationMetrics(
                batch_size=it["batch_size"],
                iterations_timed=it["iterations_timed"],
                total_time_ms=float(it["total_time_ms"]),
                peak_memory_bytes=it["peak_memory_bytes"],
            ),
            operations=tuple(group["operations"]),
            weights=tuple(group["weights"]),
            device=device,
            entry_file=meta["entry_file"],
        )
        problems = validate_snapshot(snapshot)
        if problems:
            raise TraceFormatError(f"invalid snapshot for batch {batch}: {problems[0]}", group["line"])
        snapshots.append(snapshot)
    return TraceContents(tuple(snapshots), tuple(ooms))


def _dump(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False)


def write_trace(snapshots: Iterable[ProfileSnapshot], oom_batches: Iterable[int] = ()) -> bytes:
    """Serialize snapshots in canonical order; read_trace inverts this exactly."""
    snapshots = sorted(snapshots, key=lambda s: s.iteration.batch_size)
    if not snapshots:
        raise TraceFormatError("cannot write a trace with no snapshots")
    first = snapshots[0]
    out: list[str] = [
        _dump(
            {
                "type": "meta",
                "device_name": first.device.name,
                "memory_capacity_bytes": first.device.memory_capacity_bytes,
                "entry_file": first.entry_file,
            }
        )
    ]
    for snap in snapshots:
        it = snap.iteration
        out.append(
            _dump(
                {
                    "type": "iteration",
                    "batch_size": it.batch_size,
                    "iterations_timed": it.iterations_timed,
                    "total_time_ms": it.total_time_ms,
                    "peak_memory_bytes": it.peak_memory_bytes,
                }
            )
        )
        for w in snap.weights:
            out.append(
                _dump(
                    {
                        "type": "weight",
                        "name": w.name,
                        "bytes": w.size_bytes,
                        "stack": [_frame_to_json(f) for f in w.stack],
                    }
                )
            )
        for op in snap.operations:
            out.append(
                _dump(
                    {
                        "type": "operation",
                        "name": op.name,
                        "run_time_ms": op.run_time_ms,
                        "activation_bytes": op.activation_bytes,
                        "stack": [_frame_to_json(f) for f in op.stack],
                    }
                )
            )
    for batch in sorted(oom_batches):
        out.append(_dump({"type": "oom", "batch_size": batch}))
    return ("\n".join(out) + "\n").encode("utf-8")


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic workload with known linear ground truth.

    Iteration time per batch x is (a*x + b) ms and peak memory is (c*x + d)
    bytes, each scaled by one seeded noise factor drawn per trace from
    uniform(-noise_fraction, +noise_fraction). Per-operation records stay
    noiseless: 90% of time and memory is split across the operations with
    strictly descending shares, the rest is left untracked.
    """

    a_ms_per_sample: float
    b_ms: float
    c_bytes_per_sample: int
    d_bytes: int
    op_count: int = 3
    tree_depth: int = 3
    noise_fraction: float = 0.0
    seed: int = 0
    capacity_bytes: int = 8 << 30

    ENTRY_FILE = "train.py"

    def validate(self) -> None:
        if self.a_ms_per_sample <= 0 or self.b_ms <= 0:
            raise ValueError("a_ms_per_sample and b_ms must be positive")
        if self.c_bytes_per_sample <= 0 or self.d_bytes <= 0:
            raise ValueError("c_bytes_per_sample and d_bytes must be positive")
        if self.op_count < 1:
            raise ValueError("op_count must be >= 1")
        if self.tree_depth < 2:
            raise ValueError("tree_depth must be >= 2 (root plus operation leaves)")
        if not 0.0 <= self.noise_fraction <= 0.1:
            raise ValueError("noise_fraction must be in [0, 0.1]")
        if self.capacity_bytes <= 0:
            raise ValueError("capacity_bytes must be positive")

    def iteration_time_ms(self, batch: int) -> float:
        return self.a_ms_per_sample * batch + self.b_ms

    def peak_bytes(self, batch: int) -> float:
        return self.c_bytes_per_sample * batch + self.d_bytes

    def throughput(self, batch: int) -> float:
        return 1000.0 * batch / self.iteration_time_ms(batch)

    def fits(self, batch: int) -> bool:
        return self.peak_bytes(batch) <= self.capacity_bytes


def _descending_shares(total: int, count: int) -> list[int]:
    # op i of n gets 2(n-i+1)/(n(n+1)); rounding remainder goes to op 1 so
    # the shares stay strictly descending and sum exactly to `total`.
    denom = count * (count + 1)
    shares = [total * 2 * (count - i + 1) // denom for i in range(1, count + 1)]
    shares[0] += total - sum(shares)
    return shares


def _op_stack(spec: SyntheticSpec, index: int) -> tuple[StackFrame, ...]:
    frames = [StackFrame(SyntheticSpec.ENTRY_FILE, 5)]
    for level in range(1, spec.tree_depth):
        frames.append(StackFrame("model.py", 100 * index + level))
    return tuple(frames)


def synthetic_snapshot(spec: SyntheticSpec, batch: int, noise_time: float, noise_mem: float) -> ProfileSnapshot:
    n = spec.op_count
    peak_int = spec.c_bytes_per_sample * batch + spec.d_bytes

    total_time_ms = 3.0 * (spec.iteration_time_ms(batch) * (1.0 + noise_time))
    peak_bytes = peak_int + int(round(peak_int * noise_mem))

    tracked_time = 0.9 * spec.iteration_time_ms(batch)
    time_fracs = [2 * (n - i + 1) / (n * (n + 1)) for i in range(1, n + 1)]
    weight_total = 9 * spec.d_bytes // 10
    activation_total = 9 * peak_int // 10 - weight_total
    act_shares = _descending_shares(activation_total, n)
    weight_shares = _descending_shares(weight_total, n)

    operations = []
    weights = []
    for i in range(1, n + 1):
        stack = _op_stack(spec, i)
        operations.append(
            OperationMeasurement(
                name=f"op{i}",
                run_time_ms=tracked_time * time_fracs[i - 1],
                activation_bytes=act_shares[i - 1],
                stack=stack,
            )
        )
        weights.append(WeightMeasurement(name=f"op{i}.weight", size_bytes=weight_shares[i - 1], stack=stack))

    return ProfileSnapshot(
        iteration=IterationMetrics(
            batch_size=batch,
            iterations_timed=3,
            total_time_ms=total_time_ms,
            peak_memory_bytes=peak_bytes,
        ),
        operations=tuple(operations),
        weights=tuple(weights),
        device=DeviceSpec("synthetic-gpu", spec.capacity_bytes),
        entry_file=SyntheticSpec.ENTRY_FILE,
    )


def generate_synthetic_trace(spec: SyntheticSpec, batch_sizes: Iterable[int]) -> bytes:
    """Emit a deterministic trace for the requested batch sizes.

    Batches whose noiseless peak exceeds the capacity become oom records.
    The same spec and seed always produce byte-identical output.
    """
    spec.validate()
    batches = list(batch_sizes)
    if not batches:
        raise ValueError("batch_sizes must not be empty")
    if len(set(batches)) != len(batches):
        raise ValueError("batch_sizes must be distinct")
    if any(b < 1 for b in batches):
        raise ValueError("batch_sizes must be >= 1")

    rng = random.Random(spec.seed)
    noise_time = rng.uniform(-spec.noise_fraction, spec.noise_fraction)
    noise_mem = rng.uniform(-spec.noise_fraction, spec.noise_fraction)

    snapshots = []
    ooms = []
    for batch in sorted(batches):
        if not spec.fits(batch):
            ooms.append(batch)
            continue
        snapshots.append(synthetic_snapshot(spec, batch, noise_time, noise_mem))
    if not snapshots:
        raise TraceFormatError(f"no requested batch fits in {spec.capacity_bytes} bytes")
    return write_trace(snapshots, ooms)

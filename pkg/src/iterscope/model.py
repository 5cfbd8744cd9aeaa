"""Measurement data model shared by every other module.

A profiling run of one batch size is captured as a ProfileSnapshot: the
timed-iteration aggregates, per-operation and per-weight measurements with
their call stacks, and the device the run happened on. All types here are
frozen; once a snapshot is built it can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class StackFrame:
    """One call-stack entry: a file (relative path) and a 1-based line."""

    file_path: str
    line_number: int

    def label(self) -> str:
        return f"{self.file_path}:{self.line_number}"


@dataclass(frozen=True)
class OperationMeasurement:
    """A single compute step with its combined forward+backward run time.

    The stack is ordered outermost first, so the first frame is where the
    model was invoked and the last frame is the operation's own call site.
    """

    name: str
    run_time_ms: float
    activation_bytes: int
    stack: tuple[StackFrame, ...]


@dataclass(frozen=True)
class WeightMeasurement:
    """Memory held by one learned parameter, with its creation stack."""

    name: str
    size_bytes: int
    stack: tuple[StackFrame, ...]


@dataclass(frozen=True)
class IterationMetrics:
    """Aggregate timing/memory of the timed training iterations."""

    batch_size: int
    iterations_timed: int
    total_time_ms: float
    peak_memory_bytes: int

    @property
    def per_iteration_ms(self) -> float:
        return self.total_time_ms / self.iterations_timed


@dataclass(frozen=True)
class DeviceSpec:
    name: str
    memory_capacity_bytes: int


@dataclass(frozen=True)
class ProfileSnapshot:
    """One complete profiling result for a single batch size."""

    iteration: IterationMetrics
    operations: tuple[OperationMeasurement, ...] = field(default_factory=tuple)
    weights: tuple[WeightMeasurement, ...] = field(default_factory=tuple)
    device: DeviceSpec = DeviceSpec("unknown", 1)
    entry_file: str = ""

    @property
    def weight_bytes_total(self) -> int:
        return sum(w.size_bytes for w in self.weights)

    @property
    def activation_bytes_total(self) -> int:
        return sum(op.activation_bytes for op in self.operations)


def compute_throughput(iteration: IterationMetrics) -> float:
    """Samples per second: iterations_timed * batch_size over total time."""
    return iteration.iterations_timed * iteration.batch_size * 1000.0 / iteration.total_time_ms


def untracked_run_time(snapshot: ProfileSnapshot) -> tuple[float, bool]:
    """Per-iteration time not attributed to any operation.

    Measurement jitter can push the operation sum past the iteration time;
    the negative remainder is clamped to 0 and flagged instead of erroring.
    """
    per_iteration = snapshot.iteration.per_iteration_ms
    tracked = math.fsum(op.run_time_ms for op in snapshot.operations)
    remainder = per_iteration - tracked
    if remainder < 0:
        return 0.0, True
    return remainder, False


def untracked_memory(snapshot: ProfileSnapshot) -> tuple[int, bool]:
    """Peak memory not attributed to weights or activations, clamped at 0."""
    tracked = snapshot.weight_bytes_total + snapshot.activation_bytes_total
    remainder = snapshot.iteration.peak_memory_bytes - tracked
    if remainder < 0:
        return 0, True
    return remainder, False


def _check_stack(owner: str, stack: tuple[StackFrame, ...], problems: list[str]) -> None:
    if not stack:
        problems.append(f"{owner}: stack is empty")
        return
    for frame in stack:
        if not frame.file_path:
            problems.append(f"{owner}: frame has empty file_path")
        if frame.line_number < 1:
            problems.append(f"{owner}: frame {frame.file_path} has line_number {frame.line_number} < 1")


def validate_snapshot(snapshot: ProfileSnapshot) -> list[str]:
    """Return a description of every invariant violation (empty when valid).

    Violations are data, not failures: collectors and the trace reader use
    this to report bad measurements with context instead of raising.
    """
    problems: list[str] = []
    it = snapshot.iteration
    if it.batch_size < 1:
        problems.append(f"iteration: batch_size {it.batch_size} < 1")
    if it.iterations_timed < 1:
        problems.append(f"iteration: iterations_timed {it.iterations_timed} < 1")
    if not (it.total_time_ms > 0 and math.isfinite(it.total_time_ms)):
        problems.append(f"iteration: total_time_ms {it.total_time_ms} is not a positive finite number")
    if it.peak_memory_bytes <= 0:
        problems.append(f"iteration: peak_memory_bytes {it.peak_memory_bytes} <= 0")
    if snapshot.device.memory_capacity_bytes <= 0:
        problems.append(f"device {snapshot.device.name!r}: memory_capacity_bytes <= 0")

    for op in snapshot.operations:
        if not math.isfinite(op.run_time_ms) or op.run_time_ms < 0:
            problems.append(f"operation {op.name!r}: run_time_ms {op.run_time_ms} is not a non-negative finite number")
        if op.activation_bytes < 0:
            problems.append(f"operation {op.name!r}: activation_bytes {op.activation_bytes} < 0")
        _check_stack(f"operation {op.name!r}", op.stack, problems)
    for w in snapshot.weights:
        if w.size_bytes < 0:
            problems.append(f"weight {w.name!r}: size_bytes {w.size_bytes} < 0")
        _check_stack(f"weight {w.name!r}", w.stack, problems)

    # Operations must agree on the outermost frame (the model invocation
    # site); weight stacks are creation stacks and are exempt.
    roots = {op.stack[0] for op in snapshot.operations if op.stack}
    if len(roots) > 1:
        listed = ", ".join(sorted(f.label() for f in roots))
        problems.append(f"operations disagree on the outermost frame: {listed}")
    return problems

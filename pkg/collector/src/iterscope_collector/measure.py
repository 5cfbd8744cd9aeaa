"""Interception and measurement of one profiling run.

Weight allocations are caught by patching parameter registration while the
model is being built. Operations are the leaf torch modules; a forward hook
captures each call's inputs, output sizes, and project-level call stack
during one interception pass, then every captured call is re-run
`repetitions` times in isolation (forward + backward) and the median time is
reported, which amortizes hook and timer overhead. Throughput comes from
timing three consecutive uninstrumented iterations.
"""

from __future__ import annotations

import json
import os
import time
import traceback
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median

import torch

from .providers import ProviderBundle

TIMED_ITERATIONS = 3


class OutOfMemory(RuntimeError):
    """Raised internally when the run cannot fit; reported as an oom record."""


@dataclass
class CapturedOp:
    name: str
    stack: list[tuple[str, int]]
    inputs: list
    activation_bytes: int
    run_time_ms: float = 0.0


@dataclass
class RunMeasurements:
    device_name: str
    capacity_bytes: int
    entry_file: str
    batch_size: int
    total_time_ms: float = 0.0
    peak_memory_bytes: int = 0
    weights: list = field(default_factory=list)  # (name, bytes, stack)
    operations: list[CapturedOp] = field(default_factory=list)
    oom: bool = False


def _project_stack(project_root: Path) -> list[tuple[str, int]]:
    """Frames inside the project, outermost first, as (relative path, line)."""
    frames = []
    for entry in traceback.extract_stack():
        path = Path(entry.filename)
        try:
            rel = path.resolve().relative_to(project_root)
        except ValueError:
            continue
        frames.append((str(rel), entry.lineno))
    return frames


def _tensor_bytes(value) -> int:
    if torch.is_tensor(value):
        return value.numel() * value.element_size()
    if isinstance(value, (list, tuple)):
        return sum(_tensor_bytes(v) for v in value)
    return 0


def _flatten_tensors(value) -> list:
    if torch.is_tensor(value):
        return [value]
    if isinstance(value, (list, tuple)):
        out = []
        for v in value:
            out.extend(_flatten_tensors(v))
        return out
    return []


@contextmanager
def _capture_weight_stacks(project_root: Path, registry: dict):
    original = torch.nn.Module.register_parameter

    def patched(module, name, param):
        if param is not None:
            registry[id(param)] = _project_stack(project_root)
        return original(module, name, param)

    torch.nn.Module.register_parameter = patched
    try:
        yield
    finally:
        torch.nn.Module.register_parameter = original


def _leaf_modules(model):
    for qualname, module in model.named_modules():
        if not any(module.children()):
            yield qualname or type(module).__name__, module


def _time_op_isolated(module, inputs, repetitions: int) -> float:
    """Median forward+backward wall time of one captured call, in ms."""
    times = []
    for _ in range(max(1, repetitions)):
        rerun = []
        for value in inputs:
            clone = value.detach().clone()
            if clone.is_floating_point():
                clone.requires_grad_(True)
            rerun.append(clone)
        start = time.perf_counter()
        out = module(*rerun)
        grads = [t for t in _flatten_tensors(out) if t.is_floating_point() and t.requires_grad]
        if grads:
            torch.autograd.backward(grads, [torch.ones_like(t) for t in grads])
        times.append((time.perf_counter() - start) * 1000.0)
        module.zero_grad(set_to_none=True)
    return median(times)


def _system_memory_bytes() -> int:
    try:
        return os.sysconf("SC_PHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError):
        return 8 << 30


def collect(
    bundle: ProviderBundle,
    batch_size: int,
    repetitions: int = 3,
    capacity_bytes: int | None = None,
) -> RunMeasurements:
    project_root = bundle.entry_path.parent
    entry_rel = bundle.entry_path.name
    use_cuda = torch.cuda.is_available()
    if capacity_bytes is None:
        if use_cuda:
            capacity_bytes = torch.cuda.get_device_properties(0).total_memory
        else:
            capacity_bytes = _system_memory_bytes()
    device_name = torch.cuda.get_device_name(0) if use_cuda else "cpu"

    run = RunMeasurements(
        device_name=device_name,
        capacity_bytes=capacity_bytes,
        entry_file=entry_rel,
        batch_size=batch_size,
    )

    bundle.force_batch_size(batch_size)
    weight_stacks: dict[int, list] = {}
    try:
        with _capture_weight_stacks(project_root, weight_stacks):
            model = bundle.model()

        for name, param in model.named_parameters():
            stack = weight_stacks.get(id(param)) or [(entry_rel, 1)]
            run.weights.append((name, param.numel() * param.element_size(), stack))

        step = bundle.iteration(model)

        captured: list[CapturedOp] = []
        call_counts: dict[str, int] = {}
        hooks = []

        def make_hook(qualname):
            def hook(module, inputs, output):
                call_counts[qualname] = call_counts.get(qualname, 0) + 1
                count = call_counts[qualname]
                name = qualname if count == 1 else f"{qualname}#{count}"
                captured.append(
                    CapturedOp(
                        name=name,
                        stack=_project_stack(project_root),
                        inputs=[t.detach().clone() for t in _flatten_tensors(inputs)],
                        activation_bytes=_tensor_bytes(output),
                    )
                )

            return hook

        for qualname, module in _leaf_modules(model):
            hooks.append(module.register_forward_hook(make_hook(qualname)))
        try:
            step()  # interception pass; also serves as warmup
        finally:
            for handle in hooks:
                handle.remove()

        modules_by_name = dict(_leaf_modules(model))
        for op in captured:
            base = op.name.split("#", 1)[0]
            op.run_time_ms = _time_op_isolated(modules_by_name[base], op.inputs, repetitions)

        if use_cuda:
            torch.cuda.reset_peak_memory_stats()
        start = time.perf_counter()
        for _ in range(TIMED_ITERATIONS):
            step()
        run.total_time_ms = (time.perf_counter() - start) * 1000.0

        weights_total = sum(size for _, size, _ in run.weights)
        activations_total = sum(op.activation_bytes for op in captured)
        if use_cuda:
            measured = torch.cuda.max_memory_allocated()
            run.peak_memory_bytes = max(measured, weights_total + activations_total)
        else:
            # no peak-allocation counter on CPU: account for parameters,
            # their gradients, and the live activations
            run.peak_memory_bytes = 2 * weights_total + activations_total

        run.operations = captured
        if run.peak_memory_bytes > capacity_bytes:
            raise OutOfMemory(f"estimated peak {run.peak_memory_bytes} exceeds capacity {capacity_bytes}")
    except OutOfMemory:
        run.oom = True
    except (RuntimeError, MemoryError) as exc:
        if "out of memory" not in str(exc).lower() and not isinstance(exc, MemoryError):
            raise
        run.oom = True
    return run


def _frames_json(stack) -> list[dict]:
    return [{"file": path, "line": line} for path, line in stack]


def trace_lines(run: RunMeasurements) -> bytes:
    """Render one run as trace records (meta first, oom runs have no data)."""
    records = [
        {
            "type": "meta",
            "device_name": run.device_name,
            "memory_capacity_bytes": run.capacity_bytes,
            "entry_file": run.entry_file,
        }
    ]
    if run.oom:
        records.append({"type": "oom", "batch_size": run.batch_size})
    else:
        records.append(
            {
                "type": "iteration",
                "batch_size": run.batch_size,
                "iterations_timed": TIMED_ITERATIONS,
                "total_time_ms": run.total_time_ms,
                "peak_memory_bytes": run.peak_memory_bytes,
            }
        )
        for name, size, stack in run.weights:
            records.append({"type": "weight", "name": name, "bytes": size, "stack": _frames_json(stack)})
        for op in run.operations:
            records.append(
                {
                    "type": "operation",
                    "name": op.name,
                    "run_time_ms": op.run_time_ms,
                    "activation_bytes": op.activation_bytes,
                    "stack": _frames_json(op.stack),
                }
            )
    return ("\n".join(json.dumps(r, separators=(",", ":"), ensure_ascii=False) for r in records) + "\n").encode()

"""Linear performance models over batch size, sampling plans, and what-ifs.

Per-iteration run time is modeled as a*x + b (ms) and peak memory as
c*x + d (bytes); throughput follows as 1000*x / (a*x + b) samples/s with
asymptote 1000/a. Both models are fitted with ordinary least squares over
exactly three sampled batch sizes, and the inverse queries here are what
drive draggable bars and batch-size mutation.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

from .breakdown import BreakdownNode

RUN_TIME_ROLE = "run_time"
MEMORY_ROLE = "memory"

UP = "up"
DOWN = "down"


class PredictError(ValueError):
    pass


@dataclass(frozen=True)
class LinearModel:
    """slope/intercept fit plus the batch sizes it was fitted on.

    A non-positive slope never occurs on a well-behaved workload; it is kept
    (flagged degenerate) so callers can disable dragging instead of failing
    the whole analysis.
    """

    slope: float
    intercept: float
    fit_batches: tuple[int, ...]
    role: str

    @property
    def degenerate(self) -> bool:
        return self.slope <= 0


@dataclass(frozen=True)
class BatchSamplePlan:
    batches: tuple[int, int, int]
    direction: str  # UP | DOWN


@dataclass(frozen=True)
class Prediction:
    batch_size: int
    throughput_samples_per_s: float
    peak_memory_bytes: int
    feasible: bool


def fit_linear(samples: list[tuple[int, float]], role: str) -> LinearModel:
    """Ordinary least squares y = slope*x + intercept over (batch, y) pairs."""
    if len(samples) < 3:
        raise PredictError(f"need at least 3 samples to fit, got {len(samples)}")
    xs = [float(x) for x, _ in samples]
    ys = [float(y) for _, y in samples]
    if len(set(xs)) < 2:
        raise PredictError("cannot fit a line: all sampled batch sizes are equal")
    x_mean = math.fsum(xs) / len(xs)
    y_mean = math.fsum(ys) / len(ys)
    sxx = math.fsum((x - x_mean) ** 2 for x in xs)
    sxy = math.fsum((x - x_mean) * (y - y_mean) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    return LinearModel(slope=slope, intercept=intercept, fit_batches=tuple(int(x) for x, _ in samples), role=role)


def plan_batches(user_batch: int, oom_batches: set[int] | frozenset[int] = frozenset()) -> BatchSamplePlan:
    """Pick the three batch sizes to sample, starting from the user's.

    The step is half the user's batch (at least 1). The upward plan is
    [b, b+step, b+2*step]; if any of those is known to run out of memory the
    plan walks downward instead, shrinking the step as needed to keep three
    distinct feasible values.
    """
    if user_batch < 1:
        raise PredictError(f"user batch size must be >= 1, got {user_batch}")
    if user_batch in oom_batches:
        raise PredictError(f"user batch size {user_batch} runs out of memory; nothing to profile")
    step = max(1, math.ceil(user_batch / 2))
    upward = (user_batch, user_batch + step, user_batch + 2 * step)
    if not any(b in oom_batches for b in upward):
        return BatchSamplePlan(upward, UP)
    for shrunk in range(step, 0, -1):
        downward = (user_batch, max(1, user_batch - shrunk), max(1, user_batch - 2 * shrunk))
        if len(set(downward)) == 3 and not any(b in oom_batches for b in downward):
            return BatchSamplePlan(downward, DOWN)
    raise PredictError("cannot build predictive model: fewer than 3 distinct feasible batch sizes")


def throughput_at(run_time_model: LinearModel, batch: float) -> float:
    """Predicted samples/s at a batch size: 1000*x / (a*x + b)."""
    run_time = run_time_model.slope * batch + run_time_model.intercept
    if run_time <= 0:
        raise PredictError(f"model predicts non-positive run time at batch {batch}")
    return 1000.0 * batch / run_time


def max_throughput(run_time_model: LinearModel) -> float:
    """The throughput asymptote as batch size grows: 1000/a samples/s."""
    if run_time_model.slope <= 0:
        raise PredictError("max throughput is undefined for a non-positive slope")
    return 1000.0 / run_time_model.slope


def memory_at(memory_model: LinearModel, batch: float) -> float:
    """Predicted peak bytes at a batch size: c*x + d."""
    return memory_model.slope * batch + memory_model.intercept


# Tolerance for float slop when an inverse lands a hair under an integer.
_INVERSE_EPS = 1e-6


def batch_from_memory(memory_model: LinearModel, target_bytes: float) -> int:
    """Largest batch whose predicted peak stays within target_bytes."""
    c, d = memory_model.slope, memory_model.intercept
    if c <= 0:
        raise PredictError("memory model slope must be positive to invert")
    if target_bytes < c + d:
        raise PredictError(f"target {target_bytes:.0f} bytes is below the batch-1 footprint ({c + d:.0f})")
    return max(1, math.floor((target_bytes - d) / c + _INVERSE_EPS))


def batch_from_throughput(run_time_model: LinearModel, target_samples_per_s: float) -> int:
    """Batch size predicted to reach a target throughput, round half up.

    Targets at or above the asymptote are rejected rather than clamped;
    clients must keep drags strictly below the maximum.
    """
    a, b = run_time_model.slope, run_time_model.intercept
    if a <= 0 or b <= 0:
        raise PredictError("throughput inversion needs positive slope and intercept")
    if target_samples_per_s <= 0:
        raise PredictError("target throughput must be positive")
    ceiling = max_throughput(run_time_model)
    if target_samples_per_s >= ceiling:
        raise PredictError(
            f"target {target_samples_per_s:.2f} samples/s is unreachable (max {ceiling:.2f})"
        )
    t = target_samples_per_s / 1000.0  # samples per ms
    batch = t * b / (1.0 - t * a)
    return max(1, math.floor(batch + 0.5))


def predict_at(
    run_time_model: LinearModel, memory_model: LinearModel, batch: int, capacity_bytes: int
) -> Prediction:
    peak = memory_at(memory_model, batch)
    return Prediction(
        batch_size=batch,
        throughput_samples_per_s=throughput_at(run_time_model, batch),
        peak_memory_bytes=int(round(peak)),
        feasible=peak <= capacity_bytes,
    )


def scale_breakdown(
    tree: BreakdownNode,
    run_time_model: LinearModel,
    memory_model: LinearModel,
    weights_total: int,
    old_batch: int,
    new_batch: int,
) -> tuple[BreakdownNode, int]:
    """Preview the breakdown at a different batch size.

    Activations scale with the batch ratio, weights stay put, run times
    scale with the modeled iteration-time ratio. Returns the scaled tree and
    the predicted untracked memory (model peak minus everything tracked,
    clamped at zero).
    """
    if old_batch < 1 or new_batch < 1:
        raise PredictError("batch sizes must be >= 1")
    run_ratio = (
        (run_time_model.slope * new_batch + run_time_model.intercept)
        / (run_time_model.slope * old_batch + run_time_model.intercept)
    )

    scaled = copy.deepcopy(tree)
    for node in scaled.iter_nodes():
        node.run_time_ms *= run_ratio
        node.activation_bytes = int(round(node.activation_bytes * new_batch / old_batch))
    untracked = memory_at(memory_model, new_batch) - weights_total - scaled.activation_bytes
    return scaled, max(0, int(round(untracked)))

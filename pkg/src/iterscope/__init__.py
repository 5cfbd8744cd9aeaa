"""Interactive training-loop profiler: trace replay, batch-size what-if
models, code-linked breakdowns, and a daemon that serves them to clients."""

from .model import (
    DeviceSpec,
    IterationMetrics,
    OperationMeasurement,
    ProfileSnapshot,
    StackFrame,
    WeightMeasurement,
    compute_throughput,
    untracked_memory,
    untracked_run_time,
    validate_snapshot,
)
from .traceio import (
    SyntheticSpec,
    TraceContents,
    TraceFormatError,
    generate_synthetic_trace,
    read_trace,
    write_trace,
)
from .breakdown import BreakdownNode, InlineMarker, build_tree, children_at, inline_markers
from .predict import (
    BatchSamplePlan,
    LinearModel,
    PredictError,
    Prediction,
    batch_from_memory,
    batch_from_throughput,
    fit_linear,
    max_throughput,
    memory_at,
    plan_batches,
    predict_at,
    scale_breakdown,
    throughput_at,
)
from .mutate import LiteralSpan, MutationError, MutationTarget, apply_batch_size, locate_batch_kwarg
from .daemon import AnalysisResult, BackendError, ProfilerDaemon, SessionConfig, run_analysis

__version__ = "0.1.0"

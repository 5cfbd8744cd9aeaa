"""Hierarchical run-time/memory breakdowns assembled from stack traces.

Every operation carries a call stack whose outermost frame is the shared
model-invocation site. The stack prefix common to all operations collapses
into the root node; below it, each distinct frame becomes a node. Interior
nodes are modules, leaves are individual operations. Two invocations of the
same code from different call sites stay separate sibling nodes; only the
inline markers aggregate across uses of a source line.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from .model import OperationMeasurement, StackFrame, WeightMeasurement

MODULE = "module"
OPERATION = "operation"

RUN_TIME = "run_time"
MEMORY = "memory"


class BreakdownError(ValueError):
    pass


@dataclass
class BreakdownNode:
    """One bar of the breakdown: a module (with children) or an operation.

    Aggregates cover the whole subtree; weight bytes attached directly to a
    module (creation stacks that stop there) are included in its aggregate.
    Children are kept in canonical order: run time descending, display name
    ascending on ties. Treat nodes as immutable once built.
    """

    kind: str
    display_name: str
    frame: StackFrame
    run_time_ms: float = 0.0
    weight_bytes: int = 0
    activation_bytes: int = 0
    children: list["BreakdownNode"] = field(default_factory=list)
    leaf_count: int = 1
    operation: OperationMeasurement | None = None
    attached_weights: list[WeightMeasurement] = field(default_factory=list)

    def sort_value(self, sort_key: str) -> float:
        if sort_key == RUN_TIME:
            return self.run_time_ms
        if sort_key == MEMORY:
            return self.weight_bytes + self.activation_bytes
        raise BreakdownError(f"unknown sort key {sort_key!r}")

    def iter_leaves(self):
        if self.kind == OPERATION:
            yield self
        for child in self.children:
            yield from child.iter_leaves()

    def iter_nodes(self):
        yield self
        for child in self.children:
            yield from child.iter_nodes()


@dataclass(frozen=True)
class InlineMarker:
    """Per-source-line totals over the operations that pass through it."""

    frame: StackFrame
    run_time_ms: float
    weight_bytes: int
    activation_bytes: int
    scoped: bool


def _display_for_frame(frame: StackFrame) -> str:
    return f"{os.path.basename(frame.file_path)}:{frame.line_number}"


class _Trie:
    __slots__ = ("frame", "children", "ending", "weights")

    def __init__(self, frame: StackFrame):
        self.frame = frame
        self.children: dict[StackFrame, _Trie] = {}
        self.ending: list[OperationMeasurement] = []
        self.weights: list[WeightMeasurement] = []


def _common_prefix(stacks: list[tuple[StackFrame, ...]]) -> list[StackFrame]:
    prefix = list(stacks[0])
    for stack in stacks[1:]:
        limit = 0
        for a, b in zip(prefix, stack):
            if a != b:
                break
            limit += 1
        del prefix[limit:]
    return prefix


def _sort_canonical(children: list[BreakdownNode]) -> list[BreakdownNode]:
    return sorted(children, key=lambda n: (-n.run_time_ms, n.display_name))


def _disambiguate(children: list[BreakdownNode]) -> None:
    seen: dict[str, int] = {}
    for child in children:
        count = seen.get(child.display_name, 0) + 1
        seen[child.display_name] = count
        if count > 1:
            child.display_name = f"{child.display_name} ({count})"


def _leaf_for(op: OperationMeasurement, frame: StackFrame) -> BreakdownNode:
    return BreakdownNode(
        kind=OPERATION,
        display_name=op.name,
        frame=frame,
        run_time_ms=op.run_time_ms,
        activation_bytes=op.activation_bytes,
        leaf_count=1,
        operation=op,
    )


def _convert(trie: _Trie) -> BreakdownNode:
    single_leaf = len(trie.ending) == 1 and not trie.children
    if single_leaf:
        node = _leaf_for(trie.ending[0], trie.frame)
    else:
        children = [_leaf_for(op, trie.frame) for op in trie.ending]
        children += [_convert(child) for child in trie.children.values()]
        node = BreakdownNode(kind=MODULE, display_name=_display_for_frame(trie.frame), frame=trie.frame)
        node.children = _sort_canonical(children)
        _disambiguate(node.children)
        node.leaf_count = sum(c.leaf_count for c in node.children)
        node.run_time_ms = math.fsum(leaf.run_time_ms for leaf in node.iter_leaves())
        node.activation_bytes = sum(c.activation_bytes for c in node.children)
    node.attached_weights = list(trie.weights)
    node.weight_bytes = sum(w.size_bytes for w in trie.weights) + sum(c.weight_bytes for c in node.children)
    return node


def build_tree(
    operations: list[OperationMeasurement] | tuple[OperationMeasurement, ...],
    weights: list[WeightMeasurement] | tuple[WeightMeasurement, ...] = (),
) -> BreakdownNode:
    """Assemble measurements into the module/operation hierarchy.

    The root absorbs the stack prefix shared by every operation (capped so
    each operation keeps at least its innermost frame as a leaf). Weights
    attach to the node reached by walking their full stack; stacks recorded
    outside any operation path (model construction) attach to the root.
    """
    ops = list(operations)
    if not ops:
        raise BreakdownError("cannot build a breakdown from an empty operation list")
    for op in ops:
        if not op.stack:
            raise BreakdownError(f"operation {op.name!r} has an empty stack")
    roots = {op.stack[0] for op in ops}
    if len(roots) > 1:
        listed = ", ".join(sorted(f.label() for f in roots))
        raise BreakdownError(f"operations share no common outermost frame: {listed}")

    prefix = _common_prefix([op.stack for op in ops])
    shortest = min(len(op.stack) for op in ops)
    prefix = prefix[: min(len(prefix), shortest - 1)]

    root = _Trie(prefix[0] if prefix else ops[0].stack[0])
    for op in ops:
        node = root
        for frame in op.stack[len(prefix):]:
            node = node.children.setdefault(frame, _Trie(frame))
        node.ending.append(op)

    for weight in weights:
        if not weight.stack:
            raise BreakdownError(f"weight {weight.name!r} has an empty stack")
        target = root
        if list(weight.stack[: len(prefix)]) == prefix and len(weight.stack) > len(prefix):
            node = root
            for frame in weight.stack[len(prefix):]:
                child = node.children.get(frame)
                if child is None:
                    node = None
                    break
                node = child
            if node is not None:
                target = node
        target.weights.append(weight)

    tree = _convert(root)
    tree.display_name = _display_for_frame(tree.frame)
    return tree


def resolve_path(tree: BreakdownNode, path: list[int] | tuple[int, ...]) -> BreakdownNode:
    """Follow child indices (canonical order) from the root."""
    node = tree
    for depth, index in enumerate(path):
        if not isinstance(index, int) or not 0 <= index < len(node.children):
            raise BreakdownError(f"path {list(path)} is invalid at position {depth}")
        node = node.children[index]
    return node


def children_at(tree: BreakdownNode, path: list[int] | tuple[int, ...], sort_key: str = RUN_TIME) -> list[BreakdownNode]:
    """Children of the addressed node, sort key descending, names break ties."""
    node = resolve_path(tree, path)
    return sorted(node.children, key=lambda n: (-n.sort_value(sort_key), n.display_name))


def inline_markers(tree: BreakdownNode, scope: list[int] | tuple[int, ...] = ()) -> list[InlineMarker]:
    """One marker per distinct source line in stacks under the scoped node.

    An operation contributes once to every line its stack passes through;
    the same line reached from different call sites aggregates across them,
    which is what distinguishes markers from breakdown nodes.
    """
    node = resolve_path(tree, scope)
    times: dict[StackFrame, list[float]] = {}
    acts: dict[StackFrame, int] = {}
    weight_bytes: dict[StackFrame, int] = {}

    for leaf in node.iter_leaves():
        op = leaf.operation
        for frame in dict.fromkeys(op.stack):
            times.setdefault(frame, []).append(op.run_time_ms)
            acts[frame] = acts.get(frame, 0) + op.activation_bytes
    for sub in node.iter_nodes():
        for weight in sub.attached_weights:
            for frame in dict.fromkeys(weight.stack):
                weight_bytes[frame] = weight_bytes.get(frame, 0) + weight.size_bytes

    scoped = len(tuple(scope)) > 0
    frames = sorted(set(times) | set(weight_bytes), key=lambda f: (f.file_path, f.line_number))
    return [
        InlineMarker(
            frame=frame,
            run_time_ms=math.fsum(times.get(frame, ())),
            weight_bytes=weight_bytes.get(frame, 0),
            activation_bytes=acts.get(frame, 0),
            scoped=scoped,
        )
        for frame in frames
    ]

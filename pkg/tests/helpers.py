"""Shared test fixtures: snapshot builders, independent oracles, generators.

The oracles here are deliberately separate implementations of the contracts
under test (recursive grouping instead of a trie, a full ast parse instead
of token scanning) so agreement between the two paths means something.
"""

from __future__ import annotations

import ast
import math
import os
import random
from dataclasses import dataclass, field

from iterscope.model import (
    DeviceSpec,
    IterationMetrics,
    OperationMeasurement,
    ProfileSnapshot,
    StackFrame,
    WeightMeasurement,
)


def frame(path: str, line: int) -> StackFrame:
    return StackFrame(path, line)


def op(name: str, run_ms: float, act: int, stack) -> OperationMeasurement:
    return OperationMeasurement(name, run_ms, act, tuple(stack))


def weight(name: str, size: int, stack) -> WeightMeasurement:
    return WeightMeasurement(name, size, tuple(stack))


def snapshot(
    batch=32,
    iters=3,
    total_ms=300.0,
    peak=4 << 30,
    operations=(),
    weights=(),
    capacity=8 << 30,
    entry="train.py",
) -> ProfileSnapshot:
    return ProfileSnapshot(
        iteration=IterationMetrics(batch, iters, total_ms, peak),
        operations=tuple(operations),
        weights=tuple(weights),
        device=DeviceSpec("test-gpu", capacity),
        entry_file=entry,
    )


# --- breakdown oracle --------------------------------------------------------


@dataclass
class ONode:
    kind: str
    display_name: str
    frame: StackFrame
    run_time_ms: float = 0.0
    weight_bytes: int = 0
    activation_bytes: int = 0
    children: list = field(default_factory=list)
    leaf_count: int = 1
    attached: list = field(default_factory=list)
    op: OperationMeasurement | None = None
    walkable: bool = True  # False for leaves standing in for ops that end at a module


def _oracle_display(f: StackFrame) -> str:
    return f"{os.path.basename(f.file_path)}:{f.line_number}"


def _oracle_group(frm: StackFrame, items: list) -> ONode:
    enders = [o for o, rest in items if not rest]
    groups: dict[StackFrame, list] = {}
    for o, rest in items:
        if rest:
            groups.setdefault(rest[0], []).append((o, rest[1:]))
    if len(enders) == 1 and not groups:
        o = enders[0]
        return ONode("operation", o.name, frm, run_time_ms=o.run_time_ms, activation_bytes=o.activation_bytes, op=o)
    node = ONode("module", _oracle_display(frm), frm)
    children = [
        ONode(
            "operation",
            o.name,
            frm,
            run_time_ms=o.run_time_ms,
            activation_bytes=o.activation_bytes,
            op=o,
            walkable=False,
        )
        for o in enders
    ]
    children += [_oracle_group(f, sub) for f, sub in groups.items()]
    children.sort(key=lambda n: (-n.run_time_ms, n.display_name))
    seen: dict[str, int] = {}
    for child in children:
        count = seen.get(child.display_name, 0) + 1
        seen[child.display_name] = count
        if count > 1:
            child.display_name = f"{child.display_name} ({count})"
    node.children = children
    node.leaf_count = sum(c.leaf_count for c in children)
    node.run_time_ms = math.fsum(leaf.run_time_ms for leaf in _oracle_leaves(node))
    node.activation_bytes = sum(c.activation_bytes for c in children)
    return node


def _oracle_leaves(node: ONode):
    if node.kind == "operation":
        yield node
    for child in node.children:
        yield from _oracle_leaves(child)


def _oracle_fill(node: ONode) -> None:
    for child in node.children:
        _oracle_fill(child)
    node.weight_bytes = sum(w.size_bytes for w in node.attached) + sum(c.weight_bytes for c in node.children)


def oracle_build_tree(operations, weights=()) -> ONode:
    stacks = [list(o.stack) for o in operations]
    prefix = stacks[0][:]
    for stack in stacks[1:]:
        keep = 0
        for a, b in zip(prefix, stack):
            if a != b:
                break
            keep += 1
        prefix = prefix[:keep]
    prefix = prefix[: min(len(prefix), min(len(s) for s in stacks) - 1)]
    root_frame = prefix[0] if prefix else stacks[0][0]
    root = _oracle_group(root_frame, [(o, list(o.stack)[len(prefix):]) for o in operations])
    root.display_name = _oracle_display(root_frame)
    root.kind = "module"

    for w in weights:
        target = root
        if list(w.stack)[: len(prefix)] == prefix and len(w.stack) > len(prefix):
            node = root
            for f in list(w.stack)[len(prefix):]:
                node = next((c for c in node.children if c.walkable and c.frame == f), None)
                if node is None:
                    break
            if node is not None:
                target = node
        target.attached.append(w)
    _oracle_fill(root)
    return root


def tree_shape(node) -> tuple:
    """Structural fingerprint shared by the real tree and the oracle tree."""
    return (
        node.kind,
        node.display_name,
        (node.frame.file_path, node.frame.line_number),
        node.run_time_ms,
        node.weight_bytes,
        node.activation_bytes,
        node.leaf_count,
        tuple(tree_shape(c) for c in node.children),
    )


def random_stack_set(rng: random.Random, max_ops=200, max_depth=8):
    """Random operations sharing one outermost frame, plus matching weights."""
    root = frame("entry.py", rng.randint(1, 9))
    files = [f"mod{i}.py" for i in range(rng.randint(1, 4))]
    pool = [frame(rng.choice(files), rng.randint(1, 12)) for _ in range(rng.randint(2, 10))]
    ops = []
    n_ops = rng.randint(1, max_ops)
    for i in range(n_ops):
        depth = rng.randint(2, max_depth)
        stack = [root] + [rng.choice(pool) for _ in range(depth - 1)]
        ops.append(op(f"op{rng.randint(0, 30)}", rng.uniform(0.01, 20.0), rng.randint(0, 1 << 20), stack))
    weights = []
    for i in range(rng.randint(0, n_ops)):
        base = rng.choice(ops)
        if rng.random() < 0.7:
            stack = list(base.stack)  # lands on the operation's node
        elif rng.random() < 0.5:
            stack = list(base.stack)[: rng.randint(1, len(base.stack))]
        else:
            stack = [frame("setup.py", rng.randint(1, 40))]  # no match: attaches to root
        weights.append(weight(f"w{i}", rng.randint(0, 1 << 22), stack))
    return ops, weights


# --- mutation oracle ---------------------------------------------------------


class OracleOutcome:
    SPAN = "span"
    PROVIDER_NOT_FOUND = "provider_not_found"
    MULTIPLE_PROVIDERS = "multiple_providers"
    KWARG_NOT_FOUND = "kwarg_not_found"
    NON_LITERAL = "non_literal"


def oracle_locate(source: str, provider="input_provider", kwarg="batch_size"):
    """Full-parse reference for locate_batch_kwarg; returns (outcome, span|None)."""
    tree = ast.parse(source)
    defs = [
        node
        for node in ast.walk(tree)
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)) and node.name == provider
    ]
    if not defs:
        return OracleOutcome.PROVIDER_NOT_FOUND, None
    if len(defs) > 1:
        return OracleOutcome.MULTIPLE_PROVIDERS, None
    fn = defs[0]

    args = fn.args
    positional = args.posonlyargs + args.args
    match = None
    defaults = args.defaults
    # defaults align with the tail of the positional list
    offset = len(positional) - len(defaults)
    for i, a in enumerate(positional):
        if a.arg == kwarg:
            match = defaults[i - offset] if i >= offset else None
            if i < offset:
                return OracleOutcome.NON_LITERAL, None  # parameter without default
            break
    else:
        for a, d in zip(args.kwonlyargs, args.kw_defaults):
            if a.arg == kwarg:
                if d is None:
                    return OracleOutcome.NON_LITERAL, None
                match = d
                break
        else:
            return OracleOutcome.KWARG_NOT_FOUND, None

    if not isinstance(match, ast.Constant) or type(match.value) is not int:
        return OracleOutcome.NON_LITERAL, None

    lines = source.encode("utf-8").split(b"\n")
    starts = []
    total = 0
    for ln in lines:
        starts.append(total)
        total += len(ln) + 1
    byte_start = starts[match.lineno - 1] + match.col_offset
    byte_end = starts[match.end_lineno - 1] + match.end_col_offset
    text = source.encode("utf-8")[byte_start:byte_end]
    if not text.replace(b"_", b"").isdigit():
        return OracleOutcome.NON_LITERAL, None  # e.g. hex/binary renders of an int
    return OracleOutcome.SPAN, (match.lineno, byte_start, byte_end, match.value)


_DECOYS = [
    '"""decoy: def input_provider(batch_size=999): pass"""',
    "# def input_provider(batch_size=777):",
    "s = 'batch_size=555'",
    'label = "def input_provider(batch_size=123)"',
    "note = '''\ndef input_provider(batch_size=31):\n'''",
]

_FILLERS = [
    "import os",
    "def helper(n):\n    return n * 2",
    "CONFIG = {'batch_size': 'from-config'}",
    "class Model:\n    def __init__(self):\n        self.batch_size = 4",
]


def _random_params(rng: random.Random):
    """Syntactically valid parameter list pieces: plain args, then defaults."""
    plain = [f"arg{i}" for i in range(rng.randint(0, 2))]
    defaulted = []
    for i in range(rng.randint(0, 3)):
        defaulted.append(
            rng.choice(
                [
                    f"seq_len{i}={rng.randint(1, 99)}",
                    f"name{i}='x,y(z'",
                    f"shape{i}=(3, 4)",
                    f"flag{i}: bool = True",
                    f"decoy{i}='batch_size=404'",
                ]
            )
        )
    return plain, defaulted


def random_signature_case(rng: random.Random):
    """One corpus entry: (source, expected outcome, expected value or None)."""
    roll = rng.random()
    kwarg_value = rng.choice([1, 2, 16, 32, 48, 64, 100, 512, 1024, 4096])
    parts = []
    for _ in range(rng.randint(0, 2)):
        parts.append(rng.choice(_DECOYS + _FILLERS))

    sep = rng.choice([", ", ",\n    ", " , ", ",  # comment\n    "])
    plain, defaulted = _random_params(rng)

    outcome = OracleOutcome.SPAN
    if roll < 0.12:
        outcome = OracleOutcome.PROVIDER_NOT_FOUND
        body = "def other_provider(batch_size=8):\n    pass"
    elif roll < 0.24:
        outcome = OracleOutcome.KWARG_NOT_FOUND
        inner = sep.join(plain + defaulted)
        body = f"def input_provider({inner}):\n    pass"
    elif roll < 0.36:
        outcome = OracleOutcome.NON_LITERAL
        bad = rng.choice(["BATCH", "32 * 2", "3.5", "'32'", "-32", "0x20", "int('8')"])
        defaulted.insert(rng.randint(0, len(defaulted)), f"batch_size={bad}")
        body = f"def input_provider({sep.join(plain + defaulted)}):\n    pass"
    elif roll < 0.44:
        outcome = OracleOutcome.MULTIPLE_PROVIDERS
        body = (
            f"def input_provider(batch_size={kwarg_value}):\n    pass\n\n"
            f"def input_provider(batch_size={kwarg_value + 1}):\n    pass"
        )
    else:
        style = rng.random()
        if style < 0.3:
            kw = f"batch_size={kwarg_value}"
        elif style < 0.5:
            kw = f"batch_size = {kwarg_value}"
        elif style < 0.7:
            kw = f"batch_size: int = {kwarg_value}"
        else:
            kw = None  # keyword-only form, appended after a bare '*'
        if kw is None:
            params = plain + defaulted + ["*", f"batch_size={kwarg_value}"]
        else:
            defaulted.insert(rng.randint(0, len(defaulted)), kw)
            params = plain + defaulted
        inner = sep.join(params)
        if rng.random() < 0.3:
            inner = "\n    " + inner.replace(", ", ",\n    ") + ("," if rng.random() < 0.5 else "") + "\n"
        body = f"def input_provider({inner}):\n    return data(batch_size={kwarg_value})"

    parts.insert(rng.randint(0, len(parts)), body)
    source = "\n\n".join(parts) + "\n"
    return source, outcome, (kwarg_value if outcome == OracleOutcome.SPAN else None)


# --- protocol fuzz -----------------------------------------------------------

_WORDS = ["train.py", "model/層.py", "conv", "linear", "完了", "ünïcode", "a b", "x\ty", 'quo"te', "back\\slash"]


def _rand_str(rng: random.Random) -> str:
    return rng.choice(_WORDS) + str(rng.randint(0, 999))


def _rand_node(rng: random.Random, path, depth=0) -> dict:
    kids = []
    if depth < 2 and rng.random() < 0.5:
        kids = [_rand_node(rng, path + [i], depth + 1) for i in range(rng.randint(1, 3))]
    return {
        "kind": rng.choice(["module", "operation"]),
        "display_name": _rand_str(rng),
        "file": _rand_str(rng),
        "line": rng.randint(1, 4000),
        "run_time_ms": rng.uniform(0, 500),
        "weight_bytes": rng.randint(0, 1 << 33),
        "activation_bytes": rng.randint(0, 1 << 33),
        "leaf_count": rng.randint(1, 300),
        "path": list(path),
        "children": kids,
    }


def random_message(rng: random.Random) -> dict:
    kind = rng.choice(
        [
            "hello",
            "analyze",
            "set_batch_size",
            "get_breakdown",
            "session",
            "analysis_begin",
            "key_metrics",
            "breakdown",
            "inline_markers",
            "source_mutated",
            "analysis_error",
        ]
    )
    if kind == "hello":
        return {"type": kind, "protocol_version": rng.randint(0, 5)}
    if kind == "analyze":
        return {"type": kind, "trigger": rng.choice(["save", "manual"])}
    if kind == "set_batch_size":
        return {"type": kind, "batch_size": rng.randint(1, 8192)}
    if kind == "get_breakdown":
        return {
            "type": kind,
            "path": [rng.randint(0, 9) for _ in range(rng.randint(0, 5))],
            "sort_key": rng.choice(["run_time", "memory"]),
        }
    if kind == "session":
        return {
            "type": kind,
            "session_id": _rand_str(rng),
            "entry_file": _rand_str(rng),
            "capabilities": [_rand_str(rng) for _ in range(rng.randint(0, 4))],
        }
    if kind == "analysis_begin":
        return {"type": kind}
    if kind == "key_metrics":
        msg = {
            "type": kind,
            "batch_size": rng.randint(1, 4096),
            "throughput_samples_per_s": rng.uniform(0.1, 1e5),
            "peak_memory_bytes": rng.randint(1, 1 << 35),
            "capacity_bytes": rng.randint(1, 1 << 35),
        }
        if rng.random() < 0.7:
            msg["max_throughput_samples_per_s"] = rng.uniform(1, 1e5)
            msg["run_time_model"] = {"a_ms": rng.uniform(0.001, 10), "b_ms": rng.uniform(0.001, 100)}
            msg["memory_model"] = {"c_bytes": rng.uniform(1, 1e9), "d_bytes": rng.uniform(1, 1e10)}
        if rng.random() < 0.7:
            start = rng.randint(0, 5000)
            msg["batch_span"] = {"line": rng.randint(1, 400), "byte_start": start, "byte_end": start + rng.randint(1, 6)}
        return msg
    if kind == "breakdown":
        path = [rng.randint(0, 6) for _ in range(rng.randint(0, 3))]
        return {
            "type": kind,
            "path": path,
            "sort_key": rng.choice(["run_time", "memory"]),
            "nodes": [_rand_node(rng, path + [i]) for i in range(rng.randint(0, 4))],
        }
    if kind == "inline_markers":
        return {
            "type": kind,
            "markers": [
                {
                    "file": _rand_str(rng),
                    "line": rng.randint(1, 4000),
                    "run_time_ms": rng.uniform(0, 100),
                    "weight_bytes": rng.randint(0, 1 << 32),
                    "activation_bytes": rng.randint(0, 1 << 32),
                    "scoped": rng.random() < 0.5,
                }
                for _ in range(rng.randint(0, 6))
            ],
        }
    if kind == "source_mutated":
        return {"type": kind, "new_batch_size": rng.randint(1, 4096), "line": rng.randint(1, 2000)}
    return {"type": "analysis_error", "code": rng.choice(["backend", "mutation", "version"]), "message": _rand_str(rng)}

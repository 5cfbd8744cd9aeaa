"""Daemon <-> client message schema, framing, and the version handshake.

Messages are JSON objects tagged by a `type` field. On TCP they travel in
frames of a 4-byte big-endian length prefix followed by the UTF-8 payload;
on the WebSocket endpoint the identical payloads go one per text frame, so
the schema is shared across both transports. Unknown fields are ignored on
decode for forward compatibility; an unknown `type` is an error.
"""

from __future__ import annotations

import json
import struct

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 16 << 20
DEFAULT_TCP_PORT = 60120
DEFAULT_WS_PORT = 60121

HEADER = struct.Struct(">I")


class ProtocolError(ValueError):
    pass


def _need(msg: dict, field: str, kinds, where: str) -> None:
    if field not in msg:
        raise ProtocolError(f"{where}: missing field {field!r}")
    value = msg[field]
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ProtocolError(f"{where}: field {field!r} has the wrong type")


def _need_opt(msg: dict, field: str, kinds, where: str) -> None:
    if field in msg and msg[field] is not None:
        _need(msg, field, kinds, where)


def _check_path(msg: dict, where: str) -> None:
    _need(msg, "path", list, where)
    for entry in msg["path"]:
        if isinstance(entry, bool) or not isinstance(entry, int) or entry < 0:
            raise ProtocolError(f"{where}: field 'path' must hold non-negative integers")


def _check_node(node, where: str) -> None:
    if not isinstance(node, dict):
        raise ProtocolError(f"{where}: breakdown nodes must be objects")
    for field, kinds in (
        ("kind", str),
        ("display_name", str),
        ("file", str),
        ("line", int),
        ("run_time_ms", (int, float)),
        ("weight_bytes", int),
        ("activation_bytes", int),
        ("leaf_count", int),
        ("path", list),
        ("children", list),
    ):
        _need(node, field, kinds, where)
    for child in node["children"]:
        _check_node(child, where)


def _check_marker(marker, where: str) -> None:
    if not isinstance(marker, dict):
        raise ProtocolError(f"{where}: markers must be objects")
    for field, kinds in (
        ("file", str),
        ("line", int),
        ("run_time_ms", (int, float)),
        ("weight_bytes", int),
        ("activation_bytes", int),
        ("scoped", bool),
    ):
        if field == "scoped":
            if not isinstance(marker.get(field), bool):
                raise ProtocolError(f"{where}: field 'scoped' has the wrong type")
            continue
        _need(marker, field, kinds, where)


def _check_span(span, where: str) -> None:
    if not isinstance(span, dict):
        raise ProtocolError(f"{where}: batch_span must be an object")
    for field in ("line", "byte_start", "byte_end"):
        _need(span, field, int, where)


def validate_message(msg) -> None:
    """Raise ProtocolError naming the offending field when msg is invalid."""
    if not isinstance(msg, dict):
        raise ProtocolError("message must be a JSON object")
    kind = msg.get("type")
    if not isinstance(kind, str):
        raise ProtocolError("message: missing field 'type'")

    if kind == "hello":
        _need(msg, "protocol_version", int, kind)
    elif kind == "analyze":
        _need(msg, "trigger", str, kind)
        if msg["trigger"] not in ("save", "manual"):
            raise ProtocolError("analyze: field 'trigger' must be 'save' or 'manual'")
    elif kind == "set_batch_size":
        _need(msg, "batch_size", int, kind)
        if msg["batch_size"] < 1:
            raise ProtocolError("set_batch_size: field 'batch_size' must be >= 1")
    elif kind == "get_breakdown":
        _check_path(msg, kind)
        _need(msg, "sort_key", str, kind)
        if msg["sort_key"] not in ("run_time", "memory"):
            raise ProtocolError("get_breakdown: field 'sort_key' must be 'run_time' or 'memory'")
    elif kind == "session":
        _need(msg, "session_id", str, kind)
        _need(msg, "entry_file", str, kind)
        _need(msg, "capabilities", list, kind)
    elif kind == "analysis_begin":
        pass
    elif kind == "key_metrics":
        for field in ("batch_size", "peak_memory_bytes", "capacity_bytes"):
            _need(msg, field, int, kind)
        _need(msg, "throughput_samples_per_s", (int, float), kind)
        _need_opt(msg, "max_throughput_samples_per_s", (int, float), kind)
        for sub, fields in (("run_time_model", ("a_ms", "b_ms")), ("memory_model", ("c_bytes", "d_bytes"))):
            if msg.get(sub) is None:
                continue
            if not isinstance(msg[sub], dict):
                raise ProtocolError(f"key_metrics: field {sub!r} must be an object")
            for field in fields:
                _need(msg[sub], field, (int, float), sub)
        if msg.get("batch_span") is not None:
            _check_span(msg["batch_span"], kind)
    elif kind == "breakdown":
        _check_path(msg, kind)
        _need(msg, "sort_key", str, kind)
        _need(msg, "nodes", list, kind)
        for node in msg["nodes"]:
            _check_node(node, kind)
    elif kind == "inline_markers":
        _need(msg, "markers", list, kind)
        for marker in msg["markers"]:
            _check_marker(marker, kind)
    elif kind == "source_mutated":
        _need(msg, "new_batch_size", int, kind)
        _need(msg, "line", int, kind)
    elif kind == "analysis_error":
        _need(msg, "code", str, kind)
        _need(msg, "message", str, kind)
    else:
        raise ProtocolError(f"unknown message type {kind!r}")


def encode_payload(msg: dict) -> bytes:
    validate_message(msg)
    return json.dumps(msg, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def decode_payload(payload: bytes | str) -> dict:
    text = payload.decode("utf-8") if isinstance(payload, bytes) else payload
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"payload is not valid JSON: {exc.msg}") from None
    validate_message(msg)
    return msg


def encode_frame(msg: dict) -> bytes:
    """Length-prefixed frame for the TCP transport."""
    payload = encode_payload(msg)
    if len(payload) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds the {MAX_FRAME_BYTES} byte limit")
    return HEADER.pack(len(payload)) + payload


def decode_frame(buffer: bytes) -> tuple[dict, bytes] | None:
    """Decode one frame from the head of buffer.

    Returns (message, remaining bytes), or None when the buffer does not yet
    hold a complete frame (read more and retry). Malformed content raises.
    """
    if len(buffer) < HEADER.size:
        return None
    (length,) = HEADER.unpack_from(buffer)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {length} bytes exceeds the {MAX_FRAME_BYTES} byte limit")
    end = HEADER.size + length
    if len(buffer) < end:
        return None
    msg = decode_payload(buffer[HEADER.size : end])
    return msg, buffer[end:]


def handshake(first_message: dict, session_id: str, entry_file: str, capabilities: list[str]) -> tuple[dict, bool]:
    """Answer the first message on a connection.

    Returns (reply, accepted). A version mismatch or a non-hello opener is
    answered with analysis_error and accepted=False; the server closes the
    connection after sending it.
    """
    if first_message.get("type") != "hello":
        return (
            {
                "type": "analysis_error",
                "code": "protocol",
                "message": "first message must be 'hello'",
            },
            False,
        )
    if first_message.get("protocol_version") != PROTOCOL_VERSION:
        return (
            {
                "type": "analysis_error",
                "code": "version",
                "message": f"daemon speaks protocol {PROTOCOL_VERSION}, client sent "
                f"{first_message.get('protocol_version')}",
            },
            False,
        )
    return (
        {
            "type": "session",
            "session_id": session_id,
            "entry_file": entry_file,
            "capabilities": capabilities,
        },
        True,
    )

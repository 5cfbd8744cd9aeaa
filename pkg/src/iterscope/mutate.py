"""Locate and rewrite the batch-size keyword default in user source.

The only query we ever run against user code is "where is the integer
default of one keyword argument in one function signature", so this scans
tokens (identifiers, numbers, strings, comments, brackets) instead of
parsing the whole language. String literals and comments are skipped, so
decoy text like `def input_provider(batch_size=99)` inside a docstring
never matches. Offsets are byte offsets into the UTF-8 encoding, which is
what the rewrite and the editor protocol both use.
"""

from __future__ import annotations

from dataclasses import dataclass


class MutationError(ValueError):
    pass


class ProviderNotFound(MutationError):
    pass


class MultipleProviders(MutationError):
    pass


class KwargNotFound(MutationError):
    pass


class NonLiteralDefault(MutationError):
    pass


class StaleSpan(MutationError):
    pass


@dataclass(frozen=True)
class MutationTarget:
    file_path: str
    provider_name: str = "input_provider"
    kwarg_name: str = "batch_size"


@dataclass(frozen=True)
class LiteralSpan:
    """Half-open [byte_start, byte_end) span of a decimal integer literal."""

    line_number: int
    byte_start: int
    byte_end: int
    current_value: int


_IDENT_START = frozenset(b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | frozenset(b"0123456789")
_DIGITS = frozenset(b"0123456789")
_QUOTES = frozenset(b"'\"")
_SPACE = frozenset(b" \t\r\n")
_STRING_PREFIXES = {b"r", b"b", b"u", b"f", b"rb", b"br", b"rf", b"fr"}


def _tokenize(src: bytes):
    """Yield (kind, start, end) with kind in ident/number/op; skip strings and comments."""
    i = 0
    n = len(src)
    while i < n:
        ch = src[i]
        if ch in _SPACE:
            i += 1
            continue
        if ch == 0x5C:  # backslash: explicit line continuation
            i += 2
            continue
        if ch == 0x23:  # '#'
            while i < n and src[i] != 0x0A:
                i += 1
            continue
        if ch in _QUOTES:
            i = _skip_string(src, i, raw=False)
            continue
        if ch in _IDENT_START:
            start = i
            while i < n and src[i] in _IDENT_CONT:
                i += 1
            word = src[start:i]
            if i < n and src[i] in _QUOTES and word.lower() in _STRING_PREFIXES:
                i = _skip_string(src, i, raw=b"r" in word.lower())
                continue
            yield ("ident", start, i)
            continue
        if ch in _DIGITS:
            start = i
            while i < n and (src[i] in _IDENT_CONT or src[i] == 0x2E):
                i += 1
            yield ("number", start, i)
            continue
        yield ("op", i, i + 1)
        i += 1


def _skip_string(src: bytes, i: int, raw: bool) -> int:
    quote = src[i]
    n = len(src)
    if src[i : i + 3] in (b"'''", b'"""'):
        closer = src[i : i + 3]
        i += 3
        while i < n:
            if not raw and src[i] == 0x5C:
                i += 2
                continue
            if src[i : i + 3] == closer:
                return i + 3
            i += 1
        return n
    i += 1
    while i < n:
        c = src[i]
        if not raw and c == 0x5C:
            i += 2
            continue
        if c == quote or c == 0x0A:
            return i + 1
        i += 1
    return n


def _is_decimal_literal(text: bytes) -> bool:
    stripped = text.replace(b"_", b"")
    return stripped.isdigit() and not text.startswith(b"_") and not text.endswith(b"_") and b"__" not in text


def locate_batch_kwarg(source: str, target: MutationTarget) -> LiteralSpan:
    """Find the integer default of the batch kwarg in the provider signature.

    Works on `def <provider>( ... <kwarg>=<int> ... )` with arbitrary
    whitespace, newlines, comments, annotations, and nested brackets in
    other defaults. Anything but a plain decimal integer default is
    reported, not guessed at, so the caller can disable dragging.
    """
    src = source.encode("utf-8")
    tokens = list(_tokenize(src))
    provider = target.provider_name.encode()
    kwarg = target.kwarg_name.encode()

    sig_starts = []
    for idx in range(len(tokens) - 2):
        k0, s0, e0 = tokens[idx]
        k1, s1, e1 = tokens[idx + 1]
        k2, s2, e2 = tokens[idx + 2]
        if (
            k0 == "ident"
            and src[s0:e0] == b"def"
            and k1 == "ident"
            and src[s1:e1] == provider
            and k2 == "op"
            and src[s2:e2] == b"("
        ):
            sig_starts.append(idx + 2)
    if not sig_starts:
        raise ProviderNotFound(f"no definition of {target.provider_name!r} found")
    if len(sig_starts) > 1:
        raise MultipleProviders(f"{target.provider_name!r} is defined {len(sig_starts)} times")

    open_idx = sig_starts[0]
    depth = 0
    close_idx = None
    for idx in range(open_idx, len(tokens)):
        kind, s, e = tokens[idx]
        if kind != "op":
            continue
        text = src[s:e]
        if text in (b"(", b"[", b"{"):
            depth += 1
        elif text in (b")", b"]", b"}"):
            depth -= 1
            if depth == 0:
                close_idx = idx
                break
    if close_idx is None:
        raise ProviderNotFound(f"signature of {target.provider_name!r} has no closing parenthesis")

    # Parameter names sit at depth 1, right after '(' or a depth-1 comma.
    depth = 0
    at_name_position = False
    kwarg_idx = None
    for idx in range(open_idx, close_idx + 1):
        kind, s, e = tokens[idx]
        text = src[s:e]
        if kind == "op":
            if text in (b"(", b"[", b"{"):
                depth += 1
                at_name_position = depth == 1  # right after the signature's '('
            elif text in (b")", b"]", b"}"):
                depth -= 1
                at_name_position = False
            elif depth == 1 and text == b",":
                at_name_position = True
            elif depth == 1 and text == b"*":
                pass  # '*' / '**' markers precede a parameter name
            else:
                at_name_position = False
            continue
        if kind == "ident" and depth == 1 and at_name_position and text == kwarg:
            kwarg_idx = idx
            break
        at_name_position = False
    if kwarg_idx is None:
        raise KwargNotFound(f"{target.provider_name!r} has no keyword argument {target.kwarg_name!r}")

    # Skip an annotation if present; stop at '=' of this parameter.
    depth = 1
    eq_idx = None
    for idx in range(kwarg_idx + 1, close_idx + 1):
        kind, s, e = tokens[idx]
        text = src[s:e]
        if kind == "op":
            if text in (b"(", b"[", b"{"):
                depth += 1
            elif text in (b")", b"]", b"}"):
                depth -= 1
                if depth == 0:
                    break
            elif depth == 1 and text == b",":
                break
            elif depth == 1 and text == b"=":
                eq_idx = idx
                break
    if eq_idx is None:
        raise NonLiteralDefault(f"{target.kwarg_name!r} has no default value")

    if eq_idx + 1 > close_idx:
        raise NonLiteralDefault(f"{target.kwarg_name!r} has no default value")
    kind, s, e = tokens[eq_idx + 1]
    literal = src[s:e]
    if kind != "number" or not _is_decimal_literal(literal):
        raise NonLiteralDefault(
            f"default of {target.kwarg_name!r} is not a plain decimal integer literal"
        )
    nk, ns, ne = tokens[eq_idx + 2]
    if not (nk == "op" and src[ns:ne] in (b",", b")")):
        raise NonLiteralDefault(f"default of {target.kwarg_name!r} is an expression, not a literal")

    line_number = src.count(b"\n", 0, s) + 1
    return LiteralSpan(
        line_number=line_number,
        byte_start=s,
        byte_end=e,
        current_value=int(literal.replace(b"_", b"")),
    )


def apply_batch_size(source: str, span: LiteralSpan, new_value: int) -> str:
    """Replace only the literal's bytes with the new value's decimal form."""
    if new_value < 1:
        raise MutationError(f"batch size must be >= 1, got {new_value}")
    src = source.encode("utf-8")
    segment = src[span.byte_start : span.byte_end]
    if not _is_decimal_literal(segment) or int(segment.replace(b"_", b"")) != span.current_value:
        raise StaleSpan(
            f"source changed since location: expected {span.current_value} at "
            f"bytes [{span.byte_start}, {span.byte_end})"
        )
    rewritten = src[: span.byte_start] + str(new_value).encode() + src[span.byte_end :]
    return rewritten.decode("utf-8")

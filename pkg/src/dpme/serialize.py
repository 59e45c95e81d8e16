"""Deterministic JSON output.

Floats are rendered with 17 significant digits (%.17g), enough for exact
double round-trips, and key order is whatever the caller constructed, so
two runs that build identical objects produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from .errors import InvariantError, ParameterError


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise InvariantError(f"cannot serialize non-finite number {x}")
    return f"{x:.17g}"


def _render(obj, indent: int, out: list) -> None:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise ParameterError(f"JSON keys must be strings, got {key!r}")
            out.append(f'{inner}"{_escape(key)}": ')
            _render(value, indent + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        items = list(obj)
        if not items:
            out.append("[]")
            return
        out.append("[\n")
        for i, value in enumerate(items):
            out.append(inner)
            _render(value, indent + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(pad + "]")
    elif isinstance(obj, np.ndarray):
        _render(obj.tolist(), indent, out)
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(f'"{_escape(obj)}"')
    elif obj is None:
        out.append("null")
    else:
        raise ParameterError(f"cannot serialize object of type {type(obj).__name__}")


def _escape(s: str) -> str:
    result = []
    for ch in s:
        if ch == '"':
            result.append('\\"')
        elif ch == "\\":
            result.append("\\\\")
        elif ord(ch) < 0x20:
            result.append(f"\\u{ord(ch):04x}")
        else:
            result.append(ch)
    return "".join(result)


def dumps(obj) -> str:
    """Serialize to a JSON string with a trailing newline."""
    out: list = []
    _render(obj, 0, out)
    out.append("\n")
    return "".join(out)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()

"""Self-describing decimal-text model files.

Layout::

    # vibnovelty-model v1
    kind,<tag>
    param,<name>,<json>
    array,<name>,<dtype>,<d0>x<d1>...
    <row of values>          # one line per leading-axis row (a single line for 1-D)
    end

Floats are written with ``repr`` so a round trip is exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = "# vibnovelty-model v1"


class ModelFileError(ValueError):
    pass


def _row(values) -> str:
    return ",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(int(v)) for v in values)


def dumps(kind: str, params: dict, arrays: dict[str, np.ndarray]) -> str:
    out = [MAGIC, f"kind,{kind}"]
    for k, v in params.items():
        out.append(f"param,{k},{json.dumps(v)}")
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        dtype = "int" if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool else "float"
        arr = arr.astype(np.int64 if dtype == "int" else float)
        shape = "x".join(str(d) for d in arr.shape) if arr.ndim else "scalar"
        out.append(f"array,{name},{dtype},{shape}")
        if arr.ndim == 0:
            out.append(_row([arr.item()]))
        elif arr.ndim == 1:
            out.append(_row(arr))
        else:
            for r in arr.reshape(arr.shape[0], int(np.prod(arr.shape[1:]))):
                out.append(_row(r))
    out.append("end")
    return "\n".join(out) + "\n"


def loads(text: str) -> tuple[str, dict, dict[str, np.ndarray]]:
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC:
        raise ModelFileError("line 1: not a vibnovelty model file")
    if len(lines) < 2 or not lines[1].startswith("kind,"):
        raise ModelFileError("line 2: missing kind record")
    kind = lines[1].split(",", 1)[1]
    params: dict = {}
    arrays: dict[str, np.ndarray] = {}
    i = 2
    while i < len(lines):
        line = lines[i]
        if line == "end":
            return kind, params, arrays
        tag, _, rest = line.partition(",")
        if tag == "param":
            name, _, val = rest.partition(",")
            try:
                params[name] = json.loads(val)
            except json.JSONDecodeError as exc:
                raise ModelFileError(f"line {i + 1}: bad value for param {name!r}: {exc}") from None
            i += 1
        elif tag == "array":
            try:
                name, dtype, shape_s = rest.split(",")
                shape = () if shape_s == "scalar" else tuple(int(d) for d in shape_s.split("x"))
            except ValueError:
                raise ModelFileError(f"line {i + 1}: malformed array header") from None
            n_lines = 1 if len(shape) <= 1 else shape[0]
            body = lines[i + 1:i + 1 + n_lines]
            if len(body) < n_lines:
                raise ModelFileError(f"line {i + 1}: array {name!r} truncated")
            conv = int if dtype == "int" else float
            try:
                flat = [conv(t) for row in body for t in row.split(",") if row]
            except ValueError:
                raise ModelFileError(f"line {i + 2}: non-numeric entry in array {name!r}") from None
            size = int(np.prod(shape)) if shape else 1
            if len(flat) != size:
                raise ModelFileError(f"line {i + 1}: array {name!r} expects {size} values, found {len(flat)}")
            arr = np.array(flat, dtype=np.int64 if dtype == "int" else float).reshape(shape)
            arrays[name] = arr
            i += 1 + n_lines
        else:
            raise ModelFileError(f"line {i + 1}: unknown record {tag!r}")
    raise ModelFileError("file truncated: no end record")


def save(path, kind: str, params: dict, arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_text(dumps(kind, params, arrays))


def load(path) -> tuple[str, dict, dict[str, np.ndarray]]:
    return loads(Path(path).read_text())

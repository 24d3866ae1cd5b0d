"""Deterministic file formats.

Floats are written with 17 significant digits so that identical runs give
byte-identical files, and every file carries ``"schema": "hclab/v1"``.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from numbers import Integral, Real
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .model import SystemParams

SCHEMA = "hclab/v1"


def _fmt_float(v):
    if not math.isfinite(v):
        return "null"
    s = "%.17g" % v
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, Integral):
        out.append(str(int(obj)))
    elif isinstance(obj, Real):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (key, val) in enumerate(items):
            out.append(pad + json.dumps(str(key)) + ": ")
            _encode(val, indent, level + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        # numeric rows stay on one line
        if all(isinstance(v, (Real, np.number)) and not isinstance(v, bool) for v in obj):
            parts = []
            for v in obj:
                sub = []
                _encode(v, indent, level + 1, sub)
                parts.append("".join(sub))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, val in enumerate(obj):
            out.append(pad)
            _encode(val, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    out = []
    _encode(obj, indent, 0, out)
    return "".join(out) + "\n"


def atomic_write(path, text):
    """Write via a temporary file so failures never leave partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    obj = dict(obj)
    obj.setdefault("schema", SCHEMA)
    atomic_write(path, dumps(obj))


def read_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidInputError(f"{where} is not a number: {v!r}")
    return float(v)


def params_from_dict(d, source="parameters"):
    if not isinstance(d, dict):
        raise InvalidInputError(f"{source}: expected a JSON object")
    allowed = {"n", "p", "sigma", "rho", "schema"}
    extra = sorted(set(d) - allowed)
    if extra:
        raise InvalidInputError(f"{source}: unknown field(s) {', '.join(extra)}")
    for key in ("n", "p", "sigma", "rho"):
        if key not in d:
            raise InvalidInputError(f"{source}: missing field {key!r}")
    n, p = d["n"], d["p"]
    for key, v in (("n", n), ("p", p)):
        if isinstance(v, bool) or not isinstance(v, int):
            raise InvalidInputError(f"{source}: {key} must be an integer, got {v!r}")
    sigma, rho = d["sigma"], d["rho"]
    if not isinstance(sigma, list) or len(sigma) != n:
        raise InvalidInputError(f"{source}: sigma must be a list of {n} numbers")
    sig = [_number(v, f"{source}: sigma[{i + 1}]") for i, v in enumerate(sigma)]
    if not isinstance(rho, list) or len(rho) != n:
        raise InvalidInputError(f"{source}: rho must have {n} rows")
    rows = []
    for i, row in enumerate(rho, 1):
        if not isinstance(row, list) or len(row) != n:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise InvalidInputError(f"{source}: rho row {i} has {got} entries, expected {n}")
        rows.append([_number(v, f"{source}: rho row {i}, column {j}") for j, v in enumerate(row, 1)])
    try:
        return SystemParams(n=n, p=p, sigma=np.array(sig), rho=np.array(rows))
    except InvalidInputError as exc:
        raise InvalidInputError(f"{source}: {exc}") from None


def load_params(path):
    return params_from_dict(read_json(path), source=str(path))


def save_params(path, params):
    d = {"schema": SCHEMA}
    d.update(params.to_dict())
    atomic_write(path, dumps(d))

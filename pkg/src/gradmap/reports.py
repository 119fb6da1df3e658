"""JSON measure files, deterministic JSON reports and commented CSV tables.

Measure schema::

    {"model": {"kind": "rp" | "cp", "n": int},
     "atoms": [{"coords": [...], "weight": number}, ...]}

Complex coordinates are ``[re, im]`` pairs.  Reports carry
``"schema_version": "1"`` and write every float with 17 significant digits,
so the same inputs always give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from pathlib import Path

import numpy as np

from .measures import DiscreteMeasure
from .model_space import ModelSpace

SCHEMA_VERSION = "1"
SUM_EXACT = 1e-12
SUM_RENORMALIZE = 1e-6
UNIT_EXACT = 1e-14


class InputError(ValueError):
    """Invalid user input; the CLI maps it to exit code 2."""


class RenormalizationWarning(UserWarning):
    pass


def _fail(where, msg):
    raise InputError(f"{where}: {msg}")


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(where, f"expected a number, got {json.dumps(v)}")
    if not math.isfinite(v):
        _fail(where, "number must be finite")
    return float(v)


def parse_model(obj, where="model") -> ModelSpace:
    if not isinstance(obj, dict):
        _fail(where, "expected an object with 'kind' and 'n'")
    for key in ("kind", "n"):
        if key not in obj:
            _fail(f"{where}.{key}", "missing field")
    n = obj["n"]
    if isinstance(n, bool) or not isinstance(n, int):
        _fail(f"{where}.n", "expected an integer")
    try:
        return ModelSpace(obj["kind"], n)
    except ValueError as exc:
        _fail(where, str(exc))


def parse_coords(raw, model, where):
    if not isinstance(raw, list) or len(raw) != model.N:
        _fail(where, f"expected a list of {model.N} coordinates")
    if model.is_complex:
        out = np.empty(model.N, dtype=complex)
        for j, c in enumerate(raw):
            if isinstance(c, list):
                if len(c) != 2:
                    _fail(f"{where}[{j}]", "complex coordinate must be an [re, im] pair")
                out[j] = complex(_number(c[0], f"{where}[{j}][0]"), _number(c[1], f"{where}[{j}][1]"))
            else:
                out[j] = _number(c, f"{where}[{j}]")
        return out
    return np.array([_number(c, f"{where}[{j}]") for j, c in enumerate(raw)])


def measure_from_obj(obj, source="<input>") -> DiscreteMeasure:
    if not isinstance(obj, dict):
        _fail(source, "top level must be an object")
    model = parse_model(obj.get("model"), f"{source}: model")
    atoms = obj.get("atoms")
    if not isinstance(atoms, list) or not atoms:
        _fail(f"{source}: atoms", "expected a nonempty list")
    pts, ws = [], []
    for i, a in enumerate(atoms):
        where = f"{source}: atoms[{i}]"
        if not isinstance(a, dict):
            _fail(where, "expected an object with 'coords' and 'weight'")
        if "coords" not in a:
            _fail(f"{where}.coords", "missing field")
        if "weight" not in a:
            _fail(f"{where}.weight", "missing field")
        x = parse_coords(a["coords"], model, f"{where}.coords")
        w = _number(a["weight"], f"{where}.weight")
        if w < 0:
            _fail(f"{where}.weight", "weight must be nonnegative")
        nrm2 = float(np.real(np.vdot(x, x)))
        if nrm2 == 0.0:
            _fail(f"{where}.coords", "zero vector is not a projective point")
        if abs(nrm2 - 1.0) > UNIT_EXACT:
            x = x / np.sqrt(nrm2)
        pts.append(x)
        ws.append(w)
    w = np.array(ws)
    total = w.sum()
    if abs(total - 1.0) > SUM_EXACT:
        if abs(total - 1.0) > SUM_RENORMALIZE:
            _fail(f"{source}: atoms[*].weight", f"weights sum to {total!r}, not 1")
        warnings.warn(f"{source}: weights sum to {total!r}; renormalized", RenormalizationWarning,
                      stacklevel=2)
        w = w / total
    try:
        return DiscreteMeasure(model, np.array(pts), w)
    except ValueError as exc:
        _fail(f"{source}: atoms", str(exc))


def load_measure(path) -> DiscreteMeasure:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return measure_from_obj(obj, str(path))


def _coords_out(x, model):
    if model.is_complex:
        return [[float(c.real), float(c.imag)] for c in x]
    return [float(c) for c in np.real(x)]


def measure_to_obj(nu: DiscreteMeasure) -> dict:
    m = nu.model
    return {"model": {"kind": m.kind, "n": m.n},
            "atoms": [{"coords": _coords_out(x, m), "weight": float(w)}
                      for x, w in zip(nu.atoms, nu.weights)]}


def write_measure(nu: DiscreteMeasure, path) -> Path:
    return _write_text(path, dumps(measure_to_obj(nu)))


def to_plain(value):
    """numpy values to JSON-ready Python; complex arrays become [re, im] pairs."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return to_plain(np.stack([value.real, value.imag], axis=-1))
        return to_plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    return value


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"NaN"'
    if math.isinf(v):
        return '"Infinity"' if v > 0 else '"-Infinity"'
    return format(v, ".17g")


def _emit(v, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(v, dict):
        if not v:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, item) in enumerate(v.items()):
            out.append(pad + json.dumps(k) + ": ")
            _emit(item, indent, level + 1, out)
            out.append(",\n" if i < len(v) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(v, list):
        if not v:
            out.append("[]")
        elif all(not isinstance(x, (dict, list)) for x in v):
            out.append("[")
            for i, x in enumerate(v):
                if i:
                    out.append(", ")
                _emit(x, indent, level, out)
            out.append("]")
        else:
            out.append("[\n")
            for i, item in enumerate(v):
                out.append(pad)
                _emit(item, indent, level + 1, out)
                out.append(",\n" if i < len(v) - 1 else "\n")
            out.append(end + "]")
    elif isinstance(v, bool) or v is None or isinstance(v, (str, int)):
        out.append(json.dumps(v))
    elif isinstance(v, float):
        out.append(_fmt_float(v))
    else:
        raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON text with 17-significant-digit floats."""
    out = []
    _emit(to_plain(obj), indent, 0, out)
    out.append("\n")
    return "".join(out)


def _write_text(path, text) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def write_report(report: dict, path) -> Path:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(report)
    return _write_text(path, dumps(body))


def write_csv(path, header: list[str], rows, comments: list[str]) -> Path:
    """CSV with ``#`` comment lines describing the columns, then a header row."""
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_float(float(v)).strip('"') if isinstance(v, (float, np.floating)) else v
                    for v in row])
    return _write_text(path, buf.getvalue())

"""Instance files, kernel-table JSON and result writers.

An instance document is a JSON object::

    {"horizon": n, "x_sizes": [...], "y_sizes": [...],
     "input_kernels": [rows_0, ..., rows_n],      # optional per command
     "channel_kernels": [rows_0, ..., rows_n],    # optional per command
     "distortion": [matrix_0, ...], "distortion_budget": D,   # optional
     "power_costs": [vector_0, ...], "power_budget": P}       # optional

``rows_i`` lists one pmf per history.  Histories run over the interleaved prefix
``x_0, y_0, x_1, y_1, ...`` in mixed-radix order with the earliest symbol most
significant: ``(x^{i-1}, y^{i-1})`` for input kernels and ``(x^{i-1}, y^{i-1}, x_i)``
for channel kernels.  Reverse decompositions use ``s_kernels`` (histories
``(x^{i-1}, y^{i-1})``) and ``r_kernels`` (histories ``(x^{i-1}, y^{i-1}, y_i)``).
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .extremum import DistortionSpec, PowerSpec
from .measures import MAX_CELLS, SUM_TOL, ForwardChannel, InputPolicy, InstanceSpec, InvalidInstance
from .variational import ReverseDecomposition, _r_shape, _s_shape


class ParseError(ValueError):
    """The file is unreadable, not JSON, or lacks a required field."""


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class Instance:
    spec: InstanceSpec
    policy: InputPolicy | None = None
    channel: ForwardChannel | None = None
    distortion_tables: tuple | None = None
    distortion_budget: float | None = None
    power_costs: tuple | None = None
    power_budget: float | None = None


def load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    return doc


# ------------------------------------------------------------------ validation

def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _spec_diagnostics(doc: dict) -> tuple[list[Diagnostic], InstanceSpec | None]:
    diags = []
    n = doc.get("horizon")
    if not _is_int(n) or n < 0:
        diags.append(Diagnostic("horizon", "must be an integer >= 0"))
        return diags, None
    sizes = {}
    for key in ("x_sizes", "y_sizes"):
        v = doc.get(key)
        if not isinstance(v, list) or len(v) != n + 1:
            diags.append(Diagnostic(key, f"must be a list of {n + 1} integers"))
            continue
        for i, s in enumerate(v):
            if not _is_int(s) or s < 1:
                diags.append(Diagnostic(f"{key}[{i}]", "alphabet size must be an integer >= 1"))
        sizes[key] = v
    if diags:
        return diags, None
    cells = math.prod(sizes["x_sizes"]) * math.prod(sizes["y_sizes"])
    if cells > MAX_CELLS:
        diags.append(Diagnostic("x_sizes", f"joint space has {cells} cells, above the cap {MAX_CELLS}"))
        return diags, None
    return diags, InstanceSpec(n, tuple(sizes["x_sizes"]), tuple(sizes["y_sizes"]))


def _rows_diagnostics(key: str, value, shapes: list[tuple[int, ...]]) -> list[Diagnostic]:
    diags = []
    if not isinstance(value, list) or len(value) != len(shapes):
        return [Diagnostic(key, f"must be a list of {len(shapes)} kernel tables")]
    for i, (rows, shape) in enumerate(zip(value, shapes)):
        n_rows, width = math.prod(shape[:-1]), shape[-1]
        if not isinstance(rows, list) or len(rows) != n_rows:
            diags.append(Diagnostic(f"{key}[{i}]", f"must hold {n_rows} rows"))
            continue
        for h, row in enumerate(rows):
            where = f"{key}[{i}][{h}]"
            if not isinstance(row, list) or len(row) != width:
                diags.append(Diagnostic(where, f"row must have {width} entries"))
                continue
            if not all(_is_real(v) for v in row):
                diags.append(Diagnostic(where, "entries must be numbers"))
                continue
            arr = np.asarray(row, dtype=float)
            if not np.all(np.isfinite(arr)):
                diags.append(Diagnostic(where, "non-finite entry"))
                continue
            bad = np.flatnonzero(arr < 0)
            for j in bad:
                diags.append(Diagnostic(f"{where}[{j}]", f"negative entry {float(arr[j])!r}"))
            total = float(arr.sum())
            if abs(total - 1.0) > SUM_TOL:
                diags.append(Diagnostic(where, f"row sums to {total!r}, not 1"))
    return diags


def _table_diagnostics(key: str, value, shapes: list[tuple[int, ...]]) -> list[Diagnostic]:
    """Per-step nonnegative tables of fixed shapes (distortion matrices, cost vectors)."""
    if not isinstance(value, list) or len(value) != len(shapes):
        return [Diagnostic(key, f"must be a list of {len(shapes)} tables")]
    diags = []
    for i, (t, shape) in enumerate(zip(value, shapes)):
        try:
            arr = np.asarray(t, dtype=float)
        except (TypeError, ValueError):
            diags.append(Diagnostic(f"{key}[{i}]", "must be numeric"))
            continue
        if arr.shape != shape:
            diags.append(Diagnostic(f"{key}[{i}]", f"shape {list(arr.shape)}, expected {list(shape)}"))
        elif not np.all(np.isfinite(arr)) or np.any(arr < 0):
            diags.append(Diagnostic(f"{key}[{i}]", "entries must be finite and >= 0"))
    return diags


def _budget_diagnostics(doc: dict, key: str) -> list[Diagnostic]:
    if key not in doc:
        return []
    v = doc[key]
    if not _is_real(v) or not math.isfinite(v) or v < 0:
        return [Diagnostic(key, "must be a finite number >= 0")]
    return []


def validate_document(doc: dict) -> list[Diagnostic]:
    """Every violated invariant of an instance or kernel-table document."""
    diags, spec = _spec_diagnostics(doc)
    if spec is None:
        return diags
    steps = range(spec.horizon + 1)
    layouts = {
        "input_kernels": [spec.input_kernel_shape(i) for i in steps],
        "channel_kernels": [spec.channel_kernel_shape(i) for i in steps],
        "s_kernels": [_s_shape(spec, i) for i in steps],
        "r_kernels": [_r_shape(spec, i) for i in steps],
    }
    for key, shapes in layouts.items():
        if key in doc:
            diags += _rows_diagnostics(key, doc[key], shapes)
    if ("s_kernels" in doc) != ("r_kernels" in doc):
        diags.append(Diagnostic("s_kernels", "s_kernels and r_kernels must appear together"))
    if "distortion" in doc:
        diags += _table_diagnostics(
            "distortion", doc["distortion"], [(spec.x_sizes[i], spec.y_sizes[i]) for i in steps]
        )
    if "power_costs" in doc:
        diags += _table_diagnostics("power_costs", doc["power_costs"], [(spec.x_sizes[i],) for i in steps])
    diags += _budget_diagnostics(doc, "distortion_budget")
    diags += _budget_diagnostics(doc, "power_budget")
    return diags


def validate(path) -> list[str]:
    """Diagnostics for the file at ``path`` as ``"index.path: message"`` strings."""
    return [str(d) for d in validate_document(load_json(path))]


# ------------------------------------------------------------------ decoding

def instance_from_document(doc: dict) -> Instance:
    """Build typed objects; the caller should have checked :func:`validate_document`."""
    _, spec = _spec_diagnostics(doc)
    if spec is None:
        raise ParseError("instance header is invalid")
    policy = InputPolicy(spec, doc["input_kernels"]) if "input_kernels" in doc else None
    channel = ForwardChannel(spec, doc["channel_kernels"]) if "channel_kernels" in doc else None
    dist = tuple(np.asarray(t, dtype=float) for t in doc["distortion"]) if "distortion" in doc else None
    costs = tuple(np.asarray(c, dtype=float) for c in doc["power_costs"]) if "power_costs" in doc else None
    return Instance(
        spec, policy, channel, dist, doc.get("distortion_budget"), costs, doc.get("power_budget")
    )


def load_instance(path) -> Instance:
    doc = load_json(path)
    diags = validate_document(doc)
    if diags:
        raise InvalidInstance("; ".join(str(d) for d in diags))
    return instance_from_document(doc)


def distortion_spec(inst: Instance, budget: float) -> DistortionSpec:
    if inst.distortion_tables is None:
        return DistortionSpec.hamming(inst.spec, budget)
    return DistortionSpec(inst.distortion_tables, budget)


def power_spec(inst: Instance, budget: float) -> PowerSpec:
    """Instance costs, or ``c_i[x] = x`` when the file has none."""
    if inst.power_costs is None:
        costs = tuple(np.arange(k, dtype=float) for k in inst.spec.x_sizes)
        return PowerSpec(costs, budget)
    return PowerSpec(inst.power_costs, budget)


# ------------------------------------------------------------------ encoding

def _rows(kernels) -> list[list[list[float]]]:
    return [np.asarray(k).reshape(-1, np.asarray(k).shape[-1]).tolist() for k in kernels]


def spec_document(spec: InstanceSpec) -> dict:
    return {"horizon": spec.horizon, "x_sizes": list(spec.x_sizes), "y_sizes": list(spec.y_sizes)}


def policy_document(policy: InputPolicy) -> dict:
    return {**spec_document(policy.spec), "input_kernels": _rows(policy.kernels)}


def channel_document(channel: ForwardChannel) -> dict:
    return {**spec_document(channel.spec), "channel_kernels": _rows(channel.kernels)}


def sr_document(sr: ReverseDecomposition) -> dict:
    return {**spec_document(sr.spec), "s_kernels": _rows(sr.s_kernels), "r_kernels": _rows(sr.r_kernels)}


def _clean(obj):
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def dumps_csv(header: list[str], records: list[list]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    w.writerow(header)
    for rec in records:
        w.writerow([repr(v) if isinstance(v, float) else v for v in _clean(list(rec))])
    return buf.getvalue()


def emit(text: str, path=None, stream=None) -> None:
    if path is None:
        (stream or sys.stdout).write(text)
    else:
        Path(path).write_text(text)

"""Config parsing, report serialization and the shipped JSON schemas."""

from __future__ import annotations

import json
import math
from importlib import resources

import jsonschema
import numpy as np

from hawkes_uq.ci_asymptotic import ConfidenceReport
from hawkes_uq.errors import ConfigError
from hawkes_uq.process import ModelParams, kernels_from_json


def fmt(x: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(x), ".17g")


def _dump(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _dump(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _dump(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits; non-finite floats become null."""
    return _dump(obj, indent, 0) + "\n"


def write_json(obj, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))


def load_schema(name: str) -> dict:
    text = resources.files("hawkes_uq.schemas").joinpath(f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate(obj, name: str):
    jsonschema.validate(obj, load_schema(name))


# --------------------------------------------------------------------------
# config


def read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


def parse_config(cfg: dict, source: str = "config") -> tuple[ModelParams, float]:
    """Validate an experiment config and build ``(params, T)``."""
    try:
        jsonschema.validate(cfg, load_schema("config"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{source}: field '{where}': {exc.message}") from None
    D = cfg["D"]
    mu = cfg["mu"]
    if len(mu) != D:
        raise ConfigError(f"{source}: field 'mu': expected {D} entries, got {len(mu)}")
    for k, m in enumerate(mu):
        if not m > 0:
            raise ConfigError(f"{source}: field 'mu/{k}': background rate must be > 0, got {m}")
    A = cfg.get("A", [[0.0] * D for _ in range(D)])
    if len(A) != D or any(len(r) != D for r in A):
        raise ConfigError(f"{source}: field 'A': expected a {D}x{D} matrix")
    for i, r in enumerate(A):
        for j, a in enumerate(r):
            if a < 0:
                raise ConfigError(f"{source}: field 'A/{i}/{j}': influence must be >= 0, got {a}")
    try:
        kernels = kernels_from_json(cfg["kernels"], D)
    except ValueError as exc:
        raise ConfigError(f"{source}: field 'kernels': {exc}") from None
    return ModelParams(np.array(mu, float), np.array(A, float), kernels), float(cfg["T"])


def load_config(path: str) -> tuple[ModelParams, float]:
    return parse_config(read_json(path), source=path)


def load_truth(path: str) -> np.ndarray:
    """Truth matrix from a config file (its ``A``) or a bare JSON matrix."""
    obj = read_json(path)
    if isinstance(obj, dict):
        if "A" not in obj:
            raise ConfigError(f"{path}: field 'A' missing")
        obj = obj["A"]
    return np.asarray(obj, dtype=float)


# --------------------------------------------------------------------------
# reports


def _num(x):
    return float(x) if math.isfinite(float(x)) else None


def report_to_dict(rep: ConfidenceReport) -> dict:
    entries = []
    for i, j, point, lo, hi in rep.entries():
        entries.append(
            {
                "i": int(i),
                "j": int(j),
                "point": _num(point),
                "lo": _num(lo),
                "hi": _num(hi),
                "width": _num(hi - lo),
                "lo_clipped": _num(max(lo, 0.0)) if not math.isnan(lo) else None,
            }
        )
    flags = {k: v for k, v in rep.flags.items()}
    out = {
        "method": rep.method,
        "level": rep.level,
        "epsilon": rep.epsilon,
        "D": int(rep.point.shape[1]),
        "rows": [int(i) for i in rep.rows],
        "entries": entries,
        "flags": flags,
    }
    if "polyhedra" in rep.diagnostics:
        out["polyhedra"] = rep.diagnostics["polyhedra"]
    if rep.diagnostics.get("endpoint_membership"):
        out["endpoint_membership"] = rep.diagnostics["endpoint_membership"]
    return out


def report_from_dict(obj: dict) -> ConfidenceReport:
    try:
        validate(obj, "report")
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"report field '{where}': {exc.message}") from None
    D = obj["D"]
    rows = obj["rows"]
    shape = (len(rows), D)
    point = np.full(shape, np.nan)
    lo = np.full(shape, np.nan)
    hi = np.full(shape, np.nan)
    unbounded = {tuple(p) for p in obj["flags"].get("unbounded", [])}
    for e in obj["entries"]:
        r = rows.index(e["i"])
        j = e["j"]
        point[r, j] = np.nan if e["point"] is None else e["point"]
        lo[r, j] = np.nan if e["lo"] is None else e["lo"]
        if e["hi"] is None:
            hi[r, j] = np.inf if (e["i"], j) in unbounded else np.nan
        else:
            hi[r, j] = e["hi"]
    return ConfidenceReport(obj["method"], obj["epsilon"], list(rows), point, lo, hi, flags=dict(obj["flags"]))

"""Instance and report serialization in a canonical JSON form."""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .tree import ExponentConfig, Instance, MeasurePair, TreeTooLarge, build_tree

FORMAT_VERSION = 1


class InstanceFormatError(ValueError):
    """Schema or validation failure, located by a JSON pointer."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


# ---------------------------------------------------------------- canonical JSON

def _num(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _emit(obj, out: list[str]) -> None:
    if isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _emit(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    elif obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_num(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Sorted keys, no whitespace, floats with 17 significant digits."""
    out: list[str] = []
    _emit(obj, out)
    return "".join(out)


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


# ---------------------------------------------------------------- instances

def instance_to_dict(inst: Instance) -> dict:
    tree = inst.tree
    lam = {tree.path_str(int(i)): float(inst.lam[i]) for i in np.flatnonzero(inst.lam)}
    e = inst.exponents
    return {
        "format": FORMAT_VERSION,
        "branching": tree.branching,
        "depth": tree.depth,
        "lambda": lam,
        "sigma_leaves": [float(x) for x in inst.sigma_leaves],
        "omega_leaves": [float(x) for x in inst.omega_leaves],
        "exponents": {"p": e.p, "q": e.q, "gamma": e.gamma},
    }


def _require(d: dict, key: str, kind, ptr: str):
    if key not in d:
        raise InstanceFormatError(f"{ptr}/{key}", "missing required field")
    v = d[key]
    if not isinstance(v, kind) or isinstance(v, bool):
        raise InstanceFormatError(f"{ptr}/{key}", f"expected {getattr(kind, '__name__', kind)}")
    return v


def _leaf_array(d: dict, key: str, n: int) -> np.ndarray:
    vals = _require(d, key, list, "")
    if len(vals) != n:
        raise InstanceFormatError(f"/{key}", f"expected {n} leaf values, got {len(vals)}")
    for i, v in enumerate(vals):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise InstanceFormatError(f"/{key}/{i}", "expected a number")
        if not math.isfinite(v) or v < 0:
            raise InstanceFormatError(f"/{key}/{i}", "masses must be finite and nonnegative")
    return np.asarray(vals, dtype=float)


def instance_from_dict(d) -> Instance:
    if not isinstance(d, dict):
        raise InstanceFormatError("", "expected an object")
    fmt = d.get("format", FORMAT_VERSION)  # absent means the current format
    if fmt != FORMAT_VERSION:
        raise InstanceFormatError("/format", f"unsupported format {fmt}")
    b = _require(d, "branching", int, "")
    depth = _require(d, "depth", int, "")
    if b < 2:
        raise InstanceFormatError("/branching", "branching must be >= 2")
    if depth < 0:
        raise InstanceFormatError("/depth", "depth must be >= 0")
    try:
        tree = build_tree(b, depth)
    except TreeTooLarge as exc:
        raise InstanceFormatError("/depth", str(exc)) from exc
    sig = _leaf_array(d, "sigma_leaves", tree.n_leaves)
    om = _leaf_array(d, "omega_leaves", tree.n_leaves)
    lam = np.zeros(tree.n_nodes)
    lam_d = d.get("lambda", {})
    if not isinstance(lam_d, dict):
        raise InstanceFormatError("/lambda", "expected an object keyed by node path")
    for path, v in lam_d.items():
        ptr = "/lambda/" + path.replace("~", "~0").replace("/", "~1")
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v < 0:
            raise InstanceFormatError(ptr, "coefficient must be a finite nonnegative number")
        try:
            lam[tree.node_index(path)] = v
        except ValueError as exc:
            raise InstanceFormatError(ptr, str(exc)) from exc
    ex = _require(d, "exponents", dict, "")
    vals = {}
    for key in ("p", "q", "gamma"):
        if key == "gamma" and key not in ex:
            vals[key] = 1.0
            continue
        v = _require(ex, key, (int, float), "/exponents")
        vals[key] = float(v)
    try:
        exps = ExponentConfig(vals["p"], vals["q"], vals["gamma"])
    except ValueError as exc:
        raise InstanceFormatError("/exponents", str(exc)) from exc
    return Instance(tree, lam, MeasurePair(tree, sig, om), exps)


def load_instance(path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceFormatError("", f"invalid JSON: {exc}") from exc
    return instance_from_dict(data)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(canonical_json(instance_to_dict(inst)) + "\n")


def instance_digest(inst: Instance) -> str:
    return digest(instance_to_dict(inst))

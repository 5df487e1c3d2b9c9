"""JSON readers and writers for spaces, elements, adjacency data and duals.

Matrices are nested lists; a complex entry is written ``[re, im]``.  Block
labels are strings in JSON; two-sided keys join two labels with ``":"``.

Space::

    {"blocks": [{"label": "a", "rho": [[2, 0], [0, 0.5]], "scale": 1.0}, ...]}

``rho`` may also be a flat list (a diagonal density).  Adjacency files carry
a ``"space"`` and exactly one of ``"choi"`` (keys ``"beta:alpha"``),
``"maps"`` (keys ``"beta:alpha"``, ``n_b^2 x n_a^2`` matrices on row-major
vectorisations), ``"bimodule"`` (``{"parts": {"alpha:beta": [X, ...]}}``) or
``"classical"`` (a 0/1 matrix; the space is then ``C^n``).
"""
from __future__ import annotations

import json
from typing import Any, Dict, List, Mapping, Tuple

import numpy as np

from .bimodule import Bimodule, adjacency_from_bimodule
from .choi import AdjacencyMap
from .fusion import FusionDual, FusionError, dual_from_descriptor
from .qspace import AlgebraElement, Block, QuantumSpace, SpaceError, TwoSidedElement


class InputError(ValueError):
    """Malformed input; the message carries the location when known."""


def load_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _entry(v, where: str) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(v[0], v[1])
    raise InputError(f"{where}: expected a number or [re, im], got {v!r}")


def parse_matrix(obj, where: str = "matrix") -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise InputError(f"{where}: expected a non-empty list of rows")
    width = len(obj[0])
    rows = []
    for i, r in enumerate(obj):
        if len(r) != width:
            raise InputError(f"{where}: row {i} has {len(r)} entries, expected {width}")
        rows.append([_entry(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)])
    return np.array(rows, dtype=complex)


def dump_matrix(m: np.ndarray, tol: float = 0.0) -> List[List[Any]]:
    m = np.asarray(m)
    if np.all(np.abs(np.imag(m)) <= tol):
        return [[float(v) for v in row] for row in np.real(m)]
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _split_key(key: str, where: str) -> Tuple[str, str]:
    parts = key.split(":")
    if len(parts) != 2:
        raise InputError(f"{where}: key {key!r} must look like 'label:label'")
    return parts[0], parts[1]


# -- spaces ------------------------------------------------------------------

def parse_space(obj) -> QuantumSpace:
    if not isinstance(obj, dict) or "blocks" not in obj:
        raise InputError("space: expected an object with a 'blocks' list")
    blocks = []
    for i, b in enumerate(obj["blocks"]):
        where = f"space.blocks[{i}]"
        if not isinstance(b, dict) or "rho" not in b:
            raise InputError(f"{where}: expected an object with 'rho'")
        label = str(b.get("label", i))
        raw = b["rho"]
        if isinstance(raw, list) and raw and not isinstance(raw[0], list):
            rho = np.diag([_entry(v, f"{where}.rho") for v in raw])
        else:
            rho = parse_matrix(raw, f"{where}.rho")
        if "dim" in b and int(b["dim"]) != rho.shape[0]:
            raise InputError(f"{where}: dim {b['dim']} does not match rho of size {rho.shape[0]}")
        if np.abs(rho.imag).max() <= 1e-15:
            rho = rho.real
        try:
            blocks.append(Block(label, rho.shape[0], rho, float(b.get("scale", 1.0))))
        except SpaceError as exc:
            raise InputError(f"{where}: {exc}") from exc
    if not blocks:
        raise InputError("space: no blocks")
    return QuantumSpace(blocks)


def dump_space(space: QuantumSpace) -> dict:
    out = []
    for b in space.blocks:
        d = {"label": str(b.label), "dim": b.dim, "rho": dump_matrix(b.rho)}
        if b.scale != 1.0:
            d["scale"] = b.scale
        out.append(d)
    return {"blocks": out}


# -- elements ----------------------------------------------------------------

def parse_element(obj, space: QuantumSpace | None = None, parse_label=str) -> AlgebraElement:
    if not isinstance(obj, dict):
        raise InputError("element: expected an object mapping labels to matrices")
    out = {}
    for key, m in obj.items():
        try:
            label = parse_label(key)
        except (ValueError, FusionError) as exc:
            raise InputError(f"element: bad label {key!r}: {exc}") from exc
        mat = parse_matrix(m, f"element[{key!r}]")
        if space is not None:
            if label not in space:
                raise InputError(f"element: label {key!r} is not in the space")
            if mat.shape[0] != space.dim(label):
                raise InputError(f"element[{key!r}]: size {mat.shape[0]} != block dimension {space.dim(label)}")
        out[label] = mat
    return AlgebraElement(out)


def dump_element(x: AlgebraElement, format_label=str) -> dict:
    return {format_label(a): dump_matrix(m) for a, m in x.blocks.items()}


def parse_two_sided(obj, space: QuantumSpace) -> TwoSidedElement:
    if not isinstance(obj, dict):
        raise InputError("choi: expected an object with 'beta:alpha' keys")
    out = {}
    for key, m in obj.items():
        b, a = _split_key(key, "choi")
        for lab in (a, b):
            if lab not in space:
                raise InputError(f"choi: label {lab!r} is not in the space")
        mat = parse_matrix(m, f"choi[{key!r}]")
        n = space.dim(b) * space.dim(a)
        if mat.shape != (n, n):
            raise InputError(f"choi[{key!r}]: shape {mat.shape}, expected {(n, n)}")
        out[(b, a)] = mat
    return TwoSidedElement(out)


def dump_two_sided(P: TwoSidedElement) -> dict:
    return {f"{b}:{a}": dump_matrix(m) for (b, a), m in P.blocks.items()}


def parse_maps(obj, space: QuantumSpace) -> AdjacencyMap:
    out = {}
    for key, m in obj.items():
        b, a = _split_key(key, "maps")
        for lab in (a, b):
            if lab not in space:
                raise InputError(f"maps: label {lab!r} is not in the space")
        mat = parse_matrix(m, f"maps[{key!r}]")
        shape = (space.dim(b) ** 2, space.dim(a) ** 2)
        if mat.shape != shape:
            raise InputError(f"maps[{key!r}]: shape {mat.shape}, expected {shape}")
        out[(b, a)] = mat
    return AdjacencyMap.from_maps(space, out)


def dump_maps(A: AdjacencyMap) -> dict:
    return {f"{b}:{a}": dump_matrix(m) for (b, a), m in A.maps.items()}


def parse_bimodule(obj, space: QuantumSpace) -> Bimodule:
    parts = obj.get("parts") if isinstance(obj, dict) else None
    if not isinstance(parts, dict):
        raise InputError("bimodule: expected {'parts': {'alpha:beta': [matrix, ...]}}")
    raw: Dict[Tuple[str, str], List[np.ndarray]] = {}
    for key, mats in parts.items():
        a, b = _split_key(key, "bimodule.parts")
        for lab in (a, b):
            if lab not in space:
                raise InputError(f"bimodule: label {lab!r} is not in the space")
        if not isinstance(mats, list):
            raise InputError(f"bimodule.parts[{key!r}]: expected a list of matrices")
        for i, m in enumerate(mats):
            X = parse_matrix(m, f"bimodule.parts[{key!r}][{i}]")
            if X.shape != (space.dim(b), space.dim(a)):
                raise InputError(f"bimodule.parts[{key!r}][{i}]: shape {X.shape}, "
                                 f"expected {(space.dim(b), space.dim(a))}")
            raw.setdefault((a, b), []).append(X)
    return Bimodule.from_spanning(space, raw)


def dump_bimodule(V: Bimodule) -> dict:
    return {"parts": {f"{a}:{b}": [dump_matrix(X) for X in mats] for (a, b), mats in V.parts.items()}}


def parse_adjacency(obj) -> AdjacencyMap:
    """Read an adjacency file (see the module docstring)."""
    if not isinstance(obj, dict):
        raise InputError("adjacency: expected a JSON object")
    if "classical" in obj:
        M = parse_matrix(obj["classical"], "classical")
        if np.abs(M.imag).max() > 0:
            raise InputError("classical: entries must be real")
        return AdjacencyMap.classical(M.real, [str(i) for i in range(M.shape[0])])
    if "space" not in obj:
        raise InputError("adjacency: missing 'space'")
    space = parse_space(obj["space"])
    kinds = [k for k in ("choi", "maps", "bimodule") if k in obj]
    if len(kinds) != 1:
        raise InputError("adjacency: give exactly one of 'choi', 'maps', 'bimodule', 'classical'")
    kind = kinds[0]
    if kind == "choi":
        return AdjacencyMap.from_choi(space, parse_two_sided(obj["choi"], space))
    if kind == "maps":
        return parse_maps(obj["maps"], space)
    return adjacency_from_bimodule(parse_bimodule(obj["bimodule"], space))


# -- duals ---------------------------------------------------------------------

def parse_dual(obj) -> FusionDual:
    if not isinstance(obj, Mapping):
        raise InputError("dual: expected a JSON object")
    try:
        return dual_from_descriptor(obj)
    except (FusionError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"dual: {exc}") from exc


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples for ``json.dumps``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return dump_matrix(obj) if obj.ndim == 2 else [to_jsonable(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)] if obj.imag else float(obj.real)
    if isinstance(obj, (frozenset, set)):
        return sorted(str(v) for v in obj)
    return obj

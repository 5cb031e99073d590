"""System documents: YAML descriptions of switched systems.

Grammar (all keys optional unless marked)::

    name: str
    description: str
    modes:                      # required, list
      - id: str                 # required
        A: [[...], ...]         # required, rows of numbers
        basis: [[...], ...]     # Jordan basis override; entries may be
                                # numbers or expression strings such as
                                # "I*sqrt(2)/sqrt(3)"
        basis_scale: float      # multiply the basis (rescaling directive)
        margin: float           # decay margin for defective modes
    graph: complete | {edges: [[p, q], ...]}      # default complete
    jumps:
      kind: resets | finite | convexHull | none
      resets: [{edge: [p, q], matrix: [[...]]}, ...]   # kind resets
      matrices: [[[...]], ...]                         # finite / convexHull
    norm: spectral | {kind: ellipsoidal, weight: [[...]]}
    expect: mapping             # regression values, free-form

Unknown keys raise :class:`DocumentError`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import sympy
import yaml

from .errors import DocumentError
from .model import (
    ImpulseSet,
    ModeGraph,
    ResetCollection,
    SubsystemSpec,
    SwitchedSystemSpec,
    validate,
)
from .numlin import SPECTRAL, NormSpec

TOP_KEYS = {"name", "description", "modes", "graph", "jumps", "norm", "expect"}
MODE_KEYS = {"id", "A", "basis", "basis_scale", "margin"}
JUMP_KEYS = {"kind", "resets", "matrices"}


def _check_keys(obj: Dict, allowed, where: str):
    if not isinstance(obj, dict):
        raise DocumentError(f"{where}: expected a mapping")
    extra = set(obj) - set(allowed)
    if extra:
        raise DocumentError(f"{where}: unknown keys {sorted(extra)}")


def parse_scalar(value) -> complex:
    """Number or sympy expression string to a Python complex."""
    if isinstance(value, bool):
        raise DocumentError(f"boolean {value!r} is not a matrix entry")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        try:
            return complex(value)
        except ValueError:
            pass
        try:
            expr = sympy.sympify(value, rational=False)
            return complex(sympy.N(expr, 30))
        except (sympy.SympifyError, TypeError) as exc:
            raise DocumentError(f"cannot read matrix entry {value!r}") from exc
    raise DocumentError(f"cannot read matrix entry {value!r}")


def parse_matrix(rows, where: str, complex_ok: bool = False) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise DocumentError(f"{where}: expected a list of rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DocumentError(f"{where}: ragged rows")
    M = np.array([[parse_scalar(v) for v in r] for r in rows], dtype=complex)
    if complex_ok and np.any(M.imag != 0):
        return M
    if np.any(M.imag != 0):
        raise DocumentError(f"{where}: complex entries are not allowed here")
    return M.real.copy()


def format_scalar(z: complex):
    """Exact text for a matrix entry (repr round-trips floats)."""
    z = complex(z)
    if z.imag == 0:
        return float(z.real)
    return repr(z)


def format_matrix(M: np.ndarray) -> List[List[Any]]:
    return [[format_scalar(v) for v in row] for row in np.asarray(M)]


@dataclass(frozen=True)
class ModeEntry:
    id: str
    A: np.ndarray
    basis: Optional[np.ndarray] = None
    basis_scale: float = 1.0
    margin: Optional[float] = None


@dataclass
class SystemDocument:
    """Parsed document: raw inputs plus metadata, convertible to a spec."""

    modes: List[ModeEntry]
    graph_edges: Optional[List[tuple]] = None
    jump_kind: str = "none"
    resets: Dict[tuple, np.ndarray] = field(default_factory=dict)
    matrices: List[np.ndarray] = field(default_factory=list)
    norm: NormSpec = SPECTRAL
    name: str = ""
    description: str = ""
    expect: Dict[str, Any] = field(default_factory=dict)
    source_text: str = field(default="", repr=False)

    # -- conversion ------------------------------------------------------
    def to_spec(self, norm: Optional[NormSpec] = None, check: bool = True) -> SwitchedSystemSpec:
        norm = norm or self.norm
        subs = tuple(
            SubsystemSpec.build(m.id, m.A, m.basis, m.basis_scale, m.margin, norm)
            for m in self.modes
        )
        ids = [m.id for m in self.modes]
        if self.graph_edges is None:
            graph = ModeGraph.complete(ids)
        else:
            graph = ModeGraph(tuple(ids), frozenset(self.graph_edges))
        if self.jump_kind == "resets":
            jumps = ResetCollection(self.resets)
        elif self.jump_kind in ("finite", "convexHull"):
            jumps = ImpulseSet(self.jump_kind, tuple(self.matrices))
        else:
            jumps = None
        spec = SwitchedSystemSpec(subs, graph, jumps, norm)
        if check:
            diags = validate(spec)
            if diags:
                raise DocumentError("; ".join(str(d) for d in diags), diags)
        return spec

    def digest(self) -> str:
        text = self.source_text or dump_document(self)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_bases(self, bases: Dict[str, np.ndarray]) -> "SystemDocument":
        modes = [
            ModeEntry(m.id, m.A, bases.get(m.id, m.basis), 1.0 if m.id in bases else m.basis_scale,
                      m.margin)
            for m in self.modes
        ]
        return SystemDocument(modes, self.graph_edges, self.jump_kind, self.resets,
                              self.matrices, self.norm, self.name, self.description,
                              self.expect)


def load_document(data: Dict[str, Any], text: str = "") -> SystemDocument:
    """Build a :class:`SystemDocument` from a parsed YAML mapping."""
    _check_keys(data, TOP_KEYS, "document")
    if "modes" not in data or not data["modes"]:
        raise DocumentError("document: 'modes' is required")
    modes = []
    for i, raw in enumerate(data["modes"]):
        where = f"modes[{i}]"
        _check_keys(raw, MODE_KEYS, where)
        if "id" not in raw or "A" not in raw:
            raise DocumentError(f"{where}: 'id' and 'A' are required")
        basis = raw.get("basis")
        modes.append(ModeEntry(
            str(raw["id"]),
            parse_matrix(raw["A"], f"{where}.A"),
            None if basis is None else parse_matrix(basis, f"{where}.basis", True).astype(complex),
            float(raw.get("basis_scale", 1.0)),
            None if raw.get("margin") is None else float(raw["margin"]),
        ))
    ids = [m.id for m in modes]

    graph = data.get("graph", "complete")
    if graph == "complete":
        edges = None
    else:
        _check_keys(graph, {"edges"}, "graph")
        edges = [(str(p), str(q)) for p, q in graph.get("edges", [])]

    jump_kind, resets, matrices = "none", {}, []
    if data.get("jumps") is not None:
        jumps = data["jumps"]
        _check_keys(jumps, JUMP_KEYS, "jumps")
        jump_kind = jumps.get("kind", "none")
        if jump_kind == "resets":
            for j, item in enumerate(jumps.get("resets", [])):
                _check_keys(item, {"edge", "matrix"}, f"jumps.resets[{j}]")
                p, q = (str(v) for v in item["edge"])
                resets[(p, q)] = parse_matrix(item["matrix"], f"jumps.resets[{j}]")
        elif jump_kind in ("finite", "convexHull"):
            matrices = [parse_matrix(M, f"jumps.matrices[{j}]")
                        for j, M in enumerate(jumps.get("matrices", []))]
        elif jump_kind != "none":
            raise DocumentError(f"jumps: unknown kind {jump_kind!r}")

    norm_raw = data.get("norm", "spectral")
    if norm_raw == "spectral":
        norm = SPECTRAL
    else:
        _check_keys(norm_raw, {"kind", "weight"}, "norm")
        if norm_raw.get("kind") != "ellipsoidal":
            raise DocumentError(f"norm: unknown kind {norm_raw.get('kind')!r}")
        try:
            norm = NormSpec("ellipsoidal", parse_matrix(norm_raw["weight"], "norm.weight"))
        except (KeyError, ValueError) as exc:
            raise DocumentError(f"norm: {exc}") from exc

    doc = SystemDocument(modes, edges, jump_kind, resets, matrices, norm,
                         str(data.get("name", "")), str(data.get("description", "")),
                         dict(data.get("expect") or {}), text)
    if len(set(ids)) != len(ids):
        raise DocumentError("modes: duplicate ids")
    return doc


def parse_document(text: str) -> SystemDocument:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise DocumentError(f"invalid YAML: {exc}") from exc
    return load_document(data, text)


def read_document(path) -> SystemDocument:
    return parse_document(Path(path).read_text())


def document_data(doc: SystemDocument) -> Dict[str, Any]:
    """Plain mapping for a document, suitable for YAML output."""
    data: Dict[str, Any] = {}
    if doc.name:
        data["name"] = doc.name
    if doc.description:
        data["description"] = doc.description
    modes = []
    for m in doc.modes:
        entry: Dict[str, Any] = {"id": m.id, "A": format_matrix(m.A)}
        if m.basis is not None:
            entry["basis"] = format_matrix(m.basis)
        if m.basis_scale != 1.0:
            entry["basis_scale"] = m.basis_scale
        if m.margin is not None:
            entry["margin"] = m.margin
        modes.append(entry)
    data["modes"] = modes
    data["graph"] = ("complete" if doc.graph_edges is None
                     else {"edges": [list(e) for e in doc.graph_edges]})
    if doc.jump_kind == "resets":
        data["jumps"] = {"kind": "resets", "resets": [
            {"edge": list(e), "matrix": format_matrix(R)} for e, R in doc.resets.items()]}
    elif doc.jump_kind in ("finite", "convexHull"):
        data["jumps"] = {"kind": doc.jump_kind,
                         "matrices": [format_matrix(M) for M in doc.matrices]}
    if doc.norm.kind == "ellipsoidal":
        data["norm"] = {"kind": "ellipsoidal", "weight": format_matrix(doc.norm.weight)}
    else:
        data["norm"] = "spectral"
    if doc.expect:
        data["expect"] = doc.expect
    return data


def dump_document(doc: SystemDocument) -> str:
    return yaml.safe_dump(document_data(doc), sort_keys=False, default_flow_style=None)


def document_from_spec(spec: SwitchedSystemSpec, name: str = "") -> SystemDocument:
    """Document describing ``spec``.

    Basis overrides and scale factors are carried over, so re-parsing runs
    the same construction and reproduces the system exactly.
    """
    modes = [ModeEntry(s.mode_id, s.A, s.raw_basis, s.basis_scale, s.margin)
             for s in spec.subsystems]
    edges = None if spec.graph.is_complete else spec.graph.sorted_edges()
    if isinstance(spec.jumps, ResetCollection):
        kind, resets, mats = "resets", dict(spec.jumps.resets), []
    elif isinstance(spec.jumps, ImpulseSet):
        kind, resets, mats = spec.jumps.kind, {}, list(spec.jumps.matrices)
    else:
        kind, resets, mats = "none", {}, []
    return SystemDocument(modes, edges, kind, resets, mats, spec.norm, name)


def bundled_names() -> List[str]:
    root = resources.files("dwellflee") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def bundled_document(name: str) -> SystemDocument:
    """One of the shipped example documents, by stem name."""
    path = resources.files("dwellflee") / "data" / f"{name}.yaml"
    if not path.is_file():
        raise DocumentError(f"no bundled document {name!r}; have {bundled_names()}")
    return parse_document(path.read_text())

"""Switched-system data model.

Subsystems with their Jordan data and decay constants, mode graphs, reset
collections and impulse sets, switching signals, validation, and the graph
algorithms (acyclicity, topological order, Jordan-basis rescaling).
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from . import numlin
from .errors import (
    CyclicGraph,
    HypothesisViolated,
    InadmissibleSignal,
    MarginRequired,
)
from .numlin import SPECTRAL, EigenStructure, NormSpec

log = logging.getLogger(__name__)

STABILITY_TOL = 1e-9

Edge = Tuple[str, str]


def mode_key(mode: str):
    """Sort key ordering numeric ids numerically and the rest lexically."""
    text = str(mode)
    try:
        return (0, float(text), text)
    except ValueError:
        return (1, 0.0, text)


def sorted_modes(modes: Iterable[str]) -> List[str]:
    return sorted(modes, key=mode_key)


# ---------------------------------------------------------------------------
# decay constants

def classify_spectrum(A: np.ndarray, eigenvalues: np.ndarray) -> str:
    """``"stable"``, ``"unstable"`` or ``"marginal"`` from eigenvalue real parts."""
    tol = STABILITY_TOL * max(np.linalg.norm(A, 2), 1.0)
    top = float(np.max(eigenvalues.real))
    if top < -tol:
        return "stable"
    if top > tol:
        return "unstable"
    return "marginal"


def _poly_exp_sup(size: int, kappa: float) -> float:
    """``sup_{t>=0} sum_{j<size} t^j/j! * exp(-kappa t)`` for ``kappa > 0``."""
    if size == 1:
        return 1.0

    def f(t):
        return sum(t ** j / math.factorial(j) for j in range(size)) * math.exp(-kappa * t)

    horizon = 10.0 * size / kappa + 1.0
    grid = np.linspace(0.0, horizon, 4001)
    vals = np.array([f(t) for t in grid])
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(lambda t: -f(t), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(max(vals[k], -res.fun))


def decay_kernel(eig: EigenStructure, stability: str, margin: Optional[float],
                 norm: NormSpec = SPECTRAL) -> Tuple[float, float]:
    """Constants ``(c, rate)`` with ``||exp(J t)|| <= c exp(-+rate t)``.

    Diagonalizable modes get ``c = 1`` and the critical real part as rate.
    Defective modes trade ``margin`` of rate for a finite polynomial
    overshoot constant.  Under an ellipsoidal norm with a non-diagonal weight
    the constant is inflated by ``sqrt(cond(W))``.
    """
    if stability == "marginal":
        return 1.0, 0.0
    top = float(np.max(eig.eigenvalues.real))
    base = -top if stability == "stable" else top
    if not eig.defective:
        c, rate = 1.0, base
    else:
        if margin is None:
            raise MarginRequired("defective mode needs an explicit decay margin")
        if margin <= 0 or (stability == "stable" and margin >= base):
            raise ValueError(f"margin {margin} outside the admissible range")
        rate = base - margin if stability == "stable" else base + margin
        c = 1.0
        for lam, _, size in eig.blocks():
            # exponent left over after factoring out the target rate
            kappa = -(lam.real + rate) if stability == "stable" else rate - lam.real
            c = max(c, _poly_exp_sup(size, kappa))
    if norm.kind == "ellipsoidal" and not (norm.is_diagonal and not eig.defective):
        c *= math.sqrt(np.linalg.cond(norm.weight))
    return float(c), float(rate)


# ---------------------------------------------------------------------------
# core types

@dataclass(frozen=True)
class SubsystemSpec:
    """One mode: its matrix, Jordan data, class and decay constants.

    Use :meth:`build` to construct; it computes everything derived.
    """

    mode_id: str
    A: np.ndarray = field(repr=False)
    eig: EigenStructure = field(repr=False)
    stability_class: str
    c: float
    rate: float
    margin: Optional[float] = None
    raw_basis: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    basis_scale: float = 1.0

    @property
    def basis_override(self) -> bool:
        return self.raw_basis is not None

    @classmethod
    def build(cls, mode_id, A, basis=None, basis_scale: float = 1.0,
              margin: Optional[float] = None, norm: NormSpec = SPECTRAL) -> "SubsystemSpec":
        """Decompose ``A`` and compute decay constants.

        Parameters
        ----------
        basis : array_like, optional
            Jordan basis to use instead of the computed one; validated.
        basis_scale : float
            Positive factor applied to the basis (rescaling directive).
        margin : float, optional
            Decay margin for defective modes; defaults to 10% of the
            distance of the critical eigenvalue from the imaginary axis.
        """
        A = np.array(A, dtype=float)
        raw = None if basis is None else np.array(basis, dtype=complex)
        if basis is None:
            eig = numlin.eigendecompose(A)
        else:
            eig = numlin.structure_from_basis(A, basis)
        if basis_scale != 1.0:
            if not basis_scale > 0:
                raise ValueError("basis scale must be positive")
            eig = eig.scaled(basis_scale)
        klass = classify_spectrum(A, eig.eigenvalues)
        if eig.defective and margin is None and klass != "marginal":
            margin = 0.1 * abs(float(np.max(eig.eigenvalues.real)))
        c, rate = decay_kernel(eig, klass, margin, norm)
        return cls(str(mode_id), A, eig, klass, c, rate, margin, raw, float(basis_scale))

    @property
    def P(self) -> np.ndarray:
        return self.eig.basis

    @property
    def P_inv(self) -> np.ndarray:
        return np.linalg.inv(self.eig.basis)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def with_basis(self, basis: np.ndarray, norm: NormSpec = SPECTRAL) -> "SubsystemSpec":
        return SubsystemSpec.build(self.mode_id, self.A, basis, 1.0, self.margin, norm)

    def rescaled(self, factor: float, norm: NormSpec = SPECTRAL) -> "SubsystemSpec":
        """Same mode with the basis multiplied by ``factor``."""
        return SubsystemSpec.build(self.mode_id, self.A, self.raw_basis,
                                   self.basis_scale * factor, self.margin, norm)

    def with_norm(self, norm: NormSpec) -> "SubsystemSpec":
        c, rate = decay_kernel(self.eig, self.stability_class, self.margin, norm)
        return replace(self, c=c, rate=rate)


@dataclass(frozen=True)
class ModeGraph:
    """Directed graph of permitted switches."""

    vertices: Tuple[str, ...]
    edges: frozenset

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(str(v) for v in self.vertices))
        object.__setattr__(self, "edges",
                           frozenset((str(p), str(q)) for p, q in self.edges))

    @classmethod
    def complete(cls, vertices: Sequence[str]) -> "ModeGraph":
        vs = [str(v) for v in vertices]
        return cls(tuple(vs), frozenset((p, q) for p in vs for q in vs if p != q))

    def successors(self, p: str) -> List[str]:
        return sorted_modes(q for (a, q) in self.edges if a == p)

    def sorted_edges(self) -> List[Edge]:
        return sorted(self.edges, key=lambda e: (mode_key(e[0]), mode_key(e[1])))

    @property
    def is_complete(self) -> bool:
        return self == ModeGraph.complete(self.vertices)


@dataclass(frozen=True)
class ResetCollection:
    """Reset matrices ``R_(p,q)`` keyed by ordered mode pair."""

    resets: Mapping[Edge, np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "resets", {
            (str(p), str(q)): np.array(R, dtype=float) for (p, q), R in self.resets.items()
        })

    def __getitem__(self, edge: Edge) -> np.ndarray:
        return self.resets[edge]

    def __contains__(self, edge) -> bool:
        return edge in self.resets

    def __eq__(self, other):
        if not isinstance(other, ResetCollection) or set(self.resets) != set(other.resets):
            return False
        return all(np.array_equal(self.resets[k], other.resets[k]) for k in self.resets)


@dataclass(frozen=True)
class ImpulseSet:
    """Impulse matrices: a finite set of members, or a hull given by vertices."""

    kind: str
    matrices: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.kind not in ("finite", "convexHull"):
            raise ValueError(f"unknown impulse set kind {self.kind!r}")
        object.__setattr__(self, "matrices",
                           tuple(np.array(M, dtype=float) for M in self.matrices))

    def __len__(self):
        return len(self.matrices)

    def __eq__(self, other):
        return (isinstance(other, ImpulseSet) and self.kind == other.kind
                and len(self) == len(other)
                and all(np.array_equal(a, b) for a, b in zip(self.matrices, other.matrices)))

    def combination(self, weights: Sequence[float]) -> np.ndarray:
        w = np.asarray(weights, dtype=float)
        return np.tensordot(w, np.array(self.matrices), axes=1)

    def contains_zero(self) -> bool:
        """Whether the zero matrix lies in the set (hull test by LP)."""
        if self.kind == "finite":
            return any(not np.any(M) for M in self.matrices)
        return hull_contains(self.matrices, np.zeros_like(self.matrices[0]))

    def contains(self, M: np.ndarray, tol: float = 1e-9) -> bool:
        if self.kind == "finite":
            return any(np.allclose(M, X, rtol=0, atol=tol) for X in self.matrices)
        return hull_contains(self.matrices, M, tol)


def hull_contains(vertices: Sequence[np.ndarray], M: np.ndarray, tol: float = 1e-9) -> bool:
    """Whether ``M`` is a convex combination of ``vertices`` (LP feasibility)."""
    V = np.array([np.ravel(v) for v in vertices]).T
    k = V.shape[1]
    A_eq = np.vstack([V, np.ones((1, k))])
    b_eq = np.concatenate([np.ravel(M), [1.0]])
    res = linprog(np.zeros(k), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * k,
                  method="highs")
    if res.status != 0:
        return False
    return bool(np.linalg.norm(V @ res.x - np.ravel(M)) <= tol * max(1.0, np.abs(V).max()))


Jumps = Union[ResetCollection, ImpulseSet, None]


@dataclass(frozen=True)
class SwitchedSystemSpec:
    """A full switched system: subsystems, graph, jumps and norm."""

    subsystems: Tuple[SubsystemSpec, ...]
    graph: ModeGraph
    jumps: Jumps = None
    norm: NormSpec = SPECTRAL

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))

    @property
    def modes(self) -> List[str]:
        return [s.mode_id for s in self.subsystems]

    def mode(self, mode_id: str) -> SubsystemSpec:
        for s in self.subsystems:
            if s.mode_id == str(mode_id):
                return s
        raise KeyError(mode_id)

    @property
    def n(self) -> int:
        return self.subsystems[0].n

    @property
    def stable_modes(self) -> List[str]:
        return [s.mode_id for s in self.subsystems if s.stability_class == "stable"]

    @property
    def unstable_modes(self) -> List[str]:
        return [s.mode_id for s in self.subsystems if s.stability_class == "unstable"]

    def edges_from(self, klass: str) -> List[Edge]:
        """Edges whose source has the given stability class (G_s or G_u)."""
        keep = {s.mode_id for s in self.subsystems if s.stability_class == klass}
        return [e for e in self.graph.sorted_edges() if e[0] in keep]

    @property
    def stable_edges(self) -> List[Edge]:
        return self.edges_from("stable")

    @property
    def unstable_edges(self) -> List[Edge]:
        return self.edges_from("unstable")

    def jump_matrices(self, edge: Edge) -> List[np.ndarray]:
        """Matrices that may be applied on ``edge``: its reset or the impulse set."""
        if isinstance(self.jumps, ResetCollection):
            return [self.jumps[edge]]
        if isinstance(self.jumps, ImpulseSet):
            return list(self.jumps.matrices)
        return [np.eye(self.n)]

    def transition(self, edge: Edge, M: np.ndarray) -> np.ndarray:
        """``P_q^{-1} M P_p`` for ``edge = (p, q)``."""
        p, q = edge
        return np.linalg.solve(self.mode(q).P, M @ self.mode(p).P)

    def with_bases(self, bases: Mapping[str, np.ndarray]) -> "SwitchedSystemSpec":
        subs = tuple(
            s.with_basis(bases[s.mode_id], self.norm) if s.mode_id in bases else s
            for s in self.subsystems
        )
        return replace(self, subsystems=subs)

    def with_norm(self, norm: NormSpec) -> "SwitchedSystemSpec":
        return replace(self, norm=norm,
                       subsystems=tuple(s.with_norm(norm) for s in self.subsystems))

    def with_jumps(self, jumps: Jumps) -> "SwitchedSystemSpec":
        return replace(self, jumps=jumps)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


def validate(spec: SwitchedSystemSpec) -> List[Diagnostic]:
    """Check every structural invariant; an empty list means valid."""
    out: List[Diagnostic] = []
    modes = spec.modes
    if len(set(modes)) != len(modes):
        out.append(Diagnostic("DuplicateMode", "mode ids are not unique"))
    if set(spec.graph.vertices) != set(modes):
        out.append(Diagnostic("GraphModeMismatch",
                              "graph vertices differ from subsystem ids"))
    dims = {s.n for s in spec.subsystems}
    if len(dims) > 1:
        out.append(Diagnostic("DimensionMismatch", f"subsystem sizes {sorted(dims)}"))
    for s in spec.subsystems:
        if s.stability_class == "marginal":
            out.append(Diagnostic(
                "MarginalMode",
                f"mode {s.mode_id} has its critical eigenvalue on the imaginary axis"))
    for p, q in spec.graph.sorted_edges():
        if p == q:
            out.append(Diagnostic("SelfLoop", f"edge ({p},{q}) is a self-loop"))
        if p not in modes or q not in modes:
            out.append(Diagnostic("UnknownMode", f"edge ({p},{q}) names an unknown mode"))
    for v in spec.graph.vertices:
        if not spec.graph.successors(v):
            out.append(Diagnostic("DanglingMode", f"mode {v} has no outgoing edge"))
    n = spec.n if not len(dims) > 1 else None
    jumps = spec.jumps
    if isinstance(jumps, ResetCollection):
        for edge in spec.graph.sorted_edges():
            if edge not in jumps:
                out.append(Diagnostic("MissingReset", f"no reset for edge {edge}"))
        for edge, R in jumps.resets.items():
            if edge not in spec.graph.edges:
                out.append(Diagnostic("UnknownEdge", f"reset for non-edge {edge}"))
            if n is not None and R.shape != (n, n):
                out.append(Diagnostic("DimensionMismatch", f"reset {edge} has shape {R.shape}"))
            elif not np.any(R):
                out.append(Diagnostic("ZeroJumpMatrix", f"reset {edge} is zero"))
    elif isinstance(jumps, ImpulseSet):
        if len(jumps) == 0:
            out.append(Diagnostic("EmptyImpulseSet", "impulse set is empty"))
        elif n is not None and any(M.shape != (n, n) for M in jumps.matrices):
            out.append(Diagnostic("DimensionMismatch", "impulse matrix shape"))
        elif jumps.kind == "finite" and any(not np.any(M) for M in jumps.matrices):
            out.append(Diagnostic("ZeroJumpMatrix", "impulse set contains zero"))
        elif jumps.kind == "convexHull" and jumps.contains_zero():
            out.append(Diagnostic("ZeroJumpMatrix", "zero matrix lies in the impulse hull"))
    return out


# ---------------------------------------------------------------------------
# graph algorithms

def _find_cycle(vertices: Sequence[str], edges: Iterable[Edge]) -> Optional[List[str]]:
    """One directed cycle as ``[v0, v1, ..., v0]``, or None."""
    succ: Dict[str, List[str]] = {v: [] for v in vertices}
    for p, q in edges:
        succ.setdefault(p, []).append(q)
        succ.setdefault(q, [])
    for v in succ:
        succ[v] = sorted_modes(succ[v])
    color = {v: 0 for v in succ}
    parent: Dict[str, str] = {}
    for root in sorted_modes(succ):
        if color[root]:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = 1
        while stack:
            v, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[v] = 2
                stack.pop()
                continue
            if color[nxt] == 1:
                path = [v]
                while path[-1] != nxt:
                    path.append(parent[path[-1]])
                return path[::-1] + [nxt]
            if color[nxt] == 0:
                parent[nxt] = v
                color[nxt] = 1
                stack.append((nxt, iter(succ[nxt])))
    return None


def unstable_subgraph_acyclic(spec: SwitchedSystemSpec) -> Tuple[bool, Optional[List[str]]]:
    """Whether the unstable-source subgraph has no directed cycle.

    Returns
    -------
    acyclic : bool
    cycle : list of str or None
        A witness ``[v0, ..., v0]`` when cyclic.
    """
    cycle = _find_cycle(spec.modes, spec.unstable_edges)
    return cycle is None, cycle


def topological_order(graph: ModeGraph) -> List[str]:
    """Kahn's algorithm with ties broken by ascending mode id.

    Raises
    ------
    CyclicGraph
        With a witness cycle, if the graph is not acyclic.
    """
    indeg = {v: 0 for v in graph.vertices}
    for _, q in graph.edges:
        indeg[q] = indeg.get(q, 0) + 1
    heap = [(mode_key(v), v) for v, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order: List[str] = []
    while heap:
        _, v = heapq.heappop(heap)
        order.append(v)
        for q in graph.successors(v):
            indeg[q] -= 1
            if indeg[q] == 0:
                heapq.heappush(heap, (mode_key(q), q))
    if len(order) != len(indeg):
        raise CyclicGraph(_find_cycle(list(indeg), graph.edges) or [])
    return order


@dataclass(frozen=True)
class RescaleResult:
    """Outcome of a Jordan-basis rescaling.

    Attributes
    ----------
    bases : dict
        New basis per mode.
    factors : dict
        Scalar applied to each original basis.
    rho : float
        The maximum before rescaling.
    achieved : float
        The maximum after rescaling; always below ``epsilon``.
    theta : float or None
        Scaling base, or None when no scaling was needed.
    fallback : bool
        True when the staged exponents left a violation and the monotone
        exponent ``j - k`` was used for every later vertex instead.
    """

    bases: Dict[str, np.ndarray]
    factors: Dict[str, float]
    rho: float
    achieved: float
    theta: Optional[float]
    order: List[str]
    fallback: bool = False


def _edge_members(spec: SwitchedSystemSpec, matrix_set, edge: Edge) -> List[np.ndarray]:
    if matrix_set is None:
        return spec.jump_matrices(edge)
    if isinstance(matrix_set, ResetCollection):
        return [matrix_set[edge]]
    if isinstance(matrix_set, ImpulseSet):
        return list(matrix_set.matrices)
    return [np.asarray(M, dtype=float) for M in matrix_set]


def unstable_edge_max(spec: SwitchedSystemSpec, matrix_set=None,
                      factors: Optional[Mapping[str, float]] = None) -> float:
    """``max c_p ||P_q^{-1} M P_p||`` over unstable-source edges and members."""
    factors = factors or {}
    best = 0.0
    for p, q in spec.unstable_edges:
        sp, sq = spec.mode(p), spec.mode(q)
        scale = factors.get(p, 1.0) / factors.get(q, 1.0)
        for M in _edge_members(spec, matrix_set, (p, q)):
            K = spec.transition((p, q), M) * scale
            best = max(best, sp.c * numlin.operator_norm(K, spec.norm))
    return best


def rescale_bases(spec: SwitchedSystemSpec, matrix_set=None, epsilon: float = 0.5,
                  xi: float = 0.5) -> RescaleResult:
    """Scale Jordan bases so unstable-source transitions are small.

    Follows the acyclic-rescaling construction: with ``rho`` the current
    maximum of ``c_p ||P_q^{-1} M P_p||`` over unstable-source edges and set
    members, nothing changes if ``rho < epsilon``; otherwise
    ``theta = rho / (epsilon xi)`` and, along a topological order that lists
    unstable sources first (positions ``1..k``), the remaining unstable
    modes next (up to ``l``) and stable modes last, position ``j`` is scaled
    by ``theta^(j-k)`` for unstable non-sources and ``theta^(j-l)`` for
    stable modes.

    When ``l > k`` an edge from the last unstable mode into an early stable
    mode can end up unscaled relative to its source, so the post-condition
    is checked; on failure every mode after position ``k`` is scaled by
    ``theta^(j-k)``, which always satisfies it.

    Parameters
    ----------
    matrix_set : ResetCollection, ImpulseSet or sequence, optional
        Matrices to bound; defaults to the system's own jumps.
    epsilon : float
        Target bound in (0, 1]; the bound achieved is strict.
    xi : float
        Slack factor in (0, 1).

    Raises
    ------
    HypothesisViolated
        If the unstable-source subgraph is cyclic.
    """
    if not 0 < xi < 1:
        raise ValueError("xi must lie in (0, 1)")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    ok, cycle = unstable_subgraph_acyclic(spec)
    if not ok:
        raise HypothesisViolated(cycle)

    unstable = spec.unstable_modes
    gu = spec.unstable_edges
    incoming = {q for _, q in gu}
    sub = ModeGraph(tuple(unstable), frozenset(e for e in gu if e[1] in unstable))
    topo = topological_order(sub)
    sources = [m for m in topo if m not in incoming]
    others = [m for m in topo if m in incoming]
    stable = sorted_modes(m for m in spec.modes if m not in unstable)
    order = sources + others + stable
    k, l = len(sources), len(sources) + len(others)

    rho = unstable_edge_max(spec, matrix_set)
    originals = {s.mode_id: s.P for s in spec.subsystems}
    if rho < epsilon:
        return RescaleResult(originals, {m: 1.0 for m in order}, rho, rho, None, order)

    theta = rho / (epsilon * xi)
    factors = {}
    for j, m in enumerate(order, start=1):
        if j <= k:
            factors[m] = 1.0
        elif j <= l:
            factors[m] = theta ** (j - k)
        else:
            factors[m] = theta ** (j - l)
    achieved = unstable_edge_max(spec, matrix_set, factors)
    fallback = False
    if not achieved < epsilon:
        log.warning("staged exponents leave max %.6g >= %.6g; using monotone exponents",
                    achieved, epsilon)
        factors = {m: (1.0 if j <= k else theta ** (j - k))
                   for j, m in enumerate(order, start=1)}
        achieved = unstable_edge_max(spec, matrix_set, factors)
        fallback = True
    if not achieved < epsilon:
        raise AssertionError(f"rescaling post-condition failed: {achieved} >= {epsilon}")
    bases = {m: originals[m] * factors[m] for m in order}
    return RescaleResult(bases, factors, rho, achieved, theta, order, fallback)


def apply_rescale(spec: SwitchedSystemSpec, result: RescaleResult) -> SwitchedSystemSpec:
    """Spec with each basis multiplied by its rescaling factor."""
    subs = tuple(
        s.rescaled(result.factors[s.mode_id], spec.norm)
        if result.factors.get(s.mode_id, 1.0) != 1.0 else s
        for s in spec.subsystems
    )
    return replace(spec, subsystems=subs)


# ---------------------------------------------------------------------------
# switching signals

@dataclass(frozen=True)
class SwitchingSignal:
    """Finite switching signal: ``(t_k, mode)`` events from ``t_0 = 0``.

    The mode of event ``k`` is active on ``[t_k, t_{k+1})``; the last one
    stays active up to ``horizon``.
    """

    events: Tuple[Tuple[float, str], ...]
    horizon: float

    def __post_init__(self):
        ev = tuple((float(t), str(m)) for t, m in self.events)
        object.__setattr__(self, "events", ev)
        object.__setattr__(self, "horizon", float(self.horizon))
        if not ev:
            raise InadmissibleSignal("a signal needs at least the initial event")
        if ev[0][0] != 0.0:
            raise InadmissibleSignal("first event must be at t = 0")
        for (t0, m0), (t1, m1) in zip(ev, ev[1:]):
            if not t1 > t0:
                raise InadmissibleSignal(f"switch times not increasing at {t1}")
            if m0 == m1:
                raise InadmissibleSignal(f"consecutive events at {t0}, {t1} share mode {m0}")
        if self.horizon < ev[-1][0]:
            raise InadmissibleSignal("horizon precedes the last switch")

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.events])

    @property
    def modes(self) -> List[str]:
        return [m for _, m in self.events]

    @property
    def switch_times(self) -> List[float]:
        return [t for t, _ in self.events[1:]]

    def mode_at(self, t: float) -> str:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.events[max(k, 0)][1]

    def intervals(self):
        """Yield ``(start, end, mode, complete)`` for each constant piece."""
        for k, (t, m) in enumerate(self.events):
            if k + 1 < len(self.events):
                yield t, self.events[k + 1][0], m, True
            else:
                yield t, self.horizon, m, False

    def graph_violations(self, graph: ModeGraph) -> List[Edge]:
        mods = self.modes
        return [(p, q) for p, q in zip(mods, mods[1:]) if (p, q) not in graph.edges]

    def truncated(self, t: float) -> "SwitchingSignal":
        return SwitchingSignal(tuple(e for e in self.events if e[0] <= t), t)


ImpulseSchedule = Dict[float, Union[int, np.ndarray]]


@dataclass(frozen=True)
class SwitchCounts:
    """Switch counts on ``[0, t)`` by class of the mode switched into."""

    to_stable: int
    to_unstable: int
    total: int
    per_mode: Dict[str, int] = field(default_factory=dict)


def count_switches(signal: SwitchingSignal, spec: SwitchedSystemSpec,
                   t: float) -> SwitchCounts:
    """Count events ``t_i`` with ``0 <= t_i < t`` by the class of ``sigma(t_i)``.

    The initial event at ``t_0 = 0`` counts, matching the convention that
    ``N(0, t)`` indexes the intervals started before ``t``.
    """
    klass = {s.mode_id: s.stability_class for s in spec.subsystems}
    per: Dict[str, int] = {m: 0 for m in spec.modes}
    s = u = total = 0
    for ti, m in signal.events:
        if not (0 <= ti < t):
            continue
        total += 1
        per[m] = per.get(m, 0) + 1
        if klass.get(m) == "stable":
            s += 1
        elif klass.get(m) == "unstable":
            u += 1
    return SwitchCounts(s, u, total, per)

"""Flow-based dwell and flee times.

Closed-form bounds from the piecewise flow ``P_q^{-1} M P_p exp(J_p t)``:
uniform and mode-dependent constraints for reset and impulsive systems,
admissible jump balls, stabilizing resets, and the selection of jumps from a
prescribed candidate set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import numlin
from .errors import FleeUndefined, NotAllStable, ZeroInSet
from .model import (
    Edge,
    ImpulseSet,
    ResetCollection,
    SubsystemSpec,
    SwitchedSystemSpec,
    apply_rescale,
    decay_kernel,
    rescale_bases,
)

Scalar = Union[float, Dict[str, float]]


@dataclass(frozen=True)
class TimeConstraints:
    """Dwell and flee times, uniform or per mode.

    Attributes
    ----------
    kind : {"uniform", "modeDependent"}
    dwell : float, dict or None
        ``tau`` (or ``tau_p`` per stable mode); None when there is no
        stable-source edge.
    flee : float, dict or None
        ``eta`` (or ``eta_p`` per unstable mode); None when there is no
        unstable-source edge.
    terms : dict
        ``ln(c_p ||P_q^{-1} M P_p||)`` per edge, worst member, for reports.
    """

    kind: str
    dwell: Optional[Scalar]
    flee: Optional[Scalar]
    terms: Dict[Edge, float] = field(default_factory=dict, compare=False)

    def dwell_for(self, mode: str) -> float:
        if isinstance(self.dwell, dict):
            return self.dwell[mode]
        return float(self.dwell or 0.0)

    def flee_for(self, mode: str) -> float:
        if isinstance(self.flee, dict):
            return self.flee[mode]
        return float(self.flee) if self.flee is not None else math.inf


def decay_constants(sub: SubsystemSpec, margin: Optional[float] = None,
                    norm: numlin.NormSpec = numlin.SPECTRAL) -> Tuple[float, float]:
    """Constants ``(c, rate)`` with ``||exp(J t)|| <= c exp(-rate t)`` (stable)
    or ``<= c exp(rate t)`` (unstable).

    Raises
    ------
    MarginRequired
        If the mode is defective and ``margin`` is None.
    """
    if sub.stability_class == "marginal":
        raise ValueError(f"mode {sub.mode_id} is marginal")
    return decay_kernel(sub.eig, sub.stability_class, margin, norm)


def edge_log_term(spec: SwitchedSystemSpec, edge: Edge, M: np.ndarray) -> float:
    """``ln(c_p ||P_q^{-1} M P_p||)`` in the system's norm."""
    value = spec.mode(edge[0]).c * numlin.operator_norm(spec.transition(edge, M), spec.norm)
    return math.log(value) if value > 0 else -math.inf


def _worst_terms(spec: SwitchedSystemSpec) -> Dict[Edge, float]:
    return {
        e: max(edge_log_term(spec, e, M) for M in spec.jump_matrices(e))
        for e in spec.graph.sorted_edges()
    }


def _constraints(spec: SwitchedSystemSpec, terms: Mapping[Edge, float],
                 mode_dependent: bool) -> TimeConstraints:
    dwell: Dict[str, float] = {}
    flee_terms: Dict[str, float] = {}
    for (p, q), term in terms.items():
        sub = spec.mode(p)
        if sub.stability_class == "stable":
            dwell[p] = max(dwell.get(p, 0.0), max(term / sub.rate, 0.0))
        elif sub.stability_class == "unstable":
            if term >= 0:
                raise FleeUndefined(
                    f"edge ({p},{q}) has ln(c||P^-1 M P||) = {term:.6g} >= 0; "
                    "rescale the Jordan bases first")
            flee_terms[p] = max(flee_terms.get(p, -math.inf), term / sub.rate)
    flee = {p: -v for p, v in flee_terms.items()}
    if mode_dependent:
        return TimeConstraints("modeDependent", dwell or None, flee or None, dict(terms))
    return TimeConstraints(
        "uniform",
        max(dwell.values()) if dwell else None,
        min(flee.values()) if flee else None,
        dict(terms),
    )


def flow_dwell_flee(spec: SwitchedSystemSpec) -> TimeConstraints:
    """Uniform ``(tau_R, eta_R)`` for a reset switched system.

    ``tau_R = max ln(c_p ||P_q^{-1} R_(p,q) P_p||) / lambda_p`` over edges
    with a stable source (clamped at 0), and
    ``eta_R = -max ln(c_p ||P_q^{-1} R_(p,q) P_p||) / mu_p`` over edges with
    an unstable source.

    Raises
    ------
    FleeUndefined
        If an unstable-source term is nonnegative.
    """
    if not isinstance(spec.jumps, ResetCollection):
        raise TypeError("flow_dwell_flee needs a reset collection")
    return _constraints(spec, _worst_terms(spec), mode_dependent=False)


def flow_dwell_flee_mode_dependent(spec: SwitchedSystemSpec) -> TimeConstraints:
    """Per-mode ``tau_p`` and ``eta_p``, maximizing over outgoing edges only."""
    return _constraints(spec, _worst_terms(spec), mode_dependent=True)


def flow_dwell_flee_impulsive(spec: SwitchedSystemSpec,
                              mode_dependent: bool = False) -> TimeConstraints:
    """``(tau_I, eta_I)`` for an impulsive system.

    The inner maximum over the impulse set runs over its members, which for a
    convex hull are its vertices: the norm is convex in the matrix, so its
    maximum over the hull sits at a vertex.
    """
    if not isinstance(spec.jumps, ImpulseSet):
        raise TypeError("flow_dwell_flee_impulsive needs an impulse set")
    return _constraints(spec, _worst_terms(spec), mode_dependent)


@dataclass(frozen=True)
class AdmissibleJumpBall:
    """Matrices ``M`` with ``||P_q^{-1} M P_p|| <= bound`` (zero excluded)."""

    source: str
    target: str
    bound: float
    spec: SwitchedSystemSpec = field(repr=False, compare=False)

    def norm_of(self, M: np.ndarray) -> float:
        return numlin.operator_norm(self.spec.transition((self.source, self.target), M),
                                    self.spec.norm)

    def contains(self, M: np.ndarray, tol: float = 0.0) -> bool:
        M = np.asarray(M, dtype=float)
        if not np.any(M):
            return False
        return self.norm_of(M) <= self.bound * (1 + tol)


def admissible_jump_ball(spec: SwitchedSystemSpec, edge: Edge,
                         constraints: TimeConstraints) -> AdmissibleJumpBall:
    """The ball of jumps on ``edge`` compatible with ``constraints``.

    ``bound = exp(lambda_p tau) / c_p`` for a stable source and
    ``exp(-mu_p eta) / c_p`` for an unstable one.
    """
    p, q = edge
    sub = spec.mode(p)
    if sub.stability_class == "stable":
        bound = math.exp(sub.rate * constraints.dwell_for(p)) / sub.c
    elif sub.stability_class == "unstable":
        bound = math.exp(-sub.rate * constraints.flee_for(p)) / sub.c
    else:
        raise ValueError(f"mode {p} is marginal")
    return AdmissibleJumpBall(p, q, bound, spec)


def stabilizing_resets(spec: SwitchedSystemSpec,
                       d: Union[float, Mapping[str, float], None] = None) -> ResetCollection:
    """Resets that make an all-stable system stable under arbitrary switching.

    The ideal reset ``d_p^{-1} P_q P_p^{-1}`` maps mode ``p``'s Jordan basis
    onto mode ``q``'s.  It may be complex; its real part (or imaginary part
    if the real part vanishes) is used and rescaled so that
    ``c_p ||P_q^{-1} R P_p|| = c_p / d_p < 1``.

    Parameters
    ----------
    d : float or dict, optional
        Shrink factors ``d_p > c_p``; defaults to ``2 c_p``.

    Raises
    ------
    NotAllStable
        If some mode is not stable.
    """
    if spec.unstable_modes or len(spec.stable_modes) != len(spec.modes):
        raise NotAllStable("stabilizing resets need every mode stable")
    out = {}
    for p, q in spec.graph.sorted_edges():
        sp, sq = spec.mode(p), spec.mode(q)
        dp = d.get(p) if isinstance(d, Mapping) else d
        dp = 2.0 * sp.c if dp is None else float(dp)
        if not dp > sp.c:
            raise ValueError(f"d_{p} = {dp} must exceed c_{p} = {sp.c}")
        K = sq.P @ np.linalg.inv(sp.P)
        R = K.real
        if np.linalg.norm(R) <= 1e-9 * np.linalg.norm(K):
            R = K.imag
        size = numlin.operator_norm(np.linalg.solve(sq.P, R @ sp.P), spec.norm)
        out[(p, q)] = R / (dp * size)
    return ResetCollection(out)


# ---------------------------------------------------------------------------
# selection from a candidate set

def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, len(v) + 1)
    r = np.nonzero(u * idx > css - 1)[0][-1]
    theta = (css[r] - 1) / (r + 1.0)
    return np.maximum(v - theta, 0.0)


def minimize_over_hull(objective, k: int, restarts: int = 50, seed: int = 0,
                       tol: float = 1e-10, max_iter: int = 2000):
    """Minimize a convex function of hull weights by projected gradient.

    Parameters
    ----------
    objective : callable
        ``w -> (value, gradient)`` for weights ``w`` on the simplex.
    k : int
        Number of vertices.

    Returns
    -------
    weights, value
    """
    rng = np.random.default_rng(seed)
    starts = [np.eye(k)[i] for i in range(k)] + [np.full(k, 1.0 / k)]
    starts += [rng.dirichlet(np.ones(k)) for _ in range(max(restarts - len(starts), 0))]
    best_w, best_f = None, math.inf
    for w in starts:
        f, g = objective(w)
        step = 1.0
        for _ in range(max_iter):
            improved = False
            while step > 1e-14:
                w_new = _project_simplex(w - step * g)
                f_new, g_new = objective(w_new)
                # Armijo condition along the projection arc
                if f_new <= f - 1e-4 * np.dot(g, w - w_new):
                    improved = f - f_new > tol
                    w, f, g = w_new, f_new, g_new
                    step *= 2.0
                    break
                step *= 0.5
            if not improved:
                break
        if f < best_f:
            best_w, best_f = w, f
    return best_w, best_f


def _edge_objective(spec: SwitchedSystemSpec, edge: Edge, vertices: Sequence[np.ndarray]):
    p, q = edge
    left = np.linalg.inv(spec.mode(q).P)
    right = spec.mode(p).P
    stack = np.array(vertices)

    def objective(w):
        M = np.tensordot(w, stack, axes=1)
        value, grad = numlin.norm_gradient(left, M, right, spec.norm)
        return value, np.array([np.sum(grad * V) for V in stack])

    return objective


@dataclass(frozen=True)
class JumpSelection:
    """Result of :func:`constrained_jump_selection`.

    Attributes
    ----------
    tau_star, eta_star : float or None
    selection : dict
        Chosen matrix per edge (resets mode) or the shared impulse set
        members (impulses mode, under key ``"*"``).
    spec : SwitchedSystemSpec
        The system with rescaled bases that the values refer to.
    """

    tau_star: Optional[float]
    eta_star: Optional[float]
    selection: Dict
    spec: SwitchedSystemSpec = field(repr=False, compare=False)


def _min_over_set(spec, edge, candidates: ImpulseSet, seed: int):
    if candidates.kind == "finite":
        values = [numlin.operator_norm(spec.transition(edge, M), spec.norm)
                  for M in candidates.matrices]
        i = int(np.argmin(values))  # ties go to the first index
        return candidates.matrices[i], values[i]
    w, value = minimize_over_hull(_edge_objective(spec, edge, candidates.matrices),
                                  len(candidates), seed=seed)
    return candidates.combination(w), value


def constrained_jump_selection(spec: SwitchedSystemSpec, candidates: ImpulseSet,
                               mode: str = "resets", eta_min: Optional[float] = None,
                               xi: float = 0.5, seed: int = 0) -> JumpSelection:
    """Dwell/flee times achievable with jumps drawn from ``candidates``.

    Bases are first rescaled so that every unstable-source transition is
    below ``epsilon = min_p exp(-mu_p eta_min)``.

    In ``"resets"`` mode each edge gets its own minimizing member and
    ``tau* = max_edge min_M ln(c_p ||P_q^{-1} M P_p||)/lambda_p`` (similarly
    ``eta*``).  In ``"impulses"`` mode one set must serve every edge: the
    smallest ``tau`` on a bisection grid is found for which some member
    satisfies all edge balls at ``tau`` and ``eta_min``.

    Raises
    ------
    ZeroInSet
        If the zero matrix is a candidate.
    HypothesisViolated
        If the unstable-source subgraph is cyclic.
    """
    if candidates.contains_zero():
        raise ZeroInSet("candidate set contains the zero matrix")
    work = spec
    if spec.unstable_edges:
        if eta_min is None:
            raise ValueError("eta_min is required when unstable modes have edges")
        eps = min(math.exp(-spec.mode(p).rate * eta_min) for p in spec.unstable_modes)
        work = apply_rescale(spec, rescale_bases(spec, candidates, eps, xi))
    if mode == "resets":
        selection, terms = {}, {}
        for edge in work.graph.sorted_edges():
            M, value = _min_over_set(work, edge, candidates, seed)
            selection[edge] = M
            terms[edge] = math.log(work.mode(edge[0]).c * value)
        tc = _constraints(work, terms, mode_dependent=False)
        return JumpSelection(tc.dwell, tc.flee, selection, work)
    if mode == "impulses":
        return _shared_impulses(work, candidates, eta_min, seed)
    raise ValueError(f"unknown selection mode {mode!r}")


def _ball_ratio_objective(spec, candidates: ImpulseSet, tau: float, eta: float):
    """``w -> max_edge ||P_q^{-1} M(w) P_p|| / bound_edge`` and a subgradient."""
    parts = []
    for edge in spec.graph.sorted_edges():
        sub = spec.mode(edge[0])
        # reciprocal of the ball radius, kept in this form to avoid overflow
        if sub.stability_class == "stable":
            inv_bound = sub.c * math.exp(-sub.rate * tau)
        else:
            inv_bound = sub.c * math.exp(sub.rate * eta)
        parts.append((_edge_objective(spec, edge, candidates.matrices), inv_bound))

    def objective(w):
        vals = [(f(w), s) for f, s in parts]
        i = int(np.argmax([v[0] * s for v, s in vals]))
        (value, grad), s = vals[i]
        return value * s, grad * s

    return objective


def _shared_impulses(spec, candidates: ImpulseSet, eta: Optional[float], seed: int,
                     tau_hi: float = 1e3, steps: int = 60) -> JumpSelection:
    eta_eff = eta if eta is not None else 0.0

    def feasible(tau):
        obj = _ball_ratio_objective(spec, candidates, tau, eta_eff)
        if candidates.kind == "finite":
            ratios = [obj(np.eye(len(candidates))[i])[0] for i in range(len(candidates))]
            keep = [M for M, r in zip(candidates.matrices, ratios) if r <= 1]
            return keep
        w, value = minimize_over_hull(obj, len(candidates), restarts=10, seed=seed)
        return [candidates.combination(w)] if value <= 1 else []

    lo, hi = 0.0, tau_hi
    members = feasible(lo)
    if members:
        return JumpSelection(0.0 if spec.stable_edges else None,
                             eta if spec.unstable_edges else None, {"*": members}, spec)
    members = feasible(hi)
    if not members:
        raise FleeUndefined(f"no shared impulse fits every edge even at tau = {tau_hi}")
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        found = feasible(mid)
        if found:
            hi, members = mid, found
        else:
            lo = mid
    return JumpSelection(hi, eta if spec.unstable_edges else None, {"*": members}, spec)


def sampled_flow_gain(spec: SwitchedSystemSpec, edge: Edge, M: np.ndarray,
                      times: Sequence[float]) -> np.ndarray:
    """``K(t) = ||P_q^{-1} M P_p exp(J_p t)||`` on a time grid."""
    sub = spec.mode(edge[0])
    T = spec.transition(edge, M)
    return np.array([numlin.operator_norm(T @ numlin.jordan_exp(sub.eig, t), spec.norm)
                     for t in times])

"""Multiple Lyapunov functions: LMI templates, certificates and searches.

Constraints are affine in the per-mode matrices ``Q_p`` once the dwell time
and rate constants are fixed.  Feasibility is searched for without an SDP
solver: an eigenvalue-cutting penalty (the squared negative part of every
constraint slack) is minimized with L-BFGS, alternated with rounds of
alternating projections between the positive semidefinite cone and the
affine image of the unknowns.  Every certificate returned is re-verified by
a direct eigenvalue check.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from scipy.optimize import minimize

from . import numlin
from .errors import DimensionMismatch, InfeasibleAtUpperBound, NotAllStable, RatioInvalid
from .model import Edge, ImpulseSet, ResetCollection, SwitchedSystemSpec, sorted_modes

log = logging.getLogger(__name__)

POSITIVITY_MARGIN = 1e-6
DECAY_MARGIN = 1e-6
VERIFY_TOL = 1e-8

TEMPLATES = ("hespanhaMorse", "geromelColaneri", "resetDwell", "impulseDwell",
             "mixedRate", "mixedImpulse")

TauParam = Union[float, Mapping[str, float]]


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True)
class LmiTerm:
    """Contribution ``coef * sym(left^T Q_mode right)``."""

    mode: str
    left: np.ndarray
    right: np.ndarray
    coef: float = 1.0

    def value(self, Q: np.ndarray) -> np.ndarray:
        return self.coef * numlin.sym(self.left.T @ Q @ self.right)


@dataclass(frozen=True)
class LmiConstraint:
    """``S(Q) = sum of terms <= -margin I``.

    Strict constraints carry a positive margin; nonstrict ones have margin 0
    and are checked up to the verification tolerance.
    """

    label: str
    kind: str
    terms: Tuple[LmiTerm, ...]
    margin: float = 0.0

    @property
    def strict(self) -> bool:
        return self.margin > 0

    def value(self, Q: Mapping[str, np.ndarray]) -> np.ndarray:
        return sum(t.value(Q[t.mode]) for t in self.terms)


@dataclass(frozen=True)
class LmiSystem:
    """A list of constraints over modes of a common dimension ``n``."""

    template: str
    modes: Tuple[str, ...]
    n: int
    constraints: Tuple[LmiConstraint, ...]
    params: Dict = field(default_factory=dict, compare=False)

    def count(self, kind: Optional[str] = None) -> int:
        return sum(1 for c in self.constraints if kind is None or c.kind == kind)

    def counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for c in self.constraints:
            out[c.kind] = out.get(c.kind, 0) + 1
        return out


@dataclass(frozen=True)
class LyapunovCertificate:
    """Per-mode quadratic forms ``V_p(x) = x^T Q_p x`` and rate constants."""

    Q: Dict[str, np.ndarray]
    lam: Dict[str, float] = field(default_factory=dict)
    mu: Dict[str, float] = field(default_factory=dict)
    gamma: Dict[Edge, float] = field(default_factory=dict)

    @property
    def lam_min(self) -> Optional[float]:
        return min(self.lam.values()) if self.lam else None

    @property
    def mu_max(self) -> Optional[float]:
        return max(self.mu.values()) if self.mu else None

    @property
    def gamma_max(self) -> Optional[float]:
        return max(self.gamma.values()) if self.gamma else None

    def value(self, mode: str, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.Q[mode] @ x)

    def normalized(self) -> "LyapunovCertificate":
        s = max(np.linalg.eigvalsh(Q)[-1] for Q in self.Q.values())
        return LyapunovCertificate({m: Q / s for m, Q in self.Q.items()},
                                   self.lam, self.mu, self.gamma)

    def to_dict(self) -> Dict:
        return {
            "Q": {m: np.asarray(Q).tolist() for m, Q in self.Q.items()},
            "lambda": dict(self.lam),
            "mu": dict(self.mu),
            "gamma": {f"{p}->{q}": g for (p, q), g in self.gamma.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LyapunovCertificate":
        gamma = {}
        for key, g in (data.get("gamma") or {}).items():
            p, q = key.split("->")
            gamma[(p, q)] = float(g)
        return cls({str(m): np.array(Q, dtype=float) for m, Q in data["Q"].items()},
                   {str(k): float(v) for k, v in (data.get("lambda") or {}).items()},
                   {str(k): float(v) for k, v in (data.get("mu") or {}).items()},
                   gamma)


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of :func:`verify_certificate`.

    ``slacks`` holds ``lambda_max(S(Q))`` for each constraint at the
    certificate's own scale; ``normalized`` holds
    ``lambda_max(S(Q)) / s + margin`` with ``s`` the largest eigenvalue over
    all ``Q_p``, which must not exceed the tolerance.
    """

    ok: bool
    slacks: Dict[str, float]
    normalized: Dict[str, float]
    tolerance: float

    @property
    def worst(self) -> float:
        return max(self.normalized.values()) if self.normalized else -math.inf


# ---------------------------------------------------------------------------
# templates

def _tau_for(tau: TauParam, mode: str) -> float:
    if isinstance(tau, Mapping):
        return float(tau[mode])
    return float(tau)


def _decay(spec, p) -> LmiConstraint:
    A = spec.mode(p).A
    I = np.eye(spec.n)
    return LmiConstraint(f"decay[{p}]", "decay", (LmiTerm(p, I, A, 2.0),),
                         DECAY_MARGIN * np.linalg.norm(A, 2))


def _positivity(spec, p) -> LmiConstraint:
    I = np.eye(spec.n)
    return LmiConstraint(f"positive[{p}]", "positivity", (LmiTerm(p, I, I, -1.0),),
                         POSITIVITY_MARGIN)


def _jump(label, source, target, K, n, rhs_coef=1.0, kind="jump") -> LmiConstraint:
    """``K^T Q_target K - rhs_coef Q_source <= 0``."""
    I = np.eye(n)
    return LmiConstraint(label, kind, (LmiTerm(target, K, K, 1.0),
                                       LmiTerm(source, I, I, -rhs_coef)))


def _switch_pairs(spec: SwitchedSystemSpec):
    """``(source, target, matrix, tag)`` for every jump the template must cover.

    Resets follow the graph edges; impulse sets cover every ordered pair of
    distinct modes with each member (each vertex for a hull).
    """
    if isinstance(spec.jumps, ImpulseSet):
        for q, p in itertools.permutations(sorted_modes(spec.modes), 2):
            for i, M in enumerate(spec.jumps.matrices, start=1):
                yield q, p, M, f"M{i}"
    elif isinstance(spec.jumps, ResetCollection):
        for q, p in spec.graph.sorted_edges():
            yield q, p, spec.jumps[(q, p)], "R"
    else:
        for q, p in spec.graph.sorted_edges():
            yield q, p, np.eye(spec.n), "I"


def build_lmi_system(spec: SwitchedSystemSpec, template: str,
                     tau: Optional[TauParam] = None,
                     rates: Optional[Mapping[str, float]] = None) -> LmiSystem:
    """Constraint list for one of the templates.

    Parameters
    ----------
    template : str
        ``hespanhaMorse``: ``J^T Q_p J <= Q_q`` for each jump ``J`` from
        ``q`` to ``p``, plus decay.  ``geromelColaneri``:
        ``exp(A_q^T tau) Q_p exp(A_q tau) <= Q_q`` (no jumps).
        ``resetDwell`` and ``impulseDwell``:
        ``exp(A_q^T tau) J^T Q_p J exp(A_q tau) <= Q_q``.
        ``mixedRate`` and ``mixedImpulse``: ``Q_p A_p + A_p^T Q_p <=
        -lambda Q_p`` (stable) or ``<= mu Q_p`` (unstable) and
        ``J^T Q_p J <= gamma Q_q``.
        Every template also carries ``Q_p >= 1e-6 I`` (after normalizing
        the largest eigenvalue to one); the non-rate templates carry
        ``Q_p A_p + A_p^T Q_p <= -1e-6 ||A_p|| I``.
    tau : float or dict
        Dwell time, or per-mode dwell times applied on the source mode's
        exponential.
    rates : dict
        ``{"lambda": ..., "mu": ..., "gamma": ...}`` for the mixed templates.
    """
    if template not in TEMPLATES:
        raise ValueError(f"unknown template {template!r}; choose from {TEMPLATES}")
    n = spec.n
    modes = tuple(sorted_modes(spec.modes))
    cons: List[LmiConstraint] = [_positivity(spec, p) for p in modes]
    params: Dict = {"tau": tau, "rates": dict(rates or {})}

    if template in ("mixedRate", "mixedImpulse"):
        if rates is None:
            raise ValueError("mixed templates need rates")
        lam, mu, gamma = float(rates["lambda"]), float(rates["mu"]), float(rates["gamma"])
        if template == "mixedImpulse" and gamma < 1:
            raise ValueError("the mixed impulse template requires gamma >= 1")
        I = np.eye(n)
        for p in modes:
            sub = spec.mode(p)
            if sub.stability_class == "stable":
                cons.append(LmiConstraint(f"rate[{p}]", "rate",
                                          (LmiTerm(p, I, sub.A, 2.0), LmiTerm(p, I, I, lam))))
            elif sub.stability_class == "unstable":
                cons.append(LmiConstraint(f"rate[{p}]", "rate",
                                          (LmiTerm(p, I, sub.A, 2.0), LmiTerm(p, I, I, -mu))))
            else:
                raise ValueError(f"mode {p} is marginal")
        for q, p, M, tag in _switch_pairs(spec):
            cons.append(_jump(f"jumpRate[{q}->{p},{tag}]", q, p, M, n, gamma, "jumpRate"))
        return LmiSystem(template, modes, n, tuple(cons), params)

    cons += [_decay(spec, p) for p in modes]
    if template == "hespanhaMorse":
        for q, p, M, tag in _switch_pairs(spec):
            cons.append(_jump(f"jump[{q}->{p},{tag}]", q, p, M, n))
        return LmiSystem(template, modes, n, tuple(cons), params)

    if tau is None:
        raise ValueError(f"template {template} needs a dwell time")
    expms = {q: numlin.matrix_exp(spec.mode(q).A, _tau_for(tau, q)) for q in modes}
    if template == "geromelColaneri":
        for q, p in spec.graph.sorted_edges():
            cons.append(_jump(f"jump[{q}->{p}]", q, p, expms[q], n))
    else:
        if template == "resetDwell" and not isinstance(spec.jumps, ResetCollection):
            raise ValueError("resetDwell needs a reset collection")
        if template == "impulseDwell" and not isinstance(spec.jumps, ImpulseSet):
            raise ValueError("impulseDwell needs an impulse set")
        for q, p, M, tag in _switch_pairs(spec):
            cons.append(_jump(f"jump[{q}->{p},{tag}]", q, p, M @ expms[q], n))
    return LmiSystem(template, modes, n, tuple(cons), params)


# ---------------------------------------------------------------------------
# verification

def verify_certificate(cert: LyapunovCertificate, lmis: LmiSystem,
                       tolerance: float = VERIFY_TOL) -> VerificationReport:
    """Direct eigenvalue check of every constraint.

    The certificate is normalized so the largest eigenvalue over all ``Q_p``
    is one; a constraint passes when
    ``lambda_max(S(Q_hat)) + margin <= tolerance``.

    Raises
    ------
    DimensionMismatch
        If a referenced mode is missing or has the wrong size.
    """
    for m in lmis.modes:
        if m not in cert.Q:
            raise DimensionMismatch(f"certificate lacks mode {m}")
        if np.shape(cert.Q[m]) != (lmis.n, lmis.n):
            raise DimensionMismatch(f"Q[{m}] has shape {np.shape(cert.Q[m])}")
    Q = {m: numlin.sym(np.asarray(cert.Q[m], dtype=float)) for m in lmis.modes}
    scale = max(np.linalg.eigvalsh(q)[-1] for q in Q.values())
    slacks, normalized = {}, {}
    for c in lmis.constraints:
        top = float(np.linalg.eigvalsh(numlin.sym(c.value(Q)))[-1])
        slacks[c.label] = top
        normalized[c.label] = (top / scale + c.margin) if scale > 0 else math.inf
    ok = scale > 0 and all(v <= tolerance for v in normalized.values())
    return VerificationReport(bool(ok), slacks, normalized, tolerance)


# ---------------------------------------------------------------------------
# feasibility search

def _sym_basis(n: int) -> List[np.ndarray]:
    out = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1.0 / math.sqrt(2.0)
            out.append(E)
    return out


class _AffineSlacks:
    """Linear map from stacked ``svec(Q_p)`` to the stacked slacks ``-S_i(Q)``."""

    def __init__(self, lmis: LmiSystem):
        n, modes = lmis.n, list(lmis.modes)
        basis = _sym_basis(n)
        self.n, self.modes, self.basis = n, modes, basis
        self.k = len(lmis.constraints)
        d = len(basis)
        self.d = d
        cols = []
        for m in modes:
            for E in basis:
                Q = {mm: (E if mm == m else np.zeros((n, n))) for mm in modes}
                cols.append(np.concatenate([-c.value(Q).ravel() for c in lmis.constraints]))
        self.G = np.array(cols).T
        self.pinv = np.linalg.pinv(self.G)

    def unpack(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        out = {}
        for i, m in enumerate(self.modes):
            block = x[i * self.d:(i + 1) * self.d]
            out[m] = sum(v * E for v, E in zip(block, self.basis))
        return out

    def identity_start(self) -> np.ndarray:
        x = np.zeros(self.G.shape[1])
        for i in range(len(self.modes)):
            for j, E in enumerate(self.basis):
                if np.trace(E) == 1.0:
                    x[i * self.d + j] = 1.0
        return x


def feasibility_search(lmis: LmiSystem, budget: int = 20000,
                       tolerance: float = VERIFY_TOL) -> Optional[LyapunovCertificate]:
    """Look for ``{Q_p}`` satisfying every constraint.

    The homogeneous problem is normalized by asking for ``Q_p >= I``; strict
    constraints ask for their margin times the current scale estimate.  The
    penalty ``sum ||min(eig(slack_i - target_i), 0)||^2`` is minimized with
    L-BFGS, and each round ends with alternating projections (clip the
    eigenvalues of every slack at its target, then least-squares back onto
    the affine range).  Scale estimates are refreshed when the normalized
    certificate misses a strict margin.

    Parameters
    ----------
    budget : int
        Total optimizer and projection iterations allowed.

    Returns
    -------
    LyapunovCertificate or None
        None means inconclusive, not infeasible.
    """
    aff = _AffineSlacks(lmis)
    n, k = aff.n, aff.k
    eye = np.eye(n).ravel()
    kind = [c.kind for c in lmis.constraints]
    margins = np.array([c.margin for c in lmis.constraints])

    def targets(scale):
        return np.array([1.0 if kd == "positivity" else m * scale
                         for kd, m in zip(kind, margins)])

    def certificate(x):
        return LyapunovCertificate(aff.unpack(x), **_rate_fields(lmis))

    scale = 1.0
    x = aff.identity_start()
    spent = 0
    while spent < budget:
        tgt = targets(scale)
        offset = -np.concatenate([t * eye for t in tgt])

        def penalty(z):
            S = (aff.G @ z + offset).reshape(k, n, n)
            w, V = np.linalg.eigh(S)
            neg = np.minimum(w, 0.0)
            N = np.einsum("kij,kj,klj->kil", V, neg, V)
            return float(np.sum(neg ** 2)), 2.0 * aff.G.T @ N.ravel()

        iters = min(3000, budget - spent)
        res = minimize(penalty, x, jac=True, method="L-BFGS-B",
                       options={"maxiter": iters, "ftol": 0.0, "gtol": 0.0, "maxcor": 30})
        x = res.x
        spent += max(res.nit, 1)
        for polish in (False, True):
            if polish:
                steps = min(300, budget - spent)
                for _ in range(steps):
                    S = (aff.G @ x + offset).reshape(k, n, n)
                    w, V = np.linalg.eigh(S)
                    P = np.einsum("kij,kj,klj->kil", V, np.maximum(w, 0.0), V)
                    x = aff.pinv @ (P.ravel() - offset)
                spent += max(steps, 1)
            cert = certificate(x)
            if min(np.linalg.eigvalsh(Q)[0] for Q in cert.Q.values()) <= 0:
                continue
            report = verify_certificate(cert, lmis, tolerance)
            if report.ok:
                return cert
            top = max(np.linalg.eigvalsh(Q)[-1] for Q in cert.Q.values())
            if top > scale * 1.5:
                scale = top
                break
    return None


def _rate_fields(lmis: LmiSystem) -> Dict:
    rates = lmis.params.get("rates") or {}
    if not rates:
        return {}
    lam_modes, mu_modes = [], []
    for c in lmis.constraints:
        if c.kind == "rate":
            mode = c.terms[0].mode
            (lam_modes if c.terms[1].coef > 0 else mu_modes).append(mode)
    gamma = {}
    for c in lmis.constraints:
        if c.kind == "jumpRate":
            gamma[(c.terms[1].mode, c.terms[0].mode)] = float(rates["gamma"])
    return {"lam": {m: float(rates["lambda"]) for m in lam_modes},
            "mu": {m: float(rates["mu"]) for m in mu_modes},
            "gamma": gamma}


# ---------------------------------------------------------------------------
# searches built on feasibility

@dataclass(frozen=True)
class BisectionResult:
    """Smallest feasible lattice point found by :func:`min_dwell_bisection`.

    ``profile`` lists every probe as ``(tau, feasible)`` in the order run.
    """

    tau_hat: float
    certificate: LyapunovCertificate
    lmis: LmiSystem
    report: VerificationReport
    profile: List[Tuple[float, bool]]


def min_dwell_bisection(spec: SwitchedSystemSpec, template: str,
                        tau_range: Tuple[float, float], steps: int = 12,
                        budget: int = 20000) -> BisectionResult:
    """Bisect on the dwell time for the smallest certified value.

    Feasibility is assumed monotone in ``tau``; this is a search heuristic,
    so the whole probe profile is returned alongside the result.

    Raises
    ------
    NotAllStable
        If some mode is not stable.
    InfeasibleAtUpperBound
        If no certificate is found at the upper end of the range.
    """
    if template not in ("resetDwell", "impulseDwell", "geromelColaneri"):
        raise ValueError(f"template {template!r} has no dwell time")
    if spec.unstable_modes or len(spec.stable_modes) != len(spec.modes):
        raise NotAllStable("dwell-time templates need every mode stable")
    lo, hi = map(float, tau_range)
    profile: List[Tuple[float, bool]] = []

    def probe(tau):
        lmis = build_lmi_system(spec, template, tau)
        cert = feasibility_search(lmis, budget)
        profile.append((tau, cert is not None))
        log.debug("tau=%.6g feasible=%s", tau, cert is not None)
        return lmis, cert

    lmis_hi, cert_hi = probe(hi)
    if cert_hi is None:
        raise InfeasibleAtUpperBound(f"no certificate at tau = {hi}", profile)
    best = (hi, lmis_hi, cert_hi)
    lmis_lo, cert_lo = probe(lo)
    if cert_lo is not None:
        best = (lo, lmis_lo, cert_lo)
    else:
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            lmis_mid, cert_mid = probe(mid)
            if cert_mid is not None:
                hi, best = mid, (mid, lmis_mid, cert_mid)
            else:
                lo = mid
    tau_hat, lmis, cert = best
    return BisectionResult(tau_hat, cert, lmis, verify_certificate(cert, lmis), profile)


def hespanha_morse_check(spec: SwitchedSystemSpec,
                         budget: int = 20000) -> Optional[LyapunovCertificate]:
    """Arbitrary-switching certificate, or None (inconclusive)."""
    if spec.unstable_modes or len(spec.stable_modes) != len(spec.modes):
        raise NotAllStable("arbitrary-switching template needs every mode stable")
    return feasibility_search(build_lmi_system(spec, "hespanhaMorse"), budget)


SEED_RATES = (1.0, 2.0, 75.0)


def rate_grid(spec: SwitchedSystemSpec, seed=SEED_RATES):
    """Seed triple first, then a coarse logarithmic grid of ``(lambda, mu, gamma)``.

    ``lambda`` stays below twice the slowest stable decay rate and ``mu``
    starts at twice the fastest unstable growth rate, since the quadratic
    form decays or grows at twice the state's rate.
    """
    stable = [spec.mode(p).rate for p in spec.stable_modes]
    unstable = [spec.mode(p).rate for p in spec.unstable_modes]
    lam_top = 2 * min(stable) if stable else 1.0
    mu_low = 2 * max(unstable) if unstable else 1.0
    if seed is not None:
        yield tuple(float(v) for v in seed)
    for gamma in np.geomspace(1.0, 1e4, 9):
        for lam in lam_top * np.array([0.5, 0.25, 0.125]):
            for mu in mu_low * np.array([1.1, 1.5, 2.0, 3.0]):
                yield float(lam), float(mu), float(gamma)


@dataclass(frozen=True)
class MixedRateResult:
    rates: Tuple[float, float, float]
    certificate: LyapunovCertificate
    lmis: LmiSystem
    report: VerificationReport
    tried: List[Tuple[float, float, float]]


def mixed_rate_search(spec: SwitchedSystemSpec, template: str = "mixedRate",
                      grid=None, budget: int = 20000) -> Optional[MixedRateResult]:
    """First ``(lambda, mu, gamma)`` on the grid with a rate certificate."""
    tried = []
    for rates in (grid if grid is not None else rate_grid(spec)):
        lam, mu, gamma = rates
        if template == "mixedImpulse" and gamma < 1:
            continue
        lmis = build_lmi_system(spec, template,
                                rates={"lambda": lam, "mu": mu, "gamma": gamma})
        tried.append((lam, mu, gamma))
        cert = feasibility_search(lmis, budget)
        if cert is not None:
            return MixedRateResult((lam, mu, gamma), cert, lmis,
                                   verify_certificate(cert, lmis), tried)
    return None


def _check_ratios(r_s: float, r_u: float):
    if not (0 <= r_s <= 1 and 0 <= r_u <= 1) or abs(r_s + r_u - 1) > 1e-12:
        raise RatioInvalid(f"ratios ({r_s}, {r_u}) must lie in [0, 1] and sum to 1")


def mixed_rate_value(lam: float, mu: float, gamma: float, r_s: float, r_u: float,
                     tau: float, eta: float) -> float:
    """Per-switch exponent ``-lambda r_s tau + mu r_u eta + ln gamma``."""
    _check_ratios(r_s, r_u)
    return -lam * r_s * tau + mu * r_u * eta + math.log(gamma)


def mixed_rate_check(cert: Union[LyapunovCertificate, Tuple[float, float, float]],
                     r_s: float, r_u: float, tau: float, eta: float) -> bool:
    """Whether ``-lambda r_s tau + mu r_u eta + ln gamma < 0``.

    ``cert`` may be a certificate (using its minimum lambda, maximum mu and
    maximum gamma) or a plain ``(lambda, mu, gamma)`` triple.

    Raises
    ------
    RatioInvalid
        If the ratios are outside [0, 1] or do not sum to one.
    """
    if isinstance(cert, LyapunovCertificate):
        lam = cert.lam_min or 0.0
        mu = cert.mu_max or 0.0
        gamma = cert.gamma_max or 1.0
    else:
        lam, mu, gamma = cert
    return mixed_rate_value(lam, mu, gamma, r_s, r_u, tau, eta) < 0


def mixed_rate_check_mode_dependent(lam: Mapping[str, float], mu: Mapping[str, float],
                                    gamma: float, freq: Mapping[str, float],
                                    tau: Mapping[str, float],
                                    eta: Mapping[str, float]) -> bool:
    """``-sum lambda_p r_p tau_p + sum mu_p r_p eta_p + ln gamma < 0``."""
    total = sum(freq.values())
    if any(not 0 <= f <= 1 for f in freq.values()) or abs(total - 1) > 1e-12:
        raise RatioInvalid("mode frequencies must lie in [0, 1] and sum to 1")
    value = math.log(gamma)
    value -= sum(lam[p] * freq.get(p, 0.0) * tau[p] for p in lam)
    value += sum(mu[p] * freq.get(p, 0.0) * eta[p] for p in mu)
    return value < 0


def mixed_condition_symbolic(lam, mu, gamma, r_s=sympy.Rational(1, 2),
                             r_u=sympy.Rational(1, 2)):
    """The limsup condition solved for ``tau``, as a sympy relation.

    With ``(1, 2, 75)`` and alternating switching this is
    ``tau > 2 eta + 2 log(75)``.
    """
    tau, eta = sympy.symbols("tau eta", positive=True)
    lam, mu, gamma = (sympy.nsimplify(v) for v in (lam, mu, gamma))
    r_s, r_u = sympy.nsimplify(r_s), sympy.nsimplify(r_u)
    if r_s == 0:
        raise RatioInvalid("no stable switches: the condition has no dwell-time form")
    expr = -lam * r_s * tau + mu * r_u * eta + sympy.log(gamma)
    bound = sympy.solve(sympy.Eq(expr, 0), tau)[0]
    return sympy.StrictGreaterThan(tau, sympy.expand(bound))


def switch_values(cert: LyapunovCertificate, times: Sequence[float],
                  modes: Sequence[str], states: Sequence[np.ndarray]) -> np.ndarray:
    """``V_{sigma(t_k)}(x(t_k))`` for post-jump states at switch times."""
    return np.array([cert.value(m, x) for m, x in zip(modes, states)])

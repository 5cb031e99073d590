"""Closed-form simulation of reset and impulsive switched flows.

Between switches the state follows ``x(t) = exp(A_p (t - t_k)) x(t_k)``
exactly; at a switch the jump matrix is applied to the left limit.  The
state is right-continuous: ``x(t_k)`` is the post-jump value and the
pre-jump value is kept in the jump record.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import numlin
from .bounds import TimeConstraints
from .errors import (
    DimensionMismatch,
    InadmissibleSignal,
    ScheduleMismatch,
    UnsatisfiableClass,
)
from .model import (
    ImpulseSchedule,
    ImpulseSet,
    ModeGraph,
    ResetCollection,
    SwitchedSystemSpec,
    SwitchingSignal,
    sorted_modes,
)

TIME_TOL = 1e-12


def state_norm(x: np.ndarray, norm: numlin.NormSpec = numlin.SPECTRAL) -> float:
    """Euclidean norm, or ``sqrt(x^T W x)`` for an ellipsoidal weight."""
    x = np.asarray(x, dtype=float)
    if norm.kind == "ellipsoidal":
        return float(math.sqrt(max(x @ norm.weight @ x, 0.0)))
    return float(np.linalg.norm(x))


# ---------------------------------------------------------------------------
# trajectories

@dataclass(frozen=True)
class JumpEvent:
    time: float
    pre: np.ndarray
    post: np.ndarray
    matrix_id: str
    matrix: np.ndarray = field(repr=False)
    source: str = ""
    target: str = ""


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution.

    ``times``, ``states`` and ``modes`` are aligned; a sample at a switch
    time holds the post-jump state and the new mode.
    """

    times: np.ndarray
    states: np.ndarray
    modes: Tuple[str, ...]
    jumps: Tuple[JumpEvent, ...]
    norms: np.ndarray
    norm: numlin.NormSpec = numlin.SPECTRAL

    @property
    def samples(self) -> List[Tuple[float, np.ndarray, str]]:
        return list(zip(self.times.tolist(), list(self.states), self.modes))

    @property
    def norm_trace(self) -> List[Tuple[float, float]]:
        return list(zip(self.times.tolist(), self.norms.tolist()))

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def initial_norm(self) -> float:
        return float(self.norms[0])

    def max_norm_ratio(self) -> float:
        """``sup_t ||x(t)|| / ||x0||`` over samples and pre-jump states."""
        x0 = self.initial_norm
        if x0 == 0:
            return 0.0 if np.all(self.norms == 0) else math.inf
        peak = float(self.norms.max())
        for ev in self.jumps:
            peak = max(peak, state_norm(ev.pre, self.norm))
        return peak / x0

    def switch_states(self) -> Tuple[List[float], List[str], List[np.ndarray]]:
        """Times, entered modes and post-jump states at ``t_0`` and every switch."""
        times, modes, states = [float(self.times[0])], [self.modes[0]], [self.states[0]]
        for ev in self.jumps:
            times.append(ev.time)
            modes.append(ev.target)
            states.append(ev.post)
        return times, modes, states

    def csv_rows(self) -> List[List]:
        """Rows ``time, x1..xn, mode, norm, jump`` with a pre/post pair at jumps.

        The jump flag is 0 for ordinary samples, -1 for the pre-jump row and
        1 for the post-jump row.
        """
        by_time = {ev.time: ev for ev in self.jumps}
        rows = []
        for t, x, m, nv in zip(self.times, self.states, self.modes, self.norms):
            ev = by_time.get(float(t))
            if ev is not None:
                rows.append([float(t), *ev.pre.tolist(), ev.source,
                             state_norm(ev.pre, self.norm), -1])
                rows.append([float(t), *x.tolist(), m, float(nv), 1])
            else:
                rows.append([float(t), *x.tolist(), m, float(nv), 0])
        return rows

    def csv_header(self) -> List[str]:
        n = self.states.shape[1]
        return ["time", *[f"x{i + 1}" for i in range(n)], "mode", "norm", "jump"]

    def to_csv(self, target=None) -> str:
        """Write the CSV to a path or file object; also return it as text."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.csv_header())
        for row in self.csv_rows():
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        text = buf.getvalue()
        if target is None:
            return text
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return text


def _schedule_lookup(schedule: Optional[ImpulseSchedule], switch_times: Sequence[float]):
    """Map each switch time to its schedule entry, matching keys to 1e-12."""
    if schedule is None:
        raise ScheduleMismatch("impulse sets need an impulse schedule")
    keys = sorted(schedule)
    out, used = {}, set()
    for t in switch_times:
        hits = [k for k in keys if abs(k - t) <= TIME_TOL * max(1.0, abs(t))]
        if not hits:
            raise ScheduleMismatch(f"no impulse scheduled at switch time {t}")
        out[t] = schedule[hits[0]]
        used.add(hits[0])
    extra = [k for k in keys if k not in used]
    if extra:
        raise ScheduleMismatch(f"impulses scheduled off the switch times: {extra[:5]}")
    return out


def _impulse(jumps: ImpulseSet, entry) -> Tuple[str, np.ndarray]:
    if isinstance(entry, (int, np.integer)):
        i = int(entry)
        if not 0 <= i < len(jumps.matrices):
            raise ScheduleMismatch(f"impulse index {i} out of range")
        return f"M{i + 1}", jumps.matrices[i]
    M = np.asarray(entry, dtype=float)
    if M.shape != jumps.matrices[0].shape:
        raise ScheduleMismatch(f"impulse of shape {M.shape}")
    for i, V in enumerate(jumps.matrices):
        if np.array_equal(M, V):
            return f"M{i + 1}", V
    if jumps.kind == "convexHull" and jumps.contains(M):
        return "hull", M
    raise ScheduleMismatch("scheduled impulse is not a member of the impulse set")


def default_sample_step(signal: SwitchingSignal) -> float:
    """Minimum completed gap over twenty (the horizon over twenty without switches)."""
    gaps = [end - start for start, end, _, done in signal.intervals() if done]
    if not gaps:
        gaps = [signal.horizon if signal.horizon > 0 else 1.0]
    return min(gaps) / 20.0


def simulate(spec: SwitchedSystemSpec, signal: SwitchingSignal, x0,
             schedule: Optional[ImpulseSchedule] = None,
             sample_step: Optional[float] = None) -> Trajectory:
    """Exact piecewise flow with jumps at every switch.

    Parameters
    ----------
    schedule : dict, optional
        Switch time to impulse (index into the set, or a matrix).  Required
        exactly when the jumps form an impulse set.
    sample_step : float, optional
        Spacing of samples inside each interval; the default is the minimum
        gap over twenty.  Event times and the horizon are always sampled.

    Raises
    ------
    InadmissibleSignal
        If the signal uses an unknown mode or an edge outside the graph.
    ScheduleMismatch
        If the schedule is missing, extra, or names a non-member.
    DimensionMismatch
        If ``x0`` has the wrong length.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != spec.n:
        raise DimensionMismatch(f"x0 has length {x.shape[0]}, expected {spec.n}")
    unknown = [m for m in signal.modes if m not in spec.modes]
    if unknown:
        raise InadmissibleSignal(f"unknown modes {sorted(set(unknown))}")
    bad = signal.graph_violations(spec.graph)
    if bad:
        raise InadmissibleSignal(f"switches outside the graph: {bad}")
    impulses = None
    if isinstance(spec.jumps, ImpulseSet):
        impulses = _schedule_lookup(schedule, signal.switch_times)
    elif schedule:
        raise ScheduleMismatch("a schedule was given but the system has no impulse set")
    h = float(sample_step) if sample_step else default_sample_step(signal)
    if not h > 0:
        raise ValueError("sample_step must be positive")

    times: List[float] = []
    states: List[np.ndarray] = []
    modes: List[str] = []
    jumps: List[JumpEvent] = []
    pieces = list(signal.intervals())
    for k, (start, end, mode, _) in enumerate(pieces):
        sub = spec.mode(mode)
        A, st = sub.A, sub.eig
        count = int(math.floor((end - start) / h + 1e-9))
        offsets = [j * h for j in range(count + 1) if start + j * h < end - TIME_TOL * max(1.0, end)]
        if not offsets:
            offsets = [0.0]
        for dt in offsets:
            times.append(start + dt)
            states.append(numlin.matrix_exp(A, dt, st) @ x if dt else x.copy())
            modes.append(mode)
        pre = numlin.matrix_exp(A, end - start, st) @ x
        if k + 1 < len(pieces):
            target = pieces[k + 1][2]
            if isinstance(spec.jumps, ResetCollection):
                J, jid = spec.jumps[(mode, target)], f"R[{mode}->{target}]"
            elif impulses is not None:
                jid, J = _impulse(spec.jumps, impulses[end])
            else:
                J, jid = np.eye(spec.n), "I"
            post = J @ pre
            jumps.append(JumpEvent(end, pre, post, jid, J, mode, target))
            x = post
        else:
            if end > start or not times:
                times.append(end)
                states.append(pre)
                modes.append(mode)
    S = np.array(states)
    norms = np.array([state_norm(s, spec.norm) for s in S])
    return Trajectory(np.array(times), S, tuple(modes), tuple(jumps), norms, spec.norm)


def constant_schedule(signal: SwitchingSignal, index: int) -> ImpulseSchedule:
    """The same impulse at every switch."""
    return {t: index for t in signal.switch_times}


def continue_signal(signal: SwitchingSignal, t: float) -> SwitchingSignal:
    """The part of ``signal`` after ``t``, shifted to start at zero."""
    events = [(0.0, signal.mode_at(t))]
    events += [(tk - t, m) for tk, m in signal.events if tk > t]
    return SwitchingSignal(tuple(events), signal.horizon - t)


# ---------------------------------------------------------------------------
# signal generation

@dataclass(frozen=True)
class SignalGenerator:
    """Recipe for a switching signal.

    ``periodicCycle`` repeats ``modes`` with ``durations`` (one per step or
    a single value).  ``randomAdmissible`` walks the graph: stable-mode gaps
    are ``tau (1 + Exp(1))`` capped at ``10 tau``, unstable-mode gaps are
    uniform on ``(0, eta]``, and each successor is chosen uniformly.  The
    ``classes`` map tells stable modes from unstable ones.
    """

    kind: str
    horizon: float
    modes: Tuple[str, ...] = ()
    durations: Tuple[float, ...] = ()
    constraints: Optional[TimeConstraints] = None
    graph: Optional[ModeGraph] = None
    classes: Mapping[str, str] = field(default_factory=dict)
    seed: int = 0
    initial: Optional[str] = None
    extreme: bool = False

    @classmethod
    def periodic(cls, modes: Sequence[str], durations, horizon: float) -> "SignalGenerator":
        if np.isscalar(durations):
            durations = [float(durations)] * len(modes)
        return cls("periodicCycle", float(horizon), tuple(str(m) for m in modes),
                   tuple(float(d) for d in durations))

    @classmethod
    def random_admissible(cls, spec: SwitchedSystemSpec, constraints: TimeConstraints,
                          horizon: float, seed: int = 0, initial: Optional[str] = None,
                          extreme: bool = False) -> "SignalGenerator":
        """Random walk over ``spec.graph`` within the class of ``constraints``.

        With ``extreme`` the gaps sit on the class boundary: exactly ``tau_p``
        for stable modes and ``eta_p`` for unstable ones.
        """
        classes = {s.mode_id: s.stability_class for s in spec.subsystems}
        return cls("randomAdmissible", float(horizon), constraints=constraints,
                   graph=spec.graph, classes=classes, seed=seed, initial=initial,
                   extreme=extreme)


def generate_signal(gen: SignalGenerator) -> SwitchingSignal:
    """Realize a generator up to its horizon.

    Raises
    ------
    UnsatisfiableClass
        If an unstable mode has no successor or no positive flee time.
    """
    if gen.kind == "periodicCycle":
        if not gen.modes or len(gen.durations) != len(gen.modes):
            raise ValueError("periodicCycle needs one duration per mode")
        if any(d <= 0 for d in gen.durations):
            raise ValueError("durations must be positive")
        cycle = math.fsum(gen.durations)
        offsets = np.concatenate([[0.0], np.cumsum(gen.durations)[:-1]])
        events, t, k = [], 0.0, 0
        while t < gen.horizon or not events:
            events.append((t, gen.modes[k % len(gen.modes)]))
            k += 1
            t = (k // len(gen.modes)) * cycle + float(offsets[k % len(gen.modes)])
        return SwitchingSignal(tuple(events), gen.horizon)
    if gen.kind != "randomAdmissible":
        raise ValueError(f"unknown generator kind {gen.kind!r}")
    if gen.constraints is None or gen.graph is None:
        raise ValueError("randomAdmissible needs constraints and a graph")
    rng = np.random.default_rng(gen.seed)
    verts = sorted_modes(gen.graph.vertices)
    for m in verts:
        if gen.classes.get(m) == "unstable":
            eta = gen.constraints.flee_for(m) if gen.constraints.flee is not None else 0.0
            if not gen.graph.successors(m):
                raise UnsatisfiableClass(f"unstable mode {m} has no successor")
            if not (0 < eta < math.inf):
                raise UnsatisfiableClass(f"unstable mode {m} has no positive flee time")
    mode = gen.initial if gen.initial is not None else verts[int(rng.integers(len(verts)))]
    events, t = [], 0.0
    while True:
        events.append((t, mode))
        succ = sorted_modes(gen.graph.successors(mode))
        if gen.classes.get(mode) == "unstable":
            eta = gen.constraints.flee_for(mode)
            gap = eta if gen.extreme else eta * (1.0 - rng.random())
        else:
            tau = gen.constraints.dwell_for(mode) if gen.constraints.dwell is not None else 0.0
            base = tau if tau > 0 else 1.0
            gap = tau if (gen.extreme and tau > 0) else min(tau + base * rng.exponential(), 10 * base)
        if not succ or t + gap >= gen.horizon:
            break
        t += gap
        mode = succ[int(rng.integers(len(succ)))]
    return SwitchingSignal(tuple(events), gen.horizon)


# ---------------------------------------------------------------------------
# classification

@dataclass(frozen=True)
class SignalClassReport:
    """Tightest class parameters a signal satisfies.

    Dwell values are minima over completed intervals (infinite when there
    are none); flee values are maxima over all intervals including the
    final, possibly truncated, one (zero when there are none).
    """

    dwell_all: float
    flee_all: float
    dwell: float
    flee: float
    dwell_by_mode: Dict[str, float]
    flee_by_mode: Dict[str, float]
    graph_admissible: bool
    violations: Tuple[Tuple[str, str], ...] = ()

    def member(self, constraints: TimeConstraints, tol: float = 1e-12) -> bool:
        """Membership in the class described by ``constraints`` and the graph."""
        if not self.graph_admissible:
            return False
        if constraints.dwell is not None:
            for m, d in self.dwell_by_mode.items():
                need = constraints.dwell_for(m) if (not isinstance(constraints.dwell, dict)
                                                    or m in constraints.dwell) else None
                if need is not None and d < need - tol * max(1.0, need):
                    return False
        if constraints.flee is not None:
            for m, f in self.flee_by_mode.items():
                if isinstance(constraints.flee, dict) and m not in constraints.flee:
                    continue
                need = constraints.flee_for(m)
                if f > need + tol * max(1.0, need):
                    return False
        return True


def classify_signal(signal: SwitchingSignal, spec: SwitchedSystemSpec) -> SignalClassReport:
    """Class membership report for a finite signal."""
    klass = {s.mode_id: s.stability_class for s in spec.subsystems}
    dwell_by, flee_by = {}, {}
    dwell_all, flee_all = math.inf, 0.0
    for start, end, mode, complete in signal.intervals():
        gap = end - start
        flee_all = max(flee_all, gap)
        if complete:
            dwell_all = min(dwell_all, gap)
        if klass.get(mode) == "unstable":
            flee_by[mode] = max(flee_by.get(mode, 0.0), gap)
        elif complete:
            dwell_by[mode] = min(dwell_by.get(mode, math.inf), gap)
    viol = tuple(signal.graph_violations(spec.graph))
    return SignalClassReport(
        dwell_all, flee_all,
        min(dwell_by.values(), default=math.inf),
        max(flee_by.values(), default=0.0),
        dwell_by, flee_by, not viol, viol)


# ---------------------------------------------------------------------------
# empirical probe

def random_schedule(spec: SwitchedSystemSpec, signal: SwitchingSignal,
                    rng: np.random.Generator) -> Optional[ImpulseSchedule]:
    """Dirichlet-weighted hull points, or uniform picks from a finite set."""
    if not isinstance(spec.jumps, ImpulseSet):
        return None
    k = len(spec.jumps.matrices)
    out: ImpulseSchedule = {}
    for t in signal.switch_times:
        if spec.jumps.kind == "convexHull":
            out[t] = spec.jumps.combination(rng.dirichlet(np.ones(k)))
        else:
            out[t] = int(rng.integers(k))
    return out


@dataclass(frozen=True)
class ProbeReport:
    """Empirical amplification over randomized admissible trials.

    Evidence only: certified statements come from the bounds and the
    Lyapunov certificates.
    """

    max_norm_ratio: float
    ratios: Tuple[float, ...]
    final_ratios: Tuple[float, ...]
    growth: Tuple[bool, ...]

    @property
    def growth_flag(self) -> bool:
        return any(self.growth)


def empirical_stability_probe(spec: SwitchedSystemSpec, constraints: TimeConstraints,
                              trials: int = 100, horizon: Optional[float] = None,
                              seed: int = 0) -> ProbeReport:
    """Simulate admissible signals and report the worst norm amplification.

    Trial 0 runs the class boundary (every gap exactly ``tau_p`` or
    ``eta_p``); the rest draw random gaps, initial states and, for impulse
    sets, random schedules.  A trial is flagged as growing when its final
    norm exceeds its initial norm.
    """
    rng = np.random.default_rng(seed)
    scale = max([constraints.dwell_for(m) for m in spec.stable_modes
                 if constraints.dwell is not None] +
                [constraints.flee_for(m) for m in spec.unstable_modes
                 if constraints.flee is not None] + [1.0])
    T = float(horizon) if horizon is not None else 50.0 * scale
    ratios, finals, growth = [], [], []
    for i in range(trials):
        gen = SignalGenerator.random_admissible(
            spec, constraints, T, seed=int(rng.integers(2 ** 31)),
            initial=None, extreme=(i == 0))
        signal = generate_signal(gen)
        x0 = rng.standard_normal(spec.n)
        traj = simulate(spec, signal, x0, random_schedule(spec, signal, rng),
                        sample_step=max(T / 2000.0, default_sample_step(signal)))
        r = traj.max_norm_ratio()
        f = float(traj.norms[-1] / traj.norms[0])
        ratios.append(r)
        finals.append(f)
        growth.append(f > 1.0)
    return ProbeReport(max(ratios, default=0.0), tuple(ratios), tuple(finals), tuple(growth))


def trajectory_bound_constant(spec: SwitchedSystemSpec, constraints: TimeConstraints) -> float:
    """``C`` with ``||x(t)|| <= C ||x0||`` on signals of the certified class.

    ``max ||P_q|| max ||P_p^{-1}|| max_p c_p e^{mu_p eta_p}``, with the growth
    factor only for unstable modes.
    """
    big_p = max(numlin.operator_norm(s.P, spec.norm) for s in spec.subsystems)
    big_pinv = max(np.linalg.norm(s.P_inv, 2) for s in spec.subsystems)
    if spec.norm.kind == "ellipsoidal":
        w = np.linalg.eigvalsh(spec.norm.weight)
        big_pinv *= 1.0 / math.sqrt(w[0])
        big_p = max(np.linalg.norm(s.P, 2) for s in spec.subsystems) * math.sqrt(w[-1])
    gain = 1.0
    for s in spec.subsystems:
        g = s.c
        if s.stability_class == "unstable" and constraints.flee is not None:
            g *= math.exp(s.rate * constraints.flee_for(s.mode_id))
        gain = max(gain, g)
    return big_p * big_pinv * gain

import csv
import io
import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from dwellflee import bounds, sim
from dwellflee.bounds import TimeConstraints
from dwellflee.document import bundled_document
from dwellflee.errors import (
    DimensionMismatch,
    InadmissibleSignal,
    ScheduleMismatch,
    UnsatisfiableClass,
)
from dwellflee.model import (
    ModeGraph,
    ResetCollection,
    SwitchedSystemSpec,
    SwitchingSignal,
)

FAST = math.pi / (2 * math.sqrt(2))


def periodic(modes, durations, horizon):
    return sim.generate_signal(sim.SignalGenerator.periodic(modes, durations, horizon))


def cycle_signal(horizon=30.0):
    return periodic(["8", "9", "10"], 2.81, horizon)


def certified(spec):
    if spec.jumps is not None and not isinstance(spec.jumps, ResetCollection):
        return bounds.flow_dwell_flee_impulsive(spec)
    return bounds.flow_dwell_flee(spec)


# --- exactness -------------------------------------------------------------

def test_jumps_apply_matrix_exactly(specs, rng):
    spec = specs["arbreset3d"]
    signal = cycle_signal()
    traj = sim.simulate(spec, signal, rng.standard_normal(3),
                        sim.random_schedule(spec, signal, rng))
    assert len(traj.jumps) == len(signal.switch_times)
    for ev in traj.jumps:
        assert np.allclose(ev.post, ev.matrix @ ev.pre, rtol=0, atol=1e-12 * np.abs(ev.pre).max())


def test_reset_jumps_use_edge_matrix(specs):
    spec = specs["destabiss"]
    traj = sim.simulate(spec, periodic(["1", "2"], 3.5, 20.0), [1.0, 0.0])
    for ev in traj.jumps:
        assert ev.matrix_id == f"R[{ev.source}->{ev.target}]"
        assert np.array_equal(ev.matrix, spec.jumps[(ev.source, ev.target)])


@pytest.mark.parametrize("name", ["destabiss", "mixed", "scope", "arbreset3d"])
def test_flow_is_exact_between_events(specs, name, rng):
    spec = specs[name]
    signal = sim.generate_signal(sim.SignalGenerator.random_admissible(
        spec, certified(spec), 40.0, seed=3))
    schedule = sim.random_schedule(spec, signal, rng)
    traj = sim.simulate(spec, signal, rng.standard_normal(spec.n), schedule)
    starts = {0.0: traj.states[0]}
    starts.update({ev.time: ev.post for ev in traj.jumps})
    for start, end, mode, _ in signal.intervals():
        x_k = starts[start]
        A = spec.mode(mode).A
        for t, x in zip(traj.times, traj.states):
            if start <= t < end:
                ref = sla.expm(A * (t - start)) @ x_k
                assert np.linalg.norm(x - ref) <= 1e-9 * max(np.linalg.norm(ref), 1e-300)


def test_zero_state_stays_zero(specs):
    traj = sim.simulate(specs["mixed"], periodic(["4", "5"], [2.0, 1.0], 20.0), np.zeros(3))
    assert np.all(traj.states == 0) and np.all(traj.norms == 0)
    assert traj.max_norm_ratio() == 0.0


def test_times_nondecreasing_and_right_continuous(specs):
    traj = sim.simulate(specs["destabiss"], periodic(["1", "2"], 1.0, 5.5), [1.0, 2.0])
    assert np.all(np.diff(traj.times) > 0)
    for ev in traj.jumps:
        i = int(np.flatnonzero(traj.times == ev.time)[0])
        assert np.array_equal(traj.states[i], ev.post)
        assert traj.modes[i] == ev.target


def test_half_step_changes_no_sample(specs, rng):
    spec = specs["scope"]
    signal = sim.generate_signal(sim.SignalGenerator.random_admissible(
        spec, certified(spec), 30.0, seed=11))
    x0 = rng.standard_normal(3)
    coarse = sim.simulate(spec, signal, x0, sample_step=0.2)
    fine = sim.simulate(spec, signal, x0, sample_step=0.1)
    lookup = {round(t, 9): x for t, x in zip(fine.times, fine.states)}
    matched = 0
    for t, x in zip(coarse.times, coarse.states):
        y = lookup.get(round(t, 9))
        if y is not None:
            matched += 1
            assert np.linalg.norm(x - y) <= 1e-9 * np.linalg.norm(y)
    assert matched >= len(coarse.times) - 1


@pytest.mark.parametrize("name, seed", [("destabiss", 0), ("mixed", 1), ("scope_v", 2)])
def test_composition(specs, name, seed, rng):
    spec = specs[name]
    signal = sim.generate_signal(sim.SignalGenerator.random_admissible(
        spec, certified(spec), 40.0, seed=seed))
    x0 = rng.standard_normal(spec.n)
    half = 20.0 + 1e-3
    assert half not in signal.switch_times
    whole = sim.simulate(spec, signal, x0)
    first = sim.simulate(spec, signal.truncated(half), x0)
    second = sim.simulate(spec, sim.continue_signal(signal, half), first.final_state)
    ref = whole.final_state
    assert np.linalg.norm(second.final_state - ref) <= 1e-9 * np.linalg.norm(ref)


# --- errors ----------------------------------------------------------------

def test_impulse_system_needs_schedule(specs):
    with pytest.raises(ScheduleMismatch):
        sim.simulate(specs["arbreset3d"], cycle_signal(), [1.0, 0.0, 0.0])


def test_schedule_for_reset_system_rejected(specs):
    signal = periodic(["1", "2"], 3.5, 10.0)
    with pytest.raises(ScheduleMismatch):
        sim.simulate(specs["destabiss"], signal, [1.0, 0.0], {3.5: 0})


def test_schedule_outside_hull_rejected(specs):
    signal = cycle_signal(6.0)
    schedule = {t: 5 * np.eye(3) for t in signal.switch_times}
    with pytest.raises(ScheduleMismatch):
        sim.simulate(specs["arbreset3d"], signal, [1.0, 0.0, 0.0], schedule)


def test_schedule_missing_time_rejected(specs):
    signal = cycle_signal(6.0)
    with pytest.raises(ScheduleMismatch):
        sim.simulate(specs["arbreset3d"], signal, [1.0, 0.0, 0.0], {2.81: 0})


def test_hull_member_accepted(specs):
    spec = specs["arbreset3d"]
    signal = cycle_signal(6.0)
    M = spec.jumps.combination([0.2, 0.3, 0.5])
    traj = sim.simulate(spec, signal, [1.0, 0.0, 0.0], {t: M for t in signal.switch_times})
    assert all(ev.matrix_id == "hull" for ev in traj.jumps)


def test_unknown_mode_rejected(specs):
    with pytest.raises(InadmissibleSignal):
        sim.simulate(specs["destabiss"], periodic(["1", "9"], 1.0, 3.0), [1.0, 0.0])


def test_graph_violation_rejected(specs):
    spec = specs["mixed"]
    one_way = spec.__class__(spec.subsystems, ModeGraph(("4", "5"), frozenset({("4", "5")})),
                             ResetCollection({("4", "5"): spec.jumps[("4", "5")]}))
    with pytest.raises(InadmissibleSignal):
        sim.simulate(one_way, periodic(["4", "5"], 1.0, 3.5), np.ones(3))


def test_wrong_dimension_rejected(specs):
    with pytest.raises(DimensionMismatch):
        sim.simulate(specs["destabiss"], periodic(["1", "2"], 1.0, 3.0), [1.0, 0.0, 0.0])


# --- signal generation -----------------------------------------------------

def test_periodic_events():
    signal = cycle_signal(100.0)
    assert signal.modes[:4] == ["8", "9", "10", "8"]
    assert np.allclose(signal.times, 2.81 * np.arange(len(signal.times)), rtol=0, atol=1e-12)
    assert signal.times[-1] < 100.0


@settings(max_examples=40)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from(["destabiss", "mixed", "bplssbistab",
                                                      "arbreset3d"]))
def test_random_signals_are_members(seed, name):
    spec = bundled_document(name).to_spec()
    constraints = certified(spec)
    signal = sim.generate_signal(sim.SignalGenerator.random_admissible(
        spec, constraints, 100.0, seed=seed))
    report = sim.classify_signal(signal, spec)
    assert report.member(constraints)
    again = sim.generate_signal(sim.SignalGenerator.random_admissible(
        spec, constraints, 100.0, seed=seed))
    assert again == signal


def test_equal_dwell_and_flee_membership(specs):
    spec = specs["mixed"]
    tc = TimeConstraints("uniform", 2.0, 2.0)
    signal = sim.generate_signal(sim.SignalGenerator.random_admissible(spec, tc, 200.0, seed=5))
    report = sim.classify_signal(signal, spec)
    assert report.member(tc)
    assert report.dwell_by_mode["4"] >= 2.0 and report.flee_by_mode["5"] <= 2.0


def test_unsatisfiable_class(specs):
    spec = specs["mixed"]
    dead_end = SwitchedSystemSpec(spec.subsystems,
                                  ModeGraph(("4", "5"), frozenset({("4", "5")})),
                                  ResetCollection({("4", "5"): spec.jumps[("4", "5")]}))
    gen = sim.SignalGenerator.random_admissible(dead_end, TimeConstraints("uniform", 1.0, 1.0),
                                                10.0)
    with pytest.raises(UnsatisfiableClass):
        sim.generate_signal(gen)
    gen = sim.SignalGenerator.random_admissible(spec, TimeConstraints("uniform", 1.0, None), 10.0)
    with pytest.raises(UnsatisfiableClass):
        sim.generate_signal(gen)


# --- classification --------------------------------------------------------

def test_classify_periodic(specs):
    report = sim.classify_signal(cycle_signal(), specs["arbreset3d"])
    assert report.dwell_all == pytest.approx(2.81, abs=1e-12)
    assert report.graph_admissible


def test_classify_alternating_mixed(specs):
    spec = specs["mixed"]
    report = sim.classify_signal(periodic(["4", "5"], [14.64, 3.0], 200.0), spec)
    assert report.dwell_by_mode == {"4": pytest.approx(14.64)}
    assert report.flee_by_mode == {"5": pytest.approx(3.0)}
    assert report.member(TimeConstraints("uniform", 14.64, 3.0), tol=1e-9)
    assert not report.member(TimeConstraints("uniform", 14.7, 3.0))


def test_classify_empty_signal(specs):
    spec = specs["destabiss"]
    report = sim.classify_signal(SwitchingSignal(((0.0, "1"),), 10.0), spec)
    assert report.dwell == math.inf and report.dwell_all == math.inf
    for tc in [TimeConstraints("uniform", 1e6, None), TimeConstraints("uniform", 0.0, None)]:
        assert report.member(tc)


# --- probes ----------------------------------------------------------------

def test_probe_destabiss_bounded(specs):
    spec = specs["destabiss"]
    tc = TimeConstraints("uniform", 3.47, None)
    report = sim.empirical_stability_probe(spec, tc, trials=100, seed=1)
    assert report.max_norm_ratio <= sim.trajectory_bound_constant(spec, tc) * 1.1
    assert not report.growth_flag


def test_probe_destabiss_fast_switching_grows(specs):
    report = sim.empirical_stability_probe(
        specs["destabiss"], TimeConstraints("uniform", FAST, None), trials=5, seed=2)
    assert report.growth_flag and report.growth[0]


def test_probe_hull_bounded(specs):
    spec = specs["arbreset3d"]
    tc = TimeConstraints("uniform", 3.48, None)
    report = sim.empirical_stability_probe(spec, tc, trials=60, seed=3)
    assert report.max_norm_ratio <= sim.trajectory_bound_constant(spec, tc) * 1.1


def test_cycled_impulse_trajectory_decays(specs):
    spec = specs["arbreset3d"]
    signal = cycle_signal(60.0)
    traj = sim.simulate(spec, signal, [-5.0, 5.0, -3.0], sim.constant_schedule(signal, 1))
    assert all(ev.matrix_id == "M2" for ev in traj.jumps)
    assert traj.norms[-1] < 1e-2 * traj.norms[0]


@pytest.mark.parametrize("name", ["destabiss", "bplssbistab", "mixed", "scope", "scope_v",
                                  "scope_v_ellipsoidal", "arbreset3d"])
def test_trajectory_constant_bound(specs, name, rng):
    spec = specs[name]
    tc = certified(spec)
    C = sim.trajectory_bound_constant(spec, tc)
    for seed in range(15):
        signal = sim.generate_signal(sim.SignalGenerator.random_admissible(
            spec, tc, 60.0, seed=seed, extreme=seed == 0))
        traj = sim.simulate(spec, signal, rng.standard_normal(spec.n),
                            sim.random_schedule(spec, signal, rng))
        assert traj.max_norm_ratio() <= 1.1 * C


# --- export ----------------------------------------------------------------

def test_csv_layout(specs, tmp_path):
    spec = specs["destabiss"]
    traj = sim.simulate(spec, periodic(["1", "2"], 1.0, 2.5), [1.0, 0.0], sample_step=0.5)
    path = tmp_path / "traj.csv"
    text = traj.to_csv(path)
    assert path.read_text() == text
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["time", "x1", "x2", "mode", "norm", "jump"]
    flags = [int(r[-1]) for r in rows[1:]]
    assert flags.count(-1) == flags.count(1) == len(traj.jumps) == 2
    for i, f in enumerate(flags):
        if f == -1:
            pre, post = rows[1 + i], rows[2 + i]
            assert flags[i + 1] == 1 and pre[0] == post[0]
            assert (pre[3], post[3]) in {("1", "2"), ("2", "1")}
    assert len(rows) - 1 == len(traj.times) + len(traj.jumps)


def test_csv_to_file_object(specs):
    traj = sim.simulate(specs["destabiss"], periodic(["1", "2"], 1.0, 2.5), [1.0, 0.0])
    buf = io.StringIO()
    assert traj.to_csv(buf) == buf.getvalue()

import itertools
import math

import cvxpy as cp
import numpy as np
import pytest
import scipy.linalg as sla
import sympy
from hypothesis import given
from hypothesis import strategies as st

from dwellflee import bounds, lyapunov, sim
from dwellflee.errors import (
    DimensionMismatch,
    InfeasibleAtUpperBound,
    NotAllStable,
    RatioInvalid,
)
from dwellflee.lyapunov import (
    LmiConstraint,
    LmiSystem,
    LmiTerm,
    LyapunovCertificate,
    build_lmi_system,
    feasibility_search,
    verify_certificate,
)
from dwellflee.model import (
    ImpulseSet,
    ModeGraph,
    SubsystemSpec,
    SwitchedSystemSpec,
    count_switches,
)

from conftest import random_stable

I2 = np.eye(2)
A5 = np.array([[1.0, 0.0], [0.0, -1.0]])


def decay_only(A):
    n = A.shape[0]
    I = np.eye(n)
    con = LmiConstraint("decay[p]", "decay", (LmiTerm("p", I, A, 2.0),))
    return LmiSystem("manual", ("p",), n, (con,))


def cvx_feasible(spec, tau):
    """Independent route: the dwell-time LMIs posed directly in cvxpy."""
    n = spec.n
    modes = spec.modes
    Q = {p: cp.Variable((n, n), symmetric=True) for p in modes}
    cons = []
    for p in modes:
        A = spec.mode(p).A
        cons += [Q[p] >> np.eye(n), Q[p] << 1e6 * np.eye(n),
                 Q[p] @ A + A.T @ Q[p] << -1e-6 * np.eye(n)]
    if isinstance(spec.jumps, ImpulseSet):
        pairs = [(q, p, M) for q, p in itertools.permutations(modes, 2)
                 for M in spec.jumps.matrices]
    else:
        pairs = [(q, p, spec.jumps[(q, p)]) for q, p in spec.graph.sorted_edges()]
    for q, p, M in pairs:
        K = M @ sla.expm(spec.mode(q).A * tau)
        cons.append(K.T @ Q[p] @ K << Q[q])
    prob = cp.Problem(cp.Minimize(0), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.status == cp.OPTIMAL


# --- verification ----------------------------------------------------------

def test_verify_identity_certificate():
    report = verify_certificate(LyapunovCertificate({"p": I2}), decay_only(-I2))
    assert report.ok
    assert report.slacks["decay[p]"] == pytest.approx(-2.0)


def test_verify_rejects_unstable_decay():
    assert not verify_certificate(LyapunovCertificate({"p": I2}), decay_only(A5)).ok


@pytest.mark.parametrize("Q", [{"q": I2}, {"p": np.eye(3)}])
def test_verify_dimension_mismatch(Q):
    with pytest.raises(DimensionMismatch):
        verify_certificate(LyapunovCertificate(Q), decay_only(-I2))


def test_verify_is_scale_invariant(specs):
    lmis = build_lmi_system(specs["destabiss"], "resetDwell", 3.5)
    cert = feasibility_search(lmis)
    scaled = LyapunovCertificate({m: 1e4 * Q for m, Q in cert.Q.items()})
    assert verify_certificate(scaled, lmis).ok


def test_destabiss_certificate_at_345_verifies(specs):
    lmis = build_lmi_system(specs["destabiss"], "resetDwell", 3.45)
    cert = feasibility_search(lmis)
    assert cert is not None
    assert verify_certificate(cert, lmis, 1e-8).ok


# --- feasibility -----------------------------------------------------------

def single_mode(A):
    return SwitchedSystemSpec((SubsystemSpec.build("p", A),),
                              ModeGraph(("p",), frozenset()), None)


@pytest.mark.parametrize("tau", [0.0, 0.3, 2.0])
def test_geromel_colaneri_single_mode(tau, rng):
    A = random_stable(rng, 3)
    lmis = build_lmi_system(single_mode(A), "geromelColaneri", tau)
    cert = feasibility_search(lmis)
    assert cert is not None and verify_certificate(cert, lmis).ok


def test_single_mode_lyapunov_equation_solution_verifies(rng):
    A = random_stable(rng, 3)
    Q = sla.solve_continuous_lyapunov(A.T, -np.eye(3))
    lmis = build_lmi_system(single_mode(A), "geromelColaneri", 1.0)
    assert verify_certificate(LyapunovCertificate({"p": Q}), lmis).ok


@pytest.mark.parametrize("tau, found", [(3.5, True), (3.0, False)])
def test_destabiss_reset_feasibility(specs, tau, found):
    cert = feasibility_search(build_lmi_system(specs["destabiss"], "resetDwell", tau))
    assert (cert is not None) is found


@pytest.mark.parametrize("name, tau", [
    ("destabiss", 3.0), ("destabiss", 3.5), ("arbreset3d", 2.3), ("arbreset3d", 2.8),
    ("bplssbistab", 15.0), ("bplssbistab", 18.0),
])
def test_feasibility_agrees_with_cvxpy(specs, name, tau):
    spec = specs[name]
    template = "impulseDwell" if isinstance(spec.jumps, ImpulseSet) else "resetDwell"
    ours = feasibility_search(build_lmi_system(spec, template, tau)) is not None
    assert ours == cvx_feasible(spec, tau)


def test_every_returned_certificate_self_verifies(specs):
    for name, template, tau in [("destabiss", "resetDwell", 4.0),
                                ("arbreset3d", "impulseDwell", 3.0),
                                ("bplssbistab", "resetDwell", 18.0)]:
        lmis = build_lmi_system(specs[name], template, tau)
        cert = feasibility_search(lmis)
        assert verify_certificate(cert, lmis, 1e-8).ok


# --- system construction ---------------------------------------------------

def test_hull_counts(specs):
    lmis = build_lmi_system(specs["arbreset3d"], "impulseDwell", 3.0)
    k, P = len(specs["arbreset3d"].jumps), 3
    assert lmis.counts() == {"positivity": 3, "decay": 3, "jump": k * P * (P - 1)}
    assert lmis.count("jump") + lmis.count("decay") == 21


def test_reset_counts(specs):
    lmis = build_lmi_system(specs["destabiss"], "resetDwell", 3.5)
    assert lmis.counts() == {"positivity": 2, "decay": 2, "jump": 2}


def test_mode_dependent_exponents(specs):
    spec = specs["bplssbistab"]
    taus = {"2": 11.0, "3": 7.0}
    lmis = build_lmi_system(spec, "resetDwell", taus)
    for c in lmis.constraints:
        if c.kind != "jump":
            continue
        target_term, source_term = c.terms
        q, p = source_term.mode, target_term.mode
        expected = spec.jumps[(q, p)] @ sla.expm(spec.mode(q).A * taus[q])
        assert np.allclose(target_term.left, expected, rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("kwargs", [
    {"template": "nope"},
    {"template": "resetDwell"},
    {"template": "mixedRate"},
])
def test_build_rejects_bad_requests(specs, kwargs):
    with pytest.raises(ValueError):
        build_lmi_system(specs["destabiss"], **kwargs)


def test_mixed_impulse_requires_gamma_at_least_one(specs):
    with pytest.raises(ValueError):
        build_lmi_system(specs["mixed"], "mixedImpulse",
                         rates={"lambda": 1, "mu": 2, "gamma": 0.5})


def test_constraint_matrices_symmetric(specs, rng):
    lmis = build_lmi_system(specs["arbreset3d"], "impulseDwell", 3.0)
    Q = {m: rng.standard_normal((3, 3)) for m in lmis.modes}
    for c in lmis.constraints:
        S = c.value(Q)
        assert np.allclose(S, S.T)


# --- bisection -------------------------------------------------------------

def test_bisection_profile_and_monotone_lattice(specs):
    res = lyapunov.min_dwell_bisection(specs["destabiss"], "resetDwell", (3.0, 4.0), steps=6)
    assert 3.35 <= res.tau_hat <= 3.6
    assert res.report.ok
    assert res.profile[0] == (4.0, True) and res.profile[1] == (3.0, False)
    feasible = [t for t, ok in res.profile if ok]
    assert res.tau_hat == min(feasible)


def test_bisection_infeasible_upper_bound(specs):
    with pytest.raises(InfeasibleAtUpperBound) as err:
        lyapunov.min_dwell_bisection(specs["destabiss"], "resetDwell", (1.0, 2.0), budget=2000)
    assert err.value.profile == [(2.0, False)]


def test_bisection_needs_stable_modes(specs):
    with pytest.raises(NotAllStable):
        lyapunov.min_dwell_bisection(specs["mixed"], "resetDwell", (1.0, 2.0))


# --- arbitrary switching ---------------------------------------------------

def test_hespanha_morse_stabilizing_resets(specs):
    spec = specs["bplssbistab"]
    cert = lyapunov.hespanha_morse_check(spec.with_jumps(bounds.stabilizing_resets(spec)))
    assert cert is not None


def test_hespanha_morse_common_q():
    subs = (SubsystemSpec.build("a", -I2), SubsystemSpec.build("b", np.diag([-1.0, -3.0])))
    spec = SwitchedSystemSpec(subs, ModeGraph.complete(["a", "b"]), None)
    cert = lyapunov.hespanha_morse_check(spec)
    assert cert is not None
    assert verify_certificate(LyapunovCertificate({"a": I2, "b": I2}),
                              build_lmi_system(spec, "hespanhaMorse")).ok


def test_hespanha_morse_destabiss_inconclusive(specs):
    assert lyapunov.hespanha_morse_check(specs["destabiss"], budget=3000) is None


# --- vertex reduction ------------------------------------------------------

def test_vertex_reduction_sampling(specs, rng):
    spec = specs["arbreset3d"]
    tau = 3.0
    cert = feasibility_search(build_lmi_system(spec, "impulseDwell", tau))
    k = len(spec.jumps)
    for _ in range(300):
        q, p = rng.choice(spec.modes, size=2, replace=False)
        E = sla.expm(spec.mode(q).A * tau)
        x = rng.standard_normal(3)
        M = spec.jumps.combination(rng.dirichlet(np.ones(k)))
        value = math.sqrt(cert.value(p, M @ E @ x))
        top = max(math.sqrt(cert.value(p, V @ E @ x)) for V in spec.jumps.matrices)
        assert value <= top + 1e-9


# --- mixed rate condition --------------------------------------------------

def test_mixed_rate_certificate_at_seed(specs):
    res = lyapunov.mixed_rate_search(specs["mixed"], grid=[lyapunov.SEED_RATES])
    assert res is not None and res.report.ok
    assert res.certificate.lam == {"4": 1.0}
    assert res.certificate.mu == {"5": 2.0}
    assert res.certificate.gamma_max == 75.0


def test_rate_grid_starts_with_seed(specs):
    grid = list(lyapunov.rate_grid(specs["mixed"]))
    assert grid[0] == (1.0, 2.0, 75.0)
    assert len(grid) == 1 + 9 * 3 * 4


@pytest.mark.parametrize("triple, r_s, tau, eta, expected", [
    ((1, 2, 75), 0.5, 14.64, 3.0, True),
    ((1, 2, 75), 0.5, 14.62, 3.0, False),
    ((1, 2, 1), 1.0, 0.01, 0.0, True),
    ((1, 2, 1), 0.0, 5.0, 1.0, False),
    ((1, 2, math.exp(-2.0)), 0.0, 5.0, 1.0, False),
    ((1, 2, 0.5 * math.exp(-2.0)), 0.0, 5.0, 1.0, True),
])
def test_mixed_rate_check_examples(triple, r_s, tau, eta, expected):
    assert lyapunov.mixed_rate_check(triple, r_s, 1 - r_s, tau, eta) is expected


@pytest.mark.parametrize("r_s, r_u", [(0.6, 0.6), (-0.1, 1.1), (0.5, 0.4)])
def test_mixed_rate_check_ratio_invalid(r_s, r_u):
    with pytest.raises(RatioInvalid):
        lyapunov.mixed_rate_check((1, 2, 75), r_s, r_u, 1.0, 1.0)


def test_mixed_rate_check_uses_certificate_extremes():
    cert = LyapunovCertificate({"a": I2, "b": I2}, lam={"a": 1.0}, mu={"b": 2.0},
                               gamma={("a", "b"): 75.0, ("b", "a"): 3.0})
    assert lyapunov.mixed_rate_check(cert, 0.5, 0.5, 14.64, 3.0)
    assert not lyapunov.mixed_rate_check(cert, 0.5, 0.5, 14.6, 3.0)


def test_mode_dependent_rate_check():
    ok = lyapunov.mixed_rate_check_mode_dependent(
        {"4": 1.0}, {"5": 2.0}, 75.0, {"4": 0.5, "5": 0.5}, {"4": 14.64}, {"5": 3.0})
    assert ok
    with pytest.raises(RatioInvalid):
        lyapunov.mixed_rate_check_mode_dependent(
            {"4": 1.0}, {"5": 2.0}, 75.0, {"4": 0.7, "5": 0.5}, {"4": 1.0}, {"5": 1.0})


def test_mixed_condition_symbolic():
    rel = lyapunov.mixed_condition_symbolic(1, 2, 75)
    tau, eta = sympy.symbols("tau eta", positive=True)
    assert isinstance(rel, sympy.StrictGreaterThan)
    assert rel.lhs == tau
    assert sympy.simplify(rel.rhs - (2 * eta + 2 * sympy.log(75))) == 0
    with pytest.raises(RatioInvalid):
        lyapunov.mixed_condition_symbolic(1, 2, 75, r_s=0, r_u=1)


small = st.integers(1, 40).map(lambda k: sympy.Rational(k, 8))


@given(small, small, st.integers(1, 100), st.integers(1, 9), small, small)
def test_symbolic_and_numeric_conditions_agree(lam, mu, gamma, tenths, tau, eta):
    r_s = sympy.Rational(tenths, 10)
    value = lyapunov.mixed_rate_value(float(lam), float(mu), gamma, float(r_s),
                                      float(1 - r_s), float(tau), float(eta))
    if abs(value) < 1e-9:
        return
    rel = lyapunov.mixed_condition_symbolic(lam, mu, gamma, r_s, 1 - r_s)
    t, e = sympy.symbols("tau eta", positive=True)
    assert bool(rel.subs({t: tau, e: eta})) == (value < 0)


# --- certificates ----------------------------------------------------------

def test_certificate_round_trip():
    cert = LyapunovCertificate({"4": np.diag([1.0, 2.0]), "5": I2}, {"4": 1.0}, {"5": 2.0},
                               {("4", "5"): 75.0, ("5", "4"): 75.0})
    back = LyapunovCertificate.from_dict(cert.to_dict())
    assert back.lam == cert.lam and back.mu == cert.mu and back.gamma == cert.gamma
    for m in cert.Q:
        assert np.array_equal(back.Q[m], cert.Q[m])


def test_normalized_top_eigenvalue_is_one():
    cert = LyapunovCertificate({"a": 5 * I2, "b": np.diag([1.0, 10.0])}).normalized()
    assert max(np.linalg.eigvalsh(Q)[-1] for Q in cert.Q.values()) == pytest.approx(1.0)


# --- Lyapunov values along simulations -------------------------------------

def test_switch_time_decrease_on_certified_simulation(specs, rng):
    spec = specs["destabiss"]
    tau = 3.5
    cert = feasibility_search(build_lmi_system(spec, "resetDwell", tau))
    constraints = bounds.TimeConstraints("uniform", tau, None)
    for seed in range(10):
        signal = sim.generate_signal(
            sim.SignalGenerator.random_admissible(spec, constraints, 60.0, seed=seed))
        traj = sim.simulate(spec, signal, rng.standard_normal(2))
        V = lyapunov.switch_values(cert, *traj.switch_states())
        assert np.all(V[1:] <= V[:-1] * (1 + 1e-7))


def test_mixed_bound_along_alternating_signal(specs):
    spec = specs["mixed"]
    res = lyapunov.mixed_rate_search(spec, grid=[lyapunov.SEED_RATES])
    lam, mu, gamma = res.rates
    signal = sim.generate_signal(sim.SignalGenerator.periodic(["4", "5"], [14.64, 3.0], 900.0))
    traj = sim.simulate(spec, signal, [1.0, -1.0, 0.5])
    times, modes, states = traj.switch_states()
    V = lyapunov.switch_values(res.certificate, times, modes, states)
    assert len(V) > 50
    for k in range(1, len(V)):
        counts = count_switches(signal, spec, times[k])
        bound = (gamma ** counts.total
                 * math.exp(-lam * counts.to_stable * 14.64 + mu * counts.to_unstable * 3.0)
                 * V[0])
        assert V[k] <= bound * (1 + 1e-6)


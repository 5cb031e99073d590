"""Command-line front end.

Verbs: ``bounds``, ``lyapunov``, ``simulate``, ``graph-check`` and
``regress``.  ``--input`` takes a document path or the name of a bundled
document.  Reports are YAML on standard output, with bounds rounded to four
significant digits; certificates keep full precision so they can be
re-verified.  Exit status is 0 when the analysis completed without
diagnostics.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import bounds, lyapunov, sim
from .document import (
    SystemDocument,
    bundled_document,
    bundled_names,
    parse_matrix,
    parse_scalar,
    read_document,
)
from .errors import DocumentError, DwellFleeError, InfeasibleAtUpperBound
from .model import (
    ImpulseSet,
    ModeGraph,
    ResetCollection,
    SwitchedSystemSpec,
    SwitchingSignal,
    apply_rescale,
    rescale_bases,
    sorted_modes,
    topological_order,
    unstable_subgraph_acyclic,
)
from .numlin import SPECTRAL, NormSpec, matrix_exp, spectral_radius


def sig4(x):
    """Round to four significant digits; passes None and infinities through."""
    if x is None:
        return None
    if isinstance(x, dict):
        return {k: sig4(v) for k, v in x.items()}
    x = float(x)
    if not math.isfinite(x) or x == 0:
        return x
    return float(f"{x:.4g}")


@dataclass
class AnalysisReport:
    """Structured result of one command."""

    analysis: str
    digest: str
    provenance: str
    outputs: Dict[str, Any] = field(default_factory=dict)

    def to_yaml(self) -> str:
        data = {"analysis": self.analysis, "input_digest": self.digest,
                "provenance": self.provenance, "outputs": _plain(self.outputs)}
        return yaml.safe_dump(data, sort_keys=False, default_flow_style=None)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, tuple) else "->".join(k): _plain(v)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# input handling

def load_input(ref: str) -> SystemDocument:
    """Document from a path, falling back to a bundled name."""
    path = Path(ref)
    if path.is_file():
        return read_document(path)
    if ref in bundled_names():
        return bundled_document(ref)
    raise DocumentError(f"no file or bundled document named {ref!r}")


def parse_norm(text: Optional[str]) -> Optional[NormSpec]:
    """``spectral`` or ``ellipsoidal:<path to a YAML row list>``."""
    if text is None:
        return None
    if text == "spectral":
        return SPECTRAL
    if text.startswith("ellipsoidal:"):
        rows = yaml.safe_load(Path(text.split(":", 1)[1]).read_text())
        if isinstance(rows, dict):
            rows = rows.get("weight")
        return NormSpec("ellipsoidal", parse_matrix(rows, "norm weight"))
    raise DocumentError(f"unknown norm {text!r}")


def parse_range(text: str):
    lo, hi = (float(v) for v in text.split(":"))
    if not 0 < lo < hi:
        raise ValueError(f"bad range {text!r}")
    return lo, hi


def parse_floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def parse_tau_map(text: str) -> Dict[str, float]:
    out = {}
    for item in text.split(","):
        k, v = item.split("=")
        out[k.strip()] = float(v)
    return out


def _with_default_jumps(spec: SwitchedSystemSpec) -> SwitchedSystemSpec:
    if spec.jumps is None:
        I = np.eye(spec.n)
        return spec.with_jumps(ResetCollection({e: I for e in spec.graph.sorted_edges()}))
    return spec


def _constraints_for(spec: SwitchedSystemSpec, mode_dependent: bool):
    if isinstance(spec.jumps, ImpulseSet):
        return bounds.flow_dwell_flee_impulsive(spec, mode_dependent=mode_dependent), \
            "impulsive flow bound"
    spec = _with_default_jumps(spec)
    if mode_dependent:
        return bounds.flow_dwell_flee_mode_dependent(spec), "mode-dependent reset flow bound"
    return bounds.flow_dwell_flee(spec), "reset flow bound"


# ---------------------------------------------------------------------------
# commands

def cmd_bounds(doc: SystemDocument, mode_dependent: bool = False,
               norm: Optional[NormSpec] = None,
               rescale: Optional[float] = None) -> AnalysisReport:
    spec = doc.to_spec(norm)
    outputs: Dict[str, Any] = {}
    if rescale is not None:
        result = rescale_bases(spec, epsilon=rescale)
        spec = apply_rescale(spec, result)
        outputs["rescale"] = {"epsilon": rescale, "theta": sig4(result.theta),
                              "achieved": sig4(result.achieved),
                              "factors": {m: sig4(f) for m, f in result.factors.items()}}
    tc, provenance = _constraints_for(spec, mode_dependent)
    outputs.update({
        "kind": tc.kind,
        "tau": sig4(tc.dwell),
        "eta": sig4(tc.flee),
        "norm": spec.norm.kind,
        "bases": {s.mode_id: {"override": s.basis_override, "scale": s.basis_scale,
                              "c": sig4(s.c), "rate": sig4(s.rate)}
                  for s in spec.subsystems},
    })
    return AnalysisReport("bounds", doc.digest(), f"bounds: {provenance}", outputs)


def _default_template(spec: SwitchedSystemSpec) -> str:
    impulses = isinstance(spec.jumps, ImpulseSet)
    if spec.unstable_modes:
        return "mixedImpulse" if impulses else "mixedRate"
    return "impulseDwell" if impulses else "resetDwell"


def cmd_lyapunov(doc: SystemDocument, template: Optional[str] = None,
                 tau_range=None, tau_map: Optional[Dict[str, float]] = None,
                 tolerance: float = lyapunov.VERIFY_TOL,
                 norm: Optional[NormSpec] = None) -> AnalysisReport:
    spec = _with_default_jumps(doc.to_spec(norm))
    template = template or _default_template(spec)
    outputs: Dict[str, Any] = {"template": template}
    prov = f"lyapunov: {template} template"

    def certificate_block(cert, lmis):
        rep = lyapunov.verify_certificate(cert, lmis, tolerance)
        return {"verified": rep.ok, "tolerance": tolerance,
                "worst_normalized_slack": rep.worst,
                "constraints": lmis.counts(),
                "certificate": cert.to_dict()}

    if template in ("mixedRate", "mixedImpulse"):
        res = lyapunov.mixed_rate_search(spec, template)
        if res is None:
            outputs["feasible"] = False
            return AnalysisReport("lyapunov", doc.digest(), prov, outputs)
        lam, mu, gamma = res.rates
        outputs["feasible"] = True
        outputs["rates"] = {"lambda": lam, "mu": mu, "gamma": gamma}
        outputs["alternating_condition"] = str(lyapunov.mixed_condition_symbolic(lam, mu, gamma))
        outputs.update(certificate_block(res.certificate, res.lmis))
    elif template == "hespanhaMorse":
        lmis = lyapunov.build_lmi_system(spec, template)
        cert = lyapunov.hespanha_morse_check(spec)
        outputs["feasible"] = cert is not None
        if cert is not None:
            outputs.update(certificate_block(cert, lmis))
        else:
            outputs["constraints"] = lmis.counts()
    elif tau_map is not None:
        lmis = lyapunov.build_lmi_system(spec, template, tau_map)
        cert = lyapunov.feasibility_search(lmis)
        outputs["tau"] = tau_map
        outputs["feasible"] = cert is not None
        outputs["constraints"] = lmis.counts()
        if cert is not None:
            outputs.update(certificate_block(cert, lmis))
    else:
        if tau_range is None:
            tc, _ = _constraints_for(spec, False)
            hi = max(float(tc.dwell or 1.0), 1e-3) * 1.5
            tau_range = (hi / 100.0, hi)
        res = lyapunov.min_dwell_bisection(spec, template, tau_range)
        outputs["tau_hat"] = sig4(res.tau_hat)
        outputs["tau_hat_exact"] = res.tau_hat
        outputs["profile"] = [[t, ok] for t, ok in res.profile]
        outputs.update(certificate_block(res.certificate, res.lmis))
    return AnalysisReport("lyapunov", doc.digest(), prov, outputs)


def build_signal(spec: SwitchedSystemSpec, horizon: float,
                 durations: Optional[List[float]] = None,
                 cycle: Optional[List[str]] = None, random: bool = False,
                 seed: int = 0) -> SwitchingSignal:
    """Periodic cycle (``durations`` over ``cycle``) or a random admissible walk."""
    if random:
        tc, _ = _constraints_for(spec, False)
        return sim.generate_signal(sim.SignalGenerator.random_admissible(spec, tc, horizon, seed))
    modes = cycle or sorted_modes(spec.modes)
    if not durations:
        raise ValueError("a periodic signal needs --durations")
    if len(durations) == 1:
        durations = durations * len(modes)
    return sim.generate_signal(sim.SignalGenerator.periodic(modes, durations, horizon))


def cmd_simulate(doc: SystemDocument, x0: Sequence[float], horizon: float,
                 durations=None, cycle=None, random: bool = False,
                 impulse: Optional[int] = None, seed: int = 0,
                 output=None, sample_step: Optional[float] = None,
                 norm: Optional[NormSpec] = None) -> AnalysisReport:
    spec = _with_default_jumps(doc.to_spec(norm))
    signal = build_signal(spec, horizon, durations, cycle, random, seed)
    schedule = None
    if isinstance(spec.jumps, ImpulseSet):
        if impulse is not None:
            schedule = sim.constant_schedule(signal, impulse)
        else:
            schedule = sim.random_schedule(spec, signal, np.random.default_rng(seed))
    traj = sim.simulate(spec, signal, x0, schedule, sample_step)
    if output is not None:
        traj.to_csv(output)
    final = float(traj.norms[-1])
    init = float(traj.norms[0])
    outputs = {
        "switches": len(signal.switch_times),
        "samples": int(len(traj.times)),
        "max_norm_ratio": sig4(traj.max_norm_ratio()),
        "final_norm": sig4(final),
        "growth": bool(init > 0 and final > init),
        "csv": str(output) if output is not None else None,
    }
    return AnalysisReport("simulate", doc.digest(), "sim: exact piecewise flow", outputs)


def cmd_graph_check(doc: SystemDocument) -> (AnalysisReport, bool):
    spec = doc.to_spec(check=False)
    ok, cycle = unstable_subgraph_acyclic(spec)
    gs = [list(e) for e in sorted(spec.stable_edges)]
    gu = [list(e) for e in sorted(spec.unstable_edges)]
    outputs: Dict[str, Any] = {"G_s": gs, "G_u": gu, "acyclic": ok}
    if not gu:
        outputs["verdict"] = "G_u empty, hypothesis vacuous"
    elif ok:
        sub = ModeGraph(tuple(spec.modes), frozenset(tuple(e) for e in spec.unstable_edges))
        outputs["verdict"] = "G_u acyclic"
        outputs["order"] = topological_order(sub)
    else:
        outputs["verdict"] = "G_u cyclic"
        outputs["cycle"] = cycle
    return AnalysisReport("graph-check", doc.digest(), "model: unstable-subgraph acyclicity",
                          outputs), ok


# ---------------------------------------------------------------------------
# regression suite

def _close(value, expected, tol) -> bool:
    return value is not None and abs(float(value) - float(expected)) <= tol


def regress_rows(with_lmi: bool = True) -> List[Dict[str, Any]]:
    """Compare every bundled document against its recorded expectations."""
    rows = []
    for name in bundled_names():
        doc = bundled_document(name)
        exp = doc.expect
        if not exp:
            continue
        tol = float(exp.get("tolerance", 0.01))
        spec = _with_default_jumps(doc.to_spec())
        tc, _ = _constraints_for(spec, False)
        key = "tau_I" if isinstance(spec.jumps, ImpulseSet) else "tau_R"
        if key in exp:
            rows.append({"document": name, "quantity": key, "expected": exp[key],
                         "value": tc.dwell, "pass": _close(tc.dwell, exp[key], tol)})
        if "eta_R" in exp:
            rows.append({"document": name, "quantity": "eta_R", "expected": exp["eta_R"],
                         "value": tc.flee, "pass": _close(tc.flee, exp["eta_R"], tol)})
        if "tau_mode" in exp:
            md, _ = _constraints_for(spec, True)
            for m, v in exp["tau_mode"].items():
                got = md.dwell.get(str(m)) if isinstance(md.dwell, dict) else None
                rows.append({"document": name, "quantity": f"tau_{m}", "expected": v,
                             "value": got, "pass": _close(got, v, tol)})
        if "spectral_radius" in exp and "fast_period" in exp:
            e = spec.graph.sorted_edges()[0]
            period = parse_scalar(exp["fast_period"]).real
            K = spec.jumps[e] @ matrix_exp(spec.mode(e[0]).A, period)
            rho = spectral_radius(K)
            rows.append({"document": name, "quantity": "spectral_radius",
                         "expected": exp["spectral_radius"], "value": rho,
                         "pass": _close(rho, exp["spectral_radius"], 0.01)})
        if with_lmi and "lmi_range" in exp:
            lo, hi = exp["lmi_range"]
            template = exp.get("lmi_template", _default_template(spec))
            try:
                res = lyapunov.min_dwell_bisection(spec, template,
                                                   (0.5 * lo, 1.2 * hi))
                val = res.tau_hat
                ok = lo <= val <= hi and res.report.ok
            except InfeasibleAtUpperBound:
                val, ok = None, False
            rows.append({"document": name, "quantity": "lmi_tau_hat",
                         "expected": [lo, hi], "value": val, "pass": ok})
    return rows


# ---------------------------------------------------------------------------
# entry point

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--input", required=True, help="document path or bundled name")
    p.add_argument("--output", help="write the report (or CSV) here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--norm", help="spectral or ellipsoidal:<weight file>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwellflee", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("bounds", help="flow-based dwell and flee times")
    _add_common(p)
    p.add_argument("--mode-dependent", action="store_true")
    p.add_argument("--rescale", type=float, metavar="EPS",
                   help="rescale Jordan bases for the unstable-edge bound EPS first")

    p = sub.add_parser("lyapunov", help="LMI certificates and dwell-time bisection")
    _add_common(p)
    p.add_argument("--template", choices=lyapunov.TEMPLATES)
    p.add_argument("--tau-range", type=parse_range, metavar="LO:HI")
    p.add_argument("--tau-map", type=parse_tau_map, metavar="MODE=TAU,...",
                   help="check per-mode dwell times instead of bisecting")
    p.add_argument("--tolerance", type=float, default=lyapunov.VERIFY_TOL)

    p = sub.add_parser("simulate", help="simulate and export a CSV trajectory")
    _add_common(p)
    p.add_argument("--x0", type=parse_floats, required=True, metavar="X1,X2,...")
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--durations", type=parse_floats, metavar="D1,D2,...")
    p.add_argument("--cycle", type=lambda s: [m.strip() for m in s.split(",")],
                   metavar="MODE,MODE,...")
    p.add_argument("--random", action="store_true",
                   help="random admissible signal under the flow bounds")
    p.add_argument("--impulse", type=int, help="0-based impulse index used at every switch")
    p.add_argument("--sample-step", type=float)

    p = sub.add_parser("graph-check", help="acyclicity of the unstable-source subgraph")
    _add_common(p)

    p = sub.add_parser("regress", help="run the bundled regression documents")
    p.add_argument("--strict", action="store_true", help="nonzero exit on any mismatch")
    p.add_argument("--skip-lmi", action="store_true")
    p.add_argument("--output")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _emit(text: str, output: Optional[str]):
    sys.stdout.write(text)
    if output:
        Path(output).write_text(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    np.random.seed(args.seed)
    try:
        if args.verb == "regress":
            start = time.perf_counter()
            rows = regress_rows(with_lmi=not args.skip_lmi)
            lines = [f"{'PASS' if r['pass'] else 'FAIL'} {r['document']} {r['quantity']}: "
                     f"value={sig4(r['value']) if not isinstance(r['value'], list) else r['value']}"
                     f" expected={r['expected']}" for r in rows]
            lines.append(f"{sum(r['pass'] for r in rows)}/{len(rows)} passed in "
                         f"{time.perf_counter() - start:.1f} s")
            _emit("\n".join(lines) + "\n", args.output)
            return 1 if args.strict and not all(r["pass"] for r in rows) else 0

        doc = load_input(args.input)
        norm = parse_norm(args.norm)
        if args.verb == "bounds":
            report = cmd_bounds(doc, args.mode_dependent, norm, args.rescale)
        elif args.verb == "lyapunov":
            report = cmd_lyapunov(doc, args.template, args.tau_range, args.tau_map,
                                  args.tolerance, norm)
        elif args.verb == "simulate":
            report = cmd_simulate(doc, args.x0, args.horizon, args.durations, args.cycle,
                                  args.random, args.impulse, args.seed, args.output,
                                  args.sample_step, norm)
            sys.stdout.write(report.to_yaml())
            return 0
        else:
            report, ok = cmd_graph_check(doc)
            _emit(report.to_yaml(), args.output)
            return 0 if ok else 1
        _emit(report.to_yaml(), args.output)
        return 0
    except DocumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for d in getattr(exc, "diagnostics", None) or []:
            print(f"  {d}", file=sys.stderr)
        return 2
    except InfeasibleAtUpperBound as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(yaml.safe_dump({"profile": [[t, ok] for t, ok in exc.profile]}), file=sys.stderr)
        return 1
    except (DwellFleeError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

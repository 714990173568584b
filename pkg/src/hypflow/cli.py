"""Command-line front end.

Every command writes its artifacts plus a ``manifest.json`` with the fully
resolved configuration into the output directory.  Exit status is 0 on
success, 1 when a numerical verification fails and 2 for invalid input.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .conformal import conformal_curve, conformal_residual, integrate_conformal, mirror_deviation
from .errors import HypflowError, ThresholdSearchError
from .exact_flows import FlowKind, flow_residual, flow_table, make_exact_flow
from .geometry import PARABOLIC, soliton_residual
from .ode import StepControl
from .parabolic import gamma_curve, integrate_orbit, soliton_curve, threshold_search
from .simulator import dump_frames, fitted_circle_radius, simulate, verify_soliton_translation
from .svg import Figure

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2

_KIND_ALIASES = {
    "circle": FlowKind.HYPERBOLIC_CIRCLE,
    "hyperboliccircle": FlowKind.HYPERBOLIC_CIRCLE,
    "horocycle": FlowKind.HOROCYCLE,
    "equidistant": FlowKind.EQUIDISTANT,
}


class UsageError(Exception):
    pass


def _flow_kind(text: str) -> FlowKind:
    key = text.replace("-", "").replace("_", "").lower()
    if key not in _KIND_ALIASES:
        raise argparse.ArgumentTypeError(f"unknown flow kind {text!r}")
    return _KIND_ALIASES[key]


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hypflow", description="Inverse curve shortening flow in the hyperbolic plane.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--output-dir", default="hypflow-out",
                   help="artifact directory (HYPFLOW_OUTPUT_DIR takes precedence)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def tolerances(sp):
        sp.add_argument("--rtol", type=float, default=1e-10)
        sp.add_argument("--atol", type=float, default=1e-12)

    def angle(sp, default):
        sp.add_argument("--theta0", type=float, default=default)
        sp.add_argument("--deg", action="store_true", help="read angles in degrees")

    sp = sub.add_parser("exact-flow", help="closed-form evolution tables")
    sp.add_argument("--kind", type=_flow_kind, required=True)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--t", type=_float_list, default=[0.0], help="comma-separated times")
    sp.add_argument("--samples", type=int, default=0, help="also report flow residuals at this many samples")

    sp = sub.add_parser("parabolic", help="integrate and classify a parabolic soliton")
    sp.add_argument("--y0", type=float, required=True)
    angle(sp, math.pi / 2)
    tolerances(sp)

    sp = sub.add_parser("conformal", help="integrate a conformal soliton")
    sp.add_argument("--y0", type=float, required=True)
    angle(sp, 0.0)
    tolerances(sp)

    sp = sub.add_parser("threshold", help="estimate the Type I / Type II threshold H")
    sp.add_argument("--lo", type=float, default=1e-3)
    sp.add_argument("--hi", type=float, default=10.0)
    sp.add_argument("--width", type=float, default=1e-8)
    tolerances(sp)

    sp = sub.add_parser("portrait", help="phase portrait of parabolic orbits")
    sp.add_argument("--y0", type=_float_list, default=[0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
    angle(sp, math.pi / 2)
    tolerances(sp)

    sp = sub.add_parser("simulate", help="front-tracking flow of an exact-flow initial curve")
    sp.add_argument("--kind", type=_flow_kind, default=FlowKind.HYPERBOLIC_CIRCLE)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--t", type=float, default=0.5)
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--vertices", type=int, default=512)
    sp.add_argument("--scheme", choices=("implicit", "explicit"), default="implicit")
    sp.add_argument("--frames", type=int, default=10, help="number of frames to dump")

    sp = sub.add_parser("verify", help="soliton residual and translation checks")
    sp.add_argument("--y0", type=float, default=1.0)
    sp.add_argument("--t", type=float, default=0.1)
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--mesh", type=float, default=1e-4, help="arc-length spacing for residuals")
    sp.add_argument("--residual-tol", type=float, default=1e-6)
    sp.add_argument("--deviation-tol", type=float, default=5e-3)
    return p


def _resolve_output(args) -> Path:
    out = Path(os.environ.get("HYPFLOW_OUTPUT_DIR") or args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _ctrl(args) -> StepControl:
    ctrl = StepControl(rtol=args.rtol, atol=args.atol, s_max=500.0)
    try:
        ctrl.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return ctrl


def _theta(args) -> float:
    return math.radians(args.theta0) if args.deg else args.theta0


class Run:
    def __init__(self, args, out: Path):
        self.args = args
        self.out = out
        self.files: list[str] = []
        self.summary: dict = {}

    def write(self, name: str, text: str) -> None:
        (self.out / name).write_text(text)
        self.files.append(name)

    def manifest(self, status: int) -> None:
        cfg = {k: v for k, v in vars(self.args).items() if k not in ("output_dir",)}
        self.write("manifest.json", _json({
            "command": self.args.command,
            "config": cfg,
            "output_dir": str(self.out),
            "files": sorted(self.files),
            "summary": self.summary,
            "exit_status": status,
            "version": __version__,
        }))


def cmd_exact_flow(run: Run) -> int:
    a = run.args
    flow = make_exact_flow(a.kind, a.R, a.c)
    rows = flow_table(flow, a.t)
    lines = ["t,r,kappa"]
    for t, r, k in rows:
        lines.append(f"{t:.17g},{r:.17g},{k:.17g}")
        print(f"t={t:g}  r={r:.12g}  kappa={k:.12g}")
    run.write("exact_flow.csv", "\n".join(lines) + "\n")
    if a.samples:
        res = {str(t): flow_residual(flow, t, a.samples) for t in a.t}
        run.summary["residuals"] = res
        for t, v in res.items():
            print(f"t={t}  residual={v:.3e}")
    run.summary["rows"] = rows
    return EXIT_OK


def cmd_parabolic(run: Run) -> int:
    a = run.args
    trace = integrate_orbit(a.y0, _theta(a), _ctrl(a))
    rec = trace.record()
    run.write("trace.csv", trace.to_csv())
    run.write("classification.json", _json(rec))
    fig = Figure(title=f"parabolic soliton, y0={a.y0:g}")
    fig.polyline(np.column_stack([trace.x, trace.y]))
    fig.save(run.out / "curve.svg")
    run.files.append("curve.svg")
    run.summary = rec
    print(_json(rec), end="")
    return EXIT_OK


def cmd_conformal(run: Run) -> int:
    a = run.args
    trace = integrate_conformal(a.y0, _theta(a), _ctrl(a))
    rec = trace.record()
    run.write("trace.csv", trace.to_csv())
    run.write("record.json", _json(rec))
    fig = Figure(title=f"conformal soliton, y0={a.y0:g}")
    fig.polyline(np.column_stack([trace.x, trace.y]))
    fig.save(run.out / "curve.svg")
    run.files.append("curve.svg")
    run.summary = rec
    print(_json(rec), end="")
    return EXIT_OK


def cmd_threshold(run: Run) -> int:
    a = run.args
    est = threshold_search(_ctrl(a), (a.lo, a.hi), a.width)
    rec = {"H": est.H, "bracket": [est.lo, est.hi], "width": est.width,
           "log": [{"y0": y, "type": lab} for y, lab in est.log]}
    run.write("threshold.json", _json(rec))
    run.summary = {"H": est.H, "bracket": [est.lo, est.hi]}
    for y, lab in est.log:
        print(f"  y0={y:.12g}  {lab}")
    print(f"H = {est.H:.10f}  bracket [{est.lo:.12g}, {est.hi:.12g}]")
    return EXIT_OK


def cmd_portrait(run: Run) -> int:
    a = run.args
    ctrl = _ctrl(a)
    th0 = _theta(a)
    fig = Figure(title="parabolic orbits", xlabel="theta", ylabel="y")
    th = np.linspace(1e-3, math.pi / 2, 200)
    fig.polyline(np.column_stack([th, gamma_curve(th)]), color="black", dash="4 3")
    lines = ["orbit,y0,s,y,theta"]
    labels = []
    for i, y0 in enumerate(a.y0):
        tr = integrate_orbit(y0, th0, ctrl)
        labels.append({"y0": y0, "type": tr.type_label.value})
        fig.polyline(np.column_stack([tr.theta, tr.y]))
        lines += [f"{i},{y0:.17g},{s:.17g},{y:.17g},{t:.17g}" for s, y, t in zip(tr.s, tr.y, tr.theta)]
    run.write("portrait.csv", "\n".join(lines) + "\n")
    fig.save(run.out / "portrait.svg")
    run.files.append("portrait.svg")
    run.summary["orbits"] = labels
    for lab in labels:
        print(f"y0={lab['y0']:g}  {lab['type']}")
    return EXIT_OK


def cmd_simulate(run: Run) -> int:
    a = run.args
    flow = make_exact_flow(a.kind, a.R, a.c)
    curve = flow.curve_at(0.0, a.vertices)
    n_steps = int(math.ceil(a.t / a.dt - 1e-9))
    res = simulate(curve, a.t, a.dt, scheme=a.scheme, record_every=max(1, n_steps // max(a.frames, 1)))
    index = dump_frames(res, run.out)
    run.files += [e["file"] for e in index]
    run.write("frames.json", _json(index))
    summary = {"termination": res.termination.value, "t_final": res.final.t}
    if a.kind is FlowKind.HYPERBOLIC_CIRCLE and res.final.curve.closed:
        r_num = fitted_circle_radius(res.final.curve)
        summary.update(radius=r_num, exact=flow.radius(res.final.t), error=abs(r_num - flow.radius(res.final.t)))
    run.summary = summary
    print(_json(summary), end="")
    return EXIT_OK


def cmd_verify(run: Run) -> int:
    a = run.args
    checks = {}
    trace = integrate_orbit(a.y0, math.pi / 2)
    para = soliton_curve(trace, a.mesh)
    checks["parabolic_residual"] = (soliton_residual(para.curve, PARABOLIC), a.residual_tol)
    ctrace = integrate_conformal(a.y0, 0.0)
    conf = conformal_curve(ctrace, a.mesh)
    checks["conformal_residual"] = (conformal_residual(conf), a.residual_tol)
    checks["conformal_mirror"] = (mirror_deviation(ctrace), 1e-6)
    coarse = soliton_curve(trace, 1e-3)
    dev = verify_soliton_translation(coarse.curve, "Parabolic", a.t, a.dt, spacing=5e-3).deviation
    checks["parabolic_translation"] = (dev, a.deviation_tol)
    failed = False
    for name, (value, tol) in checks.items():
        ok = value < tol
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.3e} (tol {tol:.1e})")
    run.summary = {k: {"value": v, "tol": t, "pass": v < t} for k, (v, t) in checks.items()}
    run.write("verify.json", _json(run.summary))
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {
    "exact-flow": cmd_exact_flow,
    "parabolic": cmd_parabolic,
    "conformal": cmd_conformal,
    "threshold": cmd_threshold,
    "portrait": cmd_portrait,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = _resolve_output(args)
    run = Run(args, out)
    try:
        status = COMMANDS[args.command](run)
    except (UsageError, ValueError) as exc:
        print(f"hypflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ThresholdSearchError, HypflowError) as exc:
        print(f"hypflow: {exc}", file=sys.stderr)
        status = EXIT_VERIFY
    run.manifest(status)
    return status


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: gen, run, analyze, blowup.

Exit codes: 0 clean stop, 2 usage or config error, 3 singularity-proxy stop
(quality floor or curvature ceiling), 4 divergence.
"""

import os
import sys

# Honor SDFLOW_THREADS before any numerics library spins up its pools.
_threads = os.environ.get("SDFLOW_THREADS", "").strip()
if _threads.isdigit() and int(_threads) > 0:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(_var, _threads)

import argparse
import json

from . import blowup as blowup_mod
from . import flow, monitors, runio
from .generators import make_dumbbell, make_ellipsoid, make_icosphere, make_perturbed_sphere
from .mesh import MeshError, save_off, validate
from .monitors import AREA, AREA_RATE, TRACEFREE_L2, TRACEFREE_RATE, WILLMORE

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SINGULARITY = 3
EXIT_DIVERGED = 4


def _fail(message: str) -> int:
    print(f"sdflow: error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _parse_mode(text: str):
    bits = text.split(",")
    if len(bits) != 3:
        raise ValueError(f"mode must be l,m,amp, got {text!r}")
    return int(bits[0]), int(bits[1]), float(bits[2])


def cmd_gen(args) -> int:
    try:
        if args.generator == "icosphere":
            mesh = make_icosphere(args.radius, args.subdiv)
        elif args.generator == "perturbed_sphere":
            modes = [_parse_mode(m) for m in args.mode]
            mesh = make_perturbed_sphere(
                args.radius, modes, seed=args.seed, subdivisions=args.subdiv
            )
        elif args.generator == "ellipsoid":
            mesh = make_ellipsoid(args.rx, args.ry, args.rz, args.subdiv)
        elif args.generator == "dumbbell":
            mesh = make_dumbbell(
                args.bulb, args.neck, args.len, n_phi=args.n_phi, n_rings=args.n_rings
            )
        else:
            return _fail(f"unknown generator {args.generator!r}")
        save_off(mesh, args.output)
    except (ValueError, MeshError) as exc:
        return _fail(str(exc))
    report = validate(mesh)
    print(f"{args.output}: V={mesh.num_vertices} F={mesh.num_faces} {report.summary()}")
    return EXIT_OK


def _summarize(cfg: runio.RunConfig, trajectory: flow.Trajectory) -> str:
    recs = trajectory.records
    first, last = recs[0], recs[-1]
    lines = [
        f"stop_reason: {trajectory.stop_reason}",
        f"steps: {last.step}",
        f"t_final: {last.t:.17g}",
        f"area_initial: {first.area:.17g}",
        f"area_final: {last.area:.17g}",
        f"area_drift_rel: {(last.area - first.area) / first.area:.6e}",
        f"volume_drift_rel: {(last.volume - first.volume) / first.volume:.6e}",
        f"tracefree_initial: {first.tracefree_l2:.17g}",
        f"tracefree_final: {last.tracefree_l2:.17g}",
        f"sphericity_final: {last.sphericity:.17g}",
        f"li_yau_ok_all: {all(r.li_yau_ok for r in recs)}",
        f"smallness_ok_all: {all(r.smallness_ok for r in recs)}",
    ]
    if len(recs) >= 2:
        for quantity in (AREA, TRACEFREE_L2, WILLMORE):
            audit = monitors.audit_monotone(recs, quantity)
            lines.append(
                f"audit_{quantity}: {'pass' if audit.passed else 'fail'}"
                f" violations={len(audit.violations)}"
            )
    try:
        fit = monitors.fit_decay(recs)
        lines.append(
            f"decay_fit: lambda={fit.lambda_fit:.17g} r_squared={fit.r_squared:.6f}"
            f" samples={fit.samples} window=[{fit.t0:.6g},{fit.t1:.6g}]"
        )
    except ValueError as exc:
        lines.append(f"decay_fit: unavailable ({exc})")
    if trajectory.stop_reason in flow.SINGULARITY_STOPS and cfg.radii:
        events = blowup_mod.detect(trajectory, sorted(cfg.radii, reverse=True), cfg.eps1)
        for ev in events:
            if ev.triggered:
                lines.append(
                    f"concentration_event: r={ev.r:g} t_j={ev.t:.6g}"
                    f" x_j=({ev.center[0]:.4g},{ev.center[1]:.4g},{ev.center[2]:.4g})"
                    f" eta={ev.eta_at_t:.6g}"
                )
            else:
                lines.append(f"concentration_event: r={ev.r:g} untriggered")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    try:
        cfg = runio.load_config(args.config)
    except (OSError, runio.ConfigError) as exc:
        return _fail(f"bad config: {exc}")
    out_dir = args.out or cfg.out_dir
    try:
        mesh = cfg.build_initial()
        solver_cfg = cfg.solver_config()
    except (ValueError, MeshError, runio.ConfigError) as exc:
        return _fail(str(exc))
    trajectory = flow.run(mesh, solver_cfg)
    summary = _summarize(cfg, trajectory)
    runio.write_run_dir(out_dir, cfg, trajectory, summary)
    print(summary, end="")
    if trajectory.stop_reason == flow.DIVERGED:
        return EXIT_DIVERGED
    if trajectory.stop_reason in flow.SINGULARITY_STOPS:
        return EXIT_SINGULARITY
    return EXIT_OK


def _fit_window(text: str):
    if text == "auto":
        return None
    bits = text.split(":")
    if len(bits) != 2:
        raise ValueError("fit window must be 'auto' or 't0:t1'")
    return float(bits[0]), float(bits[1])


def cmd_analyze(args) -> int:
    try:
        window = _fit_window(args.fit_window)
    except ValueError as exc:
        return _fail(str(exc))
    try:
        _, trajectory = runio.load_run_dir(args.run_dir)
    except (OSError, runio.ConfigError, MeshError) as exc:
        return _fail(str(exc))
    recs = trajectory.records
    out = {"records": len(recs), "stop_reason": trajectory.stop_reason}
    audits = {}
    for quantity in (AREA, TRACEFREE_L2, WILLMORE):
        audit = monitors.audit_monotone(recs, quantity)
        entry = {
            "passed": audit.passed,
            "violations": len(audit.violations),
            "max_violation": audit.max_violation,
        }
        if audit.violations:
            entry["first_violating_step"] = audit.violations[0][0]
        audits[quantity] = entry
    out["monotonicity"] = audits
    dissipation = {}
    for which in (AREA_RATE, TRACEFREE_RATE):
        try:
            rep = monitors.audit_dissipation(recs[10:], which)
            dissipation[which] = {
                "passed": rep.passed,
                "median_rel_error": rep.median_rel_error,
                "violations": rep.violations,
                "best_constant": rep.best_constant,
                "samples": rep.samples,
            }
        except ValueError as exc:
            dissipation[which] = {"unavailable": str(exc)}
    out["dissipation"] = dissipation
    try:
        fit = monitors.fit_decay(recs, window=window)
        out["decay_fit"] = {
            "lambda": fit.lambda_fit,
            "r_squared": fit.r_squared,
            "samples": fit.samples,
            "t0": fit.t0,
            "t1": fit.t1,
        }
    except ValueError as exc:
        out["decay_fit"] = {"unavailable": str(exc)}
    if args.json:
        print(json.dumps(out, indent=2, default=float))
    else:
        print(f"records: {out['records']}  stop_reason: {out['stop_reason']}")
        for quantity, entry in audits.items():
            status = "pass" if entry.get("passed") else "FAIL"
            extra = (
                f" first_violation_step={entry['first_violating_step']}"
                if "first_violating_step" in entry
                else ""
            )
            print(f"monotone[{quantity}]: {status} violations={entry['violations']}{extra}")
        for which, entry in dissipation.items():
            if "unavailable" in entry:
                print(f"dissipation[{which}]: unavailable ({entry['unavailable']})")
            elif which == AREA_RATE:
                print(
                    f"dissipation[{which}]: {'pass' if entry['passed'] else 'FAIL'}"
                    f" median_rel_error={entry['median_rel_error']:.4g}"
                )
            else:
                print(
                    f"dissipation[{which}]: {'pass' if entry['passed'] else 'FAIL'}"
                    f" violations={entry['violations']}"
                    f" best_constant={entry['best_constant']:.4g}"
                )
        fitent = out["decay_fit"]
        if "unavailable" in fitent:
            print(f"decay_fit: unavailable ({fitent['unavailable']})")
        else:
            print(
                f"decay_fit: lambda={fitent['lambda']:.6g} r_squared={fitent['r_squared']:.4f}"
                f" samples={fitent['samples']}"
            )
    return EXIT_OK


def cmd_blowup(args) -> int:
    try:
        cfg, trajectory = runio.load_run_dir(args.run_dir)
    except (OSError, runio.ConfigError, MeshError) as exc:
        return _fail(str(exc))
    if args.radii:
        radii = sorted((float(tok) for tok in args.radii.split(",")), reverse=True)
    elif cfg is not None and cfg.radii:
        radii = sorted(cfg.radii, reverse=True)
    else:
        return _fail("no radii given and none recorded in the run config")
    eps1 = args.eps1 if args.eps1 is not None else (cfg.eps1 if cfg else None)
    if eps1 is None:
        return _fail("no eps1 given and none recorded in the run config")
    try:
        events = blowup_mod.detect(trajectory, radii, eps1)
    except ValueError as exc:
        return _fail(str(exc))
    triggered = [ev for ev in events if ev.triggered]
    print(f"radius    t_j         eta          center")
    for ev in events:
        if ev.triggered:
            print(
                f"{ev.r:<9g} {ev.t:<11.5g} {ev.eta_at_t:<12.6g}"
                f" ({ev.center[0]:.4g}, {ev.center[1]:.4g}, {ev.center[2]:.4g})"
            )
        else:
            print(f"{ev.r:<9g} untriggered")
    if not triggered:
        print("no concentration detected")
        return EXIT_OK
    for i, ev in enumerate(triggered):
        frame = blowup_mod.rescale_frame(trajectory, ev)
        base = os.path.join(args.run_dir, f"frame_{i:02d}")
        save_off(frame.mesh, base + ".off")
        with open(base + ".meta", "w", encoding="utf-8") as fh:
            fh.write(blowup_mod.frame_metadata_text(frame))
        print(
            f"frame_{i:02d}: r={ev.r:g} unit_ball_curvature={frame.unit_ball_curvature:.6g}"
            f" residual_normalized={frame.residual_normalized:.6g}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdflow",
        description="Surface diffusion flow laboratory on closed triangle meshes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an initial mesh and write OFF")
    gen_sub = gen.add_subparsers(dest="generator", required=True)
    g_ico = gen_sub.add_parser("icosphere")
    g_ico.add_argument("--radius", type=float, default=1.0)
    g_ico.add_argument("--subdiv", type=int, default=4)
    g_pert = gen_sub.add_parser("perturbed_sphere")
    g_pert.add_argument("--radius", type=float, default=1.0)
    g_pert.add_argument("--subdiv", type=int, default=4)
    g_pert.add_argument(
        "--mode", action="append", default=[], metavar="l,m,amp",
        help="spherical harmonic mode, repeatable",
    )
    g_pert.add_argument("--seed", type=int, default=None)
    g_ell = gen_sub.add_parser("ellipsoid")
    g_ell.add_argument("--rx", type=float, default=1.0)
    g_ell.add_argument("--ry", type=float, default=1.0)
    g_ell.add_argument("--rz", type=float, default=1.0)
    g_ell.add_argument("--subdiv", type=int, default=4)
    g_dumb = gen_sub.add_parser("dumbbell")
    g_dumb.add_argument("--bulb", type=float, default=1.0)
    g_dumb.add_argument("--neck", type=float, default=0.15)
    g_dumb.add_argument("--len", type=float, default=2.0)
    g_dumb.add_argument("--n-phi", type=int, default=48)
    g_dumb.add_argument("--n-rings", type=int, default=96)
    for sp in (g_ico, g_pert, g_ell, g_dumb):
        sp.add_argument("-o", "--output", required=True)

    runp = sub.add_parser("run", help="run a flow from a config file")
    runp.add_argument("config")
    runp.add_argument("--out", default=None, help="override output.dir")

    ana = sub.add_parser("analyze", help="audits and decay fits for a run directory")
    ana.add_argument("run_dir")
    ana.add_argument("--json", action="store_true")
    ana.add_argument("--fit-window", default="auto", metavar="auto|t0:t1")

    blw = sub.add_parser("blowup", help="detect concentration and write frames")
    blw.add_argument("run_dir")
    blw.add_argument("--eps1", type=float, default=None)
    blw.add_argument("--radii", default=None, metavar="r1,r2,...")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "gen": cmd_gen,
        "run": cmd_run,
        "analyze": cmd_analyze,
        "blowup": cmd_blowup,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())

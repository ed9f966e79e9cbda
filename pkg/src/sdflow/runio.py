"""Run configuration text format, diagnostics CSV, and run-directory layout.

A run config is flat `key = value` text with section prefixes (initial.,
solver., monitor., output.).  It round-trips losslessly and unknown keys
are rejected.  A run directory holds config.cfg, diagnostics.csv,
snapshots step_%08d.off, and summary.txt.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass

from . import flow
from .flow import SolverConfig, Trajectory
from .generators import (
    make_dumbbell,
    make_ellipsoid,
    make_icosphere,
    make_perturbed_sphere,
)
from .mesh import TriangleMesh, load_mesh_path, save_off
from .monitors import DiagnosticsRecord

SNAPSHOT_PATTERN = "step_%08d.off"
CSV_NAME = "diagnostics.csv"
CONFIG_NAME = "config.cfg"
SUMMARY_NAME = "summary.txt"

CSV_FIXED_COLUMNS = (
    "step",
    "t",
    "area",
    "volume",
    "willmore",
    "tracefree_l2",
    "gradH_l2",
    "lapH_l2",
    "max_abs_A",
    "h_min",
    "quality",
    "sphericity",
    "li_yau_ok",
    "smallness_ok",
)

GENERATORS = ("icosphere", "perturbed_sphere", "ellipsoid", "dumbbell", "mesh")


class ConfigError(Exception):
    """Malformed, unknown, or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    # initial data
    kind: str = "icosphere"
    radius: float = 1.0
    subdiv: int = 4
    modes: tuple = ()  # ((l, m, amp), ...)
    seed: int | None = None
    rx: float = 1.0
    ry: float = 1.0
    rz: float = 1.0
    bulb_radius: float = 1.0
    neck_radius: float = 0.15
    neck_length: float = 2.0
    n_phi: int = 48
    n_rings: int = 96
    mesh_path: str = ""
    # solver
    scheme: str = flow.SEMI_IMPLICIT
    dt_policy: str = flow.CFL
    dt: float = 1e-4
    cfl_sigma: float = 0.1
    t_end: float = 1.0
    max_steps: int = 1000000
    volume_correction: bool = False
    linear_tol: float = 1e-10
    linear_max_iter: int = 0
    snapshot_every: int = 100
    stop_sphericity: float = 1.0
    quality_floor: float = 0.02
    curvature_ceiling: float = 2.0
    # monitors
    radii: tuple = ()
    eps0: float = 8.0 * math.pi
    eps1: float = 8.0 * math.pi / 100.0
    # output
    out_dir: str = "run_out"

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            scheme=self.scheme,
            dt_policy=self.dt_policy,
            dt=self.dt,
            cfl_sigma=self.cfl_sigma,
            t_end=self.t_end,
            max_steps=self.max_steps,
            volume_correction=self.volume_correction,
            linear_tol=self.linear_tol,
            linear_max_iter=self.linear_max_iter,
            snapshot_every=self.snapshot_every,
            monitor_radii=self.radii,
            eps0=self.eps0,
            stop_sphericity=self.stop_sphericity,
            quality_floor=self.quality_floor,
            curvature_ceiling=self.curvature_ceiling,
        )

    def build_initial(self) -> TriangleMesh:
        if self.kind == "icosphere":
            return make_icosphere(self.radius, self.subdiv)
        if self.kind == "perturbed_sphere":
            return make_perturbed_sphere(
                self.radius, self.modes, seed=self.seed, subdivisions=self.subdiv
            )
        if self.kind == "ellipsoid":
            return make_ellipsoid(self.rx, self.ry, self.rz, self.subdiv)
        if self.kind == "dumbbell":
            return make_dumbbell(
                self.bulb_radius,
                self.neck_radius,
                self.neck_length,
                n_phi=self.n_phi,
                n_rings=self.n_rings,
            )
        if self.kind == "mesh":
            if not self.mesh_path:
                raise ConfigError("initial.kind = mesh requires initial.path")
            return load_mesh_path(self.mesh_path)
        raise ConfigError(f"unknown generator: {self.kind}")


def _fmt_modes(modes) -> str:
    return ";".join(f"{int(l)},{int(m)},{amp!r}" for (l, m, amp) in modes)


def _parse_modes(text: str):
    text = text.strip()
    if not text:
        return ()
    out = []
    for part in text.split(";"):
        bits = part.split(",")
        if len(bits) != 3:
            raise ConfigError(f"malformed mode triple: {part!r}")
        out.append((int(bits[0]), int(bits[1]), float(bits[2])))
    return tuple(out)


def _fmt_radii(radii) -> str:
    return ",".join(repr(float(r)) for r in radii)


def _parse_radii(text: str):
    text = text.strip()
    if not text:
        return ()
    return tuple(float(tok) for tok in text.split(","))


def _parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ConfigError(f"expected true/false, got {text!r}")


def _parse_seed(text: str):
    return None if text == "none" else int(text)


# key -> (attribute, to_text, from_text)
_KEY_TABLE = {
    "initial.kind": ("kind", str, str),
    "initial.radius": ("radius", repr, float),
    "initial.subdiv": ("subdiv", str, int),
    "initial.modes": ("modes", _fmt_modes, _parse_modes),
    "initial.seed": ("seed", lambda s: "none" if s is None else str(s), _parse_seed),
    "initial.rx": ("rx", repr, float),
    "initial.ry": ("ry", repr, float),
    "initial.rz": ("rz", repr, float),
    "initial.bulb_radius": ("bulb_radius", repr, float),
    "initial.neck_radius": ("neck_radius", repr, float),
    "initial.neck_length": ("neck_length", repr, float),
    "initial.n_phi": ("n_phi", str, int),
    "initial.n_rings": ("n_rings", str, int),
    "initial.path": ("mesh_path", str, str),
    "solver.scheme": ("scheme", str, str),
    "solver.dt_policy": ("dt_policy", str, str),
    "solver.dt": ("dt", repr, float),
    "solver.cfl_sigma": ("cfl_sigma", repr, float),
    "solver.t_end": ("t_end", repr, float),
    "solver.max_steps": ("max_steps", str, int),
    "solver.volume_correction": (
        "volume_correction",
        lambda b: "true" if b else "false",
        _parse_bool,
    ),
    "solver.linear_tol": ("linear_tol", repr, float),
    "solver.linear_max_iter": ("linear_max_iter", str, int),
    "solver.snapshot_every": ("snapshot_every", str, int),
    "solver.stop_sphericity": ("stop_sphericity", repr, float),
    "solver.quality_floor": ("quality_floor", repr, float),
    "solver.curvature_ceiling": ("curvature_ceiling", repr, float),
    "monitor.radii": ("radii", _fmt_radii, _parse_radii),
    "monitor.eps0": ("eps0", repr, float),
    "monitor.eps1": ("eps1", repr, float),
    "output.dir": ("out_dir", str, str),
}


def config_to_text(cfg: RunConfig) -> str:
    lines = []
    for key, (attr, to_text, _) in _KEY_TABLE.items():
        lines.append(f"{key} = {to_text(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _KEY_TABLE:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, _, from_text = _KEY_TABLE[key]
        if attr in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[attr] = from_text(val)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    cfg = RunConfig(**values)
    if cfg.kind not in GENERATORS:
        raise ConfigError(f"unknown generator: {cfg.kind}")
    return cfg


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# diagnostics CSV (schema frozen; 17 significant digits, flags as 0/1)
# ---------------------------------------------------------------------------


def csv_header(n_radii: int) -> str:
    extra = [f"eta_r{i+1}" for i in range(n_radii)]
    return ",".join(CSV_FIXED_COLUMNS + tuple(extra))


def record_to_csv_row(rec: DiagnosticsRecord) -> str:
    vals = [
        str(rec.step),
        f"{rec.t:.17g}",
        f"{rec.area:.17g}",
        f"{rec.volume:.17g}",
        f"{rec.willmore:.17g}",
        f"{rec.tracefree_l2:.17g}",
        f"{rec.gradH_l2:.17g}",
        f"{rec.lapH_l2:.17g}",
        f"{rec.max_abs_A:.17g}",
        f"{rec.h_min:.17g}",
        f"{rec.quality:.17g}",
        f"{rec.sphericity:.17g}",
        "1" if rec.li_yau_ok else "0",
        "1" if rec.smallness_ok else "0",
    ]
    vals.extend(f"{val:.17g}" for (_, val) in rec.eta)
    return ",".join(vals)


def write_diagnostics_csv(records, path) -> None:
    n_radii = len(records[0].eta) if records else 0
    lines = [csv_header(n_radii)]
    lines.extend(record_to_csv_row(rec) for rec in records)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_diagnostics_csv(path, radii=()) -> list:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ConfigError("empty diagnostics CSV")
    header = lines[0].split(",")
    if tuple(header[: len(CSV_FIXED_COLUMNS)]) != CSV_FIXED_COLUMNS:
        raise ConfigError("diagnostics CSV header does not match the frozen schema")
    n_eta = len(header) - len(CSV_FIXED_COLUMNS)
    if n_eta and len(radii) != n_eta:
        raise ConfigError(
            f"CSV has {n_eta} eta columns but {len(radii)} monitor radii are known"
        )
    records = []
    for ln in lines[1:]:
        toks = ln.split(",")
        if len(toks) != len(header):
            raise ConfigError("malformed diagnostics CSV row")
        base = len(CSV_FIXED_COLUMNS)
        eta = tuple(
            (float(radii[i]), float(toks[base + i])) for i in range(n_eta)
        )
        records.append(
            DiagnosticsRecord(
                step=int(toks[0]),
                t=float(toks[1]),
                area=float(toks[2]),
                volume=float(toks[3]),
                willmore=float(toks[4]),
                tracefree_l2=float(toks[5]),
                gradH_l2=float(toks[6]),
                lapH_l2=float(toks[7]),
                max_abs_A=float(toks[8]),
                h_min=float(toks[9]),
                quality=float(toks[10]),
                sphericity=float(toks[11]),
                li_yau_ok=toks[12] == "1",
                smallness_ok=toks[13] == "1",
                eta=eta,
                eta_centers=None,
            )
        )
    return records


# ---------------------------------------------------------------------------
# run directory
# ---------------------------------------------------------------------------


def write_run_dir(out_dir, cfg: RunConfig, trajectory: Trajectory, summary: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, CONFIG_NAME), "w", encoding="utf-8") as fh:
        fh.write(config_to_text(cfg))
    write_diagnostics_csv(trajectory.records, os.path.join(out_dir, CSV_NAME))
    for step in sorted(trajectory.snapshots):
        save_off(
            trajectory.snapshots[step], os.path.join(out_dir, SNAPSHOT_PATTERN % step)
        )
    with open(os.path.join(out_dir, SUMMARY_NAME), "w", encoding="utf-8") as fh:
        fh.write(summary)


def load_run_dir(run_dir) -> tuple:
    """Reload (config, trajectory) from a run directory; snapshot meshes are
    read back from their OFF files and records carry no eta centers."""
    cfg_path = os.path.join(run_dir, CONFIG_NAME)
    csv_path = os.path.join(run_dir, CSV_NAME)
    if not os.path.exists(csv_path):
        raise ConfigError(f"missing {CSV_NAME} in {run_dir}")
    cfg = load_config(cfg_path) if os.path.exists(cfg_path) else None
    radii = cfg.radii if cfg is not None else ()
    records = read_diagnostics_csv(csv_path, radii=radii)
    snapshots = {}
    pattern = re.compile(r"^step_(\d{8})\.off$")
    for name in os.listdir(run_dir):
        match = pattern.match(name)
        if match:
            snapshots[int(match.group(1))] = load_mesh_path(os.path.join(run_dir, name))
    stop_reason = None
    summary_path = os.path.join(run_dir, SUMMARY_NAME)
    if os.path.exists(summary_path):
        with open(summary_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("stop_reason:"):
                    stop_reason = line.split(":", 1)[1].strip()
                    break
    trajectory = Trajectory(
        records=records,
        snapshots=snapshots,
        stop_reason=stop_reason,
        config=cfg.solver_config() if cfg is not None else None,
    )
    return cfg, trajectory
